use proptest::prelude::*;
use ratchet_core::engine::{kirchhoff_mismatch, trap_populations};
use ratchet_core::experiments::DisorderConfig;
use ratchet_core::model::{build_ring_hamiltonian, number_operator};
use ratchet_core::spectral::{analytic_spectrum, numeric_diagonalize};
use ratchet_core::{CellSpec, Diagnostics, Photocell, RingSpec, ScenarioKind};

fn scenario() -> impl Strategy<Value = ScenarioKind> {
    prop::sample::select(ScenarioKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_and_numeric_spectra_agree(n in 2usize..=7, w in 0.5f64..3.0, s in -0.2f64..0.2) {
        let mut analytic: Vec<f64> = analytic_spectrum(n, w, s).unwrap().into_iter().map(|(_, e)| e).collect();
        let ring = RingSpec::uniform(n, w, s).unwrap();
        let es = numeric_diagonalize(&build_ring_hamiltonian(&ring).unwrap(), &number_operator(n).unwrap()).unwrap();
        let mut numeric = es.energies().to_vec();
        analytic.sort_by(f64::total_cmp);
        numeric.sort_by(f64::total_cmp);
        prop_assert_eq!(analytic.len(), numeric.len());
        for (a, b) in analytic.iter().zip(&numeric) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn trapped_steady_states_are_physical(
        scenario in scenario(),
        log_gt in -10.0f64..-3.0,
        log_gx in -9.0f64..-4.0,
        t_o in 1000.0f64..8000.0,
        t_p in 50.0f64..2000.0,
        s in 0.005f64..0.1,
    ) {
        let mut spec = CellSpec {
            scenario,
            ring: RingSpec::with_hopping(4, s).unwrap(),
            ..Default::default()
        };
        spec.trap.gamma_x = 10f64.powf(log_gx);
        spec.bath.t_o = t_o;
        spec.bath.t_p = t_p;
        let gamma_t = 10f64.powf(log_gt);
        let cell = Photocell::assemble(&spec).unwrap();
        let p = cell.solve(gamma_t, Diagnostics::Fast).unwrap();
        let st = &p.steady;
        prop_assert!(st.trace_error < 1e-10);
        prop_assert!(st.hermiticity < 1e-10);
        prop_assert!(st.min_eigenvalue > -1e-8);
        prop_assert!(st.residual < 1e-10 * spec.bath.gamma_o);
        let (a, b) = trap_populations(cell.liouvillian(), st).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-10);
        prop_assert!(kirchhoff_mismatch(cell.liouvillian(), st, gamma_t) < 1e-8);
        prop_assert!(p.metrics.current >= 0.0);
    }

    #[test]
    fn disorder_realizations_depend_only_on_seed_and_index(seed in any::<u64>(), sigma in 0.0f64..0.05, r in 0usize..500) {
        let cfg = DisorderConfig { sigma, n_realizations: 1, rng_seed: seed, center: None };
        let once = cfg.site_energies(6, 0.02, r).unwrap();
        let _ = cfg.site_energies(6, 0.02, r + 1).unwrap();
        prop_assert_eq!(once, cfg.site_energies(6, 0.02, r).unwrap());
    }
}
