//! Browser bindings: each entry point takes plain numbers and returns JSON.

use ratchet_core::engine::{exciton_number, logspace};
use ratchet_core::experiments::pv_curve;
use ratchet_core::model::{build_collective_dipole, build_ring_hamiltonian, number_operator, Direction};
use ratchet_core::spectral::{classify_states, numeric_diagonalize};
use ratchet_core::{assemble_liouvillian, steady_state, CellSpec, Diagnostics, RingSpec, ScenarioKind};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest ring the page will diagonalize.
pub const MAX_DEMO_SITES: usize = 8;

#[derive(Serialize)]
struct Level {
    band: usize,
    energy: f64,
    gamma_plus: f64,
    gamma_minus: f64,
    label: &'static str,
}

#[derive(Serialize)]
struct LoadPoint {
    gamma_t: f64,
    current: f64,
    voltage: f64,
    power: f64,
}

#[derive(Serialize)]
struct ThermalPoint {
    t_p: f64,
    excitons: f64,
}

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn scenario(name: &str) -> Result<ScenarioKind, JsError> {
    name.parse().map_err(fail)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(fail)
}

/// band, energy, Γ+, Γ−, label
pub type LevelRow = (usize, f64, f64, f64, &'static str);

pub fn spectrum_levels(n_sites: usize, hopping: f64) -> ratchet_core::Result<Vec<LevelRow>> {
    if n_sites > MAX_DEMO_SITES {
        return Err(ratchet_core::Error::TooManySites {
            sites: n_sites,
            max: MAX_DEMO_SITES,
            what: "browser demo",
        });
    }
    let ring = RingSpec::with_hopping(n_sites, hopping)?;
    let es = numeric_diagonalize(&build_ring_hamiltonian(&ring)?, &number_operator(n_sites)?)?;
    let c = classify_states(&es, &build_collective_dipole(&ring, Direction::Raise)?)?;
    Ok((0..es.dim())
        .map(|i| {
            (
                es.band(i),
                es.energies()[i],
                c.table.gamma_plus()[i],
                c.table.gamma_minus()[i],
                c.labels[i].as_str(),
            )
        })
        .collect())
}

/// Ring eigenstates with their optical weights and labels.
#[wasm_bindgen]
pub fn spectrum(n_sites: usize, hopping: f64) -> Result<String, JsError> {
    let levels: Vec<Level> = spectrum_levels(n_sites, hopping)
        .map_err(fail)?
        .into_iter()
        .map(|(band, energy, gamma_plus, gamma_minus, label)| Level {
            band,
            energy,
            gamma_plus,
            gamma_minus,
            label,
        })
        .collect();
    to_json(&levels)
}

/// Load curve of the default four-site cell over `points` trap rates in [1e-12, 1e-2] eV.
#[wasm_bindgen]
pub fn load_curve(scenario_name: &str, hopping: f64, gamma_x: f64, points: usize) -> Result<String, JsError> {
    let mut spec = CellSpec {
        scenario: scenario(scenario_name)?,
        ring: RingSpec::with_hopping(4, hopping).map_err(fail)?,
        ..Default::default()
    };
    spec.trap.gamma_x = gamma_x;
    let curve = pv_curve(&spec, &logspace(1e-12, 1e-2, points.clamp(2, 200))).map_err(fail)?;
    let out: Vec<LoadPoint> = curve
        .points
        .iter()
        .map(|p| LoadPoint {
            gamma_t: p.metrics.gamma_t,
            current: p.metrics.current,
            voltage: p.metrics.voltage,
            power: p.metrics.power,
        })
        .collect();
    to_json(&out)
}

pub fn exciton_numbers(scenario: ScenarioKind, t_o: f64, t_p: &[f64]) -> ratchet_core::Result<Vec<f64>> {
    let mut spec = CellSpec {
        scenario,
        ..Default::default()
    };
    spec.trap.gamma_t = 0.0;
    spec.trap.gamma_x = 0.0;
    spec.bath.t_o = t_o;
    t_p.iter()
        .map(|&t| {
            spec.bath.t_p = t;
            let l = assemble_liouvillian(&spec)?;
            exciton_number(&l, &steady_state(&l, Diagnostics::Fast)?)
        })
        .collect()
}

/// Steady-state exciton number of the untrapped ring over phonon temperatures in [50, 1e5] K.
#[wasm_bindgen]
pub fn excitons_vs_phonon_temperature(scenario_name: &str, t_o: f64, points: usize) -> Result<String, JsError> {
    let t_p = logspace(50.0, 1e5, points.clamp(2, 100));
    let n = exciton_numbers(scenario(scenario_name)?, t_o, &t_p).map_err(fail)?;
    let out: Vec<ThermalPoint> = t_p.into_iter().zip(n).map(|(t_p, excitons)| ThermalPoint { t_p, excitons }).collect();
    to_json(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ring_has_three_ratchets() {
        let levels = spectrum_levels(4, 0.02).unwrap();
        assert_eq!(levels.len(), 16);
        assert_eq!(levels.iter().filter(|l| l.4 == "ratchet").count(), 3);
    }

    #[test]
    fn oversized_ring_is_refused() {
        assert!(spectrum_levels(MAX_DEMO_SITES + 1, 0.02).is_err());
    }

    #[test]
    fn no_phonon_count_ignores_phonon_temperature() {
        let n = exciton_numbers(ScenarioKind::NoPhonons, 5800.0, &[50.0, 300.0, 1e4]).unwrap();
        assert!(n.iter().all(|x| (x - n[0]).abs() < 1e-9));
        let r = exciton_numbers(ScenarioKind::Ratchets, 5800.0, &[50.0, 1e4]).unwrap();
        assert!(r[0] > r[1]);
    }
}
