//! One function per subcommand; each returns tables, plots and a summary.

use ratchet_core::engine::{exciton_number, kirchhoff_mismatch, trap_populations};
use ratchet_core::experiments::{
    disorder_ensemble, eea_structural_analysis, imperfection_sweep, power_surface, pv_curve, relative_enhancement,
    temperature_map, CellRecord, PvCurve, SurfaceConfig, SweepGrid, TempMapConfig,
};
use ratchet_core::model::{build_collective_dipole, build_ring_hamiltonian, number_operator, Direction};
use ratchet_core::spectral::{classify_states, numeric_diagonalize};
use ratchet_core::{assemble_liouvillian, steady_state, Diagnostics, Photocell, ScenarioKind};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{join_flags, num, opt, Artifacts, Table};
use crate::plot::{chart, heatmap, Chart, Scale, Series};
use crate::Failure;

pub fn spectrum(config: &RunConfig, plot: bool) -> Result<Artifacts, Failure> {
    let ring = config.ring_spec();
    let h = build_ring_hamiltonian(&ring)?;
    let es = numeric_diagonalize(&h, &number_operator(ring.n_sites())?)?;
    let c = classify_states(&es, &build_collective_dipole(&ring, Direction::Raise)?)?;
    let mut t = Table::new("spectrum", &["state", "band", "energy_eV", "gamma_plus", "gamma_minus", "label"]);
    for i in 0..es.dim() {
        t.push(vec![
            i.to_string(),
            es.band(i).to_string(),
            num(es.energies()[i]),
            num(c.table.gamma_plus()[i]),
            num(c.table.gamma_minus()[i]),
            c.labels[i].as_str().to_string(),
        ]);
    }
    let mut art = Artifacts::new("spectrum");
    let ratchets = c.ratchets();
    art.summary = json!({
        "states": es.dim(),
        "ratchets": ratchets.len(),
        "ratchet_energies_eV": ratchets.iter().map(|&i| es.energies()[i]).collect::<Vec<_>>(),
    });
    if plot {
        let mut series: Vec<Series> = Vec::new();
        for (i, label) in c.labels.iter().enumerate() {
            let name = label.as_str().to_string();
            let point = (es.band(i) as f64, es.energies()[i]);
            match series.iter_mut().find(|s| s.label == name) {
                Some(s) => s.points.push(point),
                None => series.push(Series {
                    label: name,
                    points: vec![point],
                    markers: true,
                }),
            }
        }
        art.plots.push((
            "spectrum".into(),
            chart(&Chart {
                title: format!("{}-site ring spectrum", ring.n_sites()),
                x_label: "excitation number".into(),
                y_label: "energy (eV)".into(),
                x_scale: Scale::Linear,
                y_scale: Scale::Linear,
                series,
            }),
        ));
    }
    art.tables.push(t);
    Ok(art)
}

pub fn steadystate(config: &RunConfig) -> Result<Artifacts, Failure> {
    let spec = config.cell_spec();
    let (l, s, kirchhoff, metrics) = if spec.has_trap() {
        let cell = Photocell::assemble(&spec)?;
        let p = cell.solve(spec.trap.gamma_t, Diagnostics::Full)?;
        (cell.liouvillian().clone(), p.steady, Some(p.kirchhoff), Some(p.metrics))
    } else {
        let l = assemble_liouvillian(&spec)?;
        let s = steady_state(&l, Diagnostics::Full)?;
        (l, s, None, None)
    };
    let ctx = l.context().ok_or_else(|| Failure::Solver("assembled Liouvillian has no ring context".into()))?;
    let mut pops = Table::new("steadystate", &["state", "band", "trap", "energy_eV", "population"]);
    for i in 0..ctx.dim() {
        pops.push(vec![
            i.to_string(),
            ctx.band_of(i).to_string(),
            ctx.trap_of(i).to_string(),
            num(ctx.energies()[i]),
            num(s.population(i)),
        ]);
    }
    let flags: Vec<String> = s.flags.iter().map(|f| f.as_str().to_string()).collect();
    let mut summary = Table::new("steadystate_summary", &["quantity", "value"]);
    let mut row = |k: &str, v: String| summary.push(vec![k.to_string(), v]);
    row("exciton_number", num(exciton_number(&l, &s)?));
    if let Some(m) = metrics {
        let (a, b) = trap_populations(&l, &s)?;
        row("rho_alpha", num(a));
        row("rho_beta", num(b));
        row("omega_t_eV", num(spec.omega_t()));
        row("current_e_gamma_o", num(m.current));
        row("voltage_V", num(m.voltage));
        row("power_gamma_o_eV", num(m.power));
    }
    row("residual", num(s.residual));
    row("trace_error", num(s.trace_error));
    row("hermiticity", num(s.hermiticity));
    row("min_eigenvalue", num(s.min_eigenvalue));
    row("uniqueness_gap", opt(s.uniqueness_gap));
    row("kirchhoff", opt(kirchhoff.or_else(|| spec.has_trap().then(|| kirchhoff_mismatch(&l, &s, spec.trap.gamma_t)))));
    row("conserved", s.conserved.to_string());
    row("flags", join_flags(&flags));

    let mut art = Artifacts::new("steadystate");
    art.note_flags(|| "steady state".into(), &flags);
    art.summary = json!({
        "hilbert_dim": ctx.dim(),
        "exciton_number": exciton_number(&l, &s)?,
        "power_gamma_o_eV": metrics.map(|m| m.power),
        "flags": flags,
    });
    art.tables.push(pops);
    art.tables.push(summary);
    Ok(art)
}

const CURVE_HEADER: [&str; 9] = [
    "scenario",
    "gamma_t_eV",
    "current_e_gamma_o",
    "voltage_V",
    "power_gamma_o_eV",
    "power_limit_gamma_o_eV",
    "rho_alpha",
    "rho_beta",
    "flags",
];

fn curve_rows(t: &mut Table, art: &mut Artifacts, curve: &PvCurve, prefix: &[String]) {
    for p in &curve.points {
        let m = &p.metrics;
        let mut row = prefix.to_vec();
        row.extend([
            curve.scenario.to_string(),
            num(m.gamma_t),
            num(m.current),
            num(m.voltage),
            num(m.power),
            num(p.power_limit),
            num(m.rho_alpha),
            num(m.rho_beta),
            join_flags(&p.flags),
        ]);
        art.note_flags(|| format!("{} gamma_t={}", curve.scenario, m.gamma_t), &p.flags);
        t.push(row);
    }
}

fn power_chart(title: &str, curves: &[(String, &PvCurve)]) -> String {
    chart(&Chart {
        title: title.into(),
        x_label: "trap rate γ_t (eV)".into(),
        y_label: "power (γ_o eV)".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Linear,
        series: curves
            .iter()
            .map(|(label, c)| Series {
                label: label.clone(),
                points: c.points.iter().map(|p| (p.metrics.gamma_t, p.metrics.power)).collect(),
                markers: false,
            })
            .collect(),
    })
}

pub fn iv_curve(config: &RunConfig, plot: bool) -> Result<Artifacts, Failure> {
    let mut art = Artifacts::new("iv-curve");
    let mut t = Table::new("iv_curve", &CURVE_HEADER);
    let mut curves = Vec::new();
    for scenario in config.scenarios_or(&[config.scenario]) {
        let mut spec = config.cell_spec();
        spec.scenario = scenario;
        let curve = pv_curve(&spec, &config.experiment.gamma_t)?;
        curve_rows(&mut t, &mut art, &curve, &[]);
        curves.push(curve);
    }
    art.summary = json!(curves
        .iter()
        .map(|c| (c.scenario.to_string(), json!({ "peak_power_gamma_o_eV": c.peak_power() })))
        .collect::<serde_json::Map<_, _>>());
    if plot {
        let labelled: Vec<(String, &PvCurve)> = curves.iter().map(|c| (c.scenario.to_string(), c)).collect();
        art.plots.push(("iv_curve_power".into(), power_chart("power vs trap rate", &labelled)));
        art.plots.push((
            "iv_curve".into(),
            chart(&Chart {
                title: "current-voltage".into(),
                x_label: "voltage (V)".into(),
                y_label: "current (e γ_o)".into(),
                x_scale: Scale::Linear,
                y_scale: Scale::Linear,
                series: curves
                    .iter()
                    .map(|c| Series {
                        label: c.scenario.to_string(),
                        points: c.points.iter().map(|p| (p.metrics.voltage, p.metrics.current)).collect(),
                        markers: false,
                    })
                    .collect(),
            }),
        ));
    }
    art.tables.push(t);
    Ok(art)
}

fn grid_table(name: &str, grid: &SweepGrid, value_col: &str, art: &mut Artifacts) -> Table {
    let a0 = format!("{}_{}", grid.axes[0].name, grid.axes[0].unit);
    let a1 = format!("{}_{}", grid.axes[1].name, grid.axes[1].unit);
    let with_metrics = grid.cells.iter().any(|c| c.metrics.is_some());
    let mut header = vec!["scenario", a0.as_str(), a1.as_str(), value_col];
    if with_metrics {
        header.extend(["gamma_t_opt_eV", "current_e_gamma_o", "voltage_V"]);
    }
    header.extend(["residual", "min_eigenvalue", "flags"]);
    let mut t = Table::new(name, &header);
    for c in &grid.cells {
        let mut row = vec![c.scenario.to_string(), num(c.coords[0]), num(c.coords[1]), opt(c.value)];
        if with_metrics {
            row.extend([
                opt(c.metrics.map(|m| m.gamma_t)),
                opt(c.metrics.map(|m| m.current)),
                opt(c.metrics.map(|m| m.voltage)),
            ]);
        }
        row.extend([
            opt(c.diagnostics.map(|d| d.residual)),
            opt(c.diagnostics.map(|d| d.min_eigenvalue)),
            join_flags(&c.flags),
        ]);
        art.note_flags(|| describe(c), &c.flags);
        t.push(row);
    }
    t
}

fn describe(c: &CellRecord) -> String {
    let mut s = format!("{} cell {}", c.scenario, c.index);
    if let Some(e) = &c.error {
        s.push_str(&format!(" ({e})"));
    }
    s
}

fn grid_heatmaps(art: &mut Artifacts, grid: &SweepGrid, stem: &str, what: &str) {
    let (ys, xs) = (&grid.axes[0], &grid.axes[1]);
    for &scenario in &grid.scenarios {
        let values: Vec<Option<f64>> = (0..ys.values.len())
            .flat_map(|i| (0..xs.values.len()).map(move |j| (i, j)))
            .map(|(i, j)| grid.value(scenario, i, j))
            .collect();
        art.plots.push((
            format!("{stem}_{scenario}"),
            heatmap(
                &format!("{what} ({scenario})"),
                &format!("{} ({})", xs.name, xs.unit),
                &format!("{} ({})", ys.name, ys.unit),
                &xs.values,
                &ys.values,
                &values,
            ),
        ));
    }
}

pub fn sweep(config: &RunConfig, plot: bool) -> Result<Artifacts, Failure> {
    let surf = &config.experiment.surface;
    let sc = SurfaceConfig {
        hopping: surf.hopping.clone(),
        gamma_x: surf.gamma_x.clone(),
        scenarios: config.scenarios_or(&ScenarioKind::ALL),
        search: surf.search,
    };
    let surface = power_surface(&config.cell_spec(), &sc)?;
    let mut art = Artifacts::new("sweep");
    let t = grid_table("sweep", &surface.grid, "power_gamma_o_eV", &mut art);
    let enh = relative_enhancement(&surface);
    let mut e = Table::new("enhancement", &["hopping_eV", "gamma_x_eV", "ratio_ratchets_np", "percent_ratchets_fd"]);
    let n1 = sc.gamma_x.len();
    for k in 0..sc.hopping.len() * n1 {
        e.push(vec![
            num(sc.hopping[k / n1]),
            num(sc.gamma_x[k % n1]),
            opt(enh.ratio_np.get(k).copied().flatten()),
            opt(enh.percent_fd.get(k).copied().flatten()),
        ]);
    }
    let mut x = Table::new("crossings", &["hopping_eV", "gamma_x_eV"]);
    for c in &surface.crossings {
        x.push(vec![num(c.hopping), num(c.gamma_x)]);
    }
    art.summary = json!({
        "max_ratio_np": enh.max_ratio_np,
        "max_percent_fd": enh.max_percent_fd,
        "crossings": surface.crossings.len(),
    });
    if plot {
        grid_heatmaps(&mut art, &surface.grid, "sweep", "optimized power");
        if !enh.ratio_np.is_empty() {
            art.plots.push((
                "enhancement_np".into(),
                heatmap("ratchets / no phonons", "γ_x (eV)", "S (eV)", &sc.gamma_x, &sc.hopping, &enh.ratio_np),
            ));
        }
    }
    art.tables.extend([t, e, x]);
    Ok(art)
}

pub fn tempmap(config: &RunConfig, plot: bool) -> Result<Artifacts, Failure> {
    let mut base = config.cell_spec();
    base.trap.gamma_t = 0.0;
    base.trap.gamma_x = 0.0;
    let tc = TempMapConfig {
        t_o: config.experiment.temperature.t_o.clone(),
        t_p: config.experiment.temperature.t_p.clone(),
        scenarios: config.scenarios_or(&ScenarioKind::ALL),
    };
    let map = temperature_map(&base, &tc)?;
    let mut art = Artifacts::new("tempmap");
    let t = grid_table("tempmap", &map.grid, "exciton_number", &mut art);
    art.tables.push(t);
    if let Some(ratio) = &map.ratio {
        let mut r = Table::new("tempmap_ratio", &["t_o_K", "t_p_K", "ratio_ratchets_fd"]);
        let n1 = tc.t_p.len();
        for (k, v) in ratio.iter().enumerate() {
            r.push(vec![num(tc.t_o[k / n1]), num(tc.t_p[k % n1]), opt(*v)]);
        }
        art.tables.push(r);
        if plot {
            art.plots.push((
                "tempmap_ratio".into(),
                heatmap("exciton number, ratchets / forced dark", "T_p (K)", "T_o (K)", &tc.t_p, &tc.t_o, ratio),
            ));
        }
    }
    if plot {
        grid_heatmaps(&mut art, &map.grid, "tempmap", "exciton number");
    }
    art.summary = json!({
        "cells": map.grid.cells.len(),
        "failed": map.grid.cells.iter().filter(|c| c.value.is_none()).count(),
    });
    Ok(art)
}

pub fn disorder(config: &RunConfig, plot: bool) -> Result<Artifacts, Failure> {
    let dc = config.disorder();
    let scenarios = config.scenarios_or(&[ScenarioKind::Ratchets, ScenarioKind::NoPhonons]);
    let report = disorder_ensemble(&config.cell_spec(), &dc, &scenarios, &config.experiment.gamma_t)?;
    let mut art = Artifacts::new("disorder");
    let mut t = Table::new(
        "disorder",
        &["scenario", "gamma_t_eV", "current_e_gamma_o", "voltage_V", "power_gamma_o_eV"],
    );
    let mut conv = Table::new("disorder_convergence", &["scenario", "realizations", "peak_power_gamma_o_eV"]);
    for c in &report.curves {
        for p in &c.mean {
            t.push(vec![c.scenario.to_string(), num(p.gamma_t), num(p.current), num(p.voltage), num(p.power)]);
        }
        for k in &c.convergence {
            conv.push(vec![c.scenario.to_string(), k.size.to_string(), num(k.peak_power)]);
        }
        if c.failures > 0 {
            art.fatal.push(format!("{}: {} failed realizations", c.scenario, c.failures));
        }
    }
    art.summary = json!(report
        .curves
        .iter()
        .map(|c| (
            c.scenario.to_string(),
            json!({ "used": c.used, "failures": c.failures, "peak_power_gamma_o_eV": c.peak_power() })
        ))
        .collect::<serde_json::Map<_, _>>());
    if plot {
        let series = report
            .curves
            .iter()
            .map(|c| Series {
                label: c.scenario.to_string(),
                points: c.mean.iter().map(|p| (p.gamma_t, p.power)).collect(),
                markers: false,
            })
            .collect();
        art.plots.push((
            "disorder".into(),
            chart(&Chart {
                title: format!("ensemble power, σ = {} eV", dc.sigma),
                x_label: "trap rate γ_t (eV)".into(),
                y_label: "mean power (γ_o eV)".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Linear,
                series,
            }),
        ));
    }
    art.tables.extend([t, conv]);
    Ok(art)
}

pub fn imperfections(config: &RunConfig, plot: bool) -> Result<Artifacts, Failure> {
    let sweep = &config.experiment.imperfection;
    let scenarios = config.scenarios_or(&ScenarioKind::ALL);
    let curves = imperfection_sweep(
        &config.cell_spec(),
        sweep.kind,
        &sweep.rates,
        &scenarios,
        &config.experiment.gamma_t,
    )?;
    let mut art = Artifacts::new("imperfections");
    let mut header = vec!["rate_eV"];
    header.extend(CURVE_HEADER);
    let mut t = Table::new("imperfections", &header);
    for c in &curves {
        curve_rows(&mut t, &mut art, &c.curve, &[num(c.rate)]);
    }
    let mut peaks = Table::new("imperfections_peak", &["scenario", "rate_eV", "peak_power_gamma_o_eV"]);
    for c in &curves {
        peaks.push(vec![c.curve.scenario.to_string(), num(c.rate), num(c.curve.peak_power())]);
    }
    art.summary = json!({ "kind": sweep.kind, "curves": curves.len() });
    if plot {
        let series = scenarios
            .iter()
            .map(|&s| Series {
                label: s.to_string(),
                points: curves
                    .iter()
                    .filter(|c| c.curve.scenario == s)
                    .map(|c| (c.rate, c.curve.peak_power()))
                    .collect(),
                markers: false,
            })
            .collect();
        art.plots.push((
            "imperfections".into(),
            chart(&Chart {
                title: "peak power vs imperfection rate".into(),
                x_label: "rate (eV)".into(),
                y_label: "peak power (γ_o eV)".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Linear,
                series,
            }),
        ));
    }
    art.tables.extend([t, peaks]);
    Ok(art)
}

pub fn eea(config: &RunConfig) -> Result<Artifacts, Failure> {
    let rep = eea_structural_analysis(&config.ring_spec())?;
    let mut t = Table::new("eea", &["quantity", "value"]);
    t.push(vec!["d_character".into(), num(rep.d_character)]);
    t.push(vec!["dipole_fraction".into(), num(rep.dipole_fraction)]);
    t.push(vec!["dipole_fraction_two_level".into(), num(rep.dipole_fraction_two_level)]);
    t.push(vec!["allowed_targets".into(), rep.allowed_targets.to_string()]);
    t.push(vec!["forbidden_targets".into(), rep.forbidden_targets.to_string()]);
    t.push(vec!["flags".into(), join_flags(&rep.flags)]);
    let mut art = Artifacts::new("eea");
    art.summary = serde_json::to_value(&rep).map_err(|e| Failure::Solver(e.to_string()))?;
    art.tables.push(t);
    Ok(art)
}
