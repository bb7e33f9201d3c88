//! Parameter sweeps built on the engine: temperature maps, load curves,
//! optimized power surfaces, disorder ensembles, imperfection families and
//! the three-level annihilation analysis.
//!
//! Cells run independently (in parallel with the `parallel` feature) and are
//! always returned in cell-index order.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::{
    assemble_liouvillian, exciton_number, logspace, optimize_trap_rate, CellSpec, Diagnostics, OperatingPoint,
    Photocell, PhotocellMetrics, SteadyState, TrapSearch, steady_state,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    build_collective_dipole, build_ring_hamiltonian, build_three_level_hamiltonian, default_site_energy,
    number_operator, three_level_dipole_lower, three_level_doubly_excited_mask, three_level_number_operator,
    Direction, ExtractionMode, Operator, RingSpec, ScenarioKind,
};
use crate::spectral::DEGENERACY_TOL;

/// Name of the generator behind every seeded stream.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), stream = realization index";

/// Flag attached to cells whose hopping is zero.
pub const FLAG_DECOUPLED: &str = "decoupled-ring";
/// Flag attached to cells whose solve failed.
pub const FLAG_FAILED: &str = "failed";
/// Flag for a degenerate band-2 bottom in the annihilation analysis.
pub const FLAG_DEGENERATE: &str = "degenerate-band-2-bottom";

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    pub scale: AxisScale,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn log(name: &str, unit: &str, values: Vec<f64>) -> Self {
        Axis {
            name: name.into(),
            unit: unit.into(),
            scale: AxisScale::Log,
            values,
        }
    }
}

/// Solver health of one steady state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub residual: f64,
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub uniqueness_gap: Option<f64>,
    pub kirchhoff: Option<f64>,
    pub conserved: usize,
}

impl SolveDiagnostics {
    pub fn from_steady(s: &SteadyState, kirchhoff: Option<f64>) -> Self {
        SolveDiagnostics {
            residual: s.residual,
            trace_error: s.trace_error,
            hermiticity: s.hermiticity,
            min_eigenvalue: s.min_eigenvalue,
            uniqueness_gap: s.uniqueness_gap,
            kirchhoff,
            conserved: s.conserved,
        }
    }

    pub fn from_point(p: &OperatingPoint) -> Self {
        Self::from_steady(&p.steady, Some(p.kirchhoff))
    }
}

fn steady_flags(s: &SteadyState) -> Vec<String> {
    s.flags.iter().map(|f| f.as_str().to_string()).collect()
}

/// One grid cell. Failed cells keep their coordinates, carry no value and are
/// flagged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub index: usize,
    pub scenario: ScenarioKind,
    pub coords: Vec<f64>,
    pub value: Option<f64>,
    pub metrics: Option<PhotocellMetrics>,
    /// Worst diagnostics over every recorded solve behind the cell.
    pub diagnostics: Option<SolveDiagnostics>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl CellRecord {
    fn failed(scenario: ScenarioKind, coords: Vec<f64>, err: &Error) -> Self {
        CellRecord {
            index: 0,
            scenario,
            coords,
            value: None,
            metrics: None,
            diagnostics: None,
            flags: vec![FLAG_FAILED.into()],
            error: Some(err.to_string()),
        }
    }
}

/// Fully enumerated two-axis grid, scenario-major then row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub quantity: String,
    pub axes: Vec<Axis>,
    pub scenarios: Vec<ScenarioKind>,
    pub cells: Vec<CellRecord>,
}

impl SweepGrid {
    fn shape(&self) -> (usize, usize) {
        (self.axes[0].values.len(), self.axes[1].values.len())
    }

    pub fn cell(&self, scenario: ScenarioKind, i: usize, j: usize) -> Option<&CellRecord> {
        let s = self.scenarios.iter().position(|&k| k == scenario)?;
        let (n0, n1) = self.shape();
        if i >= n0 || j >= n1 {
            return None;
        }
        self.cells.get(s * n0 * n1 + i * n1 + j)
    }

    pub fn value(&self, scenario: ScenarioKind, i: usize, j: usize) -> Option<f64> {
        self.cell(scenario, i, j).and_then(|c| c.value)
    }

    fn reindex(mut self) -> Self {
        for (k, c) in self.cells.iter_mut().enumerate() {
            c.index = k;
        }
        self
    }
}

// ---------------------------------------------------------------------------
// temperature maps

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TempMapConfig {
    pub t_o: Vec<f64>,
    pub t_p: Vec<f64>,
    pub scenarios: Vec<ScenarioKind>,
}

impl Default for TempMapConfig {
    fn default() -> Self {
        TempMapConfig {
            t_o: logspace(1000.0, 5800.0, 12),
            t_p: logspace(50.0, 100.0 * 5800.0, 12),
            scenarios: ScenarioKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureMap {
    /// Steady-state exciton number per cell.
    pub grid: SweepGrid,
    /// Ratchets over forced-dark exciton number, row-major over `(T_o, T_p)`.
    pub ratio: Option<Vec<Option<f64>>>,
}

/// Exciton number of the untrapped ring over photon and phonon temperatures.
pub fn temperature_map(base: &CellSpec, config: &TempMapConfig) -> Result<TemperatureMap> {
    if base.trap.gamma_t != 0.0 || base.trap.gamma_x != 0.0 {
        return Err(Error::Conflict("temperature maps are taken without a trap (γ_t = γ_x = 0)".into()));
    }
    let mut jobs = Vec::new();
    for &scenario in &config.scenarios {
        for &t_o in &config.t_o {
            for &t_p in &config.t_p {
                jobs.push((scenario, t_o, t_p));
            }
        }
    }
    let cells = par_map(&jobs, |&(scenario, t_o, t_p)| {
        let mut spec = base.clone();
        spec.scenario = scenario;
        spec.bath.t_o = t_o;
        spec.bath.t_p = t_p;
        let run = || -> Result<CellRecord> {
            let l = assemble_liouvillian(&spec)?;
            let s = steady_state(&l, Diagnostics::Full)?;
            Ok(CellRecord {
                index: 0,
                scenario,
                coords: vec![t_o, t_p],
                value: Some(exciton_number(&l, &s)?),
                metrics: None,
                diagnostics: Some(SolveDiagnostics::from_steady(&s, None)),
                flags: steady_flags(&s),
                error: None,
            })
        };
        run().unwrap_or_else(|e| CellRecord::failed(scenario, vec![t_o, t_p], &e))
    });
    let grid = SweepGrid {
        quantity: "exciton_number".into(),
        axes: vec![
            Axis::log("t_o", "K", config.t_o.clone()),
            Axis::log("t_p", "K", config.t_p.clone()),
        ],
        scenarios: config.scenarios.clone(),
        cells,
    }
    .reindex();
    let ratio = if config.scenarios.contains(&ScenarioKind::Ratchets)
        && config.scenarios.contains(&ScenarioKind::ForcedDark)
    {
        let (n0, n1) = grid.shape();
        Some(
            (0..n0 * n1)
                .map(|k| {
                    let (i, j) = (k / n1, k % n1);
                    match (grid.value(ScenarioKind::Ratchets, i, j), grid.value(ScenarioKind::ForcedDark, i, j)) {
                        (Some(r), Some(f)) if f > 0.0 => Some(r / f),
                        _ => None,
                    }
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(TemperatureMap { grid, ratio })
}

// ---------------------------------------------------------------------------
// load curves

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvPoint {
    pub metrics: PhotocellMetrics,
    /// `I (ω + 2S)`: the current times the largest available voltage.
    pub power_limit: f64,
    pub diagnostics: SolveDiagnostics,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvCurve {
    pub scenario: ScenarioKind,
    pub points: Vec<PvPoint>,
}

impl PvCurve {
    pub fn peak_power(&self) -> f64 {
        self.points.iter().map(|p| p.metrics.power).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Upper voltage of the ring: its bright single-exciton energy.
pub fn voltage_ceiling(ring: &RingSpec) -> f64 {
    ring.mean_site_energy() + 2.0 * ring.hopping
}

fn pv_point(cell: &Photocell, ceiling: f64, gamma_t: f64) -> Result<PvPoint> {
    let p = cell.solve(gamma_t, Diagnostics::Fast)?;
    Ok(PvPoint {
        power_limit: p.metrics.current * ceiling,
        diagnostics: SolveDiagnostics::from_point(&p),
        flags: steady_flags(&p.steady),
        metrics: p.metrics,
    })
}

/// Current, voltage and power along a list of trap rates (eV).
pub fn pv_curve(spec: &CellSpec, gamma_t: &[f64]) -> Result<PvCurve> {
    let cell = Photocell::assemble(spec)?;
    pv_curve_on(&cell, spec.scenario, &spec.ring, gamma_t)
}

fn pv_curve_on(cell: &Photocell, scenario: ScenarioKind, ring: &RingSpec, gamma_t: &[f64]) -> Result<PvCurve> {
    let ceiling = voltage_ceiling(ring);
    let points = gamma_t
        .iter()
        .map(|&g| pv_point(cell, ceiling, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(PvCurve { scenario, points })
}

/// The trap rate where the voltage crosses zero, searched upward from
/// `start` by decades and then bisected in `ln γ_t`.
pub fn short_circuit(spec: &CellSpec, start: f64) -> Result<PvPoint> {
    let cell = Photocell::assemble(spec)?;
    let ceiling = voltage_ceiling(&spec.ring);
    let mut lo = start;
    let mut lo_point = pv_point(&cell, ceiling, lo)?;
    if lo_point.metrics.voltage <= 0.0 {
        return Ok(lo_point);
    }
    let mut hi = lo;
    let mut hi_point = lo_point.clone();
    for _ in 0..60 {
        hi *= 10.0;
        hi_point = pv_point(&cell, ceiling, hi)?;
        if hi_point.metrics.voltage <= 0.0 {
            break;
        }
        lo = hi;
        lo_point = hi_point.clone();
    }
    if hi_point.metrics.voltage > 0.0 {
        return Err(Error::Conflict("no short-circuit crossing below 1e60 × the start rate".into()));
    }
    for _ in 0..200 {
        if (hi / lo).ln() < 1e-12 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let p = pv_point(&cell, ceiling, mid)?;
        if p.metrics.voltage > 0.0 {
            lo = mid;
            lo_point = p;
        } else {
            hi = mid;
            hi_point = p;
        }
    }
    Ok(if lo_point.metrics.voltage.abs() < hi_point.metrics.voltage.abs() {
        lo_point
    } else {
        hi_point
    })
}

// ---------------------------------------------------------------------------
// optimized power surfaces

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub hopping: Vec<f64>,
    pub gamma_x: Vec<f64>,
    pub scenarios: Vec<ScenarioKind>,
    pub search: TrapSearch,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            hopping: logspace(5e-3, 0.2, 15),
            gamma_x: logspace(1e-8, 1e-3, 15),
            scenarios: ScenarioKind::ALL.to_vec(),
            search: TrapSearch::default(),
        }
    }
}

/// Where the ratchets and no-phonon surfaces exchange order along `γ_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub hopping: f64,
    /// Log-interpolated extraction rate of the sign change (eV).
    pub gamma_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSurface {
    /// Optimized power per `(S, γ_x)` cell; `metrics.gamma_t` is the optimum.
    pub grid: SweepGrid,
    pub crossings: Vec<Crossing>,
}

fn surface_row(base: &CellSpec, scenario: ScenarioKind, hopping: f64, config: &SurfaceConfig) -> Vec<CellRecord> {
    let coords = |gx: f64| vec![hopping, gx];
    if hopping == 0.0 {
        return config
            .gamma_x
            .iter()
            .map(|&gx| CellRecord {
                index: 0,
                scenario,
                coords: coords(gx),
                value: None,
                metrics: None,
                diagnostics: None,
                flags: vec![FLAG_DECOUPLED.into()],
                error: None,
            })
            .collect();
    }
    let mut spec = base.clone();
    spec.scenario = scenario;
    let assembled = RingSpec::with_hopping(base.ring.n_sites(), hopping).and_then(|ring| {
        spec.ring = ring;
        spec.trap.gamma_x = config.gamma_x.first().copied().unwrap_or(spec.trap.gamma_x);
        Photocell::assemble(&spec)
    });
    let cell = match assembled {
        Ok(c) => c,
        Err(e) => return config.gamma_x.iter().map(|&gx| CellRecord::failed(scenario, coords(gx), &e)).collect(),
    };
    config
        .gamma_x
        .iter()
        .map(|&gx| {
            let run = || -> Result<CellRecord> {
                let opt = optimize_trap_rate(&cell.with_extraction(gx)?, &config.search)?;
                let best = &opt.best;
                Ok(CellRecord {
                    index: 0,
                    scenario,
                    coords: coords(gx),
                    value: Some(best.metrics.power),
                    metrics: Some(best.metrics),
                    diagnostics: opt
                        .grid
                        .iter()
                        .map(SolveDiagnostics::from_point)
                        .fold(SolveDiagnostics::from_point(best), worst_of)
                        .into(),
                    flags: steady_flags(&best.steady),
                    error: None,
                })
            };
            run().unwrap_or_else(|e| CellRecord::failed(scenario, coords(gx), &e))
        })
        .collect()
}

/// Trap-optimized power over hopping and extraction rate.
pub fn power_surface(base: &CellSpec, config: &SurfaceConfig) -> Result<PowerSurface> {
    config.search.validate()?;
    if config.hopping.iter().chain(&config.gamma_x).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("surface", "hopping and γ_x values must be finite and non-negative"));
    }
    let rows: Vec<(ScenarioKind, f64)> = config
        .scenarios
        .iter()
        .flat_map(|&s| config.hopping.iter().map(move |&h| (s, h)))
        .collect();
    let cells = par_map(&rows, |&(s, h)| surface_row(base, s, h, config)).concat();
    let grid = SweepGrid {
        quantity: "power_gamma_o_eV".into(),
        axes: vec![
            Axis::log("hopping", "eV", config.hopping.clone()),
            Axis::log("gamma_x", "eV", config.gamma_x.clone()),
        ],
        scenarios: config.scenarios.clone(),
        cells,
    }
    .reindex();
    let crossings = crossing_locus(&grid);
    Ok(PowerSurface { grid, crossings })
}

fn crossing_locus(grid: &SweepGrid) -> Vec<Crossing> {
    let (n0, n1) = grid.shape();
    let mut out = Vec::new();
    for i in 0..n0 {
        let diff = |j: usize| match (grid.value(ScenarioKind::Ratchets, i, j), grid.value(ScenarioKind::NoPhonons, i, j)) {
            (Some(r), Some(n)) => Some(r - n),
            _ => None,
        };
        for j in 1..n1 {
            let (Some(a), Some(b)) = (diff(j - 1), diff(j)) else { continue };
            if a == 0.0 || a.signum() == b.signum() {
                continue;
            }
            let (x0, x1) = (grid.axes[1].values[j - 1].ln(), grid.axes[1].values[j].ln());
            out.push(Crossing {
                hopping: grid.axes[0].values[i],
                gamma_x: (x0 + (x1 - x0) * a / (a - b)).exp(),
            });
        }
    }
    out
}

/// A ratio maximum and where it sits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub value: f64,
    pub hopping: f64,
    pub gamma_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    /// Ratchets over no-phonon power, row-major over `(S, γ_x)`.
    pub ratio_np: Vec<Option<f64>>,
    /// Percent gain of ratchets over forced-dark power.
    pub percent_fd: Vec<Option<f64>>,
    pub max_ratio_np: Option<Peak>,
    pub max_percent_fd: Option<Peak>,
}

/// Relative floor on the denominator surface.
pub const POWER_FLOOR: f64 = 1e-12;

/// Pointwise ratios of the ratchets surface to the other two.
pub fn relative_enhancement(surface: &PowerSurface) -> Enhancement {
    let grid = &surface.grid;
    let (n0, n1) = grid.shape();
    let ratio = |other: ScenarioKind| -> Vec<Option<f64>> {
        let scale = (0..n0 * n1)
            .filter_map(|k| grid.value(other, k / n1, k % n1))
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        (0..n0 * n1)
            .map(|k| {
                let (i, j) = (k / n1, k % n1);
                let r = grid.value(ScenarioKind::Ratchets, i, j)?;
                let d = grid.value(other, i, j)?;
                (scale > 0.0 && d > POWER_FLOOR * scale).then(|| r / d)
            })
            .collect()
    };
    let peak = |values: &[Option<f64>]| -> Option<Peak> {
        values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((k, v)),
            })
            .map(|(k, v)| Peak {
                value: v,
                hopping: grid.axes[0].values[k / n1],
                gamma_x: grid.axes[1].values[k % n1],
            })
    };
    let ratio_np = ratio(ScenarioKind::NoPhonons);
    let percent_fd: Vec<Option<f64>> = ratio(ScenarioKind::ForcedDark)
        .into_iter()
        .map(|r| r.map(|r| 100.0 * (r - 1.0)))
        .collect();
    Enhancement {
        max_ratio_np: peak(&ratio_np),
        max_percent_fd: peak(&percent_fd),
        ratio_np,
        percent_fd,
    }
}

// ---------------------------------------------------------------------------
// disorder

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderConfig {
    /// Standard deviation of the site energies (eV).
    pub sigma: f64,
    pub n_realizations: usize,
    pub rng_seed: u64,
    /// Mean site energy; `None` uses the clean-ring value `1.8 − 2S`.
    pub center: Option<f64>,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        DisorderConfig {
            sigma: 0.0,
            n_realizations: 100,
            rng_seed: 0,
            center: None,
        }
    }
}

impl DisorderConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::invalid("disorder.sigma", format!("must be finite and non-negative, got {}", self.sigma)));
        }
        if self.n_realizations == 0 {
            return Err(Error::invalid("disorder.n_realizations", "need at least one realization"));
        }
        if let Some(c) = self.center {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::invalid("disorder.center", format!("must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Site energies of realization `r`, reproducible from the seed alone.
    pub fn site_energies(&self, n_sites: usize, hopping: f64, r: usize) -> Result<Vec<f64>> {
        let center = self.center.unwrap_or_else(|| default_site_energy(hopping));
        let normal = Normal::new(0.0, self.sigma).map_err(|e| Error::invalid("disorder.sigma", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(r as u64);
        Ok((0..n_sites).map(|_| center + normal.sample(&mut rng)).collect())
    }
}

/// Ensemble-averaged load point: current and voltage averaged separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub gamma_t: f64,
    pub current: f64,
    pub voltage: f64,
    pub power: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub size: usize,
    pub peak_power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderCurve {
    pub scenario: ScenarioKind,
    pub mean: Vec<MeanPoint>,
    pub used: usize,
    pub failures: usize,
    pub convergence: Vec<Convergence>,
    /// Worst diagnostics over every kept solve.
    pub worst: Option<SolveDiagnostics>,
}

impl DisorderCurve {
    pub fn peak_power(&self) -> f64 {
        self.mean.iter().map(|p| p.power).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderReport {
    pub config: DisorderConfig,
    pub rng: String,
    pub curves: Vec<DisorderCurve>,
}

fn mean_curve(realizations: &[&PvCurve], gamma_t: &[f64]) -> Vec<MeanPoint> {
    let n = realizations.len() as f64;
    gamma_t
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let current = realizations.iter().map(|c| c.points[k].metrics.current).sum::<f64>() / n;
            let voltage = realizations.iter().map(|c| c.points[k].metrics.voltage).sum::<f64>() / n;
            MeanPoint {
                gamma_t: g,
                current,
                voltage,
                power: current * voltage,
            }
        })
        .collect()
}

/// Componentwise worst of two diagnostic records.
pub fn worst_of(a: SolveDiagnostics, b: SolveDiagnostics) -> SolveDiagnostics {
    let max_opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    let min_opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    SolveDiagnostics {
        residual: a.residual.max(b.residual),
        trace_error: a.trace_error.max(b.trace_error),
        hermiticity: a.hermiticity.max(b.hermiticity),
        min_eigenvalue: a.min_eigenvalue.min(b.min_eigenvalue),
        uniqueness_gap: min_opt(a.uniqueness_gap, b.uniqueness_gap),
        kirchhoff: max_opt(a.kirchhoff, b.kirchhoff),
        conserved: a.conserved.max(b.conserved),
    }
}

/// Worst diagnostics along a curve.
pub fn curve_worst(curve: &PvCurve) -> Option<SolveDiagnostics> {
    curve.points.iter().map(|p| p.diagnostics).reduce(worst_of)
}

/// Load curves averaged over rings with normally distributed site energies.
/// Trap energies stay at their clean-ring values.
pub fn disorder_ensemble(
    base: &CellSpec,
    config: &DisorderConfig,
    scenarios: &[ScenarioKind],
    gamma_t: &[f64],
) -> Result<DisorderReport> {
    config.validate()?;
    if let Some(&s) = scenarios.iter().find(|&&s| s == ScenarioKind::ForcedDark) {
        return Err(Error::Conflict(format!("scenario `{s}` is undefined for disordered rings")));
    }
    if base.trap.extraction == ExtractionMode::Collective {
        return Err(Error::Conflict("collective extraction requires a uniform ring".into()));
    }
    let n = base.ring.n_sites();
    let hopping = base.ring.hopping;
    let rings = (0..config.n_realizations)
        .map(|r| {
            Ok(RingSpec {
                site_energies: config.site_energies(n, hopping, r)?,
                hopping,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clean_center = config.center.unwrap_or_else(|| default_site_energy(hopping));

    let mut curves = Vec::new();
    for &scenario in scenarios {
        let mut spec = base.clone();
        spec.scenario = scenario;
        let clean = RingSpec::uniform(n, clean_center, hopping)?;
        spec.trap.omega_t = Some(spec.trap.resolved_omega_t(scenario, &clean));
        let runs = par_map(&rings, |ring| {
            let mut s = spec.clone();
            s.ring = ring.clone();
            pv_curve(&s, gamma_t).ok()
        });
        let kept: Vec<&PvCurve> = runs.iter().flatten().collect();
        let failures = runs.len() - kept.len();
        if kept.is_empty() {
            return Err(Error::Conflict(format!("every {scenario} realization failed")));
        }
        let mut convergence = Vec::new();
        let mut size = 1;
        while size <= kept.len() {
            let peak = mean_curve(&kept[..size], gamma_t)
                .iter()
                .map(|p| p.power)
                .fold(f64::NEG_INFINITY, f64::max);
            convergence.push(Convergence { size, peak_power: peak });
            size *= 10;
        }
        if convergence.last().map(|c| c.size) != Some(kept.len()) {
            let peak = mean_curve(&kept, gamma_t).iter().map(|p| p.power).fold(f64::NEG_INFINITY, f64::max);
            convergence.push(Convergence {
                size: kept.len(),
                peak_power: peak,
            });
        }
        curves.push(DisorderCurve {
            scenario,
            mean: mean_curve(&kept, gamma_t),
            used: kept.len(),
            failures,
            convergence,
            worst: kept.iter().filter_map(|c| curve_worst(c)).reduce(worst_of),
        });
    }
    Ok(DisorderReport {
        config: config.clone(),
        rng: RNG_ALGORITHM.into(),
        curves,
    })
}

// ---------------------------------------------------------------------------
// imperfections

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImperfectionKind {
    NonRadiative,
    Annihilation,
}

impl std::str::FromStr for ImperfectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nr" | "non-radiative" | "nonradiative" => Ok(ImperfectionKind::NonRadiative),
            "eea" | "annihilation" => Ok(ImperfectionKind::Annihilation),
            other => Err(Error::invalid("imperfection", format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionCurve {
    pub rate: f64,
    pub curve: PvCurve,
}

/// Load curves per scenario and imperfection rate (eV), scenario-major.
pub fn imperfection_sweep(
    base: &CellSpec,
    kind: ImperfectionKind,
    rates: &[f64],
    scenarios: &[ScenarioKind],
    gamma_t: &[f64],
) -> Result<Vec<ImperfectionCurve>> {
    if let Some(r) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::invalid("imperfections.rates", format!("rates must be non-negative, got {r}")));
    }
    let jobs: Vec<(ScenarioKind, f64)> = scenarios
        .iter()
        .flat_map(|&s| rates.iter().map(move |&r| (s, r)))
        .collect();
    par_map(&jobs, |&(scenario, rate)| {
        let mut spec = base.clone();
        spec.scenario = scenario;
        match kind {
            ImperfectionKind::NonRadiative => spec.imperfections.gamma_nr = rate,
            ImperfectionKind::Annihilation => spec.imperfections.gamma_eea = rate,
        }
        Ok(ImperfectionCurve {
            rate,
            curve: pv_curve(&spec, gamma_t)?,
        })
    })
    .into_iter()
    .collect()
}

// ---------------------------------------------------------------------------
// annihilation structure

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EEAReport {
    /// Probability weight of basis states holding a doubly excited site in
    /// the lowest two-exciton state.
    pub d_character: f64,
    /// Largest dipole amplitude from that state into a single-exciton level,
    /// in units of one emitter's dipole.
    pub dipole_fraction: f64,
    /// Same quantity in the ring without doubly excited levels.
    pub dipole_fraction_two_level: f64,
    pub allowed_targets: usize,
    pub forbidden_targets: usize,
    pub flags: Vec<String>,
}

/// Threshold below which a dipole amplitude counts as zero.
pub const DIPOLE_ZERO: f64 = 1e-8;

struct BandStates {
    energies: Vec<f64>,
    /// Full-space eigenvectors as columns.
    vectors: Mat<c64>,
}

fn band_states(h: &Operator, number: &Operator, band: usize) -> Result<BandStates> {
    let dim = h.dim();
    let idx: Vec<usize> = (0..dim)
        .filter(|&b| (number.matrix()[(b, b)].re - band as f64).abs() < 1e-9)
        .collect();
    let block = Mat::from_fn(idx.len(), idx.len(), |i, j| h.matrix()[(idx[i], idx[j])]);
    let (energies, v) = linalg::hermitian_eigen(block.as_ref())?;
    let mut vectors = Mat::zeros(dim, idx.len());
    for (a, &b) in idx.iter().enumerate() {
        for k in 0..idx.len() {
            vectors[(b, k)] = v[(a, k)];
        }
    }
    Ok(BandStates { energies, vectors })
}

fn levels(energies: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, &e) in energies.iter().enumerate() {
        match out.last_mut() {
            Some(level) if (energies[level[0]] - e).abs() < DEGENERACY_TOL => level.push(k),
            _ => out.push(vec![k]),
        }
    }
    out
}

/// Per single-exciton level, the dipole amplitude out of the lowest
/// two-exciton level, aggregated as the root mean square over its members
/// and summed in quadrature over each target level.
fn bottom_dipoles(h: &Operator, number: &Operator, lower: &Operator) -> Result<(Vec<usize>, BandStates, Vec<f64>)> {
    let two = band_states(h, number, 2)?;
    let one = band_states(h, number, 1)?;
    let bottom = levels(&two.energies).into_iter().next().ok_or(Error::Eigendecomposition)?;
    let m = lower.matrix();
    let amps = levels(&one.energies)
        .iter()
        .map(|level| {
            let mut sq = 0.0;
            for &b in &bottom {
                let g = m * two.vectors.col(b);
                for &a in level {
                    let z: c64 = (0..g.nrows()).map(|i| one.vectors[(i, a)].conj() * g[i]).sum();
                    sq += z.norm_sqr();
                }
            }
            (sq / bottom.len() as f64).sqrt()
        })
        .collect();
    Ok((bottom, two, amps))
}

/// Doubly excited character and dipole structure of the lowest two-exciton
/// state, with and without the `|D⟩` levels.
pub fn eea_structural_analysis(ring: &RingSpec) -> Result<EEAReport> {
    let n = ring.n_sites();
    let h3 = build_three_level_hamiltonian(ring)?;
    let n3 = three_level_number_operator(n)?;
    let (bottom, two, amps) = bottom_dipoles(&h3, &n3, &three_level_dipole_lower(n)?)?;
    let mask = three_level_doubly_excited_mask(n)?;
    let d_character = bottom
        .iter()
        .map(|&b| (0..mask.len()).filter(|&i| mask[i]).map(|i| two.vectors[(i, b)].norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / bottom.len() as f64;

    let h2 = build_ring_hamiltonian(ring)?;
    let (bottom2, _, amps2) = bottom_dipoles(&h2, &number_operator(n)?, &build_collective_dipole(ring, Direction::Lower)?)?;

    let allowed = amps.iter().filter(|&&a| a > DIPOLE_ZERO).count();
    let mut flags = Vec::new();
    if bottom.len() > 1 || bottom2.len() > 1 {
        flags.push(FLAG_DEGENERATE.to_string());
    }
    Ok(EEAReport {
        d_character,
        dipole_fraction: amps.iter().copied().fold(0.0, f64::max),
        dipole_fraction_two_level: amps2.iter().copied().fold(0.0, f64::max),
        allowed_targets: allowed,
        forbidden_targets: amps.len() - allowed,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Photocell;
    use approx::assert_abs_diff_eq;

    fn small_trap() -> CellSpec {
        CellSpec {
            ring: RingSpec::with_hopping(3, 0.02).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn eea_numbers_for_default_ring() {
        let r = eea_structural_analysis(&RingSpec::default()).unwrap();
        assert_abs_diff_eq!(r.d_character, 0.16, epsilon = 0.01);
        assert_abs_diff_eq!(r.dipole_fraction, 0.18, epsilon = 0.01);
        assert_abs_diff_eq!(r.dipole_fraction_two_level, 0.41, epsilon = 0.01);
        assert_eq!(r.allowed_targets, 1);
        assert!(r.flags.is_empty());
    }

    #[test]
    fn eea_without_hopping_has_no_doubly_excited_mixing() {
        let ring = RingSpec::uniform(3, 1.0, 0.0).unwrap();
        let r = eea_structural_analysis(&ring).unwrap();
        // decoupled sites: the bottom of band 2 is degenerate with D states
        assert!(r.flags.contains(&FLAG_DEGENERATE.to_string()));
        assert!((0.0..=1.0).contains(&r.d_character));
    }

    #[test]
    fn disorder_streams_are_reproducible_and_distinct() {
        let cfg = DisorderConfig {
            sigma: 0.02,
            n_realizations: 3,
            rng_seed: 7,
            center: None,
        };
        let a = cfg.site_energies(4, 0.02, 1).unwrap();
        assert_eq!(a, cfg.site_energies(4, 0.02, 1).unwrap());
        assert_ne!(a, cfg.site_energies(4, 0.02, 2).unwrap());
        let zero = DisorderConfig { sigma: 0.0, ..cfg };
        assert!(zero.site_energies(4, 0.02, 5).unwrap().iter().all(|&e| e == default_site_energy(0.02)));
    }

    #[test]
    fn zero_disorder_matches_clean_curve() {
        let base = small_trap();
        let grid = logspace(1e-8, 1e-4, 5);
        let cfg = DisorderConfig {
            sigma: 0.0,
            n_realizations: 2,
            rng_seed: 1,
            center: None,
        };
        let rep = disorder_ensemble(&base, &cfg, &[ScenarioKind::Ratchets], &grid).unwrap();
        let clean = pv_curve(&base, &grid).unwrap();
        let c = &rep.curves[0];
        assert_eq!((c.used, c.failures), (2, 0));
        for (m, p) in c.mean.iter().zip(&clean.points) {
            assert_abs_diff_eq!(m.power, p.metrics.power, epsilon = 1e-12);
        }
        assert!(disorder_ensemble(&base, &cfg, &[ScenarioKind::ForcedDark], &grid).is_err());
    }

    #[test]
    fn temperature_map_requires_untrapped_ring() {
        assert!(temperature_map(&small_trap(), &TempMapConfig::default()).is_err());
    }

    #[test]
    fn small_temperature_map_is_ordered_and_flagged() {
        let mut base = small_trap();
        base.trap.gamma_t = 0.0;
        base.trap.gamma_x = 0.0;
        let cfg = TempMapConfig {
            t_o: vec![1.0, 5800.0],
            t_p: vec![100.0, 1000.0],
            scenarios: ScenarioKind::ALL.to_vec(),
        };
        let map = temperature_map(&base, &cfg).unwrap();
        assert_eq!(map.grid.cells.len(), 12);
        assert!(map.grid.cells.iter().enumerate().all(|(k, c)| c.index == k));
        for s in ScenarioKind::ALL {
            assert!(map.grid.value(s, 0, 0).unwrap() < 1e-12);
        }
        let np = |j| map.grid.value(ScenarioKind::NoPhonons, 1, j).unwrap();
        assert_abs_diff_eq!(np(0), np(1), epsilon = 1e-10);
        assert_eq!(map.ratio.unwrap().len(), 4);
    }

    #[test]
    fn pv_curve_reports_power_limit() {
        let grid = logspace(1e-10, 1e-3, 8);
        let curve = pv_curve(&small_trap(), &grid).unwrap();
        for p in &curve.points {
            assert_abs_diff_eq!(p.power_limit, p.metrics.current * 1.8, epsilon = 1e-15);
            assert_eq!(p.metrics.power > p.power_limit, p.metrics.voltage > 1.8);
        }
        // one-way extraction inverts the trap at open circuit
        assert!(curve.points[0].metrics.voltage > 1.8);
        let sc = short_circuit(&small_trap(), 1e-3).unwrap();
        assert!(sc.metrics.voltage.abs() < 1e-6);
    }

    #[test]
    fn surface_flags_decoupled_cells_and_orders_records() {
        let cfg = SurfaceConfig {
            hopping: vec![0.0, 0.02],
            gamma_x: vec![1e-7],
            scenarios: vec![ScenarioKind::Ratchets, ScenarioKind::NoPhonons],
            search: TrapSearch {
                grid_points: 7,
                ..Default::default()
            },
        };
        let surf = power_surface(&small_trap(), &cfg).unwrap();
        let dead = surf.grid.cell(ScenarioKind::Ratchets, 0, 0).unwrap();
        assert!(dead.value.is_none());
        assert_eq!(dead.flags, vec![FLAG_DECOUPLED.to_string()]);
        let live = surf.grid.cell(ScenarioKind::NoPhonons, 1, 0).unwrap();
        let direct = optimize_trap_rate(
            &Photocell::assemble(&CellSpec {
                scenario: ScenarioKind::NoPhonons,
                ..small_trap()
            })
            .unwrap(),
            &cfg.search,
        )
        .unwrap();
        assert_eq!(live.value, Some(direct.best.metrics.power));
        let e = relative_enhancement(&surf);
        assert!(e.ratio_np[0].is_none());
        assert!(e.ratio_np[1].unwrap() > 1.0);
    }

    #[test]
    fn crossing_is_interpolated_in_log_space() {
        let mk = |scenario, i: usize, v: f64| CellRecord {
            index: 0,
            scenario,
            coords: vec![0.02, [1e-8, 1e-6][i]],
            value: Some(v),
            metrics: None,
            diagnostics: None,
            flags: vec![],
            error: None,
        };
        let grid = SweepGrid {
            quantity: "p".into(),
            axes: vec![Axis::log("hopping", "eV", vec![0.02]), Axis::log("gamma_x", "eV", vec![1e-8, 1e-6])],
            scenarios: vec![ScenarioKind::Ratchets, ScenarioKind::NoPhonons],
            cells: vec![
                mk(ScenarioKind::Ratchets, 0, 2.0),
                mk(ScenarioKind::Ratchets, 1, 1.0),
                mk(ScenarioKind::NoPhonons, 0, 1.0),
                mk(ScenarioKind::NoPhonons, 1, 2.0),
            ],
        };
        let c = crossing_locus(&grid);
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c[0].gamma_x, 1e-7, epsilon = 1e-18);
    }

    #[test]
    fn imperfection_rates_are_validated() {
        let g = [1e-6];
        assert!(imperfection_sweep(&small_trap(), ImperfectionKind::NonRadiative, &[-1.0], &[ScenarioKind::Ratchets], &g).is_err());
        let out = imperfection_sweep(
            &small_trap(),
            ImperfectionKind::NonRadiative,
            &[0.0, 1e-6],
            &[ScenarioKind::Ratchets],
            &g,
        )
        .unwrap();
        assert!(out[1].curve.points[0].metrics.power < out[0].curve.points[0].metrics.power);
    }
}
