//! Scenario assembly, steady-state solves, photocell observables and the
//! trap-rate optimizer.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::dissipators::{
    annihilation_operators, apply_forced_dark, collective_extraction, collective_extraction_operators,
    eea_dissipator, non_radiative_dissipator, optical_dissipator, optical_operator, phonon_dissipator,
    single_site_extraction, trap_decay, unvectorize, RedfieldContext, Superoperator, K_B,
};
use crate::error::{Error, Result};
use crate::linalg::{self, real, ZERO};
use crate::model::{
    build_collective_dipole, build_ring_hamiltonian, number_operator, sigma_minus, sigma_z, trap_sigma_minus,
    trap_sigma_plus, BathSpec, Direction, ExtractionMode,
    ImperfectionSpec, Operator, RingSpec, ScenarioKind, TrapSpec,
};
use crate::spectral::{classify_states, numeric_diagonalize, Classification, DEGENERACY_TOL};

/// Most negative steady-state eigenvalue tolerated before a solve is rejected.
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Population floor used when taking `ln(ρ_α/ρ_β)`.
pub const POPULATION_CLAMP: f64 = 1e-300;

/// Full physical configuration of one photocell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSpec {
    pub scenario: ScenarioKind,
    pub ring: RingSpec,
    pub bath: BathSpec,
    pub trap: TrapSpec,
    pub imperfections: ImperfectionSpec,
}

impl CellSpec {
    pub fn validate(&self) -> Result<()> {
        self.ring.validate()?;
        self.bath.validate()?;
        self.trap.validate()?;
        self.imperfections.validate()?;
        if let ExtractionMode::SingleSite(site) = self.trap.extraction {
            if site >= self.ring.n_sites() {
                return Err(Error::invalid(
                    "trap.extraction.site",
                    format!("site {site} out of range for {} sites", self.ring.n_sites()),
                ));
            }
        }
        if self.trap.extraction == ExtractionMode::Collective && !self.ring.is_uniform() {
            return Err(Error::Conflict("collective extraction requires a uniform ring".into()));
        }
        Ok(())
    }

    /// Bath parameters after scenario switches.
    pub fn effective_bath(&self) -> BathSpec {
        let mut bath = self.bath.clone();
        if self.scenario == ScenarioKind::NoPhonons {
            bath.gamma_p = 0.0;
        }
        bath
    }

    pub fn omega_t(&self) -> f64 {
        self.trap.resolved_omega_t(self.scenario, &self.ring)
    }

    /// A trap is part of the Hilbert space unless it is fully disconnected.
    pub fn has_trap(&self) -> bool {
        self.trap.gamma_x > 0.0 || self.trap.gamma_t > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Hamiltonian,
    Optical,
    Phonon,
    TrapDecay,
    Extraction,
    NonRadiative,
    Annihilation,
    Other,
}

/// A scaled superoperator term of a Liouvillian.
#[derive(Clone, Debug)]
pub struct Component {
    pub kind: ChannelKind,
    pub scale: f64,
    pub superop: Arc<Superoperator>,
}

impl Component {
    pub fn new(kind: ChannelKind, superop: Superoperator) -> Self {
        Component {
            kind,
            scale: 1.0,
            superop: Arc::new(superop),
        }
    }

    pub fn scaled(kind: ChannelKind, superop: Superoperator, scale: f64) -> Self {
        Component {
            kind,
            scale,
            superop: Arc::new(superop),
        }
    }
}

/// Connected blocks of the Liouvillian sparsity graph.
#[derive(Clone, Debug)]
struct Sectors {
    /// Vectorized indices of the block holding every population.
    stationary: Vec<usize>,
    others: Vec<Vec<usize>>,
    /// Population blocks beyond the first; non-empty means no unique state.
    split_populations: bool,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn sectors(pattern: &[&Mat<c64>], d: usize) -> Sectors {
    let n = d * d;
    let mut parent: Vec<usize> = (0..n).collect();
    for m in pattern {
        for j in 0..n {
            for i in 0..n {
                if m[(i, j)] != ZERO {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let pop_root = roots[0];
    let split_populations = (0..d).any(|i| roots[i * (d + 1)] != pop_root);
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &r) in roots.iter().enumerate() {
        groups.entry(r).or_default().push(i);
    }
    let stationary = groups.remove(&pop_root).unwrap_or_default();
    Sectors {
        stationary,
        others: groups.into_values().collect(),
        split_populations,
    }
}

/// `L = −i[H, ·] + Σ dissipators`, held in the composite eigenbasis.
///
/// Trap decay and extraction are stored at unit rate with a separate scale so
/// load sweeps reuse one assembly.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    hilbert_dim: usize,
    components: Vec<Component>,
    fixed: Arc<Mat<c64>>,
    context: Option<Arc<RedfieldContext>>,
    sectors: Arc<Sectors>,
    /// Left kernel of the stationary block beyond the trace.
    conserved: Arc<Vec<Vec<c64>>>,
    /// Zero-frequency parts of the Hermitian bath couplings.
    regulator: Arc<Vec<Mat<c64>>>,
}

impl Liouvillian {
    /// Assembles from explicit components, all on the same Hilbert space.
    pub fn from_components(components: Vec<Component>, context: Option<Arc<RedfieldContext>>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::invalid("components", "a Liouvillian needs at least one term"));
        };
        let d = first.superop.hilbert_dim();
        if let Some(c) = components.iter().find(|c| c.superop.hilbert_dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.superop.hilbert_dim(),
            });
        }
        let mut fixed = Superoperator::zeros(d, "fixed");
        let mut tunable = Vec::new();
        for c in &components {
            if is_tunable(c.kind) {
                tunable.push(c.superop.matrix().to_owned());
            } else {
                fixed.add_assign(&c.superop, c.scale);
            }
        }
        let fixed = fixed.matrix().to_owned();
        let mut pattern: Vec<&Mat<c64>> = vec![&fixed];
        pattern.extend(tunable.iter());
        let sectors = sectors(&pattern, d);
        let mut l = Liouvillian {
            hilbert_dim: d,
            components,
            fixed: Arc::new(fixed),
            context,
            sectors: Arc::new(sectors),
            conserved: Arc::new(Vec::new()),
            regulator: Arc::new(Vec::new()),
        };
        l.refresh_conserved()?;
        Ok(l)
    }

    fn refresh_conserved(&mut self) -> Result<()> {
        self.conserved = Arc::new(Vec::new());
        if !self.sectors.split_populations {
            let idx = &self.sectors.stationary;
            self.conserved = Arc::new(conserved_quantities(&self.block(idx), idx, self.hilbert_dim)?);
        }
        Ok(())
    }

    /// Degenerate-block coupling operators used to select among stationary
    /// states when conserved quantities exist.
    pub fn regulator(&self) -> &[Mat<c64>] {
        &self.regulator
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn context(&self) -> Option<&RedfieldContext> {
        self.context.as_deref()
    }

    pub fn has_channel(&self, kind: ChannelKind) -> bool {
        self.components.iter().any(|c| c.kind == kind && c.scale != 0.0 && !c.superop.is_zero())
    }

    pub fn scale_of(&self, kind: ChannelKind) -> Option<f64> {
        self.components.iter().find(|c| c.kind == kind).map(|c| c.scale)
    }

    /// A copy with the trap decay rate replaced.
    pub fn with_trap_decay(&self, gamma_t: f64) -> Result<Self> {
        self.with_scale(ChannelKind::TrapDecay, gamma_t)
    }

    /// A copy with the extraction rate replaced.
    pub fn with_extraction(&self, gamma_x: f64) -> Result<Self> {
        self.with_scale(ChannelKind::Extraction, gamma_x)
    }

    fn with_scale(&self, kind: ChannelKind, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::invalid(format!("{kind:?}"), format!("rate must be non-negative, got {scale}")));
        }
        let mut out = self.clone();
        let c = out
            .components
            .iter_mut()
            .find(|c| c.kind == kind)
            .ok_or_else(|| Error::Conflict(format!("no {kind:?} channel in this Liouvillian")))?;
        let switched = (c.scale == 0.0) != (scale == 0.0);
        c.scale = scale;
        if switched {
            out.refresh_conserved()?;
        }
        Ok(out)
    }

    fn tunables(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| is_tunable(c.kind) && c.scale != 0.0)
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        let mut x = self.fixed[(i, j)];
        for c in self.tunables() {
            x += c.superop.matrix()[(i, j)] * c.scale;
        }
        x
    }

    /// The full dense matrix.
    pub fn matrix(&self) -> Mat<c64> {
        let n = self.hilbert_dim * self.hilbert_dim;
        Mat::from_fn(n, n, |i, j| self.entry(i, j))
    }

    fn block(&self, idx: &[usize]) -> Mat<c64> {
        let n = idx.len();
        let mut m = Mat::from_fn(n, n, |a, b| self.fixed[(idx[a], idx[b])]);
        for c in self.tunables() {
            let s = c.superop.matrix();
            for b in 0..n {
                for a in 0..n {
                    let x = s[(idx[a], idx[b])];
                    if x != ZERO {
                        m[(a, b)] += x * c.scale;
                    }
                }
            }
        }
        m
    }

    /// `L ρ` for a density matrix in this Liouvillian's basis.
    pub fn apply(&self, rho: MatRef<'_, c64>) -> Mat<c64> {
        let d = self.hilbert_dim;
        let v = crate::dissipators::vectorize(rho);
        let mut out = vec![ZERO; d * d];
        let cols: Vec<usize> = (0..d * d).filter(|&j| v[j] != ZERO).collect();
        self.accumulate(&mut out, &cols, &v, None);
        unvectorize(&out, d)
    }

    fn accumulate(&self, out: &mut [c64], cols: &[usize], v: &[c64], only: Option<ChannelKind>) {
        let n = out.len();
        let mut add = |m: MatRef<'_, c64>, scale: f64| {
            for &j in cols {
                let x = v[j] * scale;
                if x == ZERO {
                    continue;
                }
                for (i, o) in out.iter_mut().enumerate().take(n) {
                    *o += m[(i, j)] * x;
                }
            }
        };
        match only {
            None => {
                add(self.fixed.as_ref().as_ref(), 1.0);
                for c in self.tunables() {
                    add(c.superop.matrix(), c.scale);
                }
            }
            Some(kind) => {
                for c in self.components.iter().filter(|c| c.kind == kind && c.scale != 0.0) {
                    add(c.superop.matrix(), c.scale);
                }
            }
        }
    }

    /// The stationary block with one trap-α population equation replaced by
    /// the sum over all of them. Every trap-preserving term drops out of that
    /// sum exactly, leaving `γ_x` inflow against `γ_t` outflow.
    fn with_trap_balance_row(&self, block: &Mat<c64>, idx: &[usize]) -> Mat<c64> {
        let mut out = block.clone();
        let Some(ctx) = self.context().filter(|c| c.has_trap() && c.dim() == self.hilbert_dim) else {
            return out;
        };
        let d = self.hilbert_dim;
        let rows: Vec<usize> = (0..idx.len())
            .filter(|&p| idx[p].is_multiple_of(d + 1) && ctx.trap_of(idx[p] / (d + 1)) == 1)
            .collect();
        let Some(&target) = rows.first() else {
            return out;
        };
        for (b, &j) in idx.iter().enumerate() {
            let mut x = ZERO;
            for c in self.tunables() {
                let m = c.superop.matrix();
                for &p in &rows {
                    x += m[(idx[p], j)] * c.scale;
                }
            }
            out[(target, b)] = x;
        }
        out
    }

    /// Size of the block that carries the stationary state.
    pub fn stationary_block_size(&self) -> usize {
        self.sectors.stationary.len()
    }

    /// Number of conserved quantities besides the trace.
    pub fn conserved_count(&self) -> usize {
        self.conserved.len()
    }
}

fn is_tunable(kind: ChannelKind) -> bool {
    matches!(kind, ChannelKind::TrapDecay | ChannelKind::Extraction)
}

/// Builds the photocell Liouvillian for a scenario.
pub fn assemble_liouvillian(spec: &CellSpec) -> Result<Liouvillian> {
    spec.validate()?;
    let ring = &spec.ring;
    let bath = spec.effective_bath();
    let n = ring.n_sites();
    let h = build_ring_hamiltonian(ring)?;
    let es = numeric_diagonalize(&h, &number_operator(n)?)?;
    let trap_dim = if spec.has_trap() { 2 } else { 1 };
    let omega_t = spec.omega_t();
    let full = RedfieldContext::new(es, trap_dim, omega_t)?;
    let classification = match spec.scenario {
        ScenarioKind::ForcedDark => Some(classify(&full, ring)?),
        _ => None,
    };
    let generators = channel_operators(&full, spec, &bath, classification.as_ref())?;
    let ctx = if generators.is_empty() {
        full
    } else {
        full.reduced_to_reachable(&generators)?
    };

    let mut components = vec![Component::new(ChannelKind::Hamiltonian, ctx.coherent())];
    let optical = match &classification {
        Some(c) => apply_forced_dark(&ctx, ring, &bath, c)?,
        None => optical_dissipator(&ctx, ring, &bath)?,
    };
    components.push(Component::new(ChannelKind::Optical, optical));
    if bath.gamma_p > 0.0 {
        components.push(Component::new(ChannelKind::Phonon, phonon_dissipator(&ctx, ring, &bath)?));
    }
    if spec.imperfections.gamma_nr > 0.0 {
        let nr = non_radiative_dissipator(&ctx, ring, spec.imperfections.gamma_nr)?;
        components.push(Component::new(ChannelKind::NonRadiative, nr));
    }
    if spec.imperfections.gamma_eea > 0.0 {
        let eea = eea_dissipator(&ctx, spec.imperfections.gamma_eea)?;
        components.push(Component::new(ChannelKind::Annihilation, eea));
    }
    if ctx.has_trap() {
        components.push(Component::scaled(ChannelKind::TrapDecay, trap_decay(&ctx)?, spec.trap.gamma_t));
        let extraction = match spec.trap.extraction {
            ExtractionMode::SingleSite(site) => single_site_extraction(&ctx, ring, site, 1.0)?,
            ExtractionMode::Collective => collective_extraction(&ctx, spec.scenario, 1.0)?,
        };
        components.push(Component::scaled(ChannelKind::Extraction, extraction, spec.trap.gamma_x));
    }
    let regulator = regulator_operators(&ctx, spec, &bath, classification.as_ref())?;
    let mut l = Liouvillian::from_components(components, Some(Arc::new(ctx)))?;
    l.regulator = Arc::new(regulator);
    Ok(l)
}

/// Degenerate-energy blocks of the optical and phonon coupling operators.
fn regulator_operators(
    ctx: &RedfieldContext,
    spec: &CellSpec,
    bath: &BathSpec,
    classification: Option<&Classification>,
) -> Result<Vec<Mat<c64>>> {
    let n = spec.ring.n_sites();
    let mut ops = Vec::new();
    if bath.gamma_o > 0.0 {
        ops.push(optical_operator(ctx, &spec.ring, classification)?);
    }
    if bath.gamma_p > 0.0 {
        for i in 0..n {
            ops.push(ctx.to_eigenbasis(&sigma_z(i, n)?)?);
        }
    }
    let e = ctx.energies();
    Ok(ops
        .into_iter()
        .map(|a| {
            Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
                if (e[i] - e[j]).abs() < DEGENERACY_TOL {
                    a[(i, j)]
                } else {
                    ZERO
                }
            })
        })
        .filter(|a| linalg::max_abs(a.as_ref()) > 0.0)
        .collect())
}

/// Every jump or coupling operator of the cell in the unreduced basis, with
/// `L†L` alongside each Lindblad jump `L`.
fn channel_operators(
    ctx: &RedfieldContext,
    spec: &CellSpec,
    bath: &BathSpec,
    classification: Option<&Classification>,
) -> Result<Vec<Mat<c64>>> {
    let n = spec.ring.n_sites();
    let mut ops = Vec::new();
    let mut jumps = Vec::new();
    if bath.gamma_o > 0.0 {
        ops.push(optical_operator(ctx, &spec.ring, classification)?);
    }
    if bath.gamma_p > 0.0 {
        for i in 0..n {
            ops.push(ctx.to_eigenbasis(&sigma_z(i, n)?)?);
        }
    }
    if spec.imperfections.gamma_nr > 0.0 {
        for i in 0..n {
            jumps.push(ctx.to_eigenbasis(&sigma_minus(i, n)?)?);
        }
    }
    if spec.imperfections.gamma_eea > 0.0 {
        jumps.extend(annihilation_operators(ctx));
    }
    if ctx.has_trap() {
        let rd = ctx.ring_dim();
        jumps.push(ctx.to_eigenbasis(&trap_sigma_minus(rd))?);
        match spec.trap.extraction {
            ExtractionMode::SingleSite(site) => {
                let op = sigma_minus(site, n)?.with_trap().compose(&trap_sigma_plus(rd));
                jumps.push(ctx.to_eigenbasis(&op)?);
            }
            ExtractionMode::Collective => jumps.extend(collective_extraction_operators(ctx, spec.scenario)?),
        }
    }
    for l in jumps {
        ops.push(linalg::adjoint(l.as_ref()) * &l);
        ops.push(l);
    }
    Ok(ops)
}

fn classify(ctx: &RedfieldContext, ring: &RingSpec) -> Result<Classification> {
    let jp = build_collective_dipole(ring, Direction::Raise)?;
    classify_states(ctx.eigensystem(), &jp)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnostics {
    /// Residual, Hermiticity and positivity only.
    #[default]
    Fast,
    /// Also the uniqueness gap from singular values.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverFlag {
    /// Uniqueness gap within 1e3 of the residual.
    Ambiguous,
    /// Small negative eigenvalues clamped when reporting observables.
    ClampedNegative,
    /// A trap population hit the logarithm floor.
    ClampedVoltage,
    /// Optimizer objective flat on the coarse grid.
    FlatObjective,
}

impl SolverFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverFlag::Ambiguous => "ambiguous",
            SolverFlag::ClampedNegative => "clamped-negative",
            SolverFlag::ClampedVoltage => "clamped-voltage",
            SolverFlag::FlatObjective => "flat-objective",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    /// Density matrix in the Liouvillian's (eigen)basis.
    pub rho: Mat<c64>,
    pub residual: f64,
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub uniqueness_gap: Option<f64>,
    /// Conserved quantities besides the trace, pinned at ground-state values.
    pub conserved: usize,
    pub flags: Vec<SolverFlag>,
}

impl SteadyState {
    pub fn is_ambiguous(&self) -> bool {
        self.flags.contains(&SolverFlag::Ambiguous)
    }

    /// Population of basis state `i`.
    pub fn population(&self, i: usize) -> f64 {
        self.rho[(i, i)].re
    }
}

/// Stationary state reached from the ground state, solved on the block that
/// holds the populations. With the trace as the only conserved quantity this
/// is the trace-replaced linear system; otherwise a bordered system pins every
/// conserved quantity at its ground-state value.
pub fn steady_state(l: &Liouvillian, mode: Diagnostics) -> Result<SteadyState> {
    let d = l.hilbert_dim;
    if l.sectors.split_populations {
        return Err(Error::NonUnique {
            gap: 0.0,
            residual: 0.0,
        });
    }
    let idx = &l.sectors.stationary;
    let n = idx.len();
    let block = l.block(idx);
    if linalg::max_abs(block.as_ref()) == 0.0 {
        return Err(Error::SingularSolve);
    }
    let balanced = l.with_trap_balance_row(&block, idx);
    let x = if l.conserved.is_empty() {
        trace_replaced_solve(&balanced, idx, d)?
    } else {
        bordered_solve(&block, &balanced, idx, d, &l.conserved, &l.regulator)?
    };
    if (0..n).any(|i| !x[(i, 0)].re.is_finite() || !x[(i, 0)].im.is_finite()) {
        return Err(Error::SingularSolve);
    }

    let mut v = vec![ZERO; d * d];
    for (a_i, &g) in idx.iter().enumerate() {
        v[g] = x[(a_i, 0)];
    }
    let mut out = vec![ZERO; d * d];
    l.accumulate(&mut out, idx, &v, None);
    let residual = out.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let raw = unvectorize(&v, d);
    let hermiticity = linalg::hermiticity_deviation(raw.as_ref());
    let rho = Mat::from_fn(d, d, |i, j| (raw[(i, j)] + raw[(j, i)].conj()) * 0.5);
    let trace_error = (linalg::trace(rho.as_ref()) - real(1.0)).norm();
    let min_eigenvalue = linalg::hermitian_eigenvalues(rho.as_ref())?
        .first()
        .copied()
        .unwrap_or(0.0);
    if min_eigenvalue < POSITIVITY_FLOOR {
        return Err(Error::PositivityViolation { min_eigenvalue });
    }
    let mut flags = Vec::new();
    if min_eigenvalue < 0.0 {
        flags.push(SolverFlag::ClampedNegative);
    }
    let uniqueness_gap = match mode {
        Diagnostics::Fast => None,
        Diagnostics::Full => Some(uniqueness_gap(l, &block, 1 + l.conserved.len())?),
    };
    if let Some(gap) = uniqueness_gap {
        if gap < 1e3 * residual {
            flags.push(SolverFlag::Ambiguous);
        }
    }
    Ok(SteadyState {
        rho,
        residual,
        trace_error,
        hermiticity,
        min_eigenvalue,
        uniqueness_gap,
        conserved: l.conserved.len(),
        flags,
    })
}

fn population_indicator(idx: &[usize], d: usize) -> Vec<c64> {
    idx.iter()
        .map(|&g| if g % (d + 1) == 0 { real(1.0) } else { ZERO })
        .collect()
}

fn trace_replaced_solve(block: &Mat<c64>, idx: &[usize], d: usize) -> Result<Mat<c64>> {
    let n = idx.len();
    let scale = linalg::max_abs(block.as_ref());
    let mut a = block.clone();
    // ground population equation is redundant with the others
    for (b, t) in population_indicator(idx, d).into_iter().enumerate() {
        a[(0, b)] = t * scale;
    }
    let mut rhs = Mat::<c64>::zeros(n, 1);
    rhs[(0, 0)] = real(scale);
    solve_refined(&a, &rhs)
}

/// `[[B', C], [Q^H, 0]] [x; μ] = [0; c]` with `Q` the exact left kernel of
/// `B`, itself refined from `C` through the adjoint bordered system. `B'` has
/// the same kernel as `B`. The pinned values `c` start at the ground state;
/// with a regulator they are then moved to the member of the stationary
/// family that survives a vanishing zero-frequency dephasing.
fn bordered_solve(
    block: &Mat<c64>,
    balanced: &Mat<c64>,
    idx: &[usize],
    d: usize,
    conserved: &[Vec<c64>],
    regulator: &[Mat<c64>],
) -> Result<Mat<c64>> {
    let n = idx.len();
    let mut borders = vec![population_indicator(idx, d)];
    borders.extend(conserved.iter().cloned());
    let m = borders.len();
    let ground = idx.iter().position(|&g| g == 0).ok_or(Error::SingularSolve)?;

    let adjoint = Mat::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
        (true, true) => block[(j, i)].conj(),
        (true, false) => borders[j - n][i],
        (false, true) => borders[i - n][j].conj(),
        (false, false) => ZERO,
    });
    let rhs = Mat::from_fn(n + m, m, |i, k| if i == n + k { real(1.0) } else { ZERO });
    let q = solve_refined(&adjoint, &rhs)?;

    let system = Mat::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
        (true, true) => balanced[(i, j)],
        (true, false) => borders[j - n][i],
        (false, true) => q[(j, i - n)].conj(),
        (false, false) => ZERO,
    });
    let cols = if regulator.is_empty() { 1 } else { m };
    let rhs = Mat::from_fn(n + m, cols, |i, k| {
        if i < n {
            ZERO
        } else if k > 0 && i - n == k {
            q[(ground, i - n)].conj() + real(1.0)
        } else {
            q[(ground, i - n)].conj()
        }
    });
    let x = solve_refined(&system, &rhs)?;
    let base = Mat::from_fn(n, 1, |i, _| x[(i, 0)]);
    if cols == 1 {
        return Ok(base);
    }

    // first-order solvability q_k^H R (x_0 + Σ t_j Δ_j) = 0
    let k = m - 1;
    let dirs: Vec<Mat<c64>> = (1..m).map(|j| Mat::from_fn(n, 1, |i, _| x[(i, j)] - x[(i, 0)])).collect();
    let project = |v: &Mat<c64>| -> Vec<c64> {
        let r = apply_regulator(regulator, v, idx, d);
        (1..m)
            .map(|c| (0..n).map(|i| q[(i, c)].conj() * r[i]).sum::<c64>())
            .collect()
    };
    let b = project(&base);
    let cols: Vec<Vec<c64>> = dirs.iter().map(project).collect();
    let small = Mat::from_fn(k, k, |r, c| cols[c][r]);
    let scale = linalg::max_abs(small.as_ref());
    let sv = sorted_singular_values(&small)?;
    if scale == 0.0 || sv[0] < 1e-8 * scale {
        return Ok(base);
    }
    let t = small.partial_piv_lu().solve(&Mat::from_fn(k, 1, |r, _| -b[r]));
    Ok(Mat::from_fn(n, 1, |i, _| {
        base[(i, 0)] + (0..k).map(|j| t[(j, 0)] * dirs[j][(i, 0)]).sum::<c64>()
    }))
}

/// `Σ_A (A ρ A − ½{A², ρ})` for a stationary-block vector, read back on the
/// same block.
fn apply_regulator(regulator: &[Mat<c64>], v: &Mat<c64>, idx: &[usize], d: usize) -> Vec<c64> {
    let mut full = vec![ZERO; d * d];
    for (a, &g) in idx.iter().enumerate() {
        full[g] = v[(a, 0)];
    }
    let rho = unvectorize(&full, d);
    let mut out = Mat::<c64>::zeros(d, d);
    for a in regulator {
        let ar = a * &rho;
        let a2 = a * a;
        let anti = &a2 * &rho + &rho * &a2;
        out += &ar * a - Mat::from_fn(d, d, |i, j| anti[(i, j)] * 0.5);
    }
    idx.iter().map(|&g| out[(g % d, g / d)]).collect()
}

/// Row- and column-equilibrated LU with residuals refined in double-double.
fn solve_refined(a: &Mat<c64>, rhs: &Mat<c64>) -> Result<Mat<c64>> {
    let n = a.nrows();
    let row_scale: Vec<f64> = (0..n)
        .map(|i| 1.0 / (0..n).map(|j| a[(i, j)].norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE))
        .collect();
    let col_scale: Vec<f64> = (0..n)
        .map(|j| 1.0 / (0..n).map(|i| a[(i, j)].norm() * row_scale[i]).fold(0.0, f64::max).max(f64::MIN_POSITIVE))
        .collect();
    let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] * (row_scale[i] * col_scale[j]));
    let lu = scaled.partial_piv_lu();
    let srhs = Mat::from_fn(n, rhs.ncols(), |i, k| rhs[(i, k)] * row_scale[i]);
    let y = lu.solve(&srhs);
    let mut x = Mat::from_fn(n, rhs.ncols(), |i, k| y[(i, k)] * col_scale[i]);
    for _ in 0..3 {
        let r = compensated_residual(a, &x, rhs);
        let sr = Mat::from_fn(n, rhs.ncols(), |i, k| r[(i, k)] * row_scale[i]);
        let dy = lu.solve(&sr);
        let mut change = 0.0f64;
        let mut size = 0.0f64;
        for k in 0..rhs.ncols() {
            for i in 0..n {
                let dx = dy[(i, k)] * col_scale[i];
                x[(i, k)] += dx;
                change = change.max(dx.norm());
                size = size.max(x[(i, k)].norm());
            }
        }
        if !change.is_finite() {
            return Err(Error::SingularSolve);
        }
        if change <= 1e-17 * size {
            break;
        }
    }
    Ok(x)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double accumulator for one real sum.
#[derive(Clone, Copy, Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        self.lo += e;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `b − A x` with products and sums carried in double-double.
fn compensated_residual(a: &Mat<c64>, x: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let n = a.nrows();
    let mut out = Mat::<c64>::zeros(n, b.ncols());
    for k in 0..b.ncols() {
        let mut re = vec![Compensated::default(); n];
        let mut im = vec![Compensated::default(); n];
        for i in 0..n {
            re[i].add(b[(i, k)].re);
            im[i].add(b[(i, k)].im);
        }
        for j in 0..n {
            let xj = x[(j, k)];
            if xj == ZERO {
                continue;
            }
            for i in 0..n {
                let aij = a[(i, j)];
                if aij == ZERO {
                    continue;
                }
                re[i].add_product(-aij.re, xj.re);
                re[i].add_product(aij.im, xj.im);
                im[i].add_product(-aij.re, xj.im);
                im[i].add_product(-aij.im, xj.re);
            }
        }
        for i in 0..n {
            out[(i, k)] = c64::new(re[i].value(), im[i].value());
        }
    }
    out
}

fn sorted_singular_values(m: &Mat<c64>) -> Result<Vec<f64>> {
    let mut s: Vec<f64> = m.singular_values().map_err(|_| Error::Eigendecomposition)?;
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Smallest singular value beyond the `kernel` expected zeros of the
/// stationary block, or of any other block.
fn uniqueness_gap(l: &Liouvillian, stationary: &Mat<c64>, kernel: usize) -> Result<f64> {
    let s = sorted_singular_values(stationary)?;
    let mut gap = s.get(kernel).copied().unwrap_or(f64::INFINITY);
    for other in &l.sectors.others {
        let b = l.block(other);
        if let Some(&smin) = sorted_singular_values(&b)?.first() {
            gap = gap.min(smin);
        }
    }
    Ok(gap)
}

/// Relative singular-value level below which a direction of the stationary
/// block counts as an exact zero mode.
const KERNEL_TOL: f64 = 30.0 * f64::EPSILON;

/// Left kernel vectors of the stationary block beyond the trace, orthonormal
/// and orthogonal to it.
fn conserved_quantities(block: &Mat<c64>, idx: &[usize], d: usize) -> Result<Vec<Vec<c64>>> {
    let n = block.nrows();
    let svd = block.svd().map_err(|_| Error::Eigendecomposition)?;
    let s = svd.S();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let top = values.iter().copied().fold(0.0, f64::max);
    let zero: Vec<usize> = (0..n).filter(|&i| values[i] <= KERNEL_TOL * top).collect();
    if zero.len() <= 1 {
        return Ok(Vec::new());
    }
    let u = svd.U();
    let t = population_indicator(idx, d);
    let tn = t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<c64>> = vec![t.iter().map(|z| z / tn).collect()];
    for &k in &zero {
        let mut c: Vec<c64> = (0..n).map(|i| u[(i, k)]).collect();
        for _ in 0..2 {
            for b in &basis {
                let overlap: c64 = (0..n).map(|i| b[i].conj() * c[i]).sum();
                for i in 0..n {
                    c[i] -= b[i] * overlap;
                }
            }
        }
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(c.iter().map(|z| z / norm).collect());
        }
    }
    basis.remove(0);
    Ok(basis)
}

/// Stationary state by inverse iteration from the ground state on the
/// stationary block, used to cross-check the direct solve.
pub fn steady_state_inverse_iteration(l: &Liouvillian, iterations: usize) -> Result<Mat<c64>> {
    let d = l.hilbert_dim;
    let idx = &l.sectors.stationary;
    let n = idx.len();
    let block = l.block(idx);
    let shift = 1e-14 * linalg::max_abs(block.as_ref()).max(f64::MIN_POSITIVE);
    let shifted = Mat::from_fn(n, n, |i, j| block[(i, j)] - if i == j { real(shift) } else { ZERO });
    let lu = shifted.partial_piv_lu();
    let mut x = Mat::from_fn(n, 1, |i, _| if idx[i] == 0 { real(1.0) } else { ZERO });
    for _ in 0..iterations {
        x = lu.solve(&x);
        let norm = (0..n).map(|i| x[(i, 0)].norm()).fold(0.0, f64::max);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::SingularSolve);
        }
        for i in 0..n {
            x[(i, 0)] /= norm;
        }
    }
    let mut v = vec![ZERO; d * d];
    for (a, &g) in idx.iter().enumerate() {
        v[g] = x[(a, 0)];
    }
    let rho = unvectorize(&v, d);
    let tr = linalg::trace(rho.as_ref());
    Ok(Mat::from_fn(d, d, |i, j| rho[(i, j)] / tr))
}

/// `Re tr(O ρ)`, rejecting a non-negligible imaginary part.
pub fn expectation(rho: MatRef<'_, c64>, op: MatRef<'_, c64>) -> Result<f64> {
    if rho.nrows() != op.nrows() || rho.ncols() != op.ncols() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: op.nrows(),
        });
    }
    let d = rho.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for k in 0..d {
            acc += op[(i, k)] * rho[(k, i)];
        }
    }
    if acc.im.abs() > 1e-10 * acc.re.abs().max(1.0) {
        return Err(Error::ComplexExpectation { imag: acc.im });
    }
    Ok(acc.re)
}

/// Photocell view of an assembled scenario.
#[derive(Clone, Debug)]
pub struct Photocell {
    liouvillian: Liouvillian,
    omega_t: f64,
    bath: BathSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotocellMetrics {
    pub gamma_t: f64,
    /// `γ_t ρ_α` in units of `e γ_o`.
    pub current: f64,
    /// Volts.
    pub voltage: f64,
    /// `I V` in units of `γ_o eV`.
    pub power: f64,
    pub rho_alpha: f64,
    pub rho_beta: f64,
    pub clamped: bool,
}

/// Current, voltage and power from the trap populations.
pub fn photocell_metrics(rho_alpha: f64, rho_beta: f64, gamma_t: f64, omega_t: f64, bath: &BathSpec) -> PhotocellMetrics {
    let clamped = rho_alpha < POPULATION_CLAMP || rho_beta < POPULATION_CLAMP;
    let (a, b) = (rho_alpha.max(POPULATION_CLAMP), rho_beta.max(POPULATION_CLAMP));
    let voltage = omega_t + K_B * bath.t_p * (a.ln() - b.ln());
    let current = if gamma_t == 0.0 { 0.0 } else { gamma_t * rho_alpha.max(0.0) / bath.gamma_o };
    PhotocellMetrics {
        gamma_t,
        current,
        voltage,
        power: current * voltage,
        rho_alpha,
        rho_beta,
        clamped,
    }
}

/// One solved load point.
#[derive(Clone, Debug)]
pub struct OperatingPoint {
    pub metrics: PhotocellMetrics,
    pub steady: SteadyState,
    /// Relative mismatch between `γ_t ρ_α` and the extraction flux.
    pub kirchhoff: f64,
}

impl Photocell {
    pub fn assemble(spec: &CellSpec) -> Result<Self> {
        if !spec.has_trap() {
            return Err(Error::Conflict("a photocell needs γ_x > 0 or γ_t > 0".into()));
        }
        Ok(Photocell {
            liouvillian: assemble_liouvillian(spec)?,
            omega_t: spec.omega_t(),
            bath: spec.effective_bath(),
        })
    }

    pub fn liouvillian(&self) -> &Liouvillian {
        &self.liouvillian
    }

    pub fn omega_t(&self) -> f64 {
        self.omega_t
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    pub fn with_extraction(&self, gamma_x: f64) -> Result<Self> {
        Ok(Photocell {
            liouvillian: self.liouvillian.with_extraction(gamma_x)?,
            ..self.clone()
        })
    }

    pub fn solve(&self, gamma_t: f64, mode: Diagnostics) -> Result<OperatingPoint> {
        let l = self.liouvillian.with_trap_decay(gamma_t)?;
        let steady = steady_state(&l, mode)?;
        let (alpha, beta) = trap_populations(&l, &steady)?;
        let mut metrics = photocell_metrics(alpha, beta, gamma_t, self.omega_t, &self.bath);
        let kirchhoff = kirchhoff_mismatch(&l, &steady, gamma_t);
        let mut steady = steady;
        if metrics.clamped {
            steady.flags.push(SolverFlag::ClampedVoltage);
        }
        metrics.gamma_t = gamma_t;
        Ok(OperatingPoint {
            metrics,
            steady,
            kirchhoff,
        })
    }
}

/// `(ρ_α, ρ_β)` of a steady state of an assembled photocell Liouvillian.
pub fn trap_populations(l: &Liouvillian, steady: &SteadyState) -> Result<(f64, f64)> {
    let ctx = l.context().ok_or_else(|| Error::Conflict("trap populations need a ring context".into()))?;
    if !ctx.has_trap() {
        return Err(Error::Conflict("trap populations need a trap in the Hilbert space".into()));
    }
    let mut alpha = 0.0;
    let mut beta = 0.0;
    for i in 0..ctx.dim() {
        if ctx.trap_of(i) == 1 {
            alpha += steady.population(i);
        } else {
            beta += steady.population(i);
        }
    }
    Ok((alpha, beta))
}

/// Mean exciton number of a steady state of an assembled ring Liouvillian.
pub fn exciton_number(l: &Liouvillian, steady: &SteadyState) -> Result<f64> {
    let ctx = l.context().ok_or_else(|| Error::Conflict("exciton number needs a ring context".into()))?;
    Ok((0..ctx.dim()).map(|i| ctx.band_of(i) as f64 * steady.population(i)).sum())
}

/// The steady state transformed back to the product basis.
pub fn product_basis_state(l: &Liouvillian, steady: &SteadyState) -> Mat<c64> {
    match l.context() {
        Some(ctx) => ctx.from_eigenbasis(steady.rho.as_ref()),
        None => steady.rho.clone(),
    }
}

/// `|γ_t ρ_α − tr(n_t D_x ρ)| / max(...)`: steady-state current continuity.
pub fn kirchhoff_mismatch(l: &Liouvillian, steady: &SteadyState, gamma_t: f64) -> f64 {
    let d = l.hilbert_dim;
    let Some(ctx) = l.context().filter(|c| c.has_trap()) else {
        return 0.0;
    };
    let v = crate::dissipators::vectorize(steady.rho.as_ref());
    let cols: Vec<usize> = (0..d * d).filter(|&j| v[j] != ZERO).collect();
    let mut out = vec![ZERO; d * d];
    l.accumulate(&mut out, &cols, &v, Some(ChannelKind::Extraction));
    let inflow: f64 = (0..d).filter(|&i| ctx.trap_of(i) == 1).map(|i| out[i * (d + 1)].re).sum();
    let alpha: f64 = (0..d).filter(|&i| ctx.trap_of(i) == 1).map(|i| steady.population(i)).sum();
    let outflow = gamma_t * alpha;
    let scale = inflow.abs().max(outflow.abs());
    if scale < 1e-300 {
        0.0
    } else {
        (inflow - outflow).abs() / scale
    }
}

/// Search protocol for [`optimize_trap_rate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSearch {
    /// Bounds in units of `γ_o`.
    pub min_rel: f64,
    pub max_rel: f64,
    pub grid_points: usize,
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for TrapSearch {
    fn default() -> Self {
        TrapSearch {
            min_rel: 1e-6,
            max_rel: 1e4,
            grid_points: 31,
            rel_tol: 1e-4,
            max_iterations: 60,
        }
    }
}

impl TrapSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_rel > 0.0 && self.max_rel > self.min_rel) {
            return Err(Error::invalid("search", "need 0 < min_rel < max_rel"));
        }
        if self.grid_points < 3 {
            return Err(Error::invalid("search.grid_points", "need at least 3 grid points"));
        }
        Ok(())
    }

    /// Log-spaced trap rates in eV.
    pub fn grid(&self, gamma_o: f64) -> Vec<f64> {
        logspace(self.min_rel * gamma_o, self.max_rel * gamma_o, self.grid_points)
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub best: OperatingPoint,
    pub grid: Vec<OperatingPoint>,
    pub evaluations: usize,
    pub flat: bool,
}

/// Maximizes `max(P, 0)` over `γ_t`: coarse log grid, then golden-section on
/// `ln γ_t` around the best grid point.
pub fn optimize_trap_rate(cell: &Photocell, search: &TrapSearch) -> Result<Optimum> {
    search.validate()?;
    let objective = |p: &OperatingPoint| p.metrics.power.max(0.0);
    let rates = search.grid(cell.bath.gamma_o);
    let grid = rates
        .iter()
        .map(|&g| cell.solve(g, Diagnostics::Fast))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = grid.len();
    let (ibest, pbest) = grid
        .iter()
        .map(objective)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p > acc.1 { (i, p) } else { acc });
    let pmin = grid.iter().map(objective).fold(f64::INFINITY, f64::min);
    if !(pbest > 0.0) || pbest - pmin <= 1e-12 * pbest {
        let mut best = grid[ibest].clone();
        best.steady.flags.push(SolverFlag::FlatObjective);
        return Ok(Optimum {
            best,
            grid,
            evaluations,
            flat: true,
        });
    }

    let lo = rates[ibest.saturating_sub(1)].ln();
    let hi = rates[(ibest + 1).min(rates.len() - 1)].ln();
    let mut best = grid[ibest].clone();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut pc = cell.solve(c.exp(), Diagnostics::Fast)?;
    let mut pe = cell.solve(e.exp(), Diagnostics::Fast)?;
    evaluations += 2;
    for _ in 0..search.max_iterations {
        for p in [&pc, &pe] {
            if objective(p) > objective(&best) {
                best = p.clone();
            }
        }
        let spread = (objective(&pc) - objective(&pe)).abs() / objective(&best);
        if spread < search.rel_tol {
            break;
        }
        if objective(&pc) >= objective(&pe) {
            b = e;
            e = c;
            pe = pc;
            c = b - inv_phi * (b - a);
            pc = cell.solve(c.exp(), Diagnostics::Fast)?;
        } else {
            a = c;
            c = e;
            pc = pe;
            e = a + inv_phi * (b - a);
            pe = cell.solve(e.exp(), Diagnostics::Fast)?;
        }
        evaluations += 1;
        if (b - a).abs() < 1e-9 {
            break;
        }
    }
    for p in [&pc, &pe] {
        if objective(p) > objective(&best) {
            best = p.clone();
        }
    }
    Ok(Optimum {
        best,
        grid,
        evaluations,
        flat: false,
    })
}

/// Convenience: the product-basis number operator lifted to the cell layout.
pub fn lifted_number_operator(n_sites: usize, with_trap: bool) -> Result<Operator> {
    let n = number_operator(n_sites)?;
    Ok(if with_trap { n.with_trap() } else { n })
}
