//! Superoperators on column-stacked density matrices, `vec(ρ)[i + j d] = ρ_ij`.
//!
//! Everything here is expressed in the composite eigenbasis of `H_s + H_t`
//! supplied by a [`RedfieldContext`]; operators given in the product basis
//! are transformed on the way in.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, real, ONE, ZERO};
use crate::model::{
    build_collective_dipole, sigma_minus, sigma_z, trap_sigma_minus, trap_sigma_plus, BathSpec, Direction,
    Operator, RingSpec, ScenarioKind,
};
use crate::spectral::{Classification, EigenSystem, DEGENERACY_TOL};

/// Boltzmann constant in eV/K.
pub const K_B: f64 = 8.617333262e-5;

/// Bose-Einstein occupation `1 / (exp(ω / k_B T) − 1)`, zero at `T = 0`.
pub fn bose_einstein(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::NonPositiveFrequency(omega));
    }
    if temperature <= 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / (K_B * temperature)).exp_m1())
}

/// Flat bath spectrum with thermal weighting. Positive frequencies are
/// emission into the bath.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSpectrum {
    pub gamma: f64,
    pub temperature: f64,
}

impl PowerSpectrum {
    pub fn new(gamma: f64, temperature: f64) -> Self {
        PowerSpectrum { gamma, temperature }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        if self.gamma == 0.0 || omega.abs() < DEGENERACY_TOL {
            return 0.0;
        }
        let n = bose_einstein(omega.abs(), self.temperature).unwrap_or(0.0);
        if omega > 0.0 {
            self.gamma * (n + 1.0)
        } else {
            self.gamma * n
        }
    }
}

/// Column-stacks a square matrix.
pub fn vectorize(rho: MatRef<'_, c64>) -> Vec<c64> {
    let d = rho.nrows();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            v.push(rho[(i, j)]);
        }
    }
    v
}

pub fn unvectorize(v: &[c64], d: usize) -> Mat<c64> {
    assert_eq!(v.len(), d * d);
    Mat::from_fn(d, d, |i, j| v[i + j * d])
}

/// A linear map on density matrices of a `hilbert_dim`-dimensional system.
#[derive(Clone, Debug)]
pub struct Superoperator {
    matrix: Mat<c64>,
    hilbert_dim: usize,
    label: String,
}

impl Superoperator {
    pub fn zeros(hilbert_dim: usize, label: impl Into<String>) -> Self {
        let n = hilbert_dim * hilbert_dim;
        Superoperator {
            matrix: Mat::zeros(n, n),
            hilbert_dim,
            label: label.into(),
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(self.matrix.as_ref())
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    pub fn add_assign(&mut self, other: &Superoperator, scale: f64) {
        assert_eq!(self.hilbert_dim, other.hilbert_dim);
        let n = self.matrix.nrows();
        for j in 0..n {
            for i in 0..n {
                let x = other.matrix[(i, j)];
                if x != ZERO {
                    self.matrix[(i, j)] += x * scale;
                }
            }
        }
    }

    pub fn apply(&self, rho: MatRef<'_, c64>) -> Mat<c64> {
        let v = vectorize(rho);
        let n = v.len();
        let mut out = vec![ZERO; n];
        for (j, &x) in v.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.matrix[(i, j)] * x;
            }
        }
        unvectorize(&out, self.hilbert_dim)
    }

    /// `max_j |Σ_i L_{(i,i), j}|`: how far the map is from trace preserving.
    pub fn trace_leak(&self) -> f64 {
        let d = self.hilbert_dim;
        (0..d * d)
            .map(|col| (0..d).map(|i| self.matrix[(i * (d + 1), col)]).sum::<c64>().norm())
            .fold(0.0, f64::max)
    }

    /// `vec(X ρ Y) = (Yᵀ ⊗ X) vec(ρ)`, accumulated with weight `scale`.
    fn add_sandwich(&mut self, x: MatRef<'_, c64>, y: MatRef<'_, c64>, scale: c64) {
        let d = self.hilbert_dim;
        let nz = |m: MatRef<'_, c64>| -> Vec<(usize, usize, c64)> {
            let mut out = Vec::new();
            for j in 0..d {
                for i in 0..d {
                    if m[(i, j)] != ZERO {
                        out.push((i, j, m[(i, j)]));
                    }
                }
            }
            out
        };
        let xs = nz(x);
        // (Yᵀ)_{a,b} = Y_{b,a}
        for (b, a, yv) in nz(y) {
            let w = yv * scale;
            for &(i, j, xv) in &xs {
                self.matrix[(a * d + i, b * d + j)] += w * xv;
            }
        }
    }
}

/// The composite eigenbasis in which all superoperators are assembled: ring
/// eigenstates tensored with the bare trap levels, optionally cut down to an
/// invariant subspace spanned by label-pure vectors.
#[derive(Clone, Debug)]
pub struct RedfieldContext {
    ring: EigenSystem,
    trap_dim: usize,
    omega_t: f64,
    energies: Vec<f64>,
    bands: Vec<usize>,
    traps: Vec<usize>,
    frame: Option<Mat<c64>>,
}

impl RedfieldContext {
    /// `trap_dim` is 2 with a trap of energy `omega_t`, or 1 without one.
    pub fn new(ring: EigenSystem, trap_dim: usize, omega_t: f64) -> Result<Self> {
        if trap_dim != 1 && trap_dim != 2 {
            return Err(Error::invalid("trap_dim", format!("trap dimension must be 1 or 2, got {trap_dim}")));
        }
        let d = ring.dim() * trap_dim;
        let energies = (0..d)
            .map(|i| ring.energies()[i / trap_dim] + omega_t * (i % trap_dim) as f64)
            .collect();
        let bands = (0..d).map(|i| ring.band(i / trap_dim)).collect();
        let traps = (0..d).map(|i| i % trap_dim).collect();
        Ok(RedfieldContext {
            ring,
            trap_dim,
            omega_t,
            energies,
            bands,
            traps,
            frame: None,
        })
    }

    /// Dimension of the working space.
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Dimension of the unreduced composite space.
    pub fn full_dim(&self) -> usize {
        self.ring.dim() * self.trap_dim
    }

    pub fn ring_dim(&self) -> usize {
        self.ring.dim()
    }

    pub fn trap_dim(&self) -> usize {
        self.trap_dim
    }

    pub fn has_trap(&self) -> bool {
        self.trap_dim == 2
    }

    pub fn is_reduced(&self) -> bool {
        self.frame.is_some()
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.ring
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Exciton number of working basis state `i`.
    pub fn band_of(&self, i: usize) -> usize {
        self.bands[i]
    }

    /// Trap level (0 = β, 1 = α) of working basis state `i`.
    pub fn trap_of(&self, i: usize) -> usize {
        self.traps[i]
    }

    /// Bohr frequency `E_n − E_m` of the transition `n → m`.
    pub fn frequency(&self, m: usize, n: usize) -> f64 {
        self.energies[n] - self.energies[m]
    }

    /// Index in the unreduced composite basis.
    pub fn composite_index(&self, ring_state: usize, trap_state: usize) -> usize {
        ring_state * self.trap_dim + trap_state
    }

    /// Unreduced composite-basis matrix restricted to the working space.
    pub fn restrict(&self, m: Mat<c64>) -> Mat<c64> {
        match &self.frame {
            Some(v) => linalg::to_basis(m.as_ref(), v.as_ref()),
            None => m,
        }
    }

    /// Product-basis operator (ring-only or composite) in the working basis.
    pub fn to_eigenbasis(&self, op: &Operator) -> Result<Mat<c64>> {
        let rd = self.ring_dim();
        if op.ring_dim() != rd {
            return Err(Error::DimensionMismatch {
                expected: rd,
                found: op.ring_dim(),
            });
        }
        let u = self.ring.vectors();
        if op.trap_dim() == 1 {
            let ring = linalg::to_basis(op.matrix(), u);
            return Ok(self.lift_ring(ring.as_ref()));
        }
        if op.trap_dim() != self.trap_dim {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                found: op.dim(),
            });
        }
        let uc = linalg::kron(u, linalg::identity(self.trap_dim).as_ref());
        Ok(self.restrict(linalg::to_basis(op.matrix(), uc.as_ref())))
    }

    /// Working-basis matrix back to the product basis.
    pub fn from_eigenbasis(&self, m: MatRef<'_, c64>) -> Mat<c64> {
        let full = match &self.frame {
            Some(v) => linalg::from_basis(m, v.as_ref()),
            None => m.to_owned(),
        };
        let uc = linalg::kron(self.ring.vectors(), linalg::identity(self.trap_dim).as_ref());
        linalg::from_basis(full.as_ref(), uc.as_ref())
    }

    /// `A ⊗ 1_trap` in the working basis, for a ring matrix already in the
    /// ring eigenbasis.
    pub fn lift_ring(&self, ring: MatRef<'_, c64>) -> Mat<c64> {
        self.restrict(linalg::kron(ring, linalg::identity(self.trap_dim).as_ref()))
    }

    /// `−i[H, ·]` with `H` diagonal in this basis.
    pub fn coherent(&self) -> Superoperator {
        let d = self.dim();
        let mut s = Superoperator::zeros(d, "hamiltonian");
        for n in 0..d {
            for m in 0..d {
                let w = self.energies[m] - self.energies[n];
                s.matrix[(m + n * d, m + n * d)] = c64::new(0.0, -w);
            }
        }
        s
    }

    /// Restricts to the smallest subspace that contains the ground state
    /// (ring ground, trap β) and is invariant under `generators`, given in
    /// the unreduced composite basis. Unchanged when that is everything.
    pub fn reduced_to_reachable(self, generators: &[Mat<c64>]) -> Result<Self> {
        if self.is_reduced() {
            return Err(Error::Conflict("context is already reduced".into()));
        }
        let d = self.full_dim();
        if let Some(g) = generators.iter().find(|g| g.nrows() != d || g.ncols() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: g.nrows(),
            });
        }
        let groups = self.label_groups();
        let mut group_of = vec![0; d];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                group_of[i] = g;
            }
        }
        let mut basis: Vec<Vec<Vec<c64>>> = vec![Vec::new(); groups.len()];
        let mut start = vec![ZERO; d];
        start[0] = ONE;
        basis[group_of[0]].push(start.clone());
        let mut queue = std::collections::VecDeque::from([start]);
        let scales: Vec<f64> = generators.iter().map(|g| linalg::max_abs(g.as_ref())).collect();
        let mut found = 1;
        while let Some(w) = queue.pop_front() {
            if found == d {
                break;
            }
            for (g, &scale) in generators.iter().zip(&scales) {
                if scale == 0.0 {
                    continue;
                }
                let y: Vec<c64> = (0..d)
                    .map(|i| (0..d).filter(|&j| w[j] != ZERO).map(|j| g[(i, j)] * w[j]).sum())
                    .collect();
                for (gi, members) in groups.iter().enumerate() {
                    let mut c = vec![ZERO; d];
                    let mut any = false;
                    for &i in members {
                        if y[i] != ZERO {
                            c[i] = y[i];
                            any = true;
                        }
                    }
                    if !any {
                        continue;
                    }
                    for _ in 0..2 {
                        for b in &basis[gi] {
                            let overlap: c64 = members.iter().map(|&i| b[i].conj() * c[i]).sum();
                            for &i in members {
                                c[i] -= b[i] * overlap;
                            }
                        }
                    }
                    let norm = members.iter().map(|&i| c[i].norm_sqr()).sum::<f64>().sqrt();
                    if norm > REACHABLE_TOL * scale {
                        for &i in members {
                            c[i] /= norm;
                        }
                        basis[gi].push(c.clone());
                        queue.push_back(c);
                        found += 1;
                    }
                }
            }
        }
        if found == d {
            return Ok(self);
        }
        let columns: Vec<Vec<c64>> = basis.into_iter().flatten().collect();
        let v = Mat::from_fn(d, columns.len(), |i, j| columns[j][i]);
        let pick = |labels: &[usize], j: usize| {
            let i = (0..d).find(|&i| columns[j][i] != ZERO).unwrap_or(0);
            labels[i]
        };
        let k = columns.len();
        let energies = (0..k)
            .map(|j| (0..d).map(|i| columns[j][i].norm_sqr() * self.energies[i]).sum())
            .collect();
        let bands = (0..k).map(|j| pick(&self.bands, j)).collect();
        let traps = (0..k).map(|j| pick(&self.traps, j)).collect();
        Ok(RedfieldContext {
            energies,
            bands,
            traps,
            frame: Some(v),
            ..self
        })
    }

    /// Unreduced indices grouped by band, trap level and energy, in
    /// composite order of the first member.
    fn label_groups(&self) -> Vec<Vec<usize>> {
        let d = self.full_dim();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..d {
            let home = groups.iter_mut().find(|g| {
                let j = g[0];
                self.bands[j] == self.bands[i]
                    && self.traps[j] == self.traps[i]
                    && (self.energies[j] - self.energies[i]).abs() < DEGENERACY_TOL
            });
            match home {
                Some(g) => g.push(i),
                None => groups.push(vec![i]),
            }
        }
        groups
    }

    pub fn omega_t(&self) -> f64 {
        self.omega_t
    }
}

/// Relative size below which a new direction counts as numerical noise when
/// building the reachable subspace.
pub const REACHABLE_TOL: f64 = 1e-8;

/// One bath channel: a Hermitian coupling (eigenbasis) and its spectrum.
#[derive(Clone, Debug)]
pub struct BathChannel {
    pub coupling: Mat<c64>,
    pub spectrum: PowerSpectrum,
}

/// Non-secular Bloch-Redfield dissipator `−[A, Λρ − ρΛ†]` summed over
/// channels, with `Λ_mn = A_mn S(E_n − E_m) / 2` and no Lamb shift.
pub fn build_redfield(energies: &[f64], channels: &[BathChannel], label: &str) -> Result<Superoperator> {
    let d = energies.len();
    let mut out = Superoperator::zeros(d, label);
    for ch in channels {
        let a = ch.coupling.as_ref();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: a.nrows(),
            });
        }
        let deviation = linalg::hermiticity_deviation(a);
        if deviation > 1e-10 * linalg::max_abs(a).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        if ch.spectrum.gamma == 0.0 {
            continue;
        }
        let lambda = Mat::from_fn(d, d, |m, n| {
            let x = a[(m, n)];
            if x == ZERO {
                ZERO
            } else {
                x * (0.5 * ch.spectrum.eval(energies[n] - energies[m]))
            }
        });
        let id = linalg::identity(d);
        let a_lambda = a * &lambda;
        let lambda_dag_a = lambda.adjoint() * a;
        let lambda_dag = linalg::adjoint(lambda.as_ref());
        // −AΛρ + AρΛ† + ΛρA − ρΛ†A
        out.add_sandwich(a_lambda.as_ref(), id.as_ref(), -ONE);
        out.add_sandwich(a, lambda_dag.as_ref(), ONE);
        out.add_sandwich(lambda.as_ref(), a, ONE);
        out.add_sandwich(id.as_ref(), lambda_dag_a.as_ref(), -ONE);
    }
    Ok(out)
}

/// `γ (A ρ A† − ½{A†A, ρ})`.
pub fn lindblad_superop(a: MatRef<'_, c64>, rate: f64, label: &str) -> Superoperator {
    let d = a.nrows();
    let mut out = Superoperator::zeros(d, label);
    add_lindblad(&mut out, a, rate);
    out
}

fn add_lindblad(out: &mut Superoperator, a: MatRef<'_, c64>, rate: f64) {
    if rate == 0.0 {
        return;
    }
    let d = a.nrows();
    let id = linalg::identity(d);
    let ad = linalg::adjoint(a);
    let ada = &ad * a;
    out.add_sandwich(a, ad.as_ref(), real(rate));
    out.add_sandwich(ada.as_ref(), id.as_ref(), real(-0.5 * rate));
    out.add_sandwich(id.as_ref(), ada.as_ref(), real(-0.5 * rate));
}

/// Eigenbasis optical coupling `J^+ + J^-` of the ring, before lifting.
pub fn optical_coupling(ring: &RingSpec, es: &EigenSystem) -> Result<Mat<c64>> {
    let jp = build_collective_dipole(ring, Direction::Raise)?;
    let a = jp.add(&jp.adjoint());
    Ok(es.to_eigenbasis(a.matrix()))
}

/// Zeroes every dipole element between a ratchet state and the band above
/// it, in both directions.
pub fn forced_dark_coupling(coupling: &mut Mat<c64>, es: &EigenSystem, classification: &Classification) {
    for r in classification.ratchets() {
        for u in es.band_states(es.band(r) + 1) {
            coupling[(u, r)] = ZERO;
            coupling[(r, u)] = ZERO;
        }
    }
}

/// Optical coupling in the working basis, with forced-dark cuts if given.
pub fn optical_operator(ctx: &RedfieldContext, ring: &RingSpec, fd: Option<&Classification>) -> Result<Mat<c64>> {
    let mut a = optical_coupling(ring, ctx.eigensystem())?;
    if let Some(c) = fd {
        forced_dark_coupling(&mut a, ctx.eigensystem(), c);
    }
    Ok(ctx.lift_ring(a.as_ref()))
}

fn optical_with(ctx: &RedfieldContext, ring: &RingSpec, bath: &BathSpec, fd: Option<&Classification>) -> Result<Superoperator> {
    let channel = BathChannel {
        coupling: optical_operator(ctx, ring, fd)?,
        spectrum: PowerSpectrum::new(bath.gamma_o, bath.t_o),
    };
    build_redfield(ctx.energies(), &[channel], if fd.is_some() { "optical-fd" } else { "optical" })
}

/// Collective photon bath acting through `J^+ + J^-`.
pub fn optical_dissipator(ctx: &RedfieldContext, ring: &RingSpec, bath: &BathSpec) -> Result<Superoperator> {
    optical_with(ctx, ring, bath, None)
}

/// Optical bath with ratchet-to-upper-band dipole elements removed.
pub fn apply_forced_dark(
    ctx: &RedfieldContext,
    ring: &RingSpec,
    bath: &BathSpec,
    classification: &Classification,
) -> Result<Superoperator> {
    optical_with(ctx, ring, bath, Some(classification))
}

/// Independent phonon baths coupling through `σ_i^z` on every site.
pub fn phonon_dissipator(ctx: &RedfieldContext, ring: &RingSpec, bath: &BathSpec) -> Result<Superoperator> {
    let n = ring.n_sites();
    if bath.gamma_p == 0.0 {
        return Ok(Superoperator::zeros(ctx.dim(), "phonon"));
    }
    let spectrum = PowerSpectrum::new(bath.gamma_p, bath.t_p);
    let channels = (0..n)
        .map(|i| {
            Ok(BathChannel {
                coupling: ctx.to_eigenbasis(&sigma_z(i, n)?)?,
                spectrum,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_redfield(ctx.energies(), &channels, "phonon")
}

fn require_trap(ctx: &RedfieldContext, what: &str) -> Result<()> {
    if !ctx.has_trap() {
        return Err(Error::Conflict(format!("{what} needs a trap in the Hilbert space")));
    }
    Ok(())
}

/// Unit-rate trap decay `D[σ_t^-]`.
pub fn trap_decay(ctx: &RedfieldContext) -> Result<Superoperator> {
    require_trap(ctx, "trap decay")?;
    let a = ctx.to_eigenbasis(&trap_sigma_minus(ctx.ring_dim()))?;
    Ok(lindblad_superop(a.as_ref(), 1.0, "trap-decay"))
}

/// Incoherent hop from ring site `site` into the trap, `D[σ_i^- σ_t^+]`.
pub fn single_site_extraction(ctx: &RedfieldContext, ring: &RingSpec, site: usize, gamma_x: f64) -> Result<Superoperator> {
    require_trap(ctx, "extraction")?;
    let n = ring.n_sites();
    let op = sigma_minus(site, n)?.with_trap().compose(&trap_sigma_plus(ctx.ring_dim()));
    let a = ctx.to_eigenbasis(&op)?;
    Ok(lindblad_superop(a.as_ref(), gamma_x, "extraction"))
}

/// Band-edge extraction jumps `|target_{n-1}⟩⟨source_n| ⊗ σ_t^+` for every
/// band, in the working basis. Sources and targets are band bottoms, or band
/// tops without phonons. Each member of a degenerate source edge gets its own
/// jump into the first member of the target edge.
pub fn collective_extraction_operators(ctx: &RedfieldContext, scenario: ScenarioKind) -> Result<Vec<Mat<c64>>> {
    require_trap(ctx, "extraction")?;
    let es = ctx.eigensystem();
    let top = scenario == ScenarioKind::NoPhonons;
    let d = ctx.full_dim();
    let mut ops = Vec::new();
    for n in 1..=es.max_band() {
        let Some(&target) = es.band_edge(n - 1, top).first() else {
            continue;
        };
        for source in es.band_edge(n, top) {
            let mut a = Mat::<c64>::zeros(d, d);
            // trap β → α alongside the ring jump
            a[(ctx.composite_index(target, 1), ctx.composite_index(source, 0))] = ONE;
            ops.push(ctx.restrict(a));
        }
    }
    Ok(ops)
}

/// Lindblad sum over [`collective_extraction_operators`].
pub fn collective_extraction(ctx: &RedfieldContext, scenario: ScenarioKind, gamma_x: f64) -> Result<Superoperator> {
    let ops = collective_extraction_operators(ctx, scenario)?;
    let mut out = Superoperator::zeros(ctx.dim(), "extraction");
    if gamma_x == 0.0 {
        return Ok(out);
    }
    for a in &ops {
        add_lindblad(&mut out, a.as_ref(), gamma_x);
    }
    Ok(out)
}

/// Independent per-site decay `Σ_i D[σ_i^-]`.
pub fn non_radiative_dissipator(ctx: &RedfieldContext, ring: &RingSpec, gamma_nr: f64) -> Result<Superoperator> {
    let n = ring.n_sites();
    let mut out = Superoperator::zeros(ctx.dim(), "non-radiative");
    if gamma_nr == 0.0 {
        return Ok(out);
    }
    for i in 0..n {
        let a = ctx.to_eigenbasis(&sigma_minus(i, n)?)?;
        add_lindblad(&mut out, a.as_ref(), gamma_nr);
    }
    Ok(out)
}

/// Jumps from every state with two or more excitons into the brightest
/// single-exciton state, in the working basis.
pub fn annihilation_operators(ctx: &RedfieldContext) -> Vec<Mat<c64>> {
    let es = ctx.eigensystem();
    let Some(&bright) = es.band_states(1).last() else {
        return Vec::new();
    };
    let rd = es.dim();
    (0..rd)
        .filter(|&m| es.band(m) >= 2)
        .map(|m| {
            let mut ring = Mat::<c64>::zeros(rd, rd);
            ring[(bright, m)] = ONE;
            ctx.lift_ring(ring.as_ref())
        })
        .collect()
}

/// Lindblad sum over [`annihilation_operators`].
pub fn eea_dissipator(ctx: &RedfieldContext, gamma_eea: f64) -> Result<Superoperator> {
    let mut out = Superoperator::zeros(ctx.dim(), "annihilation");
    if gamma_eea == 0.0 {
        return Ok(out);
    }
    for a in annihilation_operators(ctx) {
        add_lindblad(&mut out, a.as_ref(), gamma_eea);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_ring_hamiltonian, number_operator};
    use crate::spectral::{classify_states, numeric_diagonalize};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
        let m = Mat::from_fn(d, d, |_, _| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        Mat::from_fn(d, d, |i, j| m[(i, j)] + m[(j, i)].conj())
    }

    fn context(trap: bool) -> (RingSpec, RedfieldContext) {
        let ring = RingSpec::default();
        let h = build_ring_hamiltonian(&ring).unwrap();
        let es = numeric_diagonalize(&h, &number_operator(4).unwrap()).unwrap();
        let ctx = RedfieldContext::new(es, if trap { 2 } else { 1 }, 1.72).unwrap();
        (ring, ctx)
    }

    fn check_channel(s: &Superoperator) {
        assert!(s.trace_leak() < 1e-10 * s.max_abs().max(1e-30), "{} leaks trace", s.label());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let rho = random_hermitian(s.hilbert_dim(), &mut rng);
            let out = s.apply(rho.as_ref());
            assert!(linalg::hermiticity_deviation(out.as_ref()) < 1e-10 * s.max_abs().max(1e-30));
        }
    }

    #[test]
    fn bose_einstein_values() {
        assert_abs_diff_eq!(bose_einstein(1.8, 5800.0).unwrap(), 0.02805, epsilon = 1e-4);
        assert_abs_diff_eq!(bose_einstein(0.04, 300.0).unwrap(), 0.270371, epsilon = 1e-6);
        assert_eq!(bose_einstein(1.0, 0.0).unwrap(), 0.0);
        assert!(bose_einstein(0.0, 300.0).is_err());
        assert!(bose_einstein(-1.0, 300.0).is_err());
    }

    #[test]
    fn power_spectrum_detailed_balance() {
        let s = PowerSpectrum::new(1e-3, 300.0);
        let w = 0.04;
        assert_abs_diff_eq!(s.eval(w) / s.eval(-w), (w / (K_B * 300.0)).exp(), epsilon = 1e-9);
        assert_eq!(s.eval(0.0), 0.0);
    }

    #[test]
    fn single_emitter_reaches_thermal_ratio() {
        let w = 1.8;
        let energies = [0.0, w];
        let sx = Mat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO });
        let ch = BathChannel {
            coupling: sx,
            spectrum: PowerSpectrum::new(1e-6, 5800.0),
        };
        let l = build_redfield(&energies, &[ch], "optical").unwrap();
        // populations: d p_e / dt = −Γ↓ p_e + Γ↑ p_g
        let down = -l.matrix()[(3, 3)].re;
        let up = l.matrix()[(3, 0)].re;
        let n = bose_einstein(w, 5800.0).unwrap();
        assert_abs_diff_eq!(up / down, n / (n + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(up / down, (-w / (K_B * 5800.0)).exp(), epsilon = 1e-12);
    }

    #[test]
    fn zero_rate_channels_vanish() {
        let (ring, ctx) = context(true);
        let bath = BathSpec {
            gamma_o: 0.0,
            gamma_p: 0.0,
            ..BathSpec::default()
        };
        assert!(optical_dissipator(&ctx, &ring, &bath).unwrap().is_zero());
        assert!(phonon_dissipator(&ctx, &ring, &bath).unwrap().is_zero());
        assert!(single_site_extraction(&ctx, &ring, 0, 0.0).unwrap().is_zero());
        assert!(collective_extraction(&ctx, ScenarioKind::Ratchets, 0.0).unwrap().is_zero());
        assert!(non_radiative_dissipator(&ctx, &ring, 0.0).unwrap().is_zero());
        assert!(eea_dissipator(&ctx, 0.0).unwrap().is_zero());
        let id = linalg::identity(4);
        assert!(lindblad_superop(id.as_ref(), 1.0, "id").is_zero());
    }

    #[test]
    fn every_channel_preserves_trace_and_hermiticity() {
        let (ring, ctx) = context(true);
        let bath = BathSpec::default();
        let es = ctx.eigensystem().clone();
        let jp = build_collective_dipole(&ring, Direction::Raise).unwrap();
        let c = classify_states(&es, &jp).unwrap();
        check_channel(&ctx.coherent());
        check_channel(&optical_dissipator(&ctx, &ring, &bath).unwrap());
        check_channel(&apply_forced_dark(&ctx, &ring, &bath, &c).unwrap());
        check_channel(&phonon_dissipator(&ctx, &ring, &bath).unwrap());
        check_channel(&trap_decay(&ctx).unwrap());
        check_channel(&single_site_extraction(&ctx, &ring, 2, 1e-7).unwrap());
        check_channel(&collective_extraction(&ctx, ScenarioKind::Ratchets, 1e-7).unwrap());
        check_channel(&collective_extraction(&ctx, ScenarioKind::NoPhonons, 1e-7).unwrap());
        check_channel(&non_radiative_dissipator(&ctx, &ring, 1e-7).unwrap());
        check_channel(&eea_dissipator(&ctx, 1e-6).unwrap());
    }

    #[test]
    fn optical_rates_match_transition_table() {
        let (ring, ctx) = context(false);
        let bath = BathSpec::default();
        let l = optical_dissipator(&ctx, &ring, &bath).unwrap();
        let es = ctx.eigensystem();
        let jp = build_collective_dipole(&ring, Direction::Raise).unwrap();
        let c = classify_states(es, &jp).unwrap();
        let d = ctx.dim();
        let pop = |m: usize| m * (d + 1);
        let spec = PowerSpectrum::new(bath.gamma_o, bath.t_o);
        for a in 0..d {
            for b in 0..d {
                if es.band(b) != es.band(a) + 1 {
                    continue;
                }
                let w = c.table.weight(a, b);
                let up = l.matrix()[(pop(b), pop(a))].re;
                let down = l.matrix()[(pop(a), pop(b))].re;
                let de = es.energies()[b] - es.energies()[a];
                assert_abs_diff_eq!(up, w * spec.eval(-de), epsilon = 1e-18);
                assert_abs_diff_eq!(down, w * spec.eval(de), epsilon = 1e-18);
            }
        }
        // bright → ground emission
        let bright = 4;
        let n = bose_einstein(1.8, bath.t_o).unwrap();
        assert_abs_diff_eq!(l.matrix()[(pop(0), pop(bright))].re, 4.0 * bath.gamma_o * (n + 1.0), epsilon = 1e-15);
        for r in 1..4 {
            assert!(l.matrix()[(pop(0), pop(r))].re.abs() < 1e-20);
        }
    }

    #[test]
    fn phonons_do_not_mix_bands() {
        let (ring, ctx) = context(false);
        let l = phonon_dissipator(&ctx, &ring, &BathSpec::default()).unwrap();
        let es = ctx.eigensystem();
        let d = ctx.dim();
        for c in 0..d * d {
            let (m, n) = (c % d, c / d);
            for r in 0..d * d {
                let (p, q) = (r % d, r / d);
                let x = l.matrix()[(r, c)];
                if x != ZERO {
                    assert_eq!(es.band(p) as isize - es.band(q) as isize, es.band(m) as isize - es.band(n) as isize);
                }
            }
        }
        // bright → ratchet downhill versus uphill ratio
        let pop = |m: usize| m * (d + 1);
        let down = l.matrix()[(pop(1), pop(4))].re;
        let up = l.matrix()[(pop(4), pop(1))].re;
        assert_abs_diff_eq!(down / up, (4.0 * 0.02 / (K_B * 300.0)).exp(), epsilon = 1e-8);
    }

    #[test]
    fn forced_dark_cuts_ratchet_absorption_only() {
        let (ring, ctx) = context(false);
        let es = ctx.eigensystem();
        let jp = build_collective_dipole(&ring, Direction::Raise).unwrap();
        let c = classify_states(es, &jp).unwrap();
        let mut a = optical_coupling(&ring, es).unwrap();
        let before = a.clone();
        forced_dark_coupling(&mut a, es, &c);
        let ratchets = c.ratchets();
        assert_eq!(ratchets.len(), 3);
        for &r in &ratchets[..3] {
            let up: f64 = es.band_states(2).iter().map(|&u| a[(u, r)].norm_sqr()).sum();
            assert_eq!(up, 0.0);
        }
        assert_eq!(a[(4, 0)], before[(4, 0)]);
    }

    #[test]
    fn single_site_extraction_moves_exciton_to_trap() {
        let ring = RingSpec::uniform(2, 1.0, 0.0).unwrap();
        let h = build_ring_hamiltonian(&ring).unwrap();
        let es = numeric_diagonalize(&h, &number_operator(2).unwrap()).unwrap();
        let ctx = RedfieldContext::new(es, 2, 1.0).unwrap();
        let l = single_site_extraction(&ctx, &ring, 1, 2.0).unwrap();
        // product basis = eigenbasis when S = 0, up to ordering
        let es = ctx.eigensystem();
        let find = |bits: usize| (0..4).find(|&s| es.vector(s)[bits].norm() > 0.5).unwrap();
        let d = ctx.dim();
        let on_site1 = ctx.composite_index(find(0b10), 0);
        let to = ctx.composite_index(find(0b00), 1);
        assert_abs_diff_eq!(l.matrix()[(to * (d + 1), on_site1 * (d + 1))].re, 2.0, epsilon = 1e-14);
        let on_site0 = ctx.composite_index(find(0b01), 0);
        assert_eq!(l.matrix()[(to * (d + 1), on_site0 * (d + 1))], ZERO);
        // trap already excited: no transfer out of that state
        let blocked = ctx.composite_index(find(0b10), 1);
        assert_eq!(l.matrix()[(blocked * (d + 1), blocked * (d + 1))], ZERO);
    }

    #[test]
    fn collective_extraction_uses_band_edges() {
        let (_, ctx) = context(true);
        let d = ctx.dim();
        let pop = |m: usize| m * (d + 1);
        let r = collective_extraction(&ctx, ScenarioKind::Ratchets, 1.0).unwrap();
        // ω − 2S state (ring index 1) to ground with the trap excited
        assert_abs_diff_eq!(r.matrix()[(pop(ctx.composite_index(0, 1)), pop(ctx.composite_index(1, 0)))].re, 1.0);
        let np = collective_extraction(&ctx, ScenarioKind::NoPhonons, 1.0).unwrap();
        assert_abs_diff_eq!(np.matrix()[(pop(ctx.composite_index(0, 1)), pop(ctx.composite_index(4, 0)))].re, 1.0);
        assert_eq!(np.matrix()[(pop(ctx.composite_index(0, 1)), pop(ctx.composite_index(1, 0)))], ZERO);
    }

    #[test]
    fn annihilation_feeds_bright_state() {
        let (_, ctx) = context(false);
        let d = ctx.dim();
        let l = eea_dissipator(&ctx, 3.0).unwrap();
        let pop = |m: usize| m * (d + 1);
        for m in ctx.eigensystem().band_states(2) {
            assert_abs_diff_eq!(l.matrix()[(pop(4), pop(m))].re, 3.0);
            assert_abs_diff_eq!(l.matrix()[(pop(m), pop(m))].re, -3.0);
        }
    }

    #[test]
    fn non_radiative_total_decay_of_single_excitation() {
        let ring = RingSpec::uniform(2, 1.0, 0.0).unwrap();
        let h = build_ring_hamiltonian(&ring).unwrap();
        let es = numeric_diagonalize(&h, &number_operator(2).unwrap()).unwrap();
        let ctx = RedfieldContext::new(es, 1, 0.0).unwrap();
        let bath = BathSpec {
            gamma_p: 0.0,
            ..BathSpec::default()
        };
        let mut l = optical_dissipator(&ctx, &ring, &bath).unwrap();
        let nr = non_radiative_dissipator(&ctx, &ring, 5e-7).unwrap();
        l.add_assign(&nr, 1.0);
        let d = ctx.dim();
        let n = bose_einstein(1.0, bath.t_o).unwrap();
        // the one-exciton states sit at ring indices 1 and 2; total outflow from each
        for s in [1usize, 2] {
            let outflow = -l.matrix()[(s * (d + 1), s * (d + 1))].re;
            // one optical partner below (ground) plus absorption into the doubly excited state
            let expected = bath.gamma_o * (n + 1.0) * 1.0 + bath.gamma_o * n + 5e-7;
            assert_abs_diff_eq!(outflow, expected, epsilon = 1e-18);
        }
    }
}
