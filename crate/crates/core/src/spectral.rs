//! Band structure of the ring: Jordan-Wigner momentum labels, analytic and
//! numeric eigensystems, optical transition weights and state classification.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ZERO};
use crate::model::{Operator, MAX_SITES};

/// Weight below which a dipole coupling counts as absent.
pub const RATCHET_THRESHOLD: f64 = 1e-9;

/// Eigenvalues closer than this (eV) are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// A set of occupied fermion momenta. Momenta are stored as lattice indices
/// `j`, with `k_j = 2πj/N` for an odd number of excitons and
/// `k_j = π(2j+1)/N` for an even number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KSet {
    n_sites: usize,
    indices: Vec<usize>,
}

impl KSet {
    pub fn new(n_sites: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.len() > n_sites {
            return Err(Error::ExcitationOutOfRange {
                n: indices.len(),
                n_sites,
            });
        }
        if indices.windows(2).any(|w| w[0] == w[1]) || indices.iter().any(|&j| j >= n_sites) {
            return Err(Error::invalid("kset", format!("indices {indices:?} must be distinct and below {n_sites}")));
        }
        Ok(KSet { n_sites, indices })
    }

    pub fn empty(n_sites: usize) -> Self {
        KSet {
            n_sites,
            indices: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_odd(&self) -> bool {
        self.len() % 2 == 1
    }

    pub fn ks(&self) -> Vec<f64> {
        self.indices.iter().map(|&j| k_at(self.n_sites, self.len(), j)).collect()
    }

    /// Total momentum in units of `π/N`, reduced mod `2N`.
    pub fn total_momentum(&self) -> usize {
        let n = self.len();
        let offset = if n % 2 == 1 { 0 } else { n };
        (2 * self.indices.iter().sum::<usize>() + offset) % (2 * self.n_sites)
    }

    pub fn energy(&self, site_energy: f64, hopping: f64) -> f64 {
        self.ks().iter().map(|k| site_energy + 2.0 * hopping * k.cos()).sum()
    }
}

impl fmt::Display for KSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // momenta in units of π/N
        let n = self.len();
        let parts: Vec<String> = self
            .indices
            .iter()
            .map(|&j| if n % 2 == 1 { 2 * j } else { 2 * j + 1 }.to_string())
            .collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

fn k_at(n_sites: usize, n_excitons: usize, j: usize) -> f64 {
    if n_excitons % 2 == 1 {
        2.0 * PI * j as f64 / n_sites as f64
    } else {
        PI * (2 * j + 1) as f64 / n_sites as f64
    }
}

/// The `N` allowed momenta for a band with `n_excitons` excitations.
pub fn k_values(n_sites: usize, n_excitons: usize) -> Result<Vec<f64>> {
    if n_excitons > n_sites {
        return Err(Error::ExcitationOutOfRange {
            n: n_excitons,
            n_sites,
        });
    }
    Ok((0..n_sites).map(|j| k_at(n_sites, n_excitons, j)).collect())
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// All momentum sets of a band.
pub fn band_ksets(n_sites: usize, n_excitons: usize) -> Result<Vec<KSet>> {
    if n_excitons > n_sites {
        return Err(Error::ExcitationOutOfRange {
            n: n_excitons,
            n_sites,
        });
    }
    Ok(combinations(n_sites, n_excitons)
        .into_iter()
        .map(|indices| KSet { n_sites, indices })
        .collect())
}

/// Every `(K, λ_K)` of a uniform ring, band by band, ascending energy within a band.
pub fn analytic_spectrum(n_sites: usize, site_energy: f64, hopping: f64) -> Result<Vec<(KSet, f64)>> {
    if n_sites > MAX_SITES {
        return Err(Error::TooManySites {
            sites: n_sites,
            max: MAX_SITES,
            what: "two-level ring",
        });
    }
    let mut out = Vec::with_capacity(1 << n_sites);
    for n in 0..=n_sites {
        let mut band: Vec<(KSet, f64)> = band_ksets(n_sites, n)?
            .into_iter()
            .map(|k| {
                let e = k.energy(site_energy, hopping);
                (k, e)
            })
            .collect();
        band.sort_by(|a, b| a.1.total_cmp(&b.1));
        out.extend(band);
    }
    Ok(out)
}

#[allow(clippy::needless_range_loop)]
fn determinant(mut m: Vec<Vec<c64>>) -> c64 {
    let n = m.len();
    let mut det = c64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .unwrap_or(col);
        if m[pivot][col] == ZERO {
            return ZERO;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for row in col + 1..n {
            let f = m[row][col] / p;
            for c in col..n {
                let v = m[col][c];
                m[row][c] -= f * v;
            }
        }
    }
    det
}

/// Site-basis amplitudes of the Jordan-Wigner eigenstate `Π_k c_k^† |0⟩`,
/// with `c_k^† = N^{-1/2} Σ_j e^{ik(j+1)} c_j^†`.
pub fn analytic_eigenvector(kset: &KSet) -> Vec<c64> {
    let n_sites = kset.n_sites;
    let n = kset.len();
    let ks = kset.ks();
    let norm = (n_sites as f64).powf(-(n as f64) / 2.0);
    (0..1usize << n_sites)
        .map(|b| {
            if b.count_ones() as usize != n {
                return ZERO;
            }
            let sites: Vec<usize> = (0..n_sites).filter(|&i| (b >> i) & 1 == 1).collect();
            let m = ks
                .iter()
                .map(|&k| sites.iter().map(|&s| c64::cis(k * (s + 1) as f64)).collect())
                .collect();
            determinant(m) * norm
        })
        .collect()
}

/// `|⟨K'|J^+|K⟩|²` from the closed-form Slater-determinant expression,
/// accumulated in the log domain.
pub fn transition_rate_analytic(k: &KSet, k_prime: &KSet) -> Result<f64> {
    if k.n_sites != k_prime.n_sites {
        return Err(Error::DimensionMismatch {
            expected: k.n_sites,
            found: k_prime.n_sites,
        });
    }
    if k_prime.len() != k.len() + 1 {
        return Err(Error::NotAdjacentBands {
            from: k.len(),
            to: k_prime.len(),
        });
    }
    if k.total_momentum() != k_prime.total_momentum() {
        return Ok(0.0);
    }
    let n_sites = k.n_sites as f64;
    let n = k.len() as f64;
    let (ka, kb) = (k.ks(), k_prime.ks());

    let mut log_mag = n * 2f64.ln() + (0.5 - n) * n_sites.ln();
    for i in 0..ka.len() {
        for i2 in 0..i {
            log_mag += (c64::cis(ka[i]) - c64::cis(ka[i2])).norm().ln();
        }
    }
    for j in 0..kb.len() {
        for j2 in 0..j {
            log_mag += (c64::cis(-kb[j]) - c64::cis(-kb[j2])).norm().ln();
        }
    }
    for &ki in &ka {
        for &kj in &kb {
            let d = (c64::new(1.0, 0.0) - c64::cis(kj - ki)).norm();
            if d < 1e-12 {
                return Err(Error::SingularTransition { k: ki, k_prime: kj });
            }
            log_mag -= d.ln();
        }
    }
    Ok((2.0 * log_mag).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateLabel {
    Ground,
    Bright,
    Ratchet,
    Dark,
}

impl StateLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::Ground => "ground",
            StateLabel::Bright => "bright",
            StateLabel::Ratchet => "ratchet",
            StateLabel::Dark => "dark",
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Eigenstates ordered by band, then by energy.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    energies: Vec<f64>,
    vectors: Mat<c64>,
    bands: Vec<usize>,
    k_sets: Option<Vec<KSet>>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns, in the product basis.
    pub fn vectors(&self) -> MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    pub fn bands(&self) -> &[usize] {
        &self.bands
    }

    pub fn band(&self, state: usize) -> usize {
        self.bands[state]
    }

    pub fn max_band(&self) -> usize {
        self.bands.iter().copied().max().unwrap_or(0)
    }

    /// State indices of band `n`, ascending in energy.
    pub fn band_states(&self, n: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.bands[i] == n).collect()
    }

    pub fn k_sets(&self) -> Option<&[KSet]> {
        self.k_sets.as_deref()
    }

    pub fn vector(&self, state: usize) -> Vec<c64> {
        (0..self.dim()).map(|i| self.vectors[(i, state)]).collect()
    }

    /// `U† A U` for an operator on the same space.
    pub fn to_eigenbasis(&self, op: MatRef<'_, c64>) -> Mat<c64> {
        linalg::to_basis(op, self.vectors.as_ref())
    }

    pub fn from_eigenbasis(&self, op: MatRef<'_, c64>) -> Mat<c64> {
        linalg::from_basis(op, self.vectors.as_ref())
    }

    /// Lowest and highest states of band `n` together with their degenerate partners.
    pub fn band_edge(&self, n: usize, top: bool) -> Vec<usize> {
        let states = self.band_states(n);
        let Some(&edge) = (if top { states.last() } else { states.first() }) else {
            return Vec::new();
        };
        states
            .into_iter()
            .filter(|&s| (self.energies[s] - self.energies[edge]).abs() < DEGENERACY_TOL)
            .collect()
    }

    /// Attaches momentum labels by matching sorted analytic energies band by
    /// band. Within degenerate subspaces the pairing is arbitrary.
    pub fn with_analytic_labels(mut self, site_energy: f64, hopping: f64) -> Result<Self> {
        let n_sites = self.max_band();
        if self.dim() != 1 << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                found: self.dim(),
            });
        }
        let analytic = analytic_spectrum(n_sites, site_energy, hopping)?;
        // both lists are ordered by (band, energy)
        self.k_sets = Some(analytic.into_iter().map(|(k, _)| k).collect());
        Ok(self)
    }
}

/// Hermitian eigendecomposition carried out block by block in the sectors of
/// a diagonal number operator, so each eigenvector has an exact band index.
pub fn numeric_diagonalize(h: &Operator, number: &Operator) -> Result<EigenSystem> {
    let dim = h.dim();
    if number.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: number.dim(),
        });
    }
    h.ensure_hermitian(1e-12)?;
    let nm = number.matrix();
    for j in 0..dim {
        for i in 0..dim {
            if i != j && nm[(i, j)] != ZERO {
                return Err(Error::NumberOperatorNotDiagonal);
            }
        }
    }
    let deviation = h.commutator(number).max_abs();
    if deviation > 1e-12 * h.max_abs().max(1.0) {
        return Err(Error::NotConserved { deviation });
    }

    let mut sectors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..dim {
        let n = nm[(i, i)].re;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-6 || rounded < 0.0 || nm[(i, i)].im.abs() > 1e-6 {
            return Err(Error::BandAssignment {
                state: i,
                expectation: n,
            });
        }
        sectors.entry(rounded as usize).or_default().push(i);
    }

    let hm = h.matrix();
    let mut energies = Vec::with_capacity(dim);
    let mut bands = Vec::with_capacity(dim);
    let mut vectors = Mat::<c64>::zeros(dim, dim);
    let mut col = 0;
    for (&band, idx) in &sectors {
        let block = Mat::from_fn(idx.len(), idx.len(), |a, b| hm[(idx[a], idx[b])]);
        let (vals, vecs) = linalg::hermitian_eigen(block.as_ref())?;
        for (c, &e) in vals.iter().enumerate() {
            for (r, &basis) in idx.iter().enumerate() {
                vectors[(basis, col)] = vecs[(r, c)];
            }
            energies.push(e);
            bands.push(band);
            col += 1;
        }
    }
    Ok(EigenSystem {
        energies,
        vectors,
        bands,
        k_sets: None,
    })
}

/// `|⟨b|J^+|a⟩|²` from numeric eigenvectors.
pub fn transition_rate_numeric(es: &EigenSystem, j_plus: &Operator, a: usize, b: usize) -> f64 {
    let jm = j_plus.matrix();
    let u = es.vectors();
    let d = es.dim();
    let mut amp = ZERO;
    for i in 0..d {
        let ub = u[(i, b)].conj();
        if ub == ZERO {
            continue;
        }
        for j in 0..d {
            amp += ub * jm[(i, j)] * u[(j, a)];
        }
    }
    amp.norm_sqr()
}

/// Dipole weights `Γ_{a→b} = |⟨b|J^+|a⟩|²` between adjacent bands.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    weights: Vec<f64>,
    dim: usize,
    gamma_plus: Vec<f64>,
    gamma_minus: Vec<f64>,
}

impl TransitionTable {
    pub fn from_eigensystem(es: &EigenSystem, j_plus: &Operator) -> Result<Self> {
        let dim = es.dim();
        if j_plus.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: j_plus.dim(),
            });
        }
        let je = es.to_eigenbasis(j_plus.matrix());
        let mut weights = vec![0.0; dim * dim];
        let mut gamma_plus = vec![0.0; dim];
        let mut gamma_minus = vec![0.0; dim];
        for a in 0..dim {
            for b in 0..dim {
                if es.band(b) != es.band(a) + 1 {
                    continue;
                }
                let w = je[(b, a)].norm_sqr();
                weights[a * dim + b] = w;
                gamma_plus[a] += w;
                gamma_minus[b] += w;
            }
        }
        Ok(TransitionTable {
            weights,
            dim,
            gamma_plus,
            gamma_minus,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Weight for the upward transition `from → to`; zero unless adjacent.
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.dim + to]
    }

    pub fn gamma_plus(&self) -> &[f64] {
        &self.gamma_plus
    }

    pub fn gamma_minus(&self) -> &[f64] {
        &self.gamma_minus
    }
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub labels: Vec<StateLabel>,
    pub table: TransitionTable,
}

impl Classification {
    pub fn ratchets(&self) -> Vec<usize> {
        self.indices_of(StateLabel::Ratchet)
    }

    pub fn indices_of(&self, label: StateLabel) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

pub fn classify_states(es: &EigenSystem, j_plus: &Operator) -> Result<Classification> {
    let table = TransitionTable::from_eigensystem(es, j_plus)?;
    let labels = (0..es.dim())
        .map(|s| {
            let (up, down) = (table.gamma_plus[s], table.gamma_minus[s]);
            if es.band(s) == 0 {
                StateLabel::Ground
            } else if down >= RATCHET_THRESHOLD {
                StateLabel::Bright
            } else if up > RATCHET_THRESHOLD {
                StateLabel::Ratchet
            } else {
                StateLabel::Dark
            }
        })
        .collect();
    Ok(Classification { labels, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_collective_dipole, build_ring_hamiltonian, number_operator, Direction, RingSpec};
    use approx::assert_abs_diff_eq;

    fn eig(spec: &RingSpec) -> (EigenSystem, Operator) {
        let h = build_ring_hamiltonian(spec).unwrap();
        let es = numeric_diagonalize(&h, &number_operator(spec.n_sites()).unwrap()).unwrap();
        (es, build_collective_dipole(spec, Direction::Raise).unwrap())
    }

    #[test]
    fn k_values_follow_band_parity() {
        let q = PI / 4.0;
        let odd = k_values(4, 1).unwrap();
        for (a, b) in odd.iter().zip([0.0, 2.0 * q, 4.0 * q, 6.0 * q]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let even = k_values(4, 2).unwrap();
        for (a, b) in even.iter().zip([q, 3.0 * q, 5.0 * q, 7.0 * q]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let two = k_values(2, 1).unwrap();
        assert_abs_diff_eq!(two[1], PI, epsilon = 1e-15);
        assert!(k_values(4, 5).is_err());
    }

    #[test]
    fn ground_state_has_zero_energy() {
        let spec = analytic_spectrum(4, 1.76, 0.02).unwrap();
        assert!(spec[0].0.is_empty());
        assert_eq!(spec[0].1, 0.0);
        assert_eq!(spec.len(), 16);
    }

    #[test]
    fn band_trace_identity() {
        let (w, s) = (1.76, 0.02);
        for n_sites in 3..=6 {
            let total: f64 = analytic_spectrum(n_sites, w, s).unwrap().iter().map(|p| p.1).sum();
            let expected = n_sites as f64 * (1u64 << (n_sites - 1)) as f64 * w;
            assert_abs_diff_eq!(total, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn jordan_wigner_states_are_eigenvectors() {
        for n_sites in [3usize, 4, 5] {
            let spec = RingSpec::with_hopping(n_sites, 0.03).unwrap();
            let h = build_ring_hamiltonian(&spec).unwrap();
            let w = spec.site_energies[0];
            for (k, e) in analytic_spectrum(n_sites, w, 0.03).unwrap() {
                let v = analytic_eigenvector(&k);
                let hv = h.apply(&v);
                let err = hv.iter().zip(&v).map(|(a, b)| (a - b * e).norm()).fold(0.0, f64::max);
                assert!(err < 1e-12, "N={n_sites} K={k}: {err}");
                let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_couples_only_to_zero_momentum() {
        let empty = KSet::empty(4);
        let k0 = KSet::new(4, vec![0]).unwrap();
        let k1 = KSet::new(4, vec![1]).unwrap();
        assert_abs_diff_eq!(transition_rate_analytic(&empty, &k0).unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(transition_rate_analytic(&empty, &k1).unwrap(), 0.0);
        assert!(matches!(
            transition_rate_analytic(&k0, &k1),
            Err(Error::NotAdjacentBands { .. })
        ));
    }

    #[test]
    fn momentum_conservation_is_exhaustive_for_four_sites() {
        for n in 0..4 {
            for k in band_ksets(4, n).unwrap() {
                for kp in band_ksets(4, n + 1).unwrap() {
                    let g = transition_rate_analytic(&k, &kp).unwrap();
                    if k.total_momentum() != kp.total_momentum() {
                        assert_eq!(g, 0.0);
                    }
                    let brute = {
                        let spec = RingSpec::with_hopping(4, 0.02).unwrap();
                        let jp = build_collective_dipole(&spec, Direction::Raise).unwrap();
                        let v = jp.apply(&analytic_eigenvector(&k));
                        let u = analytic_eigenvector(&kp);
                        u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<c64>().norm_sqr()
                    };
                    assert_abs_diff_eq!(g, brute, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn numeric_spectrum_matches_analytic() {
        let spec = RingSpec::default();
        let (es, _) = eig(&spec);
        let analytic = analytic_spectrum(4, spec.site_energies[0], spec.hopping).unwrap();
        for (i, (k, e)) in analytic.iter().enumerate() {
            assert_eq!(es.band(i), k.len());
            assert_abs_diff_eq!(es.energies()[i], *e, epsilon = 1e-12);
        }
    }

    #[test]
    fn decoupled_ring_has_standard_basis_eigenvectors() {
        let spec = RingSpec::uniform(3, 1.5, 0.0).unwrap();
        let (es, _) = eig(&spec);
        for s in 0..8 {
            let v = es.vector(s);
            let nonzero = v.iter().filter(|z| z.norm() > 1e-12).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn sum_rules_on_transition_table() {
        let spec = RingSpec::default();
        let (es, jp) = eig(&spec);
        let table = TransitionTable::from_eigensystem(&es, &jp).unwrap();
        assert_abs_diff_eq!(table.gamma_plus()[0], 4.0, epsilon = 1e-12);
        let jm = jp.adjoint();
        let jmjp = jm.compose(&jp);
        for s in 0..es.dim() {
            let v = es.vector(s);
            let w = jmjp.apply(&v);
            let expect: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
            assert_abs_diff_eq!(table.gamma_plus()[s], expect, epsilon = 1e-10);
        }
        // same-band pairs carry nothing
        assert_eq!(transition_rate_numeric(&es, &jp, 1, 2), 0.0);
    }

    #[test]
    fn four_site_ring_has_three_band_one_ratchets() {
        let spec = RingSpec::default();
        let (es, jp) = eig(&spec);
        let c = classify_states(&es, &jp).unwrap();
        let band1: Vec<StateLabel> = es.band_states(1).iter().map(|&s| c.labels[s]).collect();
        assert_eq!(
            band1,
            vec![StateLabel::Ratchet, StateLabel::Ratchet, StateLabel::Ratchet, StateLabel::Bright]
        );
        for s in es.band_states(4) {
            assert_eq!(c.table.gamma_plus()[s], 0.0);
        }
        assert_eq!(c.labels[0], StateLabel::Ground);
    }

    #[test]
    fn classification_is_shift_invariant() {
        let base = RingSpec::default();
        let shifted = RingSpec::uniform(4, base.site_energies[0] + 0.3, base.hopping).unwrap();
        let (a, ja) = eig(&base);
        let (b, jb) = eig(&shifted);
        assert_eq!(
            classify_states(&a, &ja).unwrap().labels,
            classify_states(&b, &jb).unwrap().labels
        );
    }

    #[test]
    fn analytic_labels_follow_energy_order() {
        let spec = RingSpec::default();
        let (es, _) = eig(&spec);
        let es = es.with_analytic_labels(spec.site_energies[0], spec.hopping).unwrap();
        let ks = es.k_sets().unwrap();
        // bright single-exciton state is k = 0
        assert_eq!(ks[4].indices(), &[0]);
        assert_eq!(es.band_edge(1, false), vec![1]);
        assert_eq!(es.band_edge(1, true), vec![4]);
    }
}
