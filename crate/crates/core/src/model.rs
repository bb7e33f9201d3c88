//! Parameter records, Hilbert-space layout and Hamiltonians.
//!
//! Basis conventions, fixed throughout the crate:
//!
//! * Ring basis states are labelled by an integer whose base-`q` digits give
//!   the local state of each site, site 0 in the least significant digit
//!   (`q = 2` for the two-level ring, `q = 3` for the `{G, E, D}` model).
//! * The composite space is `ring ⊗ trap` with the ring as the slow index:
//!   `index = ring_index * trap_dim + trap_index`, trap ground `|β⟩ = 0`,
//!   trap excited `|α⟩ = 1`.
//! * Energies and rates are in eV with ħ = 1, temperatures in K.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real, ONE, ZERO};

/// Largest two-level ring handled with dense `2^N` matrices.
pub const MAX_SITES: usize = 12;
/// Largest three-level ring handled with dense `3^N` matrices.
pub const MAX_THREE_LEVEL_SITES: usize = 8;

/// Energy of the bright single-exciton state in the default parameterization.
pub const BRIGHT_STATE_ENERGY: f64 = 1.8;
pub const DEFAULT_HOPPING: f64 = 0.02;
pub const DEFAULT_SITES: usize = 4;

/// Default site energy `ω = 1.8 eV − 2S`, keeping the bright state at 1.8 eV.
pub fn default_site_energy(hopping: f64) -> f64 {
    BRIGHT_STATE_ENERGY - 2.0 * hopping
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub site_energies: Vec<f64>,
    pub hopping: f64,
}

impl RingSpec {
    pub fn uniform(n_sites: usize, site_energy: f64, hopping: f64) -> Result<Self> {
        let spec = RingSpec {
            site_energies: vec![site_energy; n_sites],
            hopping,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform ring with the default `ω = 1.8 eV − 2S` site energy.
    pub fn with_hopping(n_sites: usize, hopping: f64) -> Result<Self> {
        Self::uniform(n_sites, default_site_energy(hopping), hopping)
    }

    pub fn n_sites(&self) -> usize {
        self.site_energies.len()
    }

    /// Dimension of the two-level ring space, `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.n_sites()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        if n < 2 {
            return Err(Error::invalid("ring.n_sites", format!("need at least 2 sites, got {n}")));
        }
        if n > MAX_SITES {
            return Err(Error::TooManySites {
                sites: n,
                max: MAX_SITES,
                what: "two-level ring",
            });
        }
        for (i, &e) in self.site_energies.iter().enumerate() {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::invalid(
                    format!("ring.site_energies[{i}]"),
                    format!("site energy must be finite and positive, got {e}"),
                ));
            }
        }
        if !self.hopping.is_finite() {
            return Err(Error::invalid("ring.hopping", "hopping must be finite"));
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.site_energies.windows(2).all(|w| w[0] == w[1])
    }

    /// The common site energy of a uniform ring.
    pub fn uniform_site_energy(&self) -> Option<f64> {
        self.is_uniform().then(|| self.site_energies[0])
    }

    pub fn mean_site_energy(&self) -> f64 {
        self.site_energies.iter().sum::<f64>() / self.n_sites() as f64
    }
}

impl Default for RingSpec {
    fn default() -> Self {
        RingSpec {
            site_energies: vec![default_site_energy(DEFAULT_HOPPING); DEFAULT_SITES],
            hopping: DEFAULT_HOPPING,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// Single-emitter optical rate γ_o (eV).
    pub gamma_o: f64,
    /// Photon temperature (K).
    pub t_o: f64,
    /// Phonon rate γ_p (eV).
    pub gamma_p: f64,
    /// Phonon temperature (K).
    pub t_p: f64,
}

impl Default for BathSpec {
    fn default() -> Self {
        BathSpec {
            gamma_o: 1e-6,
            t_o: 5800.0,
            gamma_p: 1e-3,
            t_p: 300.0,
        }
    }
}

impl BathSpec {
    pub fn validate(&self) -> Result<()> {
        check_rate("bath.gamma_o", self.gamma_o)?;
        check_rate("bath.gamma_p", self.gamma_p)?;
        check_temperature("bath.t_o", self.t_o)?;
        check_temperature("bath.t_p", self.t_p)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "site")]
pub enum ExtractionMode {
    SingleSite(usize),
    Collective,
}

impl Default for ExtractionMode {
    fn default() -> Self {
        ExtractionMode::SingleSite(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    /// Trap transition energy; `None` selects the scenario default.
    pub omega_t: Option<f64>,
    pub gamma_t: f64,
    pub gamma_x: f64,
    pub extraction: ExtractionMode,
}

impl Default for TrapSpec {
    fn default() -> Self {
        TrapSpec {
            omega_t: None,
            gamma_t: 1e-6,
            gamma_x: 1e-7,
            extraction: ExtractionMode::default(),
        }
    }
}

impl TrapSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.omega_t {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::invalid(
                    "trap.omega_t",
                    format!("trap energy must be finite and positive, got {w}"),
                ));
            }
        }
        check_rate("trap.gamma_t", self.gamma_t)?;
        check_rate("trap.gamma_x", self.gamma_x)?;
        Ok(())
    }

    /// Trap energy resonant with the scenario's extraction level: the bottom
    /// of the single-exciton band (`ω − 2S`), or the bright state (`ω + 2S`)
    /// when phonons are switched off.
    pub fn resonant_energy(scenario: ScenarioKind, site_energy: f64, hopping: f64) -> f64 {
        match scenario {
            ScenarioKind::NoPhonons => site_energy + 2.0 * hopping,
            ScenarioKind::Ratchets | ScenarioKind::ForcedDark => site_energy - 2.0 * hopping,
        }
    }

    /// The explicit trap energy, or the scenario default for `ring`. Disordered
    /// rings use the mean site energy.
    pub fn resolved_omega_t(&self, scenario: ScenarioKind, ring: &RingSpec) -> f64 {
        self.omega_t
            .unwrap_or_else(|| Self::resonant_energy(scenario, ring.mean_site_energy(), ring.hopping))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionSpec {
    pub gamma_nr: f64,
    pub gamma_eea: f64,
}

impl ImperfectionSpec {
    pub fn validate(&self) -> Result<()> {
        check_rate("imperfections.gamma_nr", self.gamma_nr)?;
        check_rate("imperfections.gamma_eea", self.gamma_eea)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Ratchets,
    #[serde(alias = "np")]
    NoPhonons,
    #[serde(alias = "fd")]
    ForcedDark,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Ratchets,
        ScenarioKind::ForcedDark,
        ScenarioKind::NoPhonons,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ScenarioKind::Ratchets => "ratchets",
            ScenarioKind::NoPhonons => "np",
            ScenarioKind::ForcedDark => "fd",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ratchets" | "ratchet" | "r" => Ok(ScenarioKind::Ratchets),
            "np" | "no-phonons" | "nophonons" => Ok(ScenarioKind::NoPhonons),
            "fd" | "forced-dark" | "forceddark" => Ok(ScenarioKind::ForcedDark),
            other => Err(Error::invalid("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

fn check_rate(key: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(key, format!("rate must be finite and non-negative, got {value}")));
    }
    Ok(())
}

fn check_temperature(key: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::invalid(key, format!("temperature must be finite and non-negative, got {value}")));
    }
    Ok(())
}

/// A dense operator on `ring ⊗ trap` (`trap_dim == 1` for ring-only operators).
#[derive(Clone, Debug)]
pub struct Operator {
    matrix: Mat<c64>,
    ring_dim: usize,
    trap_dim: usize,
}

impl Operator {
    pub fn new(matrix: Mat<c64>, ring_dim: usize, trap_dim: usize) -> Result<Self> {
        let dim = ring_dim * trap_dim;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Operator {
            matrix,
            ring_dim,
            trap_dim,
        })
    }

    pub fn ring(matrix: Mat<c64>) -> Self {
        let n = matrix.nrows();
        assert_eq!(n, matrix.ncols(), "operator must be square");
        Operator {
            matrix,
            ring_dim: n,
            trap_dim: 1,
        }
    }

    pub fn zeros(ring_dim: usize, trap_dim: usize) -> Self {
        let d = ring_dim * trap_dim;
        Operator {
            matrix: Mat::zeros(d, d),
            ring_dim,
            trap_dim,
        }
    }

    pub fn identity(ring_dim: usize, trap_dim: usize) -> Self {
        Operator {
            matrix: linalg::identity(ring_dim * trap_dim),
            ring_dim,
            trap_dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.ring_dim * self.trap_dim
    }

    pub fn ring_dim(&self) -> usize {
        self.ring_dim
    }

    pub fn trap_dim(&self) -> usize {
        self.trap_dim
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    /// Embeds a ring-only operator into `ring ⊗ trap` as `A ⊗ 1`.
    pub fn with_trap(&self) -> Operator {
        assert_eq!(self.trap_dim, 1, "operator already acts on the trap");
        Operator {
            matrix: linalg::kron(self.matrix.as_ref(), linalg::identity(2).as_ref()),
            ring_dim: self.ring_dim,
            trap_dim: 2,
        }
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: linalg::adjoint(self.matrix.as_ref()),
            ..*self
        }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(self.matrix.as_ref())
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    pub fn compose(&self, rhs: &Operator) -> Operator {
        self.check_layout(rhs);
        Operator {
            matrix: &self.matrix * &rhs.matrix,
            ..*self
        }
    }

    pub fn commutator(&self, rhs: &Operator) -> Operator {
        self.check_layout(rhs);
        Operator {
            matrix: &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix,
            ..*self
        }
    }

    pub fn add(&self, rhs: &Operator) -> Operator {
        self.check_layout(rhs);
        Operator {
            matrix: &self.matrix + &rhs.matrix,
            ..*self
        }
    }

    pub fn scale(&self, factor: f64) -> Operator {
        Operator {
            matrix: Mat::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i, j)] * factor),
            ..*self
        }
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(self.matrix.as_ref())
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        assert_eq!(v.len(), self.dim());
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Eigenvalues, ascending. Requires a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.ensure_hermitian(1e-12)?;
        linalg::hermitian_eigenvalues(self.matrix.as_ref())
    }

    fn check_layout(&self, rhs: &Operator) {
        assert_eq!(
            (self.ring_dim, self.trap_dim),
            (rhs.ring_dim, rhs.trap_dim),
            "operators act on different spaces"
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Raise,
    Lower,
}

fn bit(state: usize, site: usize) -> bool {
    (state >> site) & 1 == 1
}

fn check_sites(n: usize) -> Result<()> {
    if n > MAX_SITES {
        return Err(Error::TooManySites {
            sites: n,
            max: MAX_SITES,
            what: "two-level ring",
        });
    }
    Ok(())
}

/// Builds a diagonal ring operator from a per-basis-state value.
fn diagonal_ring(n_sites: usize, f: impl Fn(usize) -> f64) -> Operator {
    let dim = 1 << n_sites;
    Operator::ring(Mat::from_fn(dim, dim, |i, j| if i == j { real(f(i)) } else { ZERO }))
}

/// `σ_i^+` on a two-level ring of `n_sites`.
pub fn sigma_plus(site: usize, n_sites: usize) -> Result<Operator> {
    check_sites(n_sites)?;
    if site >= n_sites {
        return Err(Error::InvalidSite { site, n_sites });
    }
    let dim = 1 << n_sites;
    let mut m = Mat::zeros(dim, dim);
    for b in 0..dim {
        if !bit(b, site) {
            m[(b | (1 << site), b)] = ONE;
        }
    }
    Ok(Operator::ring(m))
}

pub fn sigma_minus(site: usize, n_sites: usize) -> Result<Operator> {
    Ok(sigma_plus(site, n_sites)?.adjoint())
}

/// `σ_i^z = 2 σ_i^+ σ_i^- − 1`.
pub fn sigma_z(site: usize, n_sites: usize) -> Result<Operator> {
    check_sites(n_sites)?;
    if site >= n_sites {
        return Err(Error::InvalidSite { site, n_sites });
    }
    Ok(diagonal_ring(n_sites, |b| if bit(b, site) { 1.0 } else { -1.0 }))
}

/// Excitation number `Σ_i σ_i^+ σ_i^-` on the two-level ring.
pub fn number_operator(n_sites: usize) -> Result<Operator> {
    check_sites(n_sites)?;
    Ok(diagonal_ring(n_sites, |b| b.count_ones() as f64))
}

/// Ring Hamiltonian `Σ ε_i σ_i^+σ_i^- + S Σ_i (σ_i^+σ_{i+1}^- + h.c.)`, periodic.
pub fn build_ring_hamiltonian(spec: &RingSpec) -> Result<Operator> {
    spec.validate()?;
    let n = spec.n_sites();
    let dim = spec.dim();
    let s = spec.hopping;
    let mut m = Mat::zeros(dim, dim);
    for b in 0..dim {
        let onsite: f64 = (0..n).filter(|&i| bit(b, i)).map(|i| spec.site_energies[i]).sum();
        m[(b, b)] = real(onsite);
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            let j = (i + 1) % n;
            // σ_i^+ σ_j^- and its conjugate σ_j^+ σ_i^-
            if bit(b, j) && !bit(b, i) {
                let t = b ^ (1 << i) ^ (1 << j);
                m[(t, b)] += real(s);
            }
            if bit(b, i) && !bit(b, j) {
                let t = b ^ (1 << i) ^ (1 << j);
                m[(t, b)] += real(s);
            }
        }
    }
    Ok(Operator::ring(m))
}

/// Collective dipole `J^± = Σ_i σ_i^±` on the ring.
pub fn build_collective_dipole(spec: &RingSpec, direction: Direction) -> Result<Operator> {
    spec.validate()?;
    let n = spec.n_sites();
    let dim = spec.dim();
    let mut m = Mat::zeros(dim, dim);
    for b in 0..dim {
        for i in 0..n {
            if !bit(b, i) {
                m[(b | (1 << i), b)] = ONE;
            }
        }
    }
    let raise = Operator::ring(m);
    Ok(match direction {
        Direction::Raise => raise,
        Direction::Lower => raise.adjoint(),
    })
}

/// Trap lowering operator `1_ring ⊗ |β⟩⟨α|`.
pub fn trap_sigma_minus(ring_dim: usize) -> Operator {
    let mut local = Mat::zeros(2, 2);
    local[(0, 1)] = ONE;
    Operator {
        matrix: linalg::kron(linalg::identity(ring_dim).as_ref(), local.as_ref()),
        ring_dim,
        trap_dim: 2,
    }
}

pub fn trap_sigma_plus(ring_dim: usize) -> Operator {
    trap_sigma_minus(ring_dim).adjoint()
}

/// Trap population operator `1_ring ⊗ |α⟩⟨α|`.
pub fn trap_number(ring_dim: usize) -> Operator {
    let mut local = Mat::zeros(2, 2);
    local[(1, 1)] = ONE;
    Operator {
        matrix: linalg::kron(linalg::identity(ring_dim).as_ref(), local.as_ref()),
        ring_dim,
        trap_dim: 2,
    }
}

/// Trap Hamiltonian `ω_t σ_t^+ σ_t^-` on `ring ⊗ trap`.
pub fn build_trap_hamiltonian(omega_t: f64, ring_dim: usize) -> Result<Operator> {
    if !omega_t.is_finite() || omega_t < 0.0 {
        return Err(Error::invalid("trap.omega_t", "trap energy must be finite and non-negative"));
    }
    Ok(trap_number(ring_dim).scale(omega_t))
}

/// Local states of the three-level site model.
const G: usize = 0;
const E: usize = 1;
const D: usize = 2;

fn digit(state: usize, site: usize) -> usize {
    (state / 3usize.pow(site as u32)) % 3
}

fn with_digit(state: usize, site: usize, value: usize) -> usize {
    let p = 3usize.pow(site as u32);
    state - digit(state, site) * p + value * p
}

fn check_three_level(n: usize) -> Result<()> {
    if n > MAX_THREE_LEVEL_SITES {
        return Err(Error::TooManySites {
            sites: n,
            max: MAX_THREE_LEVEL_SITES,
            what: "three-level ring",
        });
    }
    Ok(())
}

/// Ring Hamiltonian with a doubly excited level `|D⟩` on each site.
///
/// Per bond `(i, j = i+1)` the hopping term moves one quantum between the
/// sites: `E_i G_j ↔ G_i E_j` and the fusion channels `E_i E_j ↔ G_i D_j`,
/// `E_i E_j ↔ D_i G_j`, all with amplitude `S`.
pub fn build_three_level_hamiltonian(spec: &RingSpec) -> Result<Operator> {
    spec.validate()?;
    let n = spec.n_sites();
    check_three_level(n)?;
    let dim = 3usize.pow(n as u32);
    let s = spec.hopping;
    let mut m = Mat::zeros(dim, dim);
    // (from_i, from_j) -> (to_i, to_j) for the "+" direction of each bond.
    let hops: [((usize, usize), (usize, usize)); 3] = [
        ((G, E), (E, G)), // σ_i^+ σ_j^-
        ((G, D), (E, E)), // σ_i^+ η_j^-
        ((D, G), (E, E)), // σ_j^+ η_i^-
    ];
    for b in 0..dim {
        let onsite: f64 = (0..n)
            .map(|i| match digit(b, i) {
                E => spec.site_energies[i],
                D => 2.0 * spec.site_energies[i],
                _ => 0.0,
            })
            .sum();
        m[(b, b)] = real(onsite);
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            let j = (i + 1) % n;
            let (di, dj) = (digit(b, i), digit(b, j));
            for &(from, to) in &hops {
                // forward and Hermitian-conjugate moves
                for &((fi, fj), (ti, tj)) in &[(from, to), (to, from)] {
                    if di == fi && dj == fj {
                        let t = with_digit(with_digit(b, i, ti), j, tj);
                        m[(t, b)] += real(s);
                    }
                }
            }
        }
    }
    Ok(Operator::ring(m))
}

/// Excitation counter for the three-level ring (`|D⟩` counts as two).
pub fn three_level_number_operator(n_sites: usize) -> Result<Operator> {
    check_three_level(n_sites)?;
    let dim = 3usize.pow(n_sites as u32);
    Ok(Operator::ring(Mat::from_fn(dim, dim, |a, b| {
        if a == b {
            real((0..n_sites).map(|i| digit(a, i)).sum::<usize>() as f64)
        } else {
            ZERO
        }
    })))
}

/// Collective lowering `Σ_i (σ_i^- + η_i^-)` on the three-level ring.
pub fn three_level_dipole_lower(n_sites: usize) -> Result<Operator> {
    check_three_level(n_sites)?;
    let dim = 3usize.pow(n_sites as u32);
    let mut m = Mat::zeros(dim, dim);
    for b in 0..dim {
        for i in 0..n_sites {
            let d = digit(b, i);
            if d > G {
                m[(with_digit(b, i, d - 1), b)] += ONE;
            }
        }
    }
    Ok(Operator::ring(m))
}

/// Marks product basis states that contain at least one `|D⟩`.
pub fn three_level_doubly_excited_mask(n_sites: usize) -> Result<Vec<bool>> {
    check_three_level(n_sites)?;
    let dim = 3usize.pow(n_sites as u32);
    Ok((0..dim).map(|b| (0..n_sites).any(|i| digit(b, i) == D)).collect())
}
