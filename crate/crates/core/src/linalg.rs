//! Small dense helpers on top of `faer` shared by the physics modules.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub fn real(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn adjoint(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

/// Kronecker product with the left factor as the slow index.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Mat::zeros(ar * br, ac * bc);
    for ja in 0..ac {
        for ia in 0..ar {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for jb in 0..bc {
                for ib in 0..br {
                    out[(ia * br + ib, ja * bc + jb)] = x * b[(ib, jb)];
                }
            }
        }
    }
    out
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn hermiticity_deviation(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `U^dagger A U`.
pub fn to_basis(a: MatRef<'_, c64>, u: MatRef<'_, c64>) -> Mat<c64> {
    u.adjoint() * a * u
}

/// `U A U^dagger`.
pub fn from_basis(a: MatRef<'_, c64>, u: MatRef<'_, c64>) -> Mat<c64> {
    u * a * u.adjoint()
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let herm = Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    herm.self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::Eigendecomposition)
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::Eigendecomposition)?;
    let values = (0..m.nrows()).map(|i| evd.S()[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_places_left_factor_as_slow_index() {
        let a = Mat::from_fn(2, 2, |i, j| real((2 * i + j) as f64 + 1.0));
        let b = identity(2);
        let k = kron(a.as_ref(), b.as_ref());
        assert_eq!(k[(0, 2)], real(2.0));
        assert_eq!(k[(1, 3)], real(2.0));
        assert_eq!(k[(2, 0)], real(3.0));
        assert_eq!(k[(0, 1)], ZERO);
    }

    #[test]
    fn hermitian_eigen_sorted() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { real(3.0 - i as f64) } else { ZERO });
        let (vals, _) = hermitian_eigen(m.as_ref()).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }
}
