//! Cyclic Jacobi eigensolver for Hermitian (and real symmetric) matrices.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::matrix::DenseMatrix;
use crate::error::{precondition, Error, Result};

/// Relative off-diagonal Frobenius threshold at which sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Tolerance on `|a_ij - conj(a_ji)|` accepted as Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Sorted descending; ties keep their original diagonal order.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub eigenvectors: DenseMatrix,
    pub sweeps: usize,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> DenseMatrix {
        DenseMatrix::from_spectrum(&self.eigenvectors, &self.eigenvalues)
    }
}

/// Scalar field the rotation kernel runs over. The real instance is the fast
/// path taken when the input has no imaginary parts.
trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn from_re(x: f64) -> Self;
    fn re(self) -> f64;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn abs_sqr(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn into_complex(self) -> Complex64;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_re(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn abs_sqr(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn into_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Field for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn into_complex(self) -> Complex64 {
        self
    }
}

fn off_diagonal_sq<T: Field>(a: &[T], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].abs_sqr();
            }
        }
    }
    s
}

/// Runs cyclic sweeps in place. `a` is overwritten with a (numerically)
/// diagonal matrix and `v` accumulates the rotations.
fn jacobi_sweeps<T: Field>(a: &mut [T], v: &mut [T], n: usize) -> Result<usize> {
    let total_sq: f64 = a.iter().map(|x| x.abs_sqr()).sum();
    let threshold = JACOBI_TOL * total_sq.sqrt().max(f64::MIN_POSITIVE);
    let mut off = off_diagonal_sq(a, n).sqrt();
    let mut sweeps = 0;
    while off > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                method: "jacobi eigensolver",
                iterations: sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.abs();
                if mag == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re();
                let aqq = a[q * n + q].re();
                // Negligible against both diagonal entries: zero it directly.
                if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = T::zero();
                    a[q * n + p] = T::zero();
                    continue;
                }
                let phase = apq.scale(1.0 / mag);
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = [[c, s], [-s * conj(phase), c * conj(phase)]] on columns (p, q).
                let phase_c = phase.conj();
                let g_qp = phase_c.scale(-s);
                let g_qq = phase_c.scale(c);
                // A <- A G
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp.scale(c) + akq * g_qp;
                    a[k * n + q] = akp.scale(s) + akq * g_qq;
                }
                // A <- G* A
                let gc_qp = g_qp.conj();
                let gc_qq = g_qq.conj();
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk.scale(c) + gc_qp * aqk;
                    a[q * n + k] = apk.scale(s) + gc_qq * aqk;
                }
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                a[p * n + p] = T::from_re(a[p * n + p].re());
                a[q * n + q] = T::from_re(a[q * n + q].re());
                // V <- V G
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp.scale(c) + vkq * g_qp;
                    v[k * n + q] = vkp.scale(s) + vkq * g_qq;
                }
            }
        }
        off = off_diagonal_sq(a, n).sqrt();
    }
    Ok(sweeps)
}

fn finish<T: Field>(a: &[T], v: &[T], n: usize, sweeps: usize) -> SpectralDecomposition {
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i].re()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps original index order on ties.
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors =
        DenseMatrix::from_fn(n, n, |row, col| v[row * n + order[col]].into_complex());
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    }
}

fn run<T: Field>(a: &DenseMatrix, convert: impl Fn(Complex64) -> T) -> Result<SpectralDecomposition> {
    let n = a.rows();
    let mut work: Vec<T> = a.as_slice().iter().map(|&z| convert(z)).collect();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::from_re(1.0);
    }
    let sweeps = jacobi_sweeps(&mut work, &mut v, n)?;
    Ok(finish(&work, &v, n, sweeps))
}

fn check_hermitian(a: &DenseMatrix) -> Result<()> {
    if !a.is_square() || a.rows() == 0 {
        return Err(precondition(format!(
            "eigh needs a non-empty square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(precondition(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn eigh(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    check_hermitian(a)?;
    // Symmetrize so rounding in the input cannot leak into the rotations.
    let sym = a.hermitian_part();
    if sym.is_real() {
        run::<f64>(&sym, |z| z.re)
    } else {
        run::<Complex64>(&sym, |z| z)
    }
}

/// Eigendecomposition started from an approximate eigenbasis.
///
/// `A` is rotated into `basis` first, so when `basis` nearly diagonalizes
/// `A` the Jacobi sweeps converge in one or two passes. The result is the
/// same decomposition `eigh` would produce up to rounding and the ordering
/// of degenerate eigenvectors.
pub fn eigh_warm(a: &DenseMatrix, basis: &DenseMatrix) -> Result<SpectralDecomposition> {
    check_hermitian(a)?;
    if basis.shape() != a.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: basis.rows(),
        });
    }
    let rotated = basis.adjoint().matmul(&a.hermitian_part())?.matmul(basis)?.hermitian_part();
    let inner = if rotated.is_real() && basis.is_real() {
        run::<f64>(&rotated, |z| z.re)?
    } else {
        run::<Complex64>(&rotated, |z| z)?
    };
    Ok(SpectralDecomposition {
        eigenvectors: basis.matmul(&inner.eigenvectors)?,
        ..inner
    })
}

/// Extreme eigenvalues `(max, min)` of a Hermitian matrix.
pub fn eigen_range(a: &DenseMatrix) -> Result<(f64, f64)> {
    let dec = eigh(a)?;
    Ok((dec.eigenvalues[0], *dec.eigenvalues.last().expect("non-empty")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input_sorted_descending() {
        let dec = eigh(&DenseMatrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(dec.eigenvalues, vec![3.0, 2.0, 1.0]);
        // columns are the permuted identity (0, 2, 1)
        let expected = [0usize, 2, 1];
        for (col, &row) in expected.iter().enumerate() {
            assert_eq!(dec.eigenvectors[(row, col)].re.abs(), 1.0);
        }
        assert_eq!(dec.sweeps, 0);
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let dec = eigh(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(dec.eigenvalues, vec![1.0; 4]);
    }

    #[test]
    fn ties_keep_index_order() {
        let dec = eigh(&DenseMatrix::diag(&[1.0, 2.0, 1.0])).unwrap();
        assert_eq!(dec.eigenvalues, vec![2.0, 1.0, 1.0]);
        assert_eq!(dec.eigenvectors[(0, 1)].re, 1.0);
        assert_eq!(dec.eigenvectors[(2, 2)].re, 1.0);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = DenseMatrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(eigh(&a), Err(Error::Precondition(_))));
    }

    #[test]
    fn complex_two_by_two() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1.
        let a = DenseMatrix::from_complex(
            2,
            2,
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let dec = eigh(&a).unwrap();
        assert!((dec.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((dec.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(dec.reconstruct().sub(&a).frobenius_norm() < 1e-13);
    }
}
