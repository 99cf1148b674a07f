use num_complex::Complex64;

use super::eigen::eigh;
use super::matrix::DenseMatrix;
use crate::error::{precondition, Result};

#[derive(Debug, Clone)]
pub struct Svd {
    pub left: DenseMatrix,
    /// Nonnegative, descending.
    pub singular_values: Vec<f64>,
    pub right: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.left.rows();
        let mut scaled = self.left.clone();
        for i in 0..n {
            for (j, &s) in self.singular_values.iter().enumerate() {
                scaled[(i, j)] *= s;
            }
        }
        scaled.matmul(&self.right.adjoint()).expect("square factors")
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonalizes `v` against `basis` (two passes of modified Gram-Schmidt)
/// and normalizes. Returns `None` when nothing survives.
fn orthonormalize(mut v: Vec<Complex64>, basis: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
    let start = norm(&v);
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let n = norm(&v);
    if n <= 1e-10 * start.max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(v.into_iter().map(|z| z / n).collect())
}

/// Singular value decomposition of a square matrix through the Hermitian
/// eigenproblem of `A* A`.
///
/// Singular values are taken as `|A v_i|` rather than square roots of the
/// Gram eigenvalues, which keeps small ones accurate; left vectors are
/// `A v_i / |A v_i|`, completed to a unitary basis where `A v_i` vanishes.
pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    if !a.is_square() || a.rows() == 0 {
        return Err(precondition(format!(
            "svd supports non-empty square matrices, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let gram = a.adjoint().matmul(a)?;
    let dec = eigh(&gram)?;
    let right = dec.eigenvectors;
    let image = a.matmul(&right)?;

    let mut triples: Vec<(f64, usize)> = (0..n).map(|j| (norm(&image.column(j)), j)).collect();
    triples.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));

    let sigma_max = triples[0].0;
    let cutoff = 1e-14 * sigma_max.max(f64::MIN_POSITIVE);
    let mut left_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut right_sorted = DenseMatrix::zeros(n, n);
    let mut pending = Vec::new();
    for (slot, &(sigma, j)) in triples.iter().enumerate() {
        right_sorted.set_column(slot, &right.column(j));
        if sigma > cutoff {
            let col: Vec<Complex64> = image.column(j).into_iter().map(|z| z / sigma).collect();
            left_cols.push(col);
            singular_values.push(sigma);
        } else {
            left_cols.push(Vec::new());
            singular_values.push(0.0);
            pending.push(slot);
        }
    }
    // Complete the left basis for the null directions.
    let mut candidate = 0;
    for slot in pending {
        loop {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[candidate % n] = Complex64::new(1.0, 0.0);
            candidate += 1;
            let basis: Vec<Vec<Complex64>> =
                left_cols.iter().filter(|c| !c.is_empty()).cloned().collect();
            if let Some(col) = orthonormalize(e, &basis) {
                left_cols[slot] = col;
                break;
            }
            if candidate > 2 * n {
                return Err(precondition("could not complete left singular basis"));
            }
        }
    }
    let mut left = DenseMatrix::zeros(n, n);
    for (j, col) in left_cols.iter().enumerate() {
        left.set_column(j, col);
    }
    Ok(Svd {
        left,
        singular_values,
        right: right_sorted,
    })
}

/// Singular values only. Hermitian inputs use `|eigenvalues|` directly.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    if a.is_square() && a.rows() > 0 && a.is_hermitian(super::eigen::HERMITIAN_TOL) {
        let mut s: Vec<f64> = eigh(a)?.eigenvalues.into_iter().map(f64::abs).collect();
        s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        return Ok(s);
    }
    Ok(svd(a)?.singular_values)
}
