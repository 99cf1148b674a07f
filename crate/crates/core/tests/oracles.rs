//! Numerical kernels checked against independent reference computations.

use num_complex::Complex64;

use nodim::numkernel::{eigh, project_l1_ball, project_simplex, svd, DenseMatrix};
use nodim::quantum::project_density;
use nodim::rng::SeededRng;
use nodim::spaces::{schatten_norm, lp_norm};

/// Number of eigenvalues of Hermitian `a` strictly below `x`, from the
/// inertia of `a - x I` (signs of the pivots of an LDL* factorization).
fn count_below(a: &DenseMatrix, x: f64) -> usize {
    let n = a.rows();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] - if i == j { Complex64::new(x, 0.0) } else { Complex64::new(0.0, 0.0) }).collect())
        .collect();
    let mut negatives = 0;
    for k in 0..n {
        let pivot = m[k][k].re;
        if pivot < 0.0 {
            negatives += 1;
        }
        let pivot = if pivot == 0.0 { 1e-300 } else { pivot };
        for i in k + 1..n {
            let factor = m[i][k] / pivot;
            let (top, bottom) = m.split_at_mut(i);
            for (target, source) in bottom[0][k + 1..n].iter_mut().zip(&top[k][k + 1..n]) {
                *target -= factor * source;
            }
        }
    }
    negatives
}

/// Eigenvalues (descending) by bisection on the inertia count.
fn bisection_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows();
    let bound = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        // idx-th smallest eigenvalue: smallest x with count_below(x) > idx
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(a, mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.reverse();
    out
}

#[test]
fn eigh_matches_inertia_bisection_complex() {
    let mut rng = SeededRng::new(2024);
    for _ in 0..20 {
        let a = rng.hermitian(6, true);
        let dec = eigh(&a).unwrap();
        let oracle = bisection_eigenvalues(&a);
        for (x, y) in dec.eigenvalues.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-10, "{:?} vs {:?}", dec.eigenvalues, oracle);
        }
    }
}

#[test]
fn svd_matches_gram_spectrum() {
    let mut rng = SeededRng::new(77);
    for complex in [false, true] {
        let a = rng.gaussian_matrix(5, complex);
        let s = svd(&a).unwrap();
        let gram = a.adjoint().matmul(&a).unwrap().hermitian_part();
        let oracle: Vec<f64> = bisection_eigenvalues(&gram).iter().map(|l| l.max(0.0).sqrt()).collect();
        for (x, y) in s.singular_values.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9, "{:?} vs {:?}", s.singular_values, oracle);
        }
        assert!(s.reconstruct().sub(&a).max_abs() < 1e-10);
        let utu = s.left.adjoint().matmul(&s.left).unwrap();
        assert!(utu.sub(&DenseMatrix::identity(5)).max_abs() < 1e-10);
    }
}

/// Euclidean projection onto `{x >= 0, sum x = mass}` by trying every
/// support set and keeping the one that satisfies the optimality conditions.
fn simplex_by_active_sets(v: &[f64], mass: f64) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - mass) / support.len() as f64;
        let mut x = vec![0.0; n];
        let mut ok = true;
        for &i in &support {
            x[i] = v[i] - theta;
            if x[i] < -1e-15 {
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x.iter().map(|v| v.max(0.0)).collect()));
        }
    }
    best.expect("some support is feasible").1
}

#[test]
fn simplex_projection_matches_active_set_enumeration() {
    let mut rng = SeededRng::new(5);
    for trial in 0..200 {
        let n = 1 + trial % 6;
        let v: Vec<f64> = (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let mass = rng.uniform_in(0.1, 3.0);
        let got = project_simplex(&v, mass).unwrap();
        let want = simplex_by_active_sets(&v, mass);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{v:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn l1_projection_matches_sign_reduction() {
    let mut rng = SeededRng::new(6);
    for trial in 0..200 {
        let n = 1 + trial % 6;
        let v: Vec<f64> = (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let radius = rng.uniform_in(0.1, 3.0);
        let got = project_l1_ball(&v, radius).unwrap();
        let want: Vec<f64> = if lp_norm(&v, 1.0) <= radius {
            v.clone()
        } else {
            let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            simplex_by_active_sets(&abs, radius)
                .iter()
                .zip(&v)
                .map(|(m, s)| m * s.signum())
                .collect()
        };
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{v:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn schatten_norms_are_unitarily_invariant() {
    let mut rng = SeededRng::new(8);
    for _ in 0..10 {
        let x = rng.gaussian_matrix(5, true);
        let u = eigh(&rng.hermitian(5, true)).unwrap().eigenvectors;
        let v = eigh(&rng.hermitian(5, true)).unwrap().eigenvectors;
        let rotated = u.matmul(&x).unwrap().matmul(&v).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let a = schatten_norm(&x, p).unwrap();
            let b = schatten_norm(&rotated, p).unwrap();
            assert!((a - b).abs() < 1e-10 * a, "p={p}: {a} vs {b}");
        }
        // S_2 is the Frobenius norm
        assert!((schatten_norm(&x, 2.0).unwrap() - x.frobenius_norm()).abs() < 1e-10);
    }
}

#[test]
fn density_projection_matches_eigenvalue_grid_search() {
    let mut rng = SeededRng::new(31);
    let m = rng.hermitian(4, true);
    let got = project_density(&m).unwrap();
    // The nearest state shares the eigenbasis of m, so search that basis.
    let basis = eigh(&m).unwrap().eigenvectors;
    let quad: Vec<f64> = (0..4)
        .map(|i| {
            let col = basis.column(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..4 {
                for c in 0..4 {
                    acc += col[r].conj() * m[(r, c)] * col[c];
                }
            }
            acc.re
        })
        .collect();
    let steps = 1000usize;
    let h = 1.0 / steps as f64;
    let mut best = (f64::INFINITY, [0.0; 4]);
    for a in 0..=steps {
        for b in 0..=steps - a {
            for c in 0..=steps - a - b {
                let x = [a as f64 * h, b as f64 * h, c as f64 * h, (steps - a - b - c) as f64 * h];
                // |M - rho|^2 - |M|^2 = |x|^2 - 2 sum x_i u_i* M u_i
                let value: f64 = x.iter().zip(&quad).map(|(xi, qi)| xi * xi - 2.0 * xi * qi).sum();
                if value < best.0 {
                    best = (value, x);
                }
            }
        }
    }
    let grid = DenseMatrix::from_spectrum(&basis, &best.1);
    assert!(got.matrix.sub(&grid).frobenius_norm() < 2e-3);
}
