//! Seeded instance generators. Every generator is a pure function of its
//! arguments; the same seed always yields the same instance.

use serde::{Deserialize, Serialize};

use crate::caratheodory::{center, PointCloud};
use crate::error::{precondition, Result};
use crate::helly::SlabSystem;
use crate::numkernel::{eigh, DenseMatrix};
use crate::quantum::{project_density, DensityMatrix, MeasurementSystem};
use crate::rng::SeededRng;
use crate::sketch::FiniteSignalEnsemble;
use crate::spaces::{lp_norm, norm, Point, SpaceKind, SpaceSpec};

/// An instance together with the point it was built around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planted<I, W> {
    pub instance: I,
    pub hidden: W,
}

/// `n` points drawn in the unit ball of `space`, then centered.
///
/// Vectors: Gaussian direction normalized in `l_p`, radius uniform in
/// `[0, 1]`. Matrices: real Gaussian matrices normalized in `S_p`, same radius.
pub fn gen_caratheodory_instance(seed: u64, space: SpaceSpec, n: usize) -> Result<PointCloud> {
    if n < 2 {
        return Err(precondition(format!("need at least 2 points, got {n}")));
    }
    let mut rng = SeededRng::new(seed);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let raw = match space.kind {
            SpaceKind::VectorLp => Point::Vector(rng.gaussian_vec(space.d)),
            SpaceKind::SchattenSp => Point::Matrix(rng.gaussian_matrix(space.d, false)),
        };
        let size = norm(&space, &raw)?;
        if size == 0.0 {
            continue;
        }
        let radius = rng.uniform();
        points.push(raw.scale(radius / size));
    }
    center(&PointCloud::new(space, points, None)?)
}

/// Slab system satisfied by a hidden `x0` with `|x0|_1 <= R`:
/// `a` uniform in `[-1, 1]`, `b_i = <a_i, x0> + eta_i`, `|eta_i| <= noise`.
/// Every subset of slabs is then feasible with witness `x0`.
pub fn gen_regression_instance(
    seed: u64,
    d: usize,
    m: usize,
    radius: f64,
    r: f64,
    noise: f64,
    k: usize,
) -> Result<Planted<SlabSystem, Vec<f64>>> {
    if !(noise >= 0.0 && noise <= r) {
        return Err(precondition(format!("noise must lie in [0, r], got {noise}")));
    }
    let mut rng = SeededRng::new(seed);
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
        .collect();
    let g = rng.gaussian_vec(d);
    let scale = radius * rng.uniform_in(0.5, 1.0) / lp_norm(&g, 1.0).max(f64::MIN_POSITIVE);
    let x0: Vec<f64> = g.iter().map(|v| v * scale).collect();
    let b = a
        .iter()
        .map(|row| row.iter().zip(&x0).map(|(p, q)| p * q).sum::<f64>() + rng.uniform_in(-noise, noise))
        .collect();
    let system = SlabSystem { a, b, radius, r, k };
    system.validate()?;
    Ok(Planted {
        instance: system,
        hidden: x0,
    })
}

/// Measurement system satisfied by a hidden state `rho0`: each `A_i` is a
/// Gaussian Hermitian matrix scaled to operator norm 1, `rho0` is the density
/// projection of a Gaussian Hermitian matrix, and
/// `b_i = <A_i, rho0> + eta_i` with `|eta_i| <= noise`.
#[allow(clippy::too_many_arguments)]
pub fn gen_quantum_instance(
    seed: u64,
    d: usize,
    m: usize,
    t: f64,
    noise: f64,
    k: usize,
    complex: bool,
) -> Result<Planted<MeasurementSystem, DensityMatrix>> {
    if !(noise >= 0.0 && noise <= t) {
        return Err(precondition(format!("noise must lie in [0, t], got {noise}")));
    }
    let mut rng = SeededRng::new(seed);
    let mut a = Vec::with_capacity(m);
    while a.len() < m {
        let h = rng.hermitian(d, complex);
        let dec = eigh(&h)?;
        let op = dec.eigenvalues[0].abs().max(dec.eigenvalues[d - 1].abs());
        if op == 0.0 {
            continue;
        }
        a.push(h.scale(1.0 / op));
    }
    let rho0 = project_density(&rng.hermitian(d, complex))?;
    let b = a
        .iter()
        .map(|ai| ai.inner(&rho0.matrix) + rng.uniform_in(-noise, noise))
        .collect();
    let system = MeasurementSystem { a, b, t, k };
    system.validate()?;
    Ok(Planted {
        instance: system,
        hidden: rho0,
    })
}

/// Rank-one decomposition of the identity in dimension `d` with `n` terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecomposition {
    #[serde(rename = "A")]
    pub matrices: Vec<DenseMatrix>,
    pub lambda: Vec<f64>,
    /// Bound on every `|A_i|_op`.
    #[serde(rename = "L")]
    pub op_bound: f64,
}

/// Gaussian vectors `u_i` whitened by `S^{-1/2}` with `S = sum u_i u_i^T`,
/// so `sum w_i w_i^T = Id`. Then `A_i = d w_i w_i^T / |w_i|^2` and
/// `lambda_i = |w_i|^2 / d`; every `A_i` has operator norm `d`.
pub fn gen_frame_decomposition(seed: u64, d: usize, n: usize) -> Result<FrameDecomposition> {
    if n < d {
        return Err(precondition(format!("need at least d = {d} vectors, got {n}")));
    }
    let mut rng = SeededRng::new(seed);
    let u: Vec<Vec<f64>> = (0..n).map(|_| rng.gaussian_vec(d)).collect();
    let frame = DenseMatrix::from_fn(d, d, |i, j| u.iter().map(|v| v[i] * v[j]).sum::<f64>().into());
    let dec = eigh(&frame)?;
    if dec.eigenvalues[d - 1] <= 0.0 {
        return Err(precondition("vectors do not span the space"));
    }
    let inv_sqrt: Vec<f64> = dec.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
    let whiten = DenseMatrix::from_spectrum(&dec.eigenvectors, &inv_sqrt);
    let mut matrices = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for v in &u {
        let w: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| whiten[(i, j)].re * v[j]).sum())
            .collect();
        let sq: f64 = w.iter().map(|x| x * x).sum();
        lambda.push(sq / d as f64);
        matrices.push(DenseMatrix::from_fn(d, d, |i, j| (d as f64 * w[i] * w[j] / sq).into()));
    }
    // Renormalize the weights so they sum to one to the last bit we can.
    let total: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l /= total);
    Ok(FrameDecomposition {
        matrices,
        lambda,
        op_bound: d as f64,
    })
}

/// `n` signals on `atoms` points with values uniform in `[-1, 1]` and the
/// uniform measure.
pub fn gen_signal_ensemble(seed: u64, n: usize, atoms: usize) -> Result<FiniteSignalEnsemble> {
    let mut rng = SeededRng::new(seed);
    let values = (0..n)
        .map(|_| (0..atoms).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
        .collect();
    FiniteSignalEnsemble::uniform(values)
}
