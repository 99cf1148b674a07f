//! Quantum feasibility from local consistency, plus an exploratory
//! sparsifier for PSD decompositions of the identity.
//!
//! For Hermitian measurements `A_i` with `|A_i|_op <= 1`, if every `k` of the
//! constraints `|<A_i, rho> - b_i| <= t` admit a common density matrix, some
//! density matrix satisfies all of them up to `t + 21 sqrt(ln d / k)`.

use std::f64::consts::{E, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caratheodory::{greedy_approximate_caratheodory, PointCloud};
use crate::error::{precondition, Error, Result};
use crate::feasibility::{
    dykstra, projected_subgradient, ConvexSet, DykstraOptions, SubgradientOptions,
    DEFAULT_MAX_ITER,
};
use crate::helly::{select_subsets, SubsetPolicy};
use crate::numkernel::{eigh, eigh_warm, project_simplex, DenseMatrix, HERMITIAN_TOL};
use crate::report::{FeasibilityReport, VerificationReport};
use crate::spaces::{Point, SpaceSpec};

pub const OPERATOR_NORM_TOL: f64 = 1e-12;
/// Tolerance on positivity and unit trace of a returned state.
pub const STATE_TOL: f64 = 1e-9;
pub const BOUND_SLACK: f64 = 1e-9;
pub const MIN_DIMENSION: usize = 3;
/// Tolerance on `sum_i lambda_i A_i = Id` for the sparsifier.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSystem {
    #[serde(rename = "A")]
    pub a: Vec<DenseMatrix>,
    pub b: Vec<f64>,
    pub t: f64,
    pub k: usize,
}

impl MeasurementSystem {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn d(&self) -> usize {
        self.a.first().map_or(0, DenseMatrix::rows)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d) = (self.m(), self.d());
        if m == 0 {
            return Err(Error::InvalidInstance("no measurements".into()));
        }
        if self.b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.b.len(),
            });
        }
        if d < MIN_DIMENSION {
            return Err(Error::InvalidInstance(format!("need d >= 3, got d = {d}")));
        }
        for (i, a) in self.a.iter().enumerate() {
            if a.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.rows().max(a.cols()),
                });
            }
            if !a.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::InvalidInstance(format!("A_{i} is not Hermitian")));
            }
            let dec = eigh(a)?;
            let op = dec.eigenvalues[0].abs().max(dec.eigenvalues[d - 1].abs());
            if op > 1.0 + OPERATOR_NORM_TOL {
                return Err(Error::InvalidInstance(format!(
                    "A_{i} has operator norm {op}, must be at most 1"
                )));
            }
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::InvalidInstance(format!("t must be >= 0, got {}", self.t)));
        }
        if self.k == 0 || self.k > m {
            return Err(Error::InvalidInstance(format!("k must lie in 1..={m}, got {}", self.k)));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite target".into()));
        }
        Ok(())
    }

    pub fn residual(&self, i: usize, rho: &DenseMatrix) -> f64 {
        (self.a[i].inner(rho) - self.b[i]).abs()
    }

    pub fn max_residual(&self, rho: &DenseMatrix) -> f64 {
        (0..self.m()).map(|i| self.residual(i, rho)).fold(0.0, f64::max)
    }

    /// `t + 21 sqrt(ln d / k)`.
    pub fn bound(&self) -> f64 {
        self.t + 21.0 * ((self.d() as f64).ln() / self.k as f64).sqrt()
    }
}

/// Positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    pub matrix: DenseMatrix,
}

impl DensityMatrix {
    /// Smallest eigenvalue and `|Tr - 1|`.
    pub fn defects(matrix: &DenseMatrix) -> Result<(f64, f64)> {
        let dec = eigh(matrix)?;
        let min = *dec.eigenvalues.last().ok_or_else(|| precondition("empty matrix"))?;
        Ok((min, (matrix.trace().re - 1.0).abs()))
    }

    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        let (min, trace_gap) = Self::defects(&matrix)?;
        if min < -STATE_TOL || trace_gap > STATE_TOL || matrix.trace().im.abs() > STATE_TOL {
            return Err(precondition(format!(
                "not a density matrix (min eigenvalue {min:e}, trace defect {trace_gap:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: DenseMatrix::identity(d).scale(1.0 / d as f64),
        }
    }
}

/// Frobenius-nearest density matrix: eigendecompose, project the spectrum
/// onto the unit simplex, reassemble.
pub fn project_density(m: &DenseMatrix) -> Result<DensityMatrix> {
    let dec = eigh(m)?;
    let values = project_simplex(&dec.eigenvalues, 1.0)?;
    Ok(DensityMatrix {
        matrix: DenseMatrix::from_spectrum(&dec.eigenvectors, &values),
    })
}

/// Frobenius projection onto `{M : |<A, M> - b| <= t}`.
pub fn project_measurement_slab(m: &DenseMatrix, a: &DenseMatrix, b: f64, t: f64) -> Result<DenseMatrix> {
    let norm_sq = a.inner(a);
    if norm_sq == 0.0 {
        return Err(precondition("measurement matrix is zero"));
    }
    if a.shape() != m.shape() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            got: a.rows(),
        });
    }
    Ok(slab_step(m, a, b, t, norm_sq))
}

fn slab_step(m: &DenseMatrix, a: &DenseMatrix, b: f64, t: f64, norm_sq: f64) -> DenseMatrix {
    let gap = a.inner(m) - b;
    let excess = (gap.abs() - t).max(0.0);
    if excess == 0.0 {
        return m.clone();
    }
    let mut out = m.clone();
    out.axpy(-gap.signum() * excess / norm_sq, a);
    out
}

/// Density projection that reuses the previous eigenbasis as a warm start
/// and remembers its last output so the violation there costs nothing.
#[derive(Debug, Clone, Default)]
pub struct DensityProjector {
    basis: Option<DenseMatrix>,
    last_output: Option<DenseMatrix>,
}

impl DensityProjector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn project(&mut self, m: &DenseMatrix) -> Result<DenseMatrix> {
        // Inputs are built from Hermitian pieces; symmetrizing removes the
        // rounding drift before the strict Hermitian check.
        let sym = m.hermitian_part();
        let dec = match &self.basis {
            Some(basis) if basis.shape() == sym.shape() => eigh_warm(&sym, basis)?,
            _ => eigh(&sym)?,
        };
        let values = project_simplex(&dec.eigenvalues, 1.0)?;
        let out = DenseMatrix::from_spectrum(&dec.eigenvectors, &values).hermitian_part();
        self.basis = Some(dec.eigenvectors);
        self.last_output = Some(out.clone());
        Ok(out)
    }

    pub fn violation(&mut self, m: &DenseMatrix) -> Result<f64> {
        if self.last_output.as_ref() == Some(m) {
            return Ok(0.0);
        }
        let (min, trace_gap) = DensityMatrix::defects(&m.hermitian_part())?;
        Ok((-min).max(0.0).max(trace_gap))
    }
}

#[derive(Debug, Clone)]
pub enum StateConstraint {
    Slab {
        a: DenseMatrix,
        b: f64,
        t: f64,
        norm_sq: f64,
    },
    Density(DensityProjector),
}

impl StateConstraint {
    pub fn slab(a: &DenseMatrix, b: f64, t: f64) -> Self {
        let a = a.hermitian_part();
        let norm_sq = a.inner(&a);
        StateConstraint::Slab { a, b, t, norm_sq }
    }
}

impl ConvexSet<DenseMatrix> for StateConstraint {
    fn project(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            StateConstraint::Slab { a, b, t, norm_sq } => {
                if *norm_sq == 0.0 {
                    return Ok(x.clone());
                }
                Ok(slab_step(x, a, *b, *t, *norm_sq))
            }
            StateConstraint::Density(p) => p.project(x),
        }
    }

    fn violation(&mut self, x: &DenseMatrix) -> Result<f64> {
        match self {
            StateConstraint::Slab { a, b, t, .. } => Ok(((a.inner(x) - *b).abs() - *t).max(0.0)),
            StateConstraint::Density(p) => p.violation(x),
        }
    }
}

/// Slab constraints for `indices` at half-width `t`, followed by the density
/// set (last, so each cycle ends on a valid state).
fn constraints(system: &MeasurementSystem, indices: &[usize], t: f64) -> Vec<StateConstraint> {
    indices
        .iter()
        .map(|&i| StateConstraint::slab(&system.a[i], system.b[i], t))
        .chain(std::iter::once(StateConstraint::Density(DensityProjector::new())))
        .collect()
}

/// Searches for a common density matrix for every selected `k`-subset.
/// Results are in sorted subset order; `feasible = false` means "not
/// verified within budget".
pub fn check_kwise_consistency(
    system: &MeasurementSystem,
    policy: SubsetPolicy,
    opts: DykstraOptions,
) -> Result<Vec<FeasibilityReport<DensityMatrix>>> {
    system.validate()?;
    let subsets = select_subsets(system.m(), system.k, policy)?;
    let start = DensityMatrix::maximally_mixed(system.d()).matrix;
    subsets
        .into_par_iter()
        .map(|subset| {
            let mut sets = constraints(system, &subset, system.t);
            let out = dykstra(&mut sets, start.clone(), opts)?;
            Ok(FeasibilityReport {
                subset,
                feasible: out.converged,
                witness: out.converged.then_some(DensityMatrix { matrix: out.point }),
                residual: out.residual,
                iterations: out.cycles,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateOptions {
    pub max_iter: usize,
    /// Step scale; the default is the Frobenius diameter of the state set.
    pub step_scale: f64,
    /// Stop once the max residual is at most this level (default `t`).
    pub stop_at: Option<f64>,
    /// Refine with Dykstra on all slabs at level `t` when the subgradient
    /// phase ends above `t`.
    pub polish: bool,
    pub polish_opts: DykstraOptions,
    /// Cycle budget for a Dykstra attempt on all constraints at level `t`
    /// before the subgradient phase; `0` skips it. When the full system is
    /// consistent this finds a state in a handful of cycles, far cheaper
    /// than thousands of subgradient steps at large `d`.
    pub feasibility_first: usize,
}

impl Default for StateOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            step_scale: SQRT_2,
            stop_at: None,
            polish: true,
            polish_opts: DykstraOptions {
                tol: 1e-10,
                max_iter: 2_000,
            },
            feasibility_first: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSolution {
    pub rho: DensityMatrix,
    pub max_residual: f64,
    pub iterations: usize,
    pub polished: bool,
}

/// Minimizes `max_i |<A_i, rho> - b_i|` over density matrices by projected
/// subgradient descent from the maximally mixed state, after an optional
/// direct feasibility attempt at level `t`.
pub fn solve_global_state(system: &MeasurementSystem, opts: StateOptions) -> Result<StateSolution> {
    system.validate()?;
    let d = system.d();
    let all: Vec<usize> = (0..system.m()).collect();
    let mut spent = 0;
    if opts.feasibility_first > 0 {
        let mut sets = constraints(system, &all, system.t);
        let attempt = dykstra(
            &mut sets,
            DensityMatrix::maximally_mixed(d).matrix,
            DykstraOptions {
                tol: opts.polish_opts.tol,
                max_iter: opts.feasibility_first,
            },
        )?;
        spent = attempt.cycles;
        if attempt.converged {
            return Ok(StateSolution {
                max_residual: system.max_residual(&attempt.point),
                rho: DensityMatrix {
                    matrix: attempt.point,
                },
                iterations: spent,
                polished: true,
            });
        }
    }
    let measurements: Vec<DenseMatrix> = system.a.iter().map(DenseMatrix::hermitian_part).collect();
    let oracle = |x: &DenseMatrix| -> Result<(f64, DenseMatrix)> {
        let mut worst = 0;
        let mut worst_val = f64::NEG_INFINITY;
        let mut sign = 1.0;
        for (i, a) in measurements.iter().enumerate() {
            let gap = a.inner(x) - system.b[i];
            if gap.abs() > worst_val {
                worst_val = gap.abs();
                worst = i;
                sign = if gap >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        Ok((worst_val, measurements[worst].scale(sign)))
    };
    let mut projector = DensityProjector::new();
    let out = projected_subgradient(
        DensityMatrix::maximally_mixed(d).matrix,
        oracle,
        |x| projector.project(x),
        |_| {},
        SubgradientOptions {
            max_iter: opts.max_iter,
            step_scale: opts.step_scale,
            stop_at: Some(opts.stop_at.unwrap_or(system.t)),
        },
    )?;
    let mut solution = StateSolution {
        max_residual: out.best_value,
        rho: DensityMatrix { matrix: out.best },
        iterations: spent + out.iterations,
        polished: false,
    };
    if opts.polish && solution.max_residual > system.t {
        let mut sets = constraints(system, &all, system.t);
        let refined = dykstra(&mut sets, solution.rho.matrix.clone(), opts.polish_opts)?;
        solution.iterations += refined.cycles;
        if refined.converged {
            let value = system.max_residual(&refined.point);
            if value < solution.max_residual {
                solution.rho = DensityMatrix {
                    matrix: refined.point,
                };
                solution.max_residual = value;
                solution.polished = true;
            }
        }
    }
    Ok(solution)
}

/// Checks that `rho` is a density matrix and that every residual is at most
/// `t + 21 sqrt(ln d / k)`. Any `k`-wise report that is not feasible is
/// recorded as a failed hypothesis.
pub fn verify_quantum_bound(
    system: &MeasurementSystem,
    rho: &DenseMatrix,
    kwise_reports: &[FeasibilityReport<DensityMatrix>],
) -> VerificationReport {
    const CHECK: &str = "quantum_local_to_global";
    if let Err(e) = system.validate() {
        let mut report = VerificationReport::new(CHECK, f64::NAN, f64::NAN, BOUND_SLACK);
        report.fail(e.to_string());
        return report;
    }
    let bound = system.bound();
    if rho.shape() != (system.d(), system.d()) {
        let mut report = VerificationReport::new(CHECK, f64::NAN, bound, BOUND_SLACK);
        report.fail(format!("state has shape {:?}, expected {}x{}", rho.shape(), system.d(), system.d()));
        return report;
    }
    let achieved = system.max_residual(rho);
    let mut report = VerificationReport::new(CHECK, achieved, bound, BOUND_SLACK)
        .with_diagnostic("tolerance_t", system.t)
        .with_diagnostic("kwise_checked", kwise_reports.len() as f64);
    if !(achieved <= bound + BOUND_SLACK) {
        report.first_violation = (0..system.m())
            .find(|&i| system.residual(i, rho) > bound + BOUND_SLACK)
            .map(|i| i + 1);
    }
    match DensityMatrix::defects(rho) {
        Ok((min, trace_gap)) => {
            report = report
                .with_diagnostic("min_eigenvalue", min)
                .with_diagnostic("trace_defect", trace_gap);
            if min < -STATE_TOL {
                report.fail(format!("state has eigenvalue {min:e}"));
            }
            if trace_gap > STATE_TOL {
                report.fail(format!("state trace is off by {trace_gap:e}"));
            }
        }
        Err(e) => report.fail(e.to_string()),
    }
    if let Some(bad) = kwise_reports.iter().find(|r| !r.feasible) {
        report.fail(format!("k-wise consistency not verified for subset {:?}", bad.subset));
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sparsification {
    pub indices: Vec<usize>,
    /// Uniform weights `1/k`.
    pub beta: Vec<f64>,
    /// `|sum_j beta_j A_{i_j} - Id|_op`.
    pub achieved_error: f64,
    /// `e (L + 1) 21 sqrt((p - 1) / k)`; reported, never asserted.
    pub heuristic_bound: f64,
    pub p: f64,
}

/// Exploratory sparsifier for `sum_i lambda_i A_i = Id`.
///
/// Runs the greedy selection on the points `A_i - Id` in `S_p` with
/// `p = max(ln d, 2)` and returns `k` indices with uniform weights. No
/// guarantee is claimed. `op_bound` must be a caller-supplied bound on
/// `|A_i|_op`; the decomposition identity alone does not control it.
pub fn sparsify_psd_decomposition(
    a: &[DenseMatrix],
    lambda: &[f64],
    k: usize,
    op_bound: f64,
) -> Result<Sparsification> {
    if a.is_empty() {
        return Err(precondition("no matrices"));
    }
    if lambda.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: lambda.len(),
        });
    }
    let d = a[0].rows();
    if !(op_bound > 0.0) {
        return Err(precondition("operator norm bound must be positive"));
    }
    let identity = DenseMatrix::identity(d);
    let mut total = DenseMatrix::zeros(d, d);
    for (ai, &li) in a.iter().zip(lambda) {
        if ai.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: ai.rows().max(ai.cols()),
            });
        }
        total.axpy(li, ai);
    }
    let gap = total.sub(&identity).max_abs();
    if gap > DECOMPOSITION_TOL {
        return Err(precondition(format!(
            "weighted sum differs from the identity by {gap:e}"
        )));
    }
    let p = (d as f64).ln().max(2.0);
    let space = SpaceSpec::schatten(p, d)?;
    let points = a.iter().map(|ai| Point::Matrix(ai.sub(&identity))).collect();
    let mut cloud = PointCloud::new(space, points, Some(lambda.to_vec()))?;
    cloud.radius_bound = Some(cloud.max_norm()?);
    let greedy = greedy_approximate_caratheodory(&cloud, k)?;
    let mut average = DenseMatrix::zeros(d, d);
    for &i in &greedy.chosen_indices {
        average.axpy(1.0, &a[i]);
    }
    let residual = average.scale(1.0 / k as f64).sub(&identity);
    let achieved_error = crate::numkernel::singular_values(&residual.hermitian_part())?[0];
    Ok(Sparsification {
        beta: vec![1.0 / k as f64; k],
        indices: greedy.chosen_indices,
        achieved_error,
        heuristic_bound: E * (op_bound + 1.0) * 21.0 * ((p - 1.0) / k as f64).sqrt(),
        p,
    })
}
