//! Solver engines shared by the regression and quantum modules: Dykstra's
//! cyclic projections for convex feasibility and a projected subgradient
//! method for max-residual minimization.

use crate::error::{precondition, Result};
use crate::numkernel::DenseMatrix;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Minimal linear structure the engines need.
pub trait Iterate: Clone {
    fn zeros_like(&self) -> Self;
    /// `self += alpha * other`.
    fn axpy(&mut self, alpha: f64, other: &Self);
    /// Euclidean (Frobenius) norm.
    fn norm(&self) -> f64;

    fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

impl Iterate for Vec<f64> {
    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        self.iter_mut().zip(other).for_each(|(x, y)| *x += alpha * y);
    }

    fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Iterate for DenseMatrix {
    fn zeros_like(&self) -> Self {
        DenseMatrix::zeros(self.rows(), self.cols())
    }

    fn axpy(&mut self, alpha: f64, other: &Self) {
        DenseMatrix::axpy(self, alpha, other);
    }

    fn norm(&self) -> f64 {
        self.frobenius_norm()
    }
}

/// A closed convex set with an exact Euclidean projection.
///
/// `project` takes `&mut self` so implementations may cache state between
/// calls (warm starts).
pub trait ConvexSet<P> {
    fn project(&mut self, x: &P) -> Result<P>;
    /// Nonnegative violation measure, zero on the set.
    fn violation(&mut self, x: &P) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DykstraOutcome<P> {
    pub point: P,
    pub converged: bool,
    /// Largest violation at `point`.
    pub residual: f64,
    pub cycles: usize,
}

/// Dykstra's cyclic projections. After every full cycle the current iterate
/// is tested against all sets; the run stops once every violation is at
/// most `tol`.
pub fn dykstra<P: Iterate, S: ConvexSet<P>>(
    sets: &mut [S],
    start: P,
    opts: DykstraOptions,
) -> Result<DykstraOutcome<P>> {
    if !(opts.tol > 0.0) {
        return Err(precondition(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if sets.is_empty() {
        return Ok(DykstraOutcome {
            point: start,
            converged: true,
            residual: 0.0,
            cycles: 0,
        });
    }
    let mut x = start;
    let mut increments: Vec<P> = sets.iter().map(|_| x.zeros_like()).collect();
    let mut residual = f64::INFINITY;
    for cycle in 1..=opts.max_iter.max(1) {
        for (set, inc) in sets.iter_mut().zip(increments.iter_mut()) {
            let shifted = x.plus(inc);
            let projected = set.project(&shifted)?;
            *inc = shifted.minus(&projected);
            x = projected;
        }
        residual = max_violation(sets, &x)?;
        if residual <= opts.tol {
            return Ok(DykstraOutcome {
                point: x,
                converged: true,
                residual,
                cycles: cycle,
            });
        }
    }
    Ok(DykstraOutcome {
        point: x,
        converged: false,
        residual,
        cycles: opts.max_iter.max(1),
    })
}

pub fn max_violation<P, S: ConvexSet<P>>(sets: &mut [S], x: &P) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for set in sets.iter_mut() {
        worst = worst.max(set.violation(x)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientOptions {
    pub max_iter: usize,
    /// Step at iteration `t` is `step_scale / sqrt(t)` along the unit subgradient.
    pub step_scale: f64,
    /// Stop as soon as the best objective value is at or below this level.
    pub stop_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientOutcome<P> {
    pub best: P,
    pub best_value: f64,
    pub iterations: usize,
}

/// Projected subgradient descent with best-iterate tracking.
///
/// `oracle(x)` returns the objective value and one subgradient at `x`;
/// `project` maps onto the feasible set; `observe` sees every iterate.
pub fn projected_subgradient<P: Iterate>(
    start: P,
    mut oracle: impl FnMut(&P) -> Result<(f64, P)>,
    mut project: impl FnMut(&P) -> Result<P>,
    mut observe: impl FnMut(&P),
    opts: SubgradientOptions,
) -> Result<SubgradientOutcome<P>> {
    let mut x = project(&start)?;
    observe(&x);
    let (mut value, mut grad) = oracle(&x)?;
    let mut best = x.clone();
    let mut best_value = value;
    let done = |v: f64| opts.stop_at.is_some_and(|level| v <= level);
    let mut iterations = 0;
    while iterations < opts.max_iter && !done(best_value) {
        iterations += 1;
        let g_norm = grad.norm();
        if g_norm == 0.0 {
            break;
        }
        let step = opts.step_scale / (iterations as f64).sqrt() / g_norm;
        let mut moved = x.clone();
        moved.axpy(-step, &grad);
        x = project(&moved)?;
        observe(&x);
        (value, grad) = oracle(&x)?;
        if value < best_value {
            best_value = value;
            best = x.clone();
        }
    }
    Ok(SubgradientOutcome {
        best,
        best_value,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Half-line `x[0] >= lo`.
    struct AtLeast(f64);

    impl ConvexSet<Vec<f64>> for AtLeast {
        fn project(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
            let mut y = x.clone();
            y[0] = y[0].max(self.0);
            Ok(y)
        }
        fn violation(&mut self, x: &Vec<f64>) -> Result<f64> {
            Ok((self.0 - x[0]).max(0.0))
        }
    }

    /// Half-line `x[0] <= hi`.
    struct AtMost(f64);

    impl ConvexSet<Vec<f64>> for AtMost {
        fn project(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
            let mut y = x.clone();
            y[0] = y[0].min(self.0);
            Ok(y)
        }
        fn violation(&mut self, x: &Vec<f64>) -> Result<f64> {
            Ok((x[0] - self.0).max(0.0))
        }
    }

    enum Half {
        Lo(AtLeast),
        Hi(AtMost),
    }

    impl ConvexSet<Vec<f64>> for Half {
        fn project(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
            match self {
                Half::Lo(s) => s.project(x),
                Half::Hi(s) => s.project(x),
            }
        }
        fn violation(&mut self, x: &Vec<f64>) -> Result<f64> {
            match self {
                Half::Lo(s) => s.violation(x),
                Half::Hi(s) => s.violation(x),
            }
        }
    }

    #[test]
    fn dykstra_interval() {
        let mut sets = vec![Half::Lo(AtLeast(1.0)), Half::Hi(AtMost(2.0))];
        let out = dykstra(&mut sets, vec![5.0], DykstraOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.point, vec![2.0]);
    }

    #[test]
    fn dykstra_empty_interval_not_verified() {
        let mut sets = vec![Half::Lo(AtLeast(2.0)), Half::Hi(AtMost(1.0))];
        let opts = DykstraOptions { tol: 1e-8, max_iter: 50 };
        let out = dykstra(&mut sets, vec![0.0], opts).unwrap();
        assert!(!out.converged);
        assert_eq!(out.cycles, 50);
    }

    #[test]
    fn dykstra_rejects_bad_tol() {
        let mut sets = vec![Half::Lo(AtLeast(0.0))];
        let opts = DykstraOptions { tol: 0.0, max_iter: 5 };
        assert!(dykstra(&mut sets, vec![0.0], opts).is_err());
    }

    #[test]
    fn subgradient_abs_value() {
        // minimize |x - 0.3| over [-1, 1]
        let out = projected_subgradient(
            vec![1.0],
            |x| Ok(((x[0] - 0.3).abs(), vec![(x[0] - 0.3).signum()])),
            |x| Ok(vec![x[0].clamp(-1.0, 1.0)]),
            |_| {},
            SubgradientOptions {
                max_iter: 2000,
                step_scale: 1.0,
                stop_at: None,
            },
        )
        .unwrap();
        assert!(out.best_value < 0.05);
    }
}
