//! Deterministic greedy approximate Carathéodory selection.
//!
//! Given a finite cloud whose (weighted) barycenter is the origin, the greedy
//! picks points one at a time so that the running average stays within the
//! Carathéodory rate `21 sqrt((p - 1) / j)` times the cloud radius at every
//! step `j`. The next point minimizes the pairing with the norming
//! functional of the current running sum; a zero running sum picks the
//! lowest index.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::report::VerificationReport;
use crate::spaces::{caratheodory_rate, duality_map, norm, Point, SpaceSpec, ZERO_NORM_THRESHOLD};

/// Tolerance on the weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Slack added to every per-step bound comparison.
pub const BOUND_SLACK: f64 = 1e-9;
/// Upper limit on multisets enumerated by [`brute_force_best_average`].
pub const BRUTE_FORCE_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub space: SpaceSpec,
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Largest norm of a centered point; set by [`center`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_bound: Option<f64>,
}

impl PointCloud {
    pub fn new(space: SpaceSpec, points: Vec<Point>, weights: Option<Vec<f64>>) -> Result<Self> {
        let cloud = Self {
            space,
            points,
            weights,
            radius_bound: None,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(precondition("point cloud is empty"));
        }
        for p in &self.points {
            self.space.check(p)?;
        }
        if let Some(w) = &self.weights {
            if w.len() != self.points.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.points.len(),
                    got: w.len(),
                });
            }
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(precondition("weights must be finite and nonnegative"));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(precondition(format!("weights sum to {total}, expected 1")));
            }
        }
        Ok(())
    }

    /// Weighted (or uniform) barycenter.
    pub fn barycenter(&self) -> Point {
        let n = self.points.len() as f64;
        let mut acc = self.space.zero();
        for (i, p) in self.points.iter().enumerate() {
            let w = self.weights.as_ref().map_or(1.0 / n, |w| w[i]);
            acc.axpy(w, p);
        }
        acc
    }

    pub fn max_norm(&self) -> Result<f64> {
        self.points
            .iter()
            .map(|p| norm(&self.space, p))
            .try_fold(0.0_f64, |acc, n| n.map(|n| acc.max(n)))
    }

    fn radius(&self) -> Result<f64> {
        match self.radius_bound {
            Some(r) => Ok(r),
            None => self.max_norm(),
        }
    }
}

/// Subtracts the barycenter from every point and records the radius bound.
pub fn center(cloud: &PointCloud) -> Result<PointCloud> {
    cloud.validate()?;
    let bary = cloud.barycenter();
    let points: Vec<Point> = cloud.points.iter().map(|p| p.sub(&bary)).collect();
    let mut out = PointCloud {
        space: cloud.space,
        points,
        weights: cloud.weights.clone(),
        radius_bound: None,
    };
    out.radius_bound = Some(out.max_norm()?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedySolution {
    pub chosen_indices: Vec<usize>,
    /// Norm of the running average after each step.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    /// Rate times radius bound after each step.
    pub bound_history: Vec<f64>,
}

impl GreedySolution {
    /// The solution after the first `k` steps (greedy choices never depend
    /// on later steps).
    pub fn truncated(&self, k: usize) -> GreedySolution {
        let k = k.min(self.chosen_indices.len());
        GreedySolution {
            chosen_indices: self.chosen_indices[..k].to_vec(),
            residual_history: self.residual_history[..k].to_vec(),
            final_residual: if k == 0 { 0.0 } else { self.residual_history[k - 1] },
            bound_history: self.bound_history[..k].to_vec(),
        }
    }
}

fn ensure_centered(cloud: &PointCloud) -> Result<()> {
    let scale = 1.0 + cloud.radius()?;
    let residual = norm(&cloud.space, &cloud.barycenter())?;
    if residual > 1e-10 * scale {
        return Err(precondition(format!(
            "cloud is not centered (barycenter norm {residual:e}); call center() first"
        )));
    }
    Ok(())
}

/// Index of the point with the smallest pairing against `functional`,
/// lowest index on ties.
fn argmin_pairing(points: &[Point], functional: &Point) -> usize {
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for (i, q) in points.iter().enumerate() {
        let v = functional.pairing(q);
        if v < best_value {
            best_value = v;
            best = i;
        }
    }
    best
}

/// Runs `k` greedy steps on a centered cloud.
pub fn greedy_approximate_caratheodory(cloud: &PointCloud, k: usize) -> Result<GreedySolution> {
    cloud.validate()?;
    if cloud.space.p < 2.0 {
        return Err(precondition(format!(
            "greedy selection needs p >= 2, got p = {}",
            cloud.space.p
        )));
    }
    if k == 0 {
        return Err(precondition("step count must be positive"));
    }
    ensure_centered(cloud)?;
    let radius = cloud.radius()?;
    let space = &cloud.space;

    let mut sum = space.zero();
    let mut chosen = Vec::with_capacity(k);
    let mut residual_history = Vec::with_capacity(k);
    let mut bound_history = Vec::with_capacity(k);
    for step in 1..=k {
        let index = if norm(space, &sum)? < ZERO_NORM_THRESHOLD {
            0
        } else {
            let functional = duality_map(space, &sum)?;
            argmin_pairing(&cloud.points, &functional)
        };
        sum.axpy(1.0, &cloud.points[index]);
        chosen.push(index);
        residual_history.push(norm(space, &sum)? / step as f64);
        bound_history.push(caratheodory_rate(space, step)? * radius);
    }
    Ok(GreedySolution {
        final_residual: *residual_history.last().expect("k >= 1"),
        chosen_indices: chosen,
        residual_history,
        bound_history,
    })
}

fn multiset_count(n: usize, k: usize) -> u128 {
    // C(n + k - 1, k), saturating.
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c.saturating_mul(n as u128 + i) / (i + 1);
        if c > u128::MAX / 4 {
            return u128::MAX;
        }
    }
    c
}

/// Exhaustive minimum of the norm of `k`-term averages (repetition allowed).
/// Returns the lexicographically first minimizing multiset.
pub fn brute_force_best_average(cloud: &PointCloud, k: usize) -> Result<(Vec<usize>, f64)> {
    cloud.validate()?;
    if k == 0 {
        return Err(precondition("step count must be positive"));
    }
    let n = cloud.len();
    let count = multiset_count(n, k);
    if count > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded {
            count,
            budget: BRUTE_FORCE_BUDGET,
            hint: "reduce the cloud size or k",
        });
    }
    let mut idx = vec![0usize; k];
    let mut best = (idx.clone(), f64::INFINITY);
    loop {
        let mut sum = cloud.space.zero();
        for &i in &idx {
            sum.axpy(1.0, &cloud.points[i]);
        }
        let value = norm(&cloud.space, &sum)? / k as f64;
        if value < best.1 {
            best = (idx.clone(), value);
        }
        // next nondecreasing sequence
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        let v = idx[pos - 1] + 1;
        for slot in idx.iter_mut().skip(pos - 1) {
            *slot = v;
        }
    }
    Ok(best)
}

/// Recomputes every running average of `solution` from the cloud and checks
/// the per-step Carathéodory bound.
pub fn verify_caratheodory(cloud: &PointCloud, solution: &GreedySolution) -> VerificationReport {
    let k = solution.chosen_indices.len();
    let mut report = VerificationReport::new("caratheodory", f64::NAN, f64::NAN, BOUND_SLACK);
    report.pass = true;
    if k == 0 {
        report.fail("empty solution");
        return report;
    }
    if let Some(bad) = solution.chosen_indices.iter().find(|&&i| i >= cloud.len()) {
        report.fail(format!("index {bad} out of range for {} points", cloud.len()));
        return report;
    }
    let radius = match cloud.radius() {
        Ok(r) => r,
        Err(e) => {
            report.fail(e.to_string());
            return report;
        }
    };
    let space = &cloud.space;
    let mut sum = space.zero();
    let mut worst_ratio: f64 = 0.0;
    for (j, &i) in solution.chosen_indices.iter().enumerate() {
        let step = j + 1;
        sum.axpy(1.0, &cloud.points[i]);
        let (residual, rate) = match (norm(space, &sum), caratheodory_rate(space, step)) {
            (Ok(n), Ok(r)) => (n / step as f64, r),
            (Err(e), _) | (_, Err(e)) => {
                report.fail(e.to_string());
                return report;
            }
        };
        let bound = rate * radius;
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(residual / bound);
        }
        report.achieved = residual;
        report.bound = bound;
        if residual > bound + BOUND_SLACK && report.first_violation.is_none() {
            report.first_violation = Some(step);
            report.fail(format!(
                "step {step}: residual {residual:e} exceeds bound {bound:e}"
            ));
        }
    }
    report.diagnostics.insert("steps".into(), k as f64);
    report.diagnostics.insert("radius_bound".into(), radius);
    report.diagnostics.insert("worst_residual_to_bound".into(), worst_ratio);
    report
}
