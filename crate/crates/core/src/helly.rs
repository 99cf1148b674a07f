//! Local-to-global Chebyshev regression over the `l_1` ball.
//!
//! If every `k` of the slabs `K_i = {x : |<a_i, x> - b_i| <= r}` meet inside
//! `R B_1`, then some `x` in `e R B_1` has every residual at most
//! `r + 21 R sqrt(ln d / k)`. This module checks the `k`-wise hypothesis by
//! Dykstra projections, computes a global point by projected subgradient
//! descent on the max residual, and verifies the conclusion.

use std::collections::BTreeSet;
use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::feasibility::{
    dykstra, projected_subgradient, ConvexSet, DykstraOptions, SubgradientOptions,
    DEFAULT_MAX_ITER,
};
use crate::numkernel::project_l1_ball;
use crate::report::{FeasibilityReport, VerificationReport};
use crate::rng::SeededRng;
use crate::spaces::{dimension_back_exponent, lp_norm, Extreme};

/// Largest number of subsets `Enumerate` may visit.
pub const ENUMERATION_BUDGET: u128 = 100_000;
pub const DEFAULT_SAMPLE_COUNT: usize = 200;
pub const BOUND_SLACK: f64 = 1e-9;
pub const MIN_DIMENSION: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSystem {
    /// Rows `a_i`, entries in `[-1, 1]`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    /// Slab half-width.
    pub r: f64,
    pub k: usize,
}

impl SlabSystem {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn d(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d) = (self.m(), self.d());
        if m == 0 {
            return Err(Error::InvalidInstance("no constraints".into()));
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
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(v.abs() <= 1.0)) {
                return Err(Error::InvalidInstance(format!("row {i} has an entry outside [-1, 1]")));
            }
        }
        if !(self.radius >= 1.0) || !self.radius.is_finite() {
            return Err(Error::InvalidInstance(format!("R must be >= 1, got {}", self.radius)));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidInstance(format!("r must be >= 0, got {}", self.r)));
        }
        if self.k == 0 || self.k > m {
            return Err(Error::InvalidInstance(format!("k must lie in 1..={m}, got {}", self.k)));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite target".into()));
        }
        Ok(())
    }

    pub fn residual(&self, i: usize, x: &[f64]) -> f64 {
        (dot(&self.a[i], x) - self.b[i]).abs()
    }

    /// `max_i |<a_i, x> - b_i|`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        (0..self.m()).map(|i| self.residual(i, x)).fold(0.0, f64::max)
    }

    /// `r + 21 R sqrt(ln d / k)`.
    pub fn bound(&self) -> f64 {
        self.r + 21.0 * self.radius * ((self.d() as f64).ln() / self.k as f64).sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorConstraint {
    /// `|<a, x> - b| <= r`.
    Slab { a: Vec<f64>, b: f64, r: f64 },
    /// `|x|_1 <= radius`.
    L1Ball { radius: f64 },
}

impl VectorConstraint {
    pub fn slab(a: Vec<f64>, b: f64, r: f64) -> Self {
        VectorConstraint::Slab { a, b, r }
    }
}

impl ConvexSet<Vec<f64>> for VectorConstraint {
    fn project(&mut self, x: &Vec<f64>) -> Result<Vec<f64>> {
        match self {
            VectorConstraint::Slab { a, b, r } => {
                let norm_sq = dot(a, a);
                if norm_sq == 0.0 {
                    return Ok(x.clone());
                }
                let gap = dot(a, x) - *b;
                let excess = (gap.abs() - *r).max(0.0);
                if excess == 0.0 {
                    return Ok(x.clone());
                }
                let step = gap.signum() * excess / norm_sq;
                Ok(x.iter().zip(a.iter()).map(|(xi, ai)| xi - step * ai).collect())
            }
            VectorConstraint::L1Ball { radius } => project_l1_ball(x, *radius),
        }
    }

    fn violation(&mut self, x: &Vec<f64>) -> Result<f64> {
        Ok(match self {
            VectorConstraint::Slab { a, b, r } => ((dot(a, x) - *b).abs() - *r).max(0.0),
            VectorConstraint::L1Ball { radius } => (l1(x) - *radius).max(0.0),
        })
    }
}

/// Dykstra projections onto the intersection of `sets` from `start`.
/// `feasible = false` means the budget ran out before every violation fell
/// below `tol`; it does not certify emptiness.
pub fn dykstra_intersect(
    sets: &[VectorConstraint],
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FeasibilityReport<Vec<f64>>> {
    let mut sets = sets.to_vec();
    let out = dykstra(&mut sets, start.to_vec(), DykstraOptions { tol, max_iter })?;
    Ok(FeasibilityReport {
        subset: Vec::new(),
        feasible: out.converged,
        witness: out.converged.then_some(out.point),
        residual: out.residual,
        iterations: out.cycles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubsetPolicy {
    Enumerate,
    Sample { count: usize, seed: u64 },
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c.saturating_mul(n as u128 - i) / (i + 1);
    }
    c
}

/// Subsets of size `k` of `0..m` selected by `policy`, sorted.
pub fn select_subsets(m: usize, k: usize, policy: SubsetPolicy) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > m {
        return Err(precondition(format!("subset size must lie in 1..={m}, got {k}")));
    }
    let total = binomial(m, k);
    match policy {
        SubsetPolicy::Enumerate => {
            if total > ENUMERATION_BUDGET {
                return Err(Error::BudgetExceeded {
                    count: total,
                    budget: ENUMERATION_BUDGET,
                    hint: "use a sampling policy",
                });
            }
            let mut out = Vec::with_capacity(total as usize);
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                out.push(idx.clone());
                let mut pos = k;
                while pos > 0 && idx[pos - 1] == m - k + pos - 1 {
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                idx[pos - 1] += 1;
                for j in pos..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
            Ok(out)
        }
        SubsetPolicy::Sample { count, seed } => {
            if total <= count as u128 {
                return select_subsets(m, k, SubsetPolicy::Enumerate);
            }
            let mut rng = SeededRng::new(seed);
            let mut chosen = BTreeSet::new();
            let mut attempts = 0;
            while chosen.len() < count && attempts < 20 * count.max(1) {
                chosen.insert(rng.subset(m, k));
                attempts += 1;
            }
            Ok(chosen.into_iter().collect())
        }
    }
}

/// Constraint list for subset `subset`: its slabs followed by `R B_1`.
pub fn subset_constraints(system: &SlabSystem, subset: &[usize]) -> Vec<VectorConstraint> {
    subset
        .iter()
        .map(|&j| VectorConstraint::slab(system.a[j].clone(), system.b[j], system.r))
        .chain(std::iter::once(VectorConstraint::L1Ball {
            radius: system.radius,
        }))
        .collect()
}

/// Runs the feasibility search for every selected `k`-subset; results are
/// in sorted subset order.
pub fn check_kwise_feasibility(
    system: &SlabSystem,
    policy: SubsetPolicy,
    opts: DykstraOptions,
) -> Result<Vec<FeasibilityReport<Vec<f64>>>> {
    system.validate()?;
    let subsets = select_subsets(system.m(), system.k, policy)?;
    let start = vec![0.0; system.d()];
    subsets
        .into_par_iter()
        .map(|subset| {
            let sets = subset_constraints(system, &subset);
            let mut report = dykstra_intersect(&sets, &start, opts.tol, opts.max_iter)?;
            report.subset = subset;
            Ok(report)
        })
        .collect()
}

/// Re-checks a witness against its subset from scratch; returns the largest
/// violation (slab excess or `l_1` excess).
pub fn witness_violation(system: &SlabSystem, subset: &[usize], witness: &[f64]) -> f64 {
    let slabs = subset
        .iter()
        .map(|&j| (system.residual(j, witness) - system.r).max(0.0))
        .fold(0.0, f64::max);
    slabs.max((l1(witness) - system.radius).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalOptions {
    pub max_iter: usize,
    /// Refine with Dykstra on all slabs at level `r` when the subgradient
    /// phase ends above `r`.
    pub polish: bool,
    pub polish_opts: DykstraOptions,
    /// Record `|x|_1 / |x|_p'` (with `p' = ln d / (ln d - 1)`) on every iterate.
    pub track_substitution: bool,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            polish: true,
            polish_opts: DykstraOptions {
                tol: 1e-10,
                max_iter: DEFAULT_MAX_ITER,
            },
            track_substitution: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSolution {
    pub x: Vec<f64>,
    pub max_residual: f64,
    pub iterations: usize,
    /// Whether the Dykstra refinement produced the returned point.
    pub polished: bool,
    /// Largest `|x|_1 / |x|_p'` seen along the iterates, when tracked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substitution_quotient: Option<f64>,
}

/// Minimizes `max_i |<a_i, x> - b_i|` over `e R B_1`.
///
/// Projected subgradient with step `e R / sqrt(t)` along the unit
/// subgradient, keeping the best iterate and stopping once the residual
/// reaches `r`. If it ends above `r`, Dykstra on all slabs at level `r`
/// intersected with `e R B_1` is tried from the best iterate and taken when
/// it converges to a better point.
pub fn solve_global_chebyshev(system: &SlabSystem, opts: GlobalOptions) -> Result<GlobalSolution> {
    system.validate()?;
    let d = system.d();
    let big = E * system.radius;
    let dual_p = if opts.track_substitution {
        Some(dimension_back_exponent(Extreme::SumNorm, d)?)
    } else {
        None
    };
    let mut quotient: Option<f64> = None;
    let oracle = |x: &Vec<f64>| -> Result<(f64, Vec<f64>)> {
        let mut worst = 0;
        let mut worst_val = f64::NEG_INFINITY;
        let mut sign = 1.0;
        for i in 0..system.m() {
            let gap = dot(&system.a[i], x) - system.b[i];
            if gap.abs() > worst_val {
                worst_val = gap.abs();
                worst = i;
                sign = if gap >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        Ok((worst_val, system.a[worst].iter().map(|v| sign * v).collect()))
    };
    let observe = |x: &Vec<f64>| {
        if let Some(q) = dual_p {
            let denom = lp_norm(x, q);
            if denom > 0.0 {
                let ratio = l1(x) / denom;
                quotient = Some(quotient.map_or(ratio, |prev: f64| prev.max(ratio)));
            }
        }
    };
    let out = projected_subgradient(
        vec![0.0; d],
        oracle,
        |x| project_l1_ball(x, big),
        observe,
        SubgradientOptions {
            max_iter: opts.max_iter,
            step_scale: big,
            stop_at: Some(system.r),
        },
    )?;
    let mut solution = GlobalSolution {
        max_residual: out.best_value,
        x: out.best,
        iterations: out.iterations,
        polished: false,
        substitution_quotient: quotient,
    };
    if opts.polish && solution.max_residual > system.r {
        let mut sets: Vec<VectorConstraint> = (0..system.m())
            .map(|j| VectorConstraint::slab(system.a[j].clone(), system.b[j], system.r))
            .collect();
        sets.push(VectorConstraint::L1Ball { radius: big });
        let refined = dykstra(&mut sets, solution.x.clone(), opts.polish_opts)?;
        solution.iterations += refined.cycles;
        if refined.converged && l1(&refined.point) <= big + BOUND_SLACK {
            let value = system.max_residual(&refined.point);
            if value < solution.max_residual {
                solution.x = refined.point;
                solution.max_residual = value;
                solution.polished = true;
            }
        }
    }
    Ok(solution)
}

/// Checks `max_i |<a_i, x> - b_i| <= r + 21 R sqrt(ln d / k)` and
/// `|x|_1 <= e R`, recomputing both from scratch.
pub fn verify_local_to_global(system: &SlabSystem, x: &[f64]) -> VerificationReport {
    if let Err(e) = system.validate() {
        let mut report = VerificationReport::new("local_to_global", f64::NAN, f64::NAN, BOUND_SLACK);
        report.fail(e.to_string());
        return report;
    }
    if x.len() != system.d() {
        let mut report = VerificationReport::new("local_to_global", f64::NAN, system.bound(), BOUND_SLACK);
        report.fail(format!("witness has length {}, expected {}", x.len(), system.d()));
        return report;
    }
    let achieved = system.max_residual(x);
    let bound = system.bound();
    let norm1 = l1(x);
    let ball = E * system.radius;
    let mut report = VerificationReport::new("local_to_global", achieved, bound, BOUND_SLACK)
        .with_diagnostic("l1_norm", norm1)
        .with_diagnostic("l1_radius", ball)
        .with_diagnostic("slab_half_width", system.r);
    if !(achieved <= bound + BOUND_SLACK) {
        report.first_violation = (0..system.m())
            .find(|&i| system.residual(i, x) > bound + BOUND_SLACK)
            .map(|i| i + 1);
    }
    if !(norm1 <= ball + BOUND_SLACK) {
        report.fail(format!("|x|_1 = {norm1} exceeds e R = {ball}"));
    }
    report
}
