//! Deterministic additive sketching of bounded signals.
//!
//! Signals `f_1..f_n` with values in `[-1, 1]` on a finite probability space
//! `(Omega, mu)` are compressed to `x_i = (f_i(w_1), ..., f_i(w_k)) / sqrt(k)`,
//! and pairwise squared distances are read back as `|x_i - x_j|^2`. The atoms
//! `w_s` are chosen by the greedy Carathéodory selection applied to the
//! cloud `v(w)_{ij} = |f_i(w) - f_j(w)|^2`, whose `mu`-barycenter is the
//! vector of true squared distances. The greedy runs in `l_p` with
//! `p = ln D` (`D = n(n-1)/2`), which is within a factor `e` of `l_inf`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::caratheodory::{center, greedy_approximate_caratheodory, GreedySolution, PointCloud};
use crate::error::{precondition, Error, Result};
use crate::report::VerificationReport;
use crate::spaces::{
    caratheodory_rate, lp_norm, substitute_dimension_back, Extreme, Point, SpaceKind, SpaceSpec,
};

pub const MAX_SIGNALS: usize = 256;
pub const MAX_ATOMS: usize = 100_000;
pub const MU_SUM_TOL: f64 = 1e-12;
pub const BOUND_SLACK: f64 = 1e-9;
/// Signals per sketch needed for the `n >= 8` regime of the additive
/// guarantee; smaller ensembles (down to 3) are still accepted.
pub const THEOREM_MIN_SIGNALS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct FiniteSignalEnsemble {
    pub n: usize,
    #[serde(rename = "N")]
    pub omega_size: usize,
    pub mu: Vec<f64>,
    /// `values[i][w]` is signal `i` at atom `w`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawEnsemble {
    n: usize,
    #[serde(rename = "N")]
    omega_size: usize,
    mu: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawEnsemble> for FiniteSignalEnsemble {
    type Error = Error;

    fn try_from(raw: RawEnsemble) -> Result<Self> {
        let e = FiniteSignalEnsemble {
            n: raw.n,
            omega_size: raw.omega_size,
            mu: raw.mu,
            values: raw.values,
        };
        e.validate()?;
        Ok(e)
    }
}

impl FiniteSignalEnsemble {
    pub fn new(mu: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let e = Self {
            n: values.len(),
            omega_size: mu.len(),
            mu,
            values,
        };
        e.validate()?;
        Ok(e)
    }

    /// Uniform measure on `values[0].len()` atoms.
    pub fn uniform(values: Vec<Vec<f64>>) -> Result<Self> {
        let atoms = values.first().map_or(0, Vec::len);
        Self::new(vec![1.0 / atoms.max(1) as f64; atoms], values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.values.len(),
            });
        }
        if self.n < 3 {
            return Err(precondition(format!("need at least 3 signals, got {}", self.n)));
        }
        if self.n > MAX_SIGNALS {
            return Err(precondition(format!(
                "at most {MAX_SIGNALS} signals supported, got {}",
                self.n
            )));
        }
        if self.omega_size == 0 || self.omega_size > MAX_ATOMS {
            return Err(precondition(format!(
                "atom count must be in 1..={MAX_ATOMS}, got {}",
                self.omega_size
            )));
        }
        if self.mu.len() != self.omega_size {
            return Err(Error::DimensionMismatch {
                expected: self.omega_size,
                got: self.mu.len(),
            });
        }
        if self.mu.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(precondition("mu must be nonnegative"));
        }
        let total: f64 = self.mu.iter().sum();
        if (total - 1.0).abs() > MU_SUM_TOL {
            return Err(precondition(format!("mu sums to {total}, expected 1")));
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.len() != self.omega_size {
                return Err(Error::DimensionMismatch {
                    expected: self.omega_size,
                    got: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !(v.abs() <= 1.0)) {
                return Err(precondition(format!("signal {i} has value {v} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    /// Number of unordered pairs, `n (n - 1) / 2`.
    pub fn pair_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Pairs `(i, j)`, `i < j`, in the coordinate order used throughout.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j)))
    }

    /// The cloud point `v(w)` at atom `w`.
    pub fn distance_vector(&self, atom: usize) -> Vec<f64> {
        self.pairs()
            .map(|(i, j)| {
                let diff = self.values[i][atom] - self.values[j][atom];
                diff * diff
            })
            .collect()
    }
}

/// `D(i, j) = sum_w mu(w) |f_i(w) - f_j(w)|^2`, pairs in `(0,1), (0,2), ...` order.
pub fn pairwise_sq_distances(ensemble: &FiniteSignalEnsemble) -> Vec<f64> {
    ensemble
        .pairs()
        .map(|(i, j)| {
            let fi = &ensemble.values[i];
            let fj = &ensemble.values[j];
            ensemble
                .mu
                .iter()
                .zip(fi.iter().zip(fj))
                .map(|(m, (a, b))| m * (a - b) * (a - b))
                .sum()
        })
        .collect()
}

/// Space the distance cloud lives in: `l_p^D` with `p = max(ln D, 2)`.
pub fn sketch_space(ensemble: &FiniteSignalEnsemble) -> Result<SpaceSpec> {
    let dim = ensemble.pair_count();
    if dim < 3 {
        return Err(precondition(format!("need at least 3 signal pairs, got {dim}")));
    }
    substitute_dimension_back(Extreme::SupNorm, SpaceKind::VectorLp, dim)
}

/// The (uncentered) cloud `{v(w)}` with weights `mu`.
pub fn build_distance_cloud(ensemble: &FiniteSignalEnsemble) -> Result<PointCloud> {
    ensemble.validate()?;
    let space = sketch_space(ensemble)?;
    let points = (0..ensemble.omega_size)
        .map(|w| Point::Vector(ensemble.distance_vector(w)))
        .collect();
    PointCloud::new(space, points, Some(ensemble.mu.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    #[serde(rename = "atoms")]
    pub sample_atoms: Vec<usize>,
    pub k: usize,
    /// `D = n (n - 1) / 2`.
    #[serde(rename = "D", default)]
    pub dimension: usize,
    /// `B(k) = 4 e * 21 sqrt((p - 1) / k)`.
    #[serde(rename = "bound")]
    pub derived_bound: f64,
}

/// `4 e * 21 sqrt((p - 1) / k)`: values lie in `[0, 4]`, so the centered
/// cloud has sup-radius at most 4 and `l_p` radius at most `4e`.
pub fn derived_bound(space: &SpaceSpec, k: usize) -> Result<f64> {
    Ok(4.0 * E * caratheodory_rate(space, k)?)
}

fn sketch_from(space: &SpaceSpec, solution: &GreedySolution, dimension: usize) -> Result<Sketch> {
    let k = solution.chosen_indices.len();
    Ok(Sketch {
        sample_atoms: solution.chosen_indices.clone(),
        k,
        dimension,
        derived_bound: derived_bound(space, k)?,
    })
}

pub fn greedy_sketch(ensemble: &FiniteSignalEnsemble, k: usize) -> Result<Sketch> {
    let cloud = center(&build_distance_cloud(ensemble)?)?;
    let solution = greedy_approximate_caratheodory(&cloud, k)?;
    sketch_from(&cloud.space, &solution, ensemble.pair_count())
}

/// One greedy run up to the largest rung, truncated at every rung.
pub fn greedy_sketch_ladder(ensemble: &FiniteSignalEnsemble, ladder: &[usize]) -> Result<Vec<Sketch>> {
    if ladder.is_empty() {
        return Ok(Vec::new());
    }
    if ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] == 0 {
        return Err(precondition("k ladder must be positive and strictly increasing"));
    }
    let cloud = center(&build_distance_cloud(ensemble)?)?;
    let top = *ladder.last().expect("non-empty");
    let full = greedy_approximate_caratheodory(&cloud, top)?;
    ladder
        .iter()
        .map(|&k| sketch_from(&cloud.space, &full.truncated(k), ensemble.pair_count()))
        .collect()
}

/// Linear encoder applied to a full signal `values[w]`.
pub fn encode_signal(sketch: &Sketch, signal: &[f64]) -> Result<Vec<f64>> {
    let scale = 1.0 / (sketch.k as f64).sqrt();
    sketch
        .sample_atoms
        .iter()
        .map(|&w| {
            signal.get(w).map(|v| v * scale).ok_or(Error::DimensionMismatch {
                expected: w + 1,
                got: signal.len(),
            })
        })
        .collect()
}

pub fn encode(ensemble: &FiniteSignalEnsemble, sketch: &Sketch, signal_index: usize) -> Result<Vec<f64>> {
    let signal = ensemble.values.get(signal_index).ok_or_else(|| {
        precondition(format!(
            "signal index {signal_index} out of range for {} signals",
            ensemble.n
        ))
    })?;
    encode_signal(sketch, signal)
}

/// Squared Euclidean distance.
pub fn decode(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Largest `|Dec(Enc f_i, Enc f_j) - D(i, j)|` over pairs.
pub fn max_additive_error(ensemble: &FiniteSignalEnsemble, sketch: &Sketch) -> Result<f64> {
    let codes = (0..ensemble.n)
        .map(|i| encode(ensemble, sketch, i))
        .collect::<Result<Vec<_>>>()?;
    let truth = pairwise_sq_distances(ensemble);
    let mut worst: f64 = 0.0;
    for ((i, j), t) in ensemble.pairs().zip(&truth) {
        worst = worst.max((decode(&codes[i], &codes[j])? - t).abs());
    }
    Ok(worst)
}

/// `(1/k) sum_s v(w_s) - barycenter`, the residual of the sampled average.
fn sample_residual(ensemble: &FiniteSignalEnsemble, sketch: &Sketch) -> Vec<f64> {
    let mut avg = vec![0.0; ensemble.pair_count()];
    for &w in &sketch.sample_atoms {
        for (a, v) in avg.iter_mut().zip(ensemble.distance_vector(w)) {
            *a += v;
        }
    }
    let truth = pairwise_sq_distances(ensemble);
    avg.iter()
        .zip(&truth)
        .map(|(a, t)| a / sketch.k as f64 - t)
        .collect()
}

/// Checks the additive guarantee and each link of the bound chain:
/// pairwise error <= sup residual of the sampled average <= l_p residual
/// <= `B(k)`.
pub fn verify_sketch(ensemble: &FiniteSignalEnsemble, sketch: &Sketch) -> VerificationReport {
    let mut report = VerificationReport::new("sketch", f64::NAN, sketch.derived_bound, BOUND_SLACK);
    let space = match ensemble.validate().and_then(|_| sketch_space(ensemble)) {
        Ok(s) => s,
        Err(e) => {
            report.fail(e.to_string());
            return report;
        }
    };
    if sketch.k == 0 || sketch.sample_atoms.len() != sketch.k {
        report.fail(format!(
            "sketch has k = {} but {} atoms",
            sketch.k,
            sketch.sample_atoms.len()
        ));
        return report;
    }
    if let Some(w) = sketch.sample_atoms.iter().find(|&&w| w >= ensemble.omega_size) {
        report.fail(format!("atom {w} out of range"));
        return report;
    }
    let error = match max_additive_error(ensemble, sketch) {
        Ok(e) => e,
        Err(e) => {
            report.fail(e.to_string());
            return report;
        }
    };
    let residual = sample_residual(ensemble, sketch);
    let sup = lp_norm(&residual, f64::INFINITY);
    let lp = lp_norm(&residual, space.p);
    report.achieved = error;
    report.pass = error <= sketch.derived_bound + BOUND_SLACK;
    if !report.pass {
        report.fail(format!(
            "max additive error {error:e} exceeds bound {:e}",
            sketch.derived_bound
        ));
    }
    if error > sup + 1e-12 {
        report.fail(format!("pairwise error {error:e} exceeds sup residual {sup:e}"));
    }
    if sup > lp * (1.0 + 1e-12) + 1e-15 {
        report.fail(format!("sup residual {sup:e} exceeds l_p residual {lp:e}"));
    }
    if lp > sketch.derived_bound + BOUND_SLACK {
        report.fail(format!("l_p residual {lp:e} exceeds bound {:e}", sketch.derived_bound));
    }
    report.diagnostics.insert("k".into(), sketch.k as f64);
    report.diagnostics.insert("p".into(), space.p);
    report.diagnostics.insert("pairs".into(), space.d as f64);
    report.diagnostics.insert("sup_residual".into(), sup);
    report.diagnostics.insert("lp_residual".into(), lp);
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub max_error: f64,
    pub bound: f64,
}

/// Error curve over a strictly increasing ladder of sketch sizes.
pub fn error_curve(ensemble: &FiniteSignalEnsemble, ladder: &[usize]) -> Result<Vec<CurvePoint>> {
    greedy_sketch_ladder(ensemble, ladder)?
        .iter()
        .map(|s| {
            Ok(CurvePoint {
                k: s.k,
                max_error: max_additive_error(ensemble, s)?,
                bound: s.derived_bound,
            })
        })
        .collect()
}

/// Smallest rung whose error is at most `eps`.
pub fn empirical_k(curve: &[CurvePoint], eps: f64) -> Option<usize> {
    curve.iter().find(|c| c.max_error <= eps).map(|c| c.k)
}
