//! Ambient spaces `l_p^d` and `S_p` (d x d matrices): norms, norming
//! functionals, modulus bounds, rate sequences, and the dimension-back
//! substitution of the extreme spaces.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::numkernel::{singular_values, svd, DenseMatrix};
use crate::rng::SeededRng;

/// Norms below this are treated as zero by the duality map.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    #[serde(rename = "lp")]
    VectorLp,
    #[serde(rename = "schatten")]
    SchattenSp,
}

/// `l_p^d` or the Schatten class `S_p` on `d x d` matrices, `1 < p < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpaceSpec")]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub p: f64,
    pub d: usize,
}

#[derive(Deserialize)]
struct RawSpaceSpec {
    kind: SpaceKind,
    p: f64,
    d: usize,
}

impl TryFrom<RawSpaceSpec> for SpaceSpec {
    type Error = Error;

    fn try_from(raw: RawSpaceSpec) -> Result<Self> {
        SpaceSpec::new(raw.kind, raw.p, raw.d)
    }
}

impl SpaceSpec {
    pub fn new(kind: SpaceKind, p: f64, d: usize) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(precondition(format!("exponent must be finite and > 1, got {p}")));
        }
        if d == 0 {
            return Err(precondition("dimension must be at least 1"));
        }
        Ok(Self { kind, p, d })
    }

    pub fn lp(p: f64, d: usize) -> Result<Self> {
        Self::new(SpaceKind::VectorLp, p, d)
    }

    pub fn schatten(p: f64, d: usize) -> Result<Self> {
        Self::new(SpaceKind::SchattenSp, p, d)
    }

    /// Conjugate exponent `p / (p - 1)`.
    pub fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn dual(&self) -> Self {
        Self {
            p: self.dual_exponent(),
            ..*self
        }
    }

    pub fn check(&self, x: &Point) -> Result<()> {
        match (self.kind, x) {
            (SpaceKind::VectorLp, Point::Vector(v)) if v.len() == self.d => Ok(()),
            (SpaceKind::VectorLp, Point::Vector(v)) => Err(Error::DimensionMismatch {
                expected: self.d,
                got: v.len(),
            }),
            (SpaceKind::SchattenSp, Point::Matrix(m)) if m.rows() == self.d && m.cols() == self.d => {
                Ok(())
            }
            (SpaceKind::SchattenSp, Point::Matrix(m)) => Err(Error::DimensionMismatch {
                expected: self.d,
                got: m.rows().max(m.cols()),
            }),
            (SpaceKind::VectorLp, Point::Matrix(_)) => {
                Err(precondition("matrix point given for a vector space"))
            }
            (SpaceKind::SchattenSp, Point::Vector(_)) => {
                Err(precondition("vector point given for a Schatten space"))
            }
        }
    }

    pub fn zero(&self) -> Point {
        match self.kind {
            SpaceKind::VectorLp => Point::Vector(vec![0.0; self.d]),
            SpaceKind::SchattenSp => Point::Matrix(DenseMatrix::zeros(self.d, self.d)),
        }
    }
}

/// A point of either space family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Vector(Vec<f64>),
    Matrix(DenseMatrix),
}

impl Point {
    pub fn add(&self, other: &Point) -> Point {
        match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => {
                Point::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (Point::Matrix(a), Point::Matrix(b)) => Point::Matrix(a.add(b)),
            _ => panic!("mixed point kinds"),
        }
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, alpha: f64) -> Point {
        match self {
            Point::Vector(a) => Point::Vector(a.iter().map(|x| x * alpha).collect()),
            Point::Matrix(a) => Point::Matrix(a.scale(alpha)),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Point) {
        match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += alpha * y)
            }
            (Point::Matrix(a), Point::Matrix(b)) => a.axpy(alpha, b),
            _ => panic!("mixed point kinds"),
        }
    }

    /// Real pairing: dot product, or `Re Tr(A* B)`.
    pub fn pairing(&self, other: &Point) -> f64 {
        match (self, other) {
            (Point::Vector(a), Point::Vector(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Point::Matrix(a), Point::Matrix(b)) => a.inner(b),
            _ => panic!("mixed point kinds"),
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Point::Vector(v) => Some(v),
            Point::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DenseMatrix> {
        match self {
            Point::Matrix(m) => Some(m),
            Point::Vector(_) => None,
        }
    }
}

/// `l_p` norm of a real sequence, scaled by the largest entry to avoid
/// overflow. `p = inf` gives the max norm.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 || p.is_infinite() {
        return m;
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    if p == 2.0 {
        return m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt();
    }
    m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Schatten `p` norm for any `p >= 1`, including `inf`.
pub fn schatten_norm(a: &DenseMatrix, p: f64) -> Result<f64> {
    Ok(lp_norm(&singular_values(a)?, p))
}

pub fn norm(space: &SpaceSpec, x: &Point) -> Result<f64> {
    space.check(x)?;
    match x {
        Point::Vector(v) => Ok(lp_norm(v, space.p)),
        Point::Matrix(m) => schatten_norm(m, space.p),
    }
}

/// Norming functional of `x`: the unit vector of the dual space (exponent
/// `p / (p - 1)`) with `<J(x), x> = |x|`.
pub fn duality_map(space: &SpaceSpec, x: &Point) -> Result<Point> {
    space.check(x)?;
    let p = space.p;
    match x {
        Point::Vector(v) => {
            let n = lp_norm(v, p);
            if n < ZERO_NORM_THRESHOLD {
                return Err(Error::ZeroNormingFunctional);
            }
            Ok(Point::Vector(
                v.iter().map(|&xi| (xi.abs() / n).powf(p - 1.0).copysign(xi)).collect(),
            ))
        }
        Point::Matrix(m) => {
            let dec = svd(m)?;
            let n = lp_norm(&dec.singular_values, p);
            if n < ZERO_NORM_THRESHOLD {
                return Err(Error::ZeroNormingFunctional);
            }
            let d = m.rows();
            let mut left = dec.left.clone();
            for (j, s) in dec.singular_values.iter().enumerate() {
                let w = (s / n).powf(p - 1.0);
                for i in 0..d {
                    left[(i, j)] *= w;
                }
            }
            Ok(Point::Matrix(left.matmul(&dec.right.adjoint())?))
        }
    }
}

/// Which closed form of the Carathéodory sequence to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RateForm {
    /// `21 sqrt((p - 1) / k)`.
    #[default]
    Rounded,
    /// `4 e^2 / (k rho^{-1}(1/k))` with `rho^{-1}(s) = sqrt(2 s / (p - 1))`,
    /// i.e. `2 sqrt(2) e^2 sqrt((p - 1) / k)`.
    Raw,
}

pub fn caratheodory_rate(space: &SpaceSpec, k: usize) -> Result<f64> {
    caratheodory_rate_with(space, k, RateForm::Rounded)
}

pub fn caratheodory_rate_with(space: &SpaceSpec, k: usize, form: RateForm) -> Result<f64> {
    if space.p < 2.0 {
        return Err(precondition(format!(
            "Caratheodory rate needs p >= 2, got p = {}",
            space.p
        )));
    }
    if k == 0 {
        return Err(precondition("step count must be positive"));
    }
    let k = k as f64;
    Ok(match form {
        RateForm::Rounded => 21.0 * ((space.p - 1.0) / k).sqrt(),
        RateForm::Raw => {
            let smoothness_inverse = (2.0 / ((space.p - 1.0) * k)).sqrt();
            4.0 * E * E / (k * smoothness_inverse)
        }
    })
}

/// `(4 sqrt(2) / sqrt(p - 1)) / sqrt(k)` for `1 < p <= 2`.
pub fn helly_rate(space: &SpaceSpec, k: usize) -> Result<f64> {
    if space.p > 2.0 {
        return Err(precondition(format!("Helly rate needs 1 < p <= 2, got p = {}", space.p)));
    }
    if k == 0 {
        return Err(precondition("step count must be positive"));
    }
    Ok(4.0 * std::f64::consts::SQRT_2 / (space.p - 1.0).sqrt() / (k as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateKind {
    Caratheodory,
    Helly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub kind: RateKind,
    pub values: BTreeMap<usize, f64>,
}

impl RateTable {
    pub fn build(space: &SpaceSpec, kind: RateKind, ks: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for k in ks {
            let v = match kind {
                RateKind::Caratheodory => caratheodory_rate(space, k)?,
                RateKind::Helly => helly_rate(space, k)?,
            };
            values.insert(k, v);
        }
        Ok(Self { kind, values })
    }
}

/// Extreme space being replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extreme {
    /// `l_inf` or `S_inf`, replaced by exponent `ln d`.
    SupNorm,
    /// `l_1` or `S_1`, replaced by exponent `ln d / (ln d - 1)`.
    SumNorm,
}

fn check_substitution_dim(d: usize) -> Result<()> {
    if d < 3 {
        return Err(precondition("substitution requires d >= 3"));
    }
    Ok(())
}

/// Unclamped exponent `ln d` (sup direction) or `ln d / (ln d - 1)` (sum
/// direction). With it the norm comparisons hold with factor exactly `e`.
pub fn dimension_back_exponent(extreme: Extreme, d: usize) -> Result<f64> {
    check_substitution_dim(d)?;
    let l = (d as f64).ln();
    Ok(match extreme {
        Extreme::SupNorm => l,
        Extreme::SumNorm => l / (l - 1.0),
    })
}

/// Substitute space for an extreme one, with the exponent clamped to the
/// side of 2 the rate lemmas need: `max(ln d, 2)` for the sup direction and
/// `min(ln d / (ln d - 1), 2)` for the sum direction.
pub fn substitute_dimension_back(extreme: Extreme, kind: SpaceKind, d: usize) -> Result<SpaceSpec> {
    let raw = dimension_back_exponent(extreme, d)?;
    let p = match extreme {
        Extreme::SupNorm => raw.max(2.0),
        Extreme::SumNorm => raw.min(2.0),
    };
    SpaceSpec::new(kind, p, d)
}

/// `(lower, upper) = (1, e)` in `|x|_inf <= |x|_p <= e |x|_inf` and
/// `|x|_p' <= |x|_1 <= e |x|_p'`.
pub fn sandwich_factors(_extreme: Extreme, _kind: SpaceKind, d: usize) -> Result<(f64, f64)> {
    check_substitution_dim(d)?;
    Ok((1.0, E))
}

/// `(p - 1) eps^2 / 8`, valid for `1 < p <= 2`.
pub fn modulus_convexity_lower(space: &SpaceSpec, eps: f64) -> Result<f64> {
    if space.p > 2.0 {
        return Err(precondition(format!(
            "convexity bound needs 1 < p <= 2, got p = {}",
            space.p
        )));
    }
    if !(0.0..=2.0).contains(&eps) {
        return Err(precondition(format!("eps must lie in [0, 2], got {eps}")));
    }
    Ok((space.p - 1.0) * eps * eps / 8.0)
}

/// `(p - 1) t^2 / 2`, valid for `2 <= p < inf`.
pub fn modulus_smoothness_upper(space: &SpaceSpec, t: f64) -> Result<f64> {
    if space.p < 2.0 {
        return Err(precondition(format!(
            "smoothness bound needs p >= 2, got p = {}",
            space.p
        )));
    }
    if !(t >= 0.0) {
        return Err(precondition(format!("t must be nonnegative, got {t}")));
    }
    Ok((space.p - 1.0) * t * t / 2.0)
}

fn random_unit(space: &SpaceSpec, rng: &mut SeededRng) -> Result<Point> {
    loop {
        let raw = match space.kind {
            SpaceKind::VectorLp => Point::Vector(rng.gaussian_vec(space.d)),
            SpaceKind::SchattenSp => Point::Matrix(rng.gaussian_matrix(space.d, false)),
        };
        let n = norm(space, &raw)?;
        if n > 1e-8 {
            return Ok(raw.scale(1.0 / n));
        }
    }
}

fn normalized(space: &SpaceSpec, x: &Point) -> Result<Point> {
    let n = norm(space, x)?;
    Ok(x.scale(1.0 / n))
}

/// Sampled upper estimate of the modulus of convexity at `eps`.
///
/// Each sample takes a random unit `x`, a random unit `z`, and walks
/// `y(theta) = (cos theta x + sin theta z) / |...|` from `x` (`theta = 0`) to
/// `-x` (`theta = pi`), bisecting for a point with `|x - y| >= eps` as close
/// to `eps` as possible. The antipodal pair `y = -x` is always included.
/// Returns the minimum of `1 - |(x + y)/2|` over the admissible pairs.
pub fn empirical_modulus_convexity(
    space: &SpaceSpec,
    eps: f64,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    if !(0.0..=2.0).contains(&eps) {
        return Err(precondition(format!("eps must lie in [0, 2], got {eps}")));
    }
    let mut rng = SeededRng::new(seed);
    let mut best = f64::INFINITY;
    let gap = |x: &Point, y: &Point| -> Result<f64> {
        Ok(1.0 - 0.5 * norm(space, &x.add(y))?)
    };
    for _ in 0..sample_count.max(1) {
        let x = random_unit(space, &mut rng)?;
        let antipode = x.scale(-1.0);
        best = best.min(gap(&x, &antipode)?);
        if eps >= 2.0 {
            continue;
        }
        let z = random_unit(space, &mut rng)?;
        let along = |theta: f64| -> Result<Option<Point>> {
            let raw = x.scale(theta.cos()).add(&z.scale(theta.sin()));
            if norm(space, &raw)? < 1e-12 {
                return Ok(None);
            }
            Ok(Some(normalized(space, &raw)?))
        };
        let (mut lo, mut hi) = (0.0_f64, std::f64::consts::PI);
        let mut hi_point = antipode.clone();
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let Some(y) = along(mid)? else { break };
            if norm(space, &x.sub(&y))? >= eps {
                hi = mid;
                hi_point = y;
            } else {
                lo = mid;
            }
        }
        if norm(space, &x.sub(&hi_point))? >= eps {
            best = best.min(gap(&x, &hi_point)?);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(p: f64, d: usize) -> SpaceSpec {
        SpaceSpec::lp(p, d).unwrap()
    }

    #[test]
    fn euclidean_norm() {
        assert_eq!(norm(&lp(2.0, 2), &Point::Vector(vec![3.0, 4.0])).unwrap(), 5.0);
    }

    #[test]
    fn schatten_identity() {
        for &p in &[1.5, 2.0, 3.0] {
            let s = SpaceSpec::schatten(p, 4).unwrap();
            let n = norm(&s, &Point::Matrix(DenseMatrix::identity(4))).unwrap();
            assert!((n - 4f64.powf(1.0 / p)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SpaceSpec::lp(1.0, 3).is_err());
        assert!(SpaceSpec::lp(f64::INFINITY, 3).is_err());
        assert!(SpaceSpec::lp(2.0, 0).is_err());
        let bad: std::result::Result<SpaceSpec, _> =
            serde_json::from_str(r#"{"kind":"lp","p":0.5,"d":3}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn json_shape() {
        let s = SpaceSpec::schatten(3.0, 4).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"kind":"schatten","p":3.0,"d":4}"#);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            norm(&lp(2.0, 3), &Point::Vector(vec![1.0])),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn duality_map_basis_vector() {
        for &p in &[1.5, 2.0, 4.0, 7.0] {
            let j = duality_map(&lp(p, 3), &Point::Vector(vec![1.0, 0.0, 0.0])).unwrap();
            assert_eq!(j, Point::Vector(vec![1.0, 0.0, 0.0]));
        }
    }

    #[test]
    fn duality_map_l4_ones() {
        let x = Point::Vector(vec![1.0, 1.0]);
        let j = duality_map(&lp(4.0, 2), &x).unwrap();
        let expected = 2f64.powf(-0.75);
        for v in j.as_vector().unwrap() {
            assert!((v - expected).abs() < 1e-15);
        }
        assert!((j.pairing(&x) - 2f64.powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn duality_map_rejects_origin() {
        assert_eq!(
            duality_map(&lp(3.0, 2), &Point::Vector(vec![0.0, 0.0])),
            Err(Error::ZeroNormingFunctional)
        );
    }

    #[test]
    fn caratheodory_rate_values() {
        assert!((caratheodory_rate(&lp(2.0, 5), 441).unwrap() - 1.0).abs() < 1e-15);
        assert!((caratheodory_rate(&lp(2.0, 5), 4 * 441).unwrap() - 0.5).abs() < 1e-15);
        let expected = 21.0 * 3f64.sqrt() / 4.0;
        assert!((caratheodory_rate(&lp(4.0, 5), 16).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 9.093).abs() < 1e-3);
        assert!(caratheodory_rate(&lp(1.5, 5), 4).is_err());
    }

    #[test]
    fn raw_rate_constant() {
        let raw = caratheodory_rate_with(&lp(2.0, 5), 1, RateForm::Raw).unwrap();
        assert!((raw - 2.0 * 2f64.sqrt() * E * E).abs() < 1e-12);
        assert!(raw < 21.0 && raw > 20.89);
    }

    #[test]
    fn helly_rate_values() {
        assert!((helly_rate(&lp(2.0, 5), 32).unwrap() - 1.0).abs() < 1e-15);
        assert!((helly_rate(&lp(2.0, 5), 128).unwrap() - 0.5).abs() < 1e-15);
        let r = helly_rate(&lp(1.5, 5), 8).unwrap();
        assert!((r - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(helly_rate(&lp(2.5, 5), 8).is_err());
    }

    #[test]
    fn substitution_exponents() {
        let s = substitute_dimension_back(Extreme::SupNorm, SpaceKind::VectorLp, 1000).unwrap();
        assert!((s.p - 1000f64.ln()).abs() < 1e-15);
        assert!((s.p - 6.9078).abs() < 1e-4);
        let s = substitute_dimension_back(Extreme::SumNorm, SpaceKind::VectorLp, 1000).unwrap();
        assert!((s.p - 1.1693).abs() < 1e-4);
        let s = substitute_dimension_back(Extreme::SupNorm, SpaceKind::VectorLp, 3).unwrap();
        assert_eq!(s.p, 2.0);
        let s = substitute_dimension_back(Extreme::SumNorm, SpaceKind::SchattenSp, 3).unwrap();
        assert_eq!(s.p, 2.0);
        assert!(substitute_dimension_back(Extreme::SupNorm, SpaceKind::VectorLp, 2).is_err());
        assert!(sandwich_factors(Extreme::SumNorm, SpaceKind::VectorLp, 2).is_err());
    }

    #[test]
    fn sandwich_tight_cases() {
        for &d in &[3usize, 10, 100] {
            let p = dimension_back_exponent(Extreme::SupNorm, d).unwrap();
            let ones = vec![1.0; d];
            assert!((lp_norm(&ones, p) - E).abs() < 1e-12);
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            assert_eq!(lp_norm(&e1, p), 1.0);
        }
    }

    #[test]
    fn moduli_formulas() {
        assert_eq!(modulus_convexity_lower(&lp(2.0, 3), 1.0).unwrap(), 0.125);
        assert_eq!(modulus_smoothness_upper(&lp(2.0, 3), 0.0).unwrap(), 0.0);
        assert!((modulus_smoothness_upper(&lp(3.0, 3), 0.1).unwrap() - 0.01).abs() < 1e-15);
        assert!(modulus_convexity_lower(&lp(3.0, 3), 1.0).is_err());
        assert!(modulus_smoothness_upper(&lp(1.5, 3), 1.0).is_err());
    }

    #[test]
    fn empirical_modulus_antipodal() {
        let v = empirical_modulus_convexity(&lp(2.0, 3), 2.0, 50, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_modulus_hilbert() {
        let v = empirical_modulus_convexity(&lp(2.0, 3), 1.0, 10_000, 11).unwrap();
        let exact = 1.0 - (1.0f64 - 0.25).sqrt();
        assert!(v >= exact - 1e-9);
        assert!(v >= 0.125);
        // bisection drives pairs onto |x - y| = eps, so the estimate is sharp
        assert!(v - exact < 1e-6);
    }

    #[test]
    fn empirical_modulus_l15() {
        let s = lp(1.5, 4);
        let v = empirical_modulus_convexity(&s, 1.0, 10_000, 5).unwrap();
        assert!(v >= 0.0625 - 1e-9);
    }
}
