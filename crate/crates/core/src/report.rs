use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};

/// JSON has no NaN or infinity; serde_json writes them as `null`, so read
/// `null` back as NaN.
fn null_as_nan<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Outcome of checking one bound statement against a computed witness.
///
/// `pass` holds exactly when `achieved <= bound + tolerance` and every
/// structural check listed in `failures` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub pass: bool,
    #[serde(deserialize_with = "null_as_nan")]
    pub achieved: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub bound: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub tolerance: f64,
    /// 1-based step (or constraint index) of the first violated bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, achieved: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            pass: achieved <= bound + tolerance,
            achieved,
            bound,
            tolerance,
            first_violation: None,
            failures: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    /// Records a structural failure; the report no longer passes.
    pub fn fail(&mut self, reason: impl Into<String>) {
        self.failures.push(reason.into());
        self.pass = false;
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} (achieved {:.6e}, bound {:.6e})",
            self.check,
            if self.pass { "PASS" } else { "FAIL" },
            self.achieved,
            self.bound
        );
        for f in &self.failures {
            s.push_str("; ");
            s.push_str(f);
        }
        s
    }
}

/// Result of a feasibility search on one subset of constraints.
///
/// `feasible = false` means "not verified within budget", never a proof of
/// emptiness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport<W> {
    pub subset: Vec<usize>,
    pub feasible: bool,
    pub witness: Option<W>,
    /// Largest constraint violation at the final iterate.
    pub residual: f64,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_bound_and_failures() {
        let mut r = VerificationReport::new("x", 1.0, 1.0, 0.0);
        assert!(r.pass);
        r.fail("structural");
        assert!(!r.pass);
        assert!(!VerificationReport::new("x", 1.0 + 1e-6, 1.0, 1e-9).pass);
    }

    #[test]
    fn nan_survives_json() {
        let r = VerificationReport::new("x", f64::NAN, 1.0, 0.0);
        let back: VerificationReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert!(back.achieved.is_nan());
    }
}
