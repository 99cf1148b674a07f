use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use nodim::report::{FeasibilityReport, VerificationReport};
use nodim::rng::GENERATOR_NAME;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Self-contained run record: the instance and witness are embedded so
/// `verify` can re-check it without solving again.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub generator: String,
    pub config: BTreeMap<String, Value>,
    pub pass: bool,
    pub checks: Vec<VerificationReport>,
    pub instance: Value,
    pub witness: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
}

/// Outcome of the `k`-wise subset checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hypothesis {
    pub policy: String,
    pub checked: usize,
    pub verified: usize,
    pub reports: Value,
}

impl Hypothesis {
    pub fn from_reports<W: Serialize>(policy: String, reports: &[FeasibilityReport<W>]) -> Result<Self> {
        Ok(Self {
            policy,
            checked: reports.len(),
            verified: reports.iter().filter(|r| r.feasible).count(),
            reports: serde_json::to_value(reports)?,
        })
    }

    pub fn reports<W: DeserializeOwned>(&self) -> Result<Vec<FeasibilityReport<W>>> {
        Ok(serde_json::from_value(self.reports.clone())?)
    }
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, Value>) -> Self {
        Self {
            command: command.to_string(),
            seed,
            generator: GENERATOR_NAME.to_string(),
            config,
            pass: false,
            checks: Vec::new(),
            instance: Value::Null,
            witness: Value::Null,
            hypothesis: None,
        }
    }

    /// Sets `pass` from the checks: every check must pass.
    pub fn settle(&mut self) {
        self.pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
    }

    pub fn print_summary(&self) {
        for c in &self.checks {
            println!("{}", c.summary());
        }
        if let Some(h) = &self.hypothesis {
            println!("k-wise subsets verified: {}/{} ({})", h.verified, h.checked, h.policy);
        }
        println!(
            "{}: {} (seed {}, {})",
            self.command,
            if self.pass { "PASS" } else { "FAIL" },
            self.seed,
            self.generator
        );
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<R: Serialize>(path: Option<&Path>, rows: &[R]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    match path {
        Some(p) => fs::write(p, &buf).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", String::from_utf8(buf)?),
    }
    Ok(())
}
