use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nodim::helly::{SubsetPolicy, DEFAULT_SAMPLE_COUNT};
use nodim::spaces::{SpaceKind, SpaceSpec};

#[derive(Debug, Parser)]
#[command(name = "nodim", version, about = "Dimension-free Caratheodory and Helly verifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the greedy and Helly rates for a space as CSV.
    Bounds {
        /// `lp:P:D` or `schatten:P:D`.
        #[arg(long)]
        space: SpaceArg,
        /// `A..B` (inclusive) or a comma list.
        #[arg(long, default_value = "1..256")]
        k: KList,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy approximate Caratheodory on a centered point cloud.
    Carath {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "lp:4:20")]
        space: SpaceArg,
        /// Number of greedy steps.
        #[arg(long, default_value_t = 256)]
        k: usize,
    },
    /// Deterministic sketch of pairwise squared distances.
    Sketch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "16,64,256")]
        k_ladder: KList,
        /// Write the error curve here as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Local-to-global Chebyshev regression over the l1 ball.
    Chebyshev {
        #[command(flatten)]
        common: Common,
    },
    /// Density matrix feasibility from k-wise consistency.
    Quantum {
        #[command(flatten)]
        common: Common,
    },
    /// Exploratory sparsification of a PSD decomposition of the identity.
    Sparsify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "8,32,128")]
        k_ladder: KList,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-check a saved report without re-solving.
    Verify {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Feasibility tolerance for the subset checks.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration budget for the solvers.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// `enumerate` or `sample:COUNT`.
    #[arg(long)]
    pub policy: Option<PolicyArg>,
    /// Read the instance from a JSON file instead of generating one.
    #[arg(long, conflicts_with = "gen")]
    pub instance: Option<PathBuf>,
    /// Generator parameters, `KEY=VAL,...`.
    #[arg(long = "gen")]
    pub gen: Option<GenArg>,
}

#[derive(Debug, Clone, Copy)]
pub struct SpaceArg(pub SpaceSpec);

impl FromStr for SpaceArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [kind, p, d] = parts.as_slice() else {
            bail!("expected KIND:P:D, got {s:?}");
        };
        let kind = match *kind {
            "lp" => SpaceKind::VectorLp,
            "schatten" => SpaceKind::SchattenSp,
            other => bail!("unknown space kind {other:?}; use lp or schatten"),
        };
        let p: f64 = p.parse().with_context(|| format!("bad exponent {p:?}"))?;
        let d: usize = d.parse().with_context(|| format!("bad dimension {d:?}"))?;
        Ok(SpaceArg(SpaceSpec::new(kind, p, d)?))
    }
}

/// Strictly increasing list of positive integers.
#[derive(Debug, Clone)]
pub struct KList(pub Vec<usize>);

impl FromStr for KList {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
            let a: usize = a.trim().parse().with_context(|| format!("bad range start in {s:?}"))?;
            let b: usize = b.trim().parse().with_context(|| format!("bad range end in {s:?}"))?;
            (a..=b).collect()
        } else {
            s.split(',')
                .map(|v| v.trim().parse().with_context(|| format!("bad entry {v:?}")))
                .collect::<Result<_>>()?
        };
        if values.is_empty() || values[0] == 0 || values.windows(2).any(|w| w[0] >= w[1]) {
            bail!("k values must be positive and strictly increasing: {s:?}");
        }
        Ok(KList(values))
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PolicyArg {
    Enumerate,
    Sample(usize),
}

impl PolicyArg {
    pub fn with_seed(self, seed: u64) -> SubsetPolicy {
        match self {
            PolicyArg::Enumerate => SubsetPolicy::Enumerate,
            PolicyArg::Sample(count) => SubsetPolicy::Sample { count, seed },
        }
    }
}

impl Default for PolicyArg {
    fn default() -> Self {
        PolicyArg::Sample(DEFAULT_SAMPLE_COUNT)
    }
}

impl FromStr for PolicyArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "enumerate" {
            return Ok(PolicyArg::Enumerate);
        }
        let count = s
            .strip_prefix("sample:")
            .ok_or_else(|| anyhow!("policy must be enumerate or sample:COUNT, got {s:?}"))?;
        let count: usize = count.parse().with_context(|| format!("bad sample count {count:?}"))?;
        if count == 0 {
            bail!("sample count must be positive");
        }
        Ok(PolicyArg::Sample(count))
    }
}

impl std::fmt::Display for PolicyArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyArg::Enumerate => write!(f, "enumerate"),
            PolicyArg::Sample(n) => write!(f, "sample:{n}"),
        }
    }
}

/// `KEY=VAL,...` generator parameters. Keys are case sensitive (`R` and `r`
/// differ).
#[derive(Debug, Clone, Default)]
pub struct GenArg(pub BTreeMap<String, f64>);

impl FromStr for GenArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("expected KEY=VAL, got {part:?}"))?;
            let value: f64 = value.trim().parse().with_context(|| format!("bad value for {key}"))?;
            if map.insert(key.trim().to_string(), value).is_some() {
                bail!("duplicate key {key:?}");
            }
        }
        Ok(GenArg(map))
    }
}

/// Generator parameters with defaults, rejecting unknown keys.
pub struct Params {
    values: BTreeMap<String, f64>,
}

impl Params {
    pub fn new(gen: Option<&GenArg>, defaults: &[(&str, f64)]) -> Result<Self> {
        let mut values: BTreeMap<String, f64> =
            defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        if let Some(g) = gen {
            for (k, v) in &g.0 {
                if !values.contains_key(k) {
                    let known: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
                    bail!("unknown generator key {k:?}; expected one of {known:?}");
                }
                values.insert(k.clone(), *v);
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        let v = self.get(key);
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            bail!("{key} must be a nonnegative integer, got {v}");
        }
        Ok(v as usize)
    }

    pub fn echo(&self) -> BTreeMap<String, f64> {
        self.values.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_space() {
        let s: SpaceArg = "lp:4:100".parse().unwrap();
        assert_eq!(s.0, SpaceSpec::lp(4.0, 100).unwrap());
        assert!("lp:0.5:3".parse::<SpaceArg>().is_err());
        assert!("banach:2:3".parse::<SpaceArg>().is_err());
    }

    #[test]
    fn parses_k_lists() {
        assert_eq!("1..4".parse::<KList>().unwrap().0, vec![1, 2, 3, 4]);
        assert_eq!("16,64,256".parse::<KList>().unwrap().0, vec![16, 64, 256]);
        assert!("4,2".parse::<KList>().is_err());
        assert!("0..3".parse::<KList>().is_err());
    }

    #[test]
    fn parses_policy_and_gen() {
        assert!(matches!("sample:5".parse::<PolicyArg>().unwrap(), PolicyArg::Sample(5)));
        assert!(matches!("enumerate".parse::<PolicyArg>().unwrap(), PolicyArg::Enumerate));
        assert!("sample:x".parse::<PolicyArg>().is_err());
        let g: GenArg = "d=50,m=200,R=2,r=0.1".parse().unwrap();
        assert_eq!(g.0["R"], 2.0);
        assert_eq!(g.0["r"], 0.1);
        let p = Params::new(Some(&g), &[("d", 1.0), ("m", 1.0), ("R", 1.0), ("r", 0.0)]).unwrap();
        assert_eq!(p.count("m").unwrap(), 200);
        assert!(Params::new(Some(&g), &[("d", 1.0)]).is_err());
    }
}
