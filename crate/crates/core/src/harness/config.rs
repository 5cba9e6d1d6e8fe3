use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constraints::{canonical_id, RestrictionEntry};
use crate::error::{CsrlError, Result};
use crate::learners::{MockParams, QConfig, UcrlConfig};
use crate::meta::MetaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    /// Recommendation env from a parameter file, or from the seeded defaults.
    Recsys {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<PathBuf>,
        #[serde(default)]
        seed: u64,
    },
    Chain {
        n: usize,
        slip: f64,
    },
    Random {
        seed: u64,
        states: usize,
        actions: usize,
        #[serde(default = "one")]
        reward_scale: f64,
    },
    /// Tabular MDP from a JSON file.
    Tabular {
        path: PathBuf,
    },
    /// One state, one step per episode; pairs with mock learners.
    Bandit {
        arms: usize,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RestrictionSpec {
    /// The 13-member recommendation set.
    RecsysDefault,
    File { path: PathBuf },
    Inline { restrictions: Vec<RestrictionEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Ucrl(UcrlConfig),
    Qlearn(QConfig),
    /// Stationary mock per restriction id.
    Mock { arms: BTreeMap<String, MockParams> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Algorithm {
    Csrl,
    /// Selection without elimination.
    Ssbas,
    Fixed(String),
    Unconstrained,
}

impl std::str::FromStr for Algorithm {
    type Err = CsrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csrl" => Ok(Algorithm::Csrl),
            "ssbas" => Ok(Algorithm::Ssbas),
            "unconstrained" => Ok(Algorithm::Unconstrained),
            _ => match s.strip_prefix("fixed:") {
                Some(id) if !id.is_empty() => Ok(Algorithm::Fixed(canonical_id(id))),
                _ => Err(CsrlError::Config(format!("unknown algorithm `{s}`"))),
            },
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Csrl => write!(f, "csrl"),
            Algorithm::Ssbas => write!(f, "ssbas"),
            Algorithm::Fixed(id) => write!(f, "fixed:{id}"),
            Algorithm::Unconstrained => write!(f, "unconstrained"),
        }
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn list(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OptimalIds {
    /// `"auto"`: restrictions whose exact restricted optimum is within
    /// `optimal_tolerance` (relative) of the best.
    Auto(String),
    List(Vec<String>),
}

fn default_seeds() -> Seeds {
    Seeds::Count(200)
}

fn default_window() -> usize {
    100
}

fn default_tolerance() -> f64 {
    0.01
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/out")
}

/// A complete experiment description. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    pub restrictions: RestrictionSpec,
    #[serde(default)]
    pub meta: MetaConfig,
    pub learner: LearnerSpec,
    pub episodes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_ids: Option<OptimalIds>,
    #[serde(default = "default_tolerance")]
    pub optimal_tolerance: f64,
    /// Smoothing window for sample complexity and optimal rates.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Fixed maximum for sample complexity instead of the curve's own maximum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_max: Option<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CsrlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and resolves relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CsrlError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.env {
            EnvSpec::Recsys { params: Some(p), .. } | EnvSpec::Tabular { path: p } => fix(p),
            _ => {}
        }
        if let RestrictionSpec::File { path } = &mut self.restrictions {
            fix(path);
        }
        fix(&mut self.out);
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(CsrlError::Config("episodes must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(CsrlError::Config("window must be at least 1".into()));
        }
        if self.seeds.list().is_empty() {
            return Err(CsrlError::Config("no seeds".into()));
        }
        let seeds = self.seeds.list();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(CsrlError::Config("duplicate seeds".into()));
        }
        if let Some(OptimalIds::Auto(s)) = &self.optimal_ids {
            if s != "auto" {
                return Err(CsrlError::Config(format!("optimal_ids must be a list or \"auto\", got \"{s}\"")));
            }
        }
        if !(0.0..1.0).contains(&self.optimal_tolerance) {
            return Err(CsrlError::Config("optimal_tolerance must be in [0, 1)".into()));
        }
        self.meta.validate()
    }

    /// The meta config the algorithm actually runs with.
    pub fn effective_meta(&self) -> MetaConfig {
        let mut m = self.meta;
        if self.algorithm == Algorithm::Ssbas {
            m.eliminate_enabled = false;
        }
        m
    }
}
