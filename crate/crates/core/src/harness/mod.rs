//! Experiment orchestration: build environments, restriction sets and
//! learners from a config, run seeds in parallel, and write records and summaries.

pub mod cli;
pub mod config;
pub mod metrics;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{Algorithm, EnvSpec, ExperimentConfig, LearnerSpec, OptimalIds, RestrictionSpec, Seeds};

use crate::constraints::{build_recsys_set, canonical_id, RecsysShape, RestrictionSetDoc};
use crate::error::{CsrlError, Result};
use crate::learners::{Learner, MockLearner, QLearner, UcrlLearner, UcrlModel};
use crate::mdp::{Environment, Restriction, RestrictionSet};
use crate::meta::{run_csrl, MetaConfig, SelectionRecord};
use crate::recsys::{gen_default_params, RecsysEnv, RecsysParams};
use crate::synthetic::{exact_constrained_vi, make_bandit_mdp, make_chain_mdp, make_random_mdp, TabularMdp};

pub const DEFAULT_FRACTIONS: [f64; 2] = [0.9, 0.97];
/// Episodes averaged for `final_mean`.
pub const FINAL_WINDOW: usize = 500;

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub seed: u64,
    pub episode: usize,
    pub learner_id: String,
    pub raw_return: f64,
    pub norm_return: f64,
    pub delta: f64,
    /// Active ids after the episode, `;`-joined.
    pub active_set: String,
    /// Id eliminated in this episode, or empty.
    pub eliminated: String,
}

/// Provenance of a run. Contains no timestamps so reruns compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub version: String,
    pub algorithm: String,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub window: usize,
    pub fractions: Vec<f64>,
    pub restriction_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popularity_ascending: Option<Vec<usize>>,
    pub optimal_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub oracle_values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_max: Option<f64>,
    pub clip_count: u64,
    pub meta: MetaConfig,
    pub learner: LearnerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Cross-seed mean raw return per episode.
    pub mean_curve: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_halfwidth: Option<Vec<f64>>,
    /// Fraction → first episode reaching it; `null` when never reached.
    pub sample_complexity: BTreeMap<String, Option<usize>>,
    pub optimal_rate: Vec<f64>,
    /// Mean of `mean_curve` over the last [`FINAL_WINDOW`] episodes.
    pub final_mean: f64,
    /// Restriction id → episodes at which it was eliminated, across seeds.
    pub elimination_episodes: BTreeMap<String, Vec<usize>>,
    pub manifest: Manifest,
}

enum BuiltEnv {
    Recsys(RecsysEnv),
    Tabular(TabularMdp),
}

impl BuiltEnv {
    fn fresh(&self) -> Box<dyn Environment> {
        match self {
            BuiltEnv::Recsys(e) => Box::new(e.clone()),
            BuiltEnv::Tabular(t) => Box::new(t.clone()),
        }
    }

    fn tabular(&self) -> TabularMdp {
        match self {
            BuiltEnv::Recsys(e) => e.to_tabular(),
            BuiltEnv::Tabular(t) => t.clone(),
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        match self {
            BuiltEnv::Recsys(e) => (e.num_states(), e.num_actions(), e.horizon_cap()),
            BuiltEnv::Tabular(t) => (t.num_states(), t.num_actions(), t.horizon()),
        }
    }
}

/// A validated, fully built experiment ready to run any number of seeds.
pub struct Experiment {
    config: ExperimentConfig,
    env: BuiltEnv,
    full_set: RestrictionSet,
    run_set: RestrictionSet,
    popularity: Option<Vec<usize>>,
    optimal_ids: Vec<String>,
    oracle_values: BTreeMap<String, f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let env = match &config.env {
            EnvSpec::Recsys { params, seed } => {
                let p = match params {
                    Some(path) => RecsysParams::load(path)?,
                    None => gen_default_params(*seed),
                };
                BuiltEnv::Recsys(RecsysEnv::new(p)?)
            }
            EnvSpec::Chain { n, slip } => BuiltEnv::Tabular(make_chain_mdp(*n, *slip)?),
            EnvSpec::Random { seed, states, actions, reward_scale } => {
                BuiltEnv::Tabular(make_random_mdp(*seed, *states, *actions, *reward_scale)?)
            }
            EnvSpec::Tabular { path } => BuiltEnv::Tabular(TabularMdp::load(path)?),
            EnvSpec::Bandit { arms } => BuiltEnv::Tabular(make_bandit_mdp(*arms)?),
        };
        let shape = match &env {
            BuiltEnv::Recsys(e) => Some(RecsysShape::from_env(e)),
            BuiltEnv::Tabular(_) => None,
        };
        let (ns, na, _) = env.dims();
        let full_set = match &config.restrictions {
            RestrictionSpec::RecsysDefault => {
                let shape = shape
                    .as_ref()
                    .ok_or_else(|| CsrlError::Config("recsys_default restrictions need a recsys env".into()))?;
                build_recsys_set(shape)?
            }
            RestrictionSpec::File { path } => RestrictionSetDoc::load(path)?.build(ns, na, shape.as_ref())?,
            RestrictionSpec::Inline { restrictions } => {
                RestrictionSetDoc { restrictions: restrictions.clone() }.build(ns, na, shape.as_ref())?
            }
        };
        for id in full_set.ids() {
            if id.is_empty() || id.contains(|c: char| c == ';' || c == ',' || c == '"' || c.is_whitespace()) {
                return Err(CsrlError::Config(format!("restriction id `{id}` cannot be written to records")));
            }
        }
        let run_set = match &config.algorithm {
            Algorithm::Csrl | Algorithm::Ssbas => full_set.clone(),
            Algorithm::Unconstrained => RestrictionSet::new(vec![Restriction::unconstrained(ns, na)])?,
            Algorithm::Fixed(id) => {
                let k = full_set
                    .index_of(id)
                    .ok_or_else(|| CsrlError::Config(format!("fixed restriction `{id}` is not in the set")))?;
                RestrictionSet::new(vec![full_set.get(k).clone().with_declared_loosers(vec![])])?
            }
        };

        let mut exp = Self {
            config,
            env,
            full_set,
            run_set,
            popularity: shape.map(|s| s.popularity.iter().map(|a| a.0).collect()),
            optimal_ids: Vec::new(),
            oracle_values: BTreeMap::new(),
        };
        if let LearnerSpec::Mock { arms } = &exp.config.learner {
            for id in exp.run_set.ids() {
                if !arms.contains_key(&id) {
                    return Err(CsrlError::Config(format!("mock learner has no arm for `{id}`")));
                }
            }
        }
        match exp.config.optimal_ids.clone() {
            None => {}
            Some(OptimalIds::List(ids)) => {
                for id in ids {
                    let id = canonical_id(&id);
                    if exp.full_set.index_of(&id).is_none() && id != crate::mdp::UNCONSTRAINED_ID {
                        return Err(CsrlError::Config(format!("optimal id `{id}` is not in the set")));
                    }
                    exp.optimal_ids.push(id);
                }
            }
            Some(OptimalIds::Auto(_)) => {
                exp.oracle_values = exp.oracle_values()?;
                let best = exp.oracle_values.values().copied().fold(f64::NEG_INFINITY, f64::max);
                let cut = best - exp.config.optimal_tolerance * best.abs();
                exp.optimal_ids = exp.full_set.ids().into_iter().filter(|id| exp.oracle_values[id] >= cut).collect();
            }
        }
        Ok(exp)
    }

    /// Exact restricted optimum of every member, from the start distribution.
    /// Mock learners report their configured means instead.
    pub fn oracle_values(&self) -> Result<BTreeMap<String, f64>> {
        if let LearnerSpec::Mock { arms } = &self.config.learner {
            return self
                .full_set
                .ids()
                .into_iter()
                .map(|id| match arms.get(&id) {
                    Some(p) => Ok((id, p.mu)),
                    None => Err(CsrlError::Config(format!("mock learner has no arm for `{id}`"))),
                })
                .collect();
        }
        let mdp = self.env.tabular();
        self.full_set
            .members()
            .iter()
            .map(|r| Ok((r.id().to_string(), exact_constrained_vi(&mdp, r, 1.0)?.initial_value(&mdp))))
            .collect()
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn restriction_set(&self) -> &RestrictionSet {
        &self.full_set
    }

    /// Ids of the learners that actually run, in index order.
    pub fn run_ids(&self) -> Vec<String> {
        self.run_set.ids()
    }

    pub fn optimal_ids(&self) -> &[String] {
        &self.optimal_ids
    }

    fn build_learners(&self) -> Result<Vec<Box<dyn Learner>>> {
        let (ns, na, horizon) = self.env.dims();
        let members = self.run_set.members();
        match &self.config.learner {
            LearnerSpec::Ucrl(cfg) => {
                let model = UcrlModel::shared(ns, na);
                let opts = cfg.evi_options(horizon);
                members
                    .iter()
                    .map(|r| Ok(Box::new(UcrlLearner::new(r.clone(), model.clone(), opts)?) as Box<dyn Learner>))
                    .collect()
            }
            LearnerSpec::Qlearn(cfg) => {
                Ok(members.iter().map(|r| Box::new(QLearner::new(r.clone(), cfg)) as Box<dyn Learner>).collect())
            }
            LearnerSpec::Mock { arms } => members
                .iter()
                .map(|r| Ok(Box::new(MockLearner::new(r.clone(), arms[r.id()])?) as Box<dyn Learner>))
                .collect(),
        }
    }

    /// Runs one seed. The same (config, seed) always yields the same records.
    pub fn run_seed(&self, seed: u64) -> Result<Vec<SelectionRecord>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = self.env.fresh();
        let mut learners = self.build_learners()?;
        run_csrl(
            env.as_mut(),
            &mut learners,
            self.run_set.clone(),
            self.config.effective_meta(),
            &mut rng,
            self.config.episodes,
        )
    }

    pub fn to_rows(&self, seed: u64, records: &[SelectionRecord]) -> Vec<RecordRow> {
        let ids = self.run_set.ids();
        records
            .iter()
            .map(|r| RecordRow {
                seed,
                episode: r.episode,
                learner_id: ids[r.chosen].clone(),
                raw_return: r.raw_return,
                norm_return: r.norm_return,
                delta: r.delta,
                active_set: ids
                    .iter()
                    .zip(&r.active)
                    .filter(|(_, &a)| a)
                    .map(|(id, _)| id.as_str())
                    .collect::<Vec<_>>()
                    .join(";"),
                eliminated: r.eliminated.map(|k| ids[k].clone()).unwrap_or_default(),
            })
            .collect()
    }

    /// Runs every configured seed on the worker pool; rows come back in seed-list order.
    pub fn run_all(&self) -> Result<(Vec<RecordRow>, u64)> {
        let seeds = self.config.seeds.list();
        let runs: Vec<Result<(Vec<RecordRow>, u64)>> = thread_pool().install(|| {
            seeds
                .par_iter()
                .map(|&seed| {
                    log::info!("seed {seed}: starting {} episodes", self.config.episodes);
                    let records = self.run_seed(seed)?;
                    let clipped = records.iter().filter(|r| r.clipped).count() as u64;
                    Ok((self.to_rows(seed, &records), clipped))
                })
                .collect()
        });
        let mut rows = Vec::with_capacity(seeds.len() * self.config.episodes);
        let mut clips = 0;
        for run in runs {
            let (r, c) = run?;
            rows.extend(r);
            clips += c;
        }
        if clips > 0 {
            log::warn!("{clips} episode returns fell outside the return bounds and were clipped");
        }
        Ok((rows, clips))
    }

    pub fn manifest(&self, clip_count: u64) -> Manifest {
        let config_sha256 = hex_digest(self.config.to_json().as_bytes());
        Manifest {
            config_sha256,
            version: env!("CARGO_PKG_VERSION").to_string(),
            algorithm: self.config.algorithm.to_string(),
            seeds: self.config.seeds.list(),
            episodes: self.config.episodes,
            window: self.config.window,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            restriction_ids: self.run_set.ids(),
            popularity_ascending: self.popularity.clone(),
            optimal_ids: self.optimal_ids.clone(),
            oracle_values: self.oracle_values.clone(),
            reference_max: self.config.reference_max,
            clip_count,
            meta: self.config.effective_meta(),
            learner: self.config.learner.clone(),
        }
    }

    /// Runs all seeds and writes `records.csv`, `summary.json` and `config.json` under `out`.
    pub fn run_and_write(&self, out: &Path) -> Result<Summary> {
        let (rows, clips) = self.run_all()?;
        let manifest = self.manifest(clips);
        let summary = summarize(&rows, manifest)?;
        std::fs::create_dir_all(out).map_err(|e| CsrlError::io(out, e))?;
        write_records(&out.join("records.csv"), &rows)?;
        write_json(&out.join("summary.json"), &summary)?;
        write_json(&out.join("config.json"), &self.config)?;
        Ok(summary)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Worker pool sized by `CSRL_THREADS` when set.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("CSRL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool builds")
}

/// Per-seed rows ordered by episode.
pub fn rows_by_seed(rows: &[RecordRow]) -> BTreeMap<u64, Vec<&RecordRow>> {
    let mut by_seed: BTreeMap<u64, Vec<&RecordRow>> = BTreeMap::new();
    for r in rows {
        by_seed.entry(r.seed).or_default().push(r);
    }
    for v in by_seed.values_mut() {
        v.sort_by_key(|r| r.episode);
    }
    by_seed
}

/// All summary statistics, derived from the records alone plus the manifest
/// (for window, fractions, optimal ids and reference maximum).
pub fn summarize(rows: &[RecordRow], manifest: Manifest) -> Result<Summary> {
    let by_seed = rows_by_seed(rows);
    if by_seed.is_empty() {
        return Err(CsrlError::InvalidInput("no records".into()));
    }
    let curves: Vec<Vec<f64>> = by_seed.values().map(|v| v.iter().map(|r| r.raw_return).collect()).collect();
    let (mean_curve, ci_halfwidth) = metrics::mean_ci(&curves);
    if ci_halfwidth.is_none() {
        log::warn!("fewer than two seeds: confidence intervals omitted");
    }
    let sample_complexity = manifest
        .fractions
        .iter()
        .map(|&f| {
            (f.to_string(), metrics::sample_complexity(&mean_curve, f, manifest.window, manifest.reference_max))
        })
        .collect();
    let optimal_rate = if manifest.optimal_ids.is_empty() {
        Vec::new()
    } else {
        let hits: Vec<Vec<bool>> = by_seed
            .values()
            .map(|v| v.iter().map(|r| manifest.optimal_ids.contains(&r.learner_id)).collect())
            .collect();
        metrics::optimal_rate(&hits, manifest.window)
    };
    let tail = &mean_curve[mean_curve.len().saturating_sub(FINAL_WINDOW)..];
    let final_mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let mut elimination_episodes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.eliminated.is_empty()) {
        elimination_episodes.entry(r.eliminated.clone()).or_default().push(r.episode);
    }
    for v in elimination_episodes.values_mut() {
        v.sort_unstable();
    }
    Ok(Summary { mean_curve, ci_halfwidth, sample_complexity, optimal_rate, final_mean, elimination_episodes, manifest })
}

pub fn write_records(path: &Path, rows: &[RecordRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CsrlError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> CsrlError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CsrlError::io(path, io),
        other => CsrlError::load(path.display().to_string(), format!("{other:?}")),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CsrlError::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| CsrlError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    C,
    TL,
}

impl std::str::FromStr for SweepParam {
    type Err = CsrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(SweepParam::C),
            "t_l" => Ok(SweepParam::TL),
            _ => Err(CsrlError::Config(format!("cannot sweep `{s}` (expected c or t_l)"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::C => "c",
            SweepParam::TL => "t_l",
        }
    }
}

/// Runs `config` once per value, each into its own `<out>/<param>_<value>` directory.
pub fn sweep(config: &ExperimentConfig, param: SweepParam, values: &[f64], out: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let mut dirs = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = config.clone();
        match param {
            SweepParam::C => cfg.meta.c = v,
            SweepParam::TL => cfg.meta.t_l = v,
        }
        let dir = out.join(format!("{}_{v}", param.name()));
        cfg.out = dir.clone();
        Experiment::new(cfg)?.run_and_write(&dir)?;
        dirs.push((v, dir));
    }
    Ok(dirs)
}

/// Human-readable report of declared and brute-force order relations.
pub fn order_report(set: &RestrictionSet) -> String {
    let mut out = String::new();
    for (k, r) in set.members().iter().enumerate() {
        let computed = set.loosers_of(k);
        out.push_str(&format!(
            "{:<4} declared [{}] computed [{}]\n",
            r.id(),
            r.declared_loosers().join(", "),
            computed.join(", ")
        ));
    }
    let violations = set.violations();
    if violations.is_empty() {
        out.push_str("all declared relations hold\n");
    } else {
        for v in &violations {
            out.push_str(&format!("VIOLATION {v}\n"));
        }
    }
    let extra = set.undeclared_relations();
    if !extra.is_empty() {
        let pairs: Vec<String> = extra.iter().map(|(t, l)| format!("{t} < {l}")).collect();
        out.push_str(&format!("undeclared strict relations: {}\n", pairs.join(", ")));
    }
    out
}
