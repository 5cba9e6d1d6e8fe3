//! Upper-confidence selection over restricted learners with
//! convergence-triggered elimination.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, Result};
use crate::learners::Learner;
use crate::mdp::{episode_return, Environment, RestrictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    /// Confidence multiplier.
    pub c: f64,
    /// Change threshold.
    pub t_l: f64,
    /// Number of consecutive selections whose change must stay below `t_l`.
    pub t_n: usize,
    /// Raw return range mapped onto [0, 1].
    pub return_bounds: (f64, f64),
    /// How many standard errors a learner's mean must trail the best before it can go.
    pub elimination_tolerance_sigmas: f64,
    /// `false` never eliminates (plain UCB over learners).
    pub eliminate_enabled: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            t_l: 0.05,
            t_n: 20,
            return_bounds: (0.0, 1.0),
            elimination_tolerance_sigmas: 2.0,
            eliminate_enabled: true,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.return_bounds;
        if !(self.c >= 0.0) || self.t_n == 0 || !(self.t_l >= 0.0) || !(self.elimination_tolerance_sigmas >= 0.0) {
            return Err(CsrlError::Config("meta: need c >= 0, t_l >= 0, t_n >= 1, tolerance >= 0".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CsrlError::Config(format!("meta: return_bounds ({lo}, {hi}) must satisfy min < max")));
        }
        Ok(())
    }
}

/// Per-learner selection statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerStats {
    pub n: usize,
    pub mu_hat: f64,
    /// Normalized returns, one per selection.
    pub returns: Vec<f64>,
    /// Change values, one per selection.
    pub deltas: Vec<f64>,
    pub active: bool,
}

impl Default for LearnerStats {
    fn default() -> Self {
        Self { n: 0, mu_hat: 0.0, returns: Vec::new(), deltas: Vec::new(), active: true }
    }
}

impl LearnerStats {
    pub fn record(&mut self, norm_return: f64, delta: f64) {
        self.n += 1;
        self.mu_hat = ((self.n - 1) as f64 * self.mu_hat + norm_return) / self.n as f64;
        self.returns.push(norm_return);
        self.deltas.push(delta);
    }

    /// Sample standard deviation over √n; 0 with fewer than two returns.
    pub fn standard_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mean = self.returns.iter().sum::<f64>() / self.n as f64;
        let var = self.returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (self.n - 1) as f64;
        var.sqrt() / (self.n as f64).sqrt()
    }
}

/// `c·sqrt(ln h)/sqrt(n)`, or +∞ for an unvisited learner.
pub fn confidence_bonus(h: usize, n: usize, c: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    c * (h.max(1) as f64).ln().sqrt() / (n as f64).sqrt()
}

/// Active learner with the largest upper bound, lowest index on ties.
pub fn select_learner(stats: &[LearnerStats], h: usize, c: f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, st) in stats.iter().enumerate().filter(|(_, st)| st.active) {
        let ucb = st.mu_hat + confidence_bonus(h, st.n, c);
        if best.is_none_or(|(_, b)| ucb > b) {
            best = Some((k, ucb));
        }
    }
    best.map(|(k, _)| k).ok_or_else(|| CsrlError::Invariant("no active learner".into()))
}

/// Maps `j` linearly from `bounds` onto [0, 1] and clips. The flag reports clipping.
pub fn normalize_return(j: f64, bounds: (f64, f64)) -> (f64, bool) {
    let x = (j - bounds.0) / (bounds.1 - bounds.0);
    if x < 0.0 {
        (0.0, true)
    } else if x > 1.0 {
        (1.0, true)
    } else {
        (x, false)
    }
}

/// The elimination rule for the learner `k` that was just selected and updated.
///
/// True only when its last `t_n` change values are all at most `t_l`, some
/// active learner has a strictly looser restriction, and some active learner's
/// mean exceeds `mu_hat_k` by more than the tolerance in standard errors.
pub fn should_eliminate(k: usize, stats: &[LearnerStats], config: &MetaConfig, set: &RestrictionSet) -> bool {
    let me = &stats[k];
    if me.n < config.t_n || me.deltas.len() < config.t_n {
        return false;
    }
    if me.deltas[me.deltas.len() - config.t_n..].iter().any(|&d| d > config.t_l) {
        return false;
    }
    let looser_active = (0..stats.len()).any(|i| i != k && stats[i].active && set.is_looser(i, k));
    if !looser_active {
        return false;
    }
    let bar = me.mu_hat + config.elimination_tolerance_sigmas * me.standard_error();
    (0..stats.len()).any(|j| j != k && stats[j].active && stats[j].mu_hat > bar)
}

/// One meta-level episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    /// 1-based.
    pub episode: usize,
    pub chosen: usize,
    pub raw_return: f64,
    pub norm_return: f64,
    pub clipped: bool,
    pub delta: f64,
    /// Active flags after this episode's elimination check.
    pub active: Vec<bool>,
    pub eliminated: Option<usize>,
}

/// Selection state for one run over a verified restriction set.
#[derive(Debug, Clone)]
pub struct Controller {
    config: MetaConfig,
    set: RestrictionSet,
    stats: Vec<LearnerStats>,
    episode: usize,
}

impl Controller {
    pub fn new(config: MetaConfig, set: RestrictionSet) -> Result<Self> {
        config.validate()?;
        let stats = vec![LearnerStats::default(); set.len()];
        Ok(Self { config, set, stats, episode: 0 })
    }

    pub fn config(&self) -> &MetaConfig {
        &self.config
    }

    pub fn set(&self) -> &RestrictionSet {
        &self.set
    }

    pub fn stats(&self) -> &[LearnerStats] {
        &self.stats
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    /// Learner to run in the next episode.
    pub fn select(&self) -> Result<usize> {
        select_learner(&self.stats, self.episode + 1, self.config.c)
    }

    /// Record the outcome of running learner `k` and apply the elimination rule.
    pub fn observe(&mut self, k: usize, raw_return: f64, delta: f64) -> Result<SelectionRecord> {
        if k >= self.stats.len() || !self.stats[k].active {
            return Err(CsrlError::Invariant(format!("learner {k} is not active")));
        }
        self.episode += 1;
        let (norm, clipped) = normalize_return(raw_return, self.config.return_bounds);
        self.stats[k].record(norm, delta);
        let eliminated = (self.config.eliminate_enabled && should_eliminate(k, &self.stats, &self.config, &self.set))
            .then(|| {
                self.stats[k].active = false;
                k
            });
        if !self.stats.iter().any(|s| s.active) {
            return Err(CsrlError::Invariant("active set became empty".into()));
        }
        Ok(SelectionRecord {
            episode: self.episode,
            chosen: k,
            raw_return,
            norm_return: norm,
            clipped,
            delta,
            active: self.stats.iter().map(|s| s.active).collect(),
            eliminated,
        })
    }
}

/// Runs the selection loop for `episodes` episodes. `learners[k]` must act under `set.get(k)`.
///
/// Each episode the selected learner rolls out, learns from its own trajectory
/// (yielding δ), and every other active learner ingests the same trajectory.
pub fn run_csrl(
    env: &mut dyn Environment,
    learners: &mut [Box<dyn Learner>],
    set: RestrictionSet,
    config: MetaConfig,
    rng: &mut dyn RngCore,
    episodes: usize,
) -> Result<Vec<SelectionRecord>> {
    check_alignment(env, learners, &set)?;
    let mut ctl = Controller::new(config, set)?;
    let mut records = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let k = ctl.select()?;
        let traj = learners[k].rollout(env, rng);
        let restriction = learners[k].restriction();
        if let Some(bad) = traj.steps.iter().find(|st| !restriction.allows(st.state, st.action)) {
            return Err(CsrlError::Invariant(format!(
                "episode {}: learner {} took {} at {}",
                ctl.episode() + 1,
                restriction.id(),
                bad.action,
                bad.state
            )));
        }
        let delta = learners[k].end_episode(&traj);
        for (j, learner) in learners.iter_mut().enumerate() {
            if j != k && ctl.stats()[j].active {
                learner.ingest_shared(&traj);
            }
        }
        records.push(ctl.observe(k, episode_return(&traj), delta)?);
    }
    Ok(records)
}

/// A run with a single learner, used for the fixed-restriction and unconstrained baselines.
pub fn run_fixed(
    env: &mut dyn Environment,
    learner: Box<dyn Learner>,
    config: MetaConfig,
    rng: &mut dyn RngCore,
    episodes: usize,
) -> Result<Vec<SelectionRecord>> {
    let only = learner.restriction().clone().with_declared_loosers(vec![]);
    let set = RestrictionSet::new(vec![only])?;
    let mut learners = vec![learner];
    run_csrl(env, &mut learners, set, config, rng, episodes)
}

fn check_alignment(env: &dyn Environment, learners: &[Box<dyn Learner>], set: &RestrictionSet) -> Result<()> {
    if learners.len() != set.len() {
        return Err(CsrlError::Config(format!("{} learners for {} restrictions", learners.len(), set.len())));
    }
    if env.num_states() != set.num_states() || env.num_actions() != set.num_actions() {
        return Err(CsrlError::Config(format!(
            "environment has {}x{} state-action pairs, restrictions have {}x{}",
            env.num_states(),
            env.num_actions(),
            set.num_states(),
            set.num_actions()
        )));
    }
    for (k, l) in learners.iter().enumerate() {
        if l.restriction() != set.get(k) {
            return Err(CsrlError::Config(format!("learner {k} does not act under restriction {}", set.get(k).id())));
        }
    }
    Ok(())
}
