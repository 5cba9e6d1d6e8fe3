//! Movie-recommendation simulator.
//!
//! The state is the window of the last `w` recommended genres, most recent
//! first. Rewards are linear in a polynomial feature map of recency and
//! variability, and every step ends the session with a probability that
//! depends on the variability of the chosen action.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, Result};
use crate::mdp::{ActionId, Environment, StateId};
use crate::synthetic::TabularMdp;

/// Per-variability termination probabilities for v = 2..=5 as measured on
/// MovieLens; v = 1 extrapolates the decreasing trend.
pub const DEFAULT_TERM_PROB: [(u32, f64); 5] =
    [(1, 0.016), (2, 0.014), (3, 0.0117), (4, 0.0113), (5, 0.0102)];

pub const DEFAULT_HORIZON_CAP: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecsysParams {
    pub num_actions: usize,
    pub window: usize,
    pub d_rho: usize,
    pub d_v: usize,
    /// One weight vector of length `d_rho + 2 * d_v + 1` per action.
    pub theta: Vec<Vec<f64>>,
    /// Termination probability keyed by variability level, shared by all actions.
    #[serde(default)]
    pub term_prob: BTreeMap<u32, f64>,
    /// Per-(variability, action) override; takes precedence over `term_prob`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub term_prob_va: BTreeMap<u32, Vec<f64>>,
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: usize,
}

fn default_horizon_cap() -> usize {
    DEFAULT_HORIZON_CAP
}

impl RecsysParams {
    pub fn feature_dim(&self) -> usize {
        self.d_rho + 2 * self.d_v + 1
    }

    pub fn num_states(&self) -> usize {
        self.num_actions.pow(self.window as u32)
    }

    /// Largest attainable variability, `min(w + 1, |A|)`.
    pub fn max_variability(&self) -> usize {
        (self.window + 1).min(self.num_actions)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_actions == 0 {
            return Err(CsrlError::load("num_actions", "must be at least 1"));
        }
        if self.window == 0 {
            return Err(CsrlError::load("window", "must be at least 1"));
        }
        if self.horizon_cap == 0 {
            return Err(CsrlError::load("horizon_cap", "must be at least 1"));
        }
        if (self.num_actions as f64).powi(self.window as i32) > 1e7 {
            return Err(CsrlError::load("window", "state space |A|^w too large to enumerate"));
        }
        if self.theta.len() != self.num_actions {
            return Err(CsrlError::load(
                "theta",
                format!("expected {} weight vectors, got {}", self.num_actions, self.theta.len()),
            ));
        }
        let d = self.feature_dim();
        for (a, row) in self.theta.iter().enumerate() {
            if row.len() != d {
                return Err(CsrlError::load(
                    format!("theta[{a}]"),
                    format!("expected dimension {d} = d_rho + 2*d_v + 1, got {}", row.len()),
                ));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(CsrlError::load(format!("theta[{a}][{j}]"), "not finite"));
            }
        }
        for (v, p) in &self.term_prob {
            if !(0.0..=1.0).contains(p) {
                return Err(CsrlError::load(format!("term_prob.{v}"), format!("{p} outside [0, 1]")));
            }
        }
        for (v, row) in &self.term_prob_va {
            if row.len() != self.num_actions {
                return Err(CsrlError::load(
                    format!("term_prob_va.{v}"),
                    format!("expected {} entries, got {}", self.num_actions, row.len()),
                ));
            }
            if let Some(a) = row.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(CsrlError::load(format!("term_prob_va.{v}[{a}]"), format!("{} outside [0, 1]", row[a])));
            }
        }
        for v in 1..=self.max_variability() as u32 {
            if !self.term_prob.contains_key(&v) && !self.term_prob_va.contains_key(&v) {
                return Err(CsrlError::load(format!("term_prob.{v}"), "missing termination probability"));
            }
        }
        Ok(())
    }

    pub fn termination_probability(&self, v: usize, a: ActionId) -> f64 {
        let key = v as u32;
        if let Some(row) = self.term_prob_va.get(&key) {
            return row[a.0];
        }
        self.term_prob.get(&key).copied().unwrap_or(0.0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CsrlError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: Self = serde_json::from_str(text).map_err(|e| CsrlError::load("<root>", e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| CsrlError::io(path, e))
    }
}

/// Window of the last `w` actions, most recent first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecsysState {
    pub window: Vec<ActionId>,
}

impl RecsysState {
    pub fn new(window: Vec<ActionId>) -> Self {
        Self { window }
    }

    /// Base-|A| encoding with the most recent action as the leading digit.
    pub fn index(&self, num_actions: usize) -> StateId {
        StateId(self.window.iter().fold(0, |acc, a| acc * num_actions + a.0))
    }

    pub fn from_index(s: StateId, num_actions: usize, window: usize) -> Self {
        let mut digits = vec![ActionId(0); window];
        let mut rest = s.0;
        for slot in digits.iter_mut().rev() {
            *slot = ActionId(rest % num_actions);
            rest /= num_actions;
        }
        Self { window: digits }
    }

    /// Window after recommending `a`: `a` enters at the front, the oldest drops.
    pub fn shifted(&self, a: ActionId) -> Self {
        let mut window = Vec::with_capacity(self.window.len());
        window.push(a);
        window.extend_from_slice(&self.window[..self.window.len() - 1]);
        Self { window }
    }

    pub fn distinct(&self) -> usize {
        let mut seen: Vec<ActionId> = Vec::with_capacity(self.window.len());
        for a in &self.window {
            if !seen.contains(a) {
                seen.push(*a);
            }
        }
        seen.len()
    }
}

/// Harmonic-weighted count of `a` in the window: `sum_i 1{a_{t-i} = a} / i`.
pub fn recency(s: &RecsysState, a: ActionId) -> f64 {
    s.window
        .iter()
        .enumerate()
        .filter(|(_, &x)| x == a)
        .map(|(i, _)| 1.0 / (i + 1) as f64)
        .sum()
}

/// Number of distinct actions in the window together with `a`.
pub fn variability(s: &RecsysState, a: ActionId) -> usize {
    s.distinct() + usize::from(!s.window.contains(&a))
}

/// `[1, ρ, …, ρ^dρ, v, …, v^dv, vρ, …, (vρ)^dv]`.
pub fn features(s: &RecsysState, a: ActionId, params: &RecsysParams) -> Vec<f64> {
    features_from(recency(s, a), variability(s, a) as f64, params.d_rho, params.d_v)
}

pub fn features_from(rho: f64, v: f64, d_rho: usize, d_v: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(d_rho + 2 * d_v + 1);
    x.push(1.0);
    x.extend((1..=d_rho).map(|j| rho.powi(j as i32)));
    x.extend((1..=d_v).map(|j| v.powi(j as i32)));
    x.extend((1..=d_v).map(|j| (v * rho).powi(j as i32)));
    x
}

pub fn reward(s: &RecsysState, a: ActionId, params: &RecsysParams) -> f64 {
    features(s, a, params).iter().zip(&params.theta[a.0]).map(|(x, t)| x * t).sum()
}

/// Environment over [`RecsysParams`] with every (state, action) quantity tabulated.
#[derive(Debug, Clone)]
pub struct RecsysEnv {
    params: RecsysParams,
    num_states: usize,
    rewards: Vec<f64>,
    term: Vec<f64>,
    next: Vec<usize>,
}

impl RecsysEnv {
    pub fn new(params: RecsysParams) -> Result<Self> {
        params.validate()?;
        let na = params.num_actions;
        let ns = params.num_states();
        let mut rewards = Vec::with_capacity(ns * na);
        let mut term = Vec::with_capacity(ns * na);
        let mut next = Vec::with_capacity(ns * na);
        for s in 0..ns {
            let state = RecsysState::from_index(StateId(s), na, params.window);
            for a in (0..na).map(ActionId) {
                rewards.push(reward(&state, a, &params));
                term.push(params.termination_probability(variability(&state, a), a));
                next.push(state.shifted(a).index(na).0);
            }
        }
        Ok(Self { params, num_states: ns, rewards, term, next })
    }

    pub fn params(&self) -> &RecsysParams {
        &self.params
    }

    pub fn state(&self, s: StateId) -> RecsysState {
        RecsysState::from_index(s, self.params.num_actions, self.params.window)
    }

    pub fn reward_at(&self, s: StateId, a: ActionId) -> f64 {
        self.rewards[s.0 * self.params.num_actions + a.0]
    }

    pub fn termination_at(&self, s: StateId, a: ActionId) -> f64 {
        self.term[s.0 * self.params.num_actions + a.0]
    }

    /// Typed transition: `None` is the terminal state.
    pub fn step_state(&self, s: &RecsysState, a: ActionId, rng: &mut dyn RngCore) -> (Option<RecsysState>, f64) {
        let (next, r) = self.transition(s.index(self.params.num_actions), a, rng);
        (next.map(|n| self.state(n)), r)
    }

    fn transition(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> (Option<StateId>, f64) {
        let i = s.0 * self.params.num_actions + a.0;
        let r = self.rewards[i];
        let p = self.term[i];
        if p > 0.0 && rng.random::<f64>() < p {
            (None, r)
        } else {
            (Some(StateId(self.next[i])), r)
        }
    }

    /// Mean immediate reward of each action over all windows.
    pub fn mean_reward_by_action(&self) -> Vec<f64> {
        let na = self.params.num_actions;
        let mut sums = vec![0.0; na];
        for (i, r) in self.rewards.iter().enumerate() {
            sums[i % na] += r;
        }
        sums.into_iter().map(|s| s / self.num_states as f64).collect()
    }

    /// Actions ordered from least to most popular (lowest mean reward first,
    /// lowest index on ties).
    pub fn popularity_ascending(&self) -> Vec<ActionId> {
        let means = self.mean_reward_by_action();
        let mut order: Vec<usize> = (0..means.len()).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
        order.into_iter().map(ActionId).collect()
    }

    /// Exact tabular model with a uniform initial window.
    pub fn to_tabular(&self) -> TabularMdp {
        let na = self.params.num_actions;
        let ns = self.num_states;
        let mut transitions = Vec::with_capacity(ns * na);
        let mut terminal = Vec::with_capacity(ns * na);
        for i in 0..ns * na {
            let p = self.term[i];
            transitions.push(if p < 1.0 { vec![(self.next[i], 1.0 - p)] } else { vec![] });
            terminal.push(p);
        }
        TabularMdp::from_parts(
            ns,
            na,
            transitions,
            terminal,
            self.rewards.clone(),
            self.params.horizon_cap,
            vec![1.0 / ns as f64; ns],
        )
        .expect("recsys model is a valid tabular MDP")
    }
}

impl Environment for RecsysEnv {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.params.num_actions
    }

    fn horizon_cap(&self) -> usize {
        self.params.horizon_cap
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> StateId {
        StateId(rng.random_range(0..self.num_states))
    }

    fn step(&mut self, state: StateId, action: ActionId, rng: &mut dyn RngCore) -> (Option<StateId>, f64) {
        self.transition(state, action, rng)
    }
}

/// Deterministic synthetic parameters for the default shape (|A| = 5, w = 4,
/// dρ = 5, dv = 2) with the measured termination table.
///
/// Every action's reward falls with recency. One action (chosen from the seed)
/// dislikes variability while the others reward it, so the best variability
/// constraint is not trivially the tightest or loosest. Weights are finally
/// rescaled so every reward lies in `[0, 1]`.
pub fn gen_default_params(seed: u64) -> RecsysParams {
    let (num_actions, window, d_rho, d_v) = (5usize, 4usize, 5usize, 2usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decreasing = rng.random_range(0..num_actions);
    let unpopular = (decreasing + 1 + rng.random_range(0..num_actions - 1)) % num_actions;

    let mut theta = Vec::with_capacity(num_actions);
    for a in 0..num_actions {
        let mut row = vec![0.0; d_rho + 2 * d_v + 1];
        row[0] = if a == unpopular { rng.random_range(0.05..0.15) } else { rng.random_range(0.35..0.6) };
        row[1] = -rng.random_range(0.1..0.2);
        for (j, w) in row.iter_mut().enumerate().take(d_rho + 1).skip(2) {
            *w = rng.random_range(-0.01..0.01) / j as f64;
        }
        let slope = rng.random_range(0.06..0.12);
        row[d_rho + 1] = if a == decreasing { -slope } else { slope };
        row[d_rho + 2] = rng.random_range(-0.005..0.005);
        row[d_rho + 3] = rng.random_range(-0.01..0.01);
        row[d_rho + 4] = rng.random_range(-0.001..0.001);
        theta.push(row);
    }

    let mut params = RecsysParams {
        num_actions,
        window,
        d_rho,
        d_v,
        theta,
        term_prob: DEFAULT_TERM_PROB.iter().copied().collect(),
        term_prob_va: BTreeMap::new(),
        horizon_cap: DEFAULT_HORIZON_CAP,
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in 0..params.num_states() {
        let state = RecsysState::from_index(StateId(s), num_actions, window);
        for a in (0..num_actions).map(ActionId) {
            let r = reward(&state, a, &params);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    let span = hi - lo;
    for row in &mut params.theta {
        for w in row.iter_mut() {
            *w /= span;
        }
        row[0] -= lo / span;
    }
    params
}
