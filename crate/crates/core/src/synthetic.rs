//! Small enumerable MDPs and the exact constrained value-iteration oracle.

use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, Result};
use crate::mdp::{ActionId, Environment, Restriction, StateId, TabularPolicy};

/// Finite MDP with sparse transition rows. Probability not assigned to any
/// state in a row is the terminal mass `terminal[s * A + a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<(usize, f64)>>,
    terminal: Vec<f64>,
    reward_mean: Vec<f64>,
    horizon: usize,
    initial_dist: Vec<f64>,
}

impl TabularMdp {
    pub fn from_parts(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        terminal: Vec<f64>,
        reward_mean: Vec<f64>,
        horizon: usize,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let mdp = Self { num_states, num_actions, transitions, terminal, reward_mean, horizon, initial_dist };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = self.num_states * self.num_actions;
        if pairs == 0 {
            return Err(CsrlError::InvalidInput("empty state or action space".into()));
        }
        if self.transitions.len() != pairs || self.terminal.len() != pairs || self.reward_mean.len() != pairs {
            return Err(CsrlError::InvalidInput(format!("tables must have {pairs} rows")));
        }
        if self.initial_dist.len() != self.num_states {
            return Err(CsrlError::InvalidInput("initial distribution has wrong length".into()));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            let mut total = self.terminal[i];
            for &(s, p) in row {
                if s >= self.num_states || !(0.0..=1.0).contains(&p) {
                    return Err(CsrlError::InvalidInput(format!("row {i}: bad entry ({s}, {p})")));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(CsrlError::InvalidInput(format!("row {i}: sums to {total}")));
            }
            if !self.reward_mean[i].is_finite() {
                return Err(CsrlError::InvalidInput(format!("row {i}: reward not finite")));
            }
        }
        let total: f64 = self.initial_dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CsrlError::InvalidInput(format!("initial distribution sums to {total}")));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_initial_dist(mut self, dist: Vec<f64>) -> Result<Self> {
        self.initial_dist = dist;
        self.validate()?;
        Ok(self)
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn row(&self, s: StateId, a: ActionId) -> &[(usize, f64)] {
        &self.transitions[s.0 * self.num_actions + a.0]
    }

    pub fn terminal_prob(&self, s: StateId, a: ActionId) -> f64 {
        self.terminal[s.0 * self.num_actions + a.0]
    }

    pub fn reward_mean(&self, s: StateId, a: ActionId) -> f64 {
        self.reward_mean[s.0 * self.num_actions + a.0]
    }

    /// Largest |mean reward| over all pairs.
    pub fn reward_bound(&self) -> f64 {
        self.reward_mean.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mdp serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mdp: Self = serde_json::from_str(text)?;
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CsrlError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| CsrlError::io(path, e))
    }
}

impl Environment for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn horizon_cap(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> StateId {
        StateId(sample_index(&self.initial_dist, rng.random::<f64>()).unwrap_or(0))
    }

    fn step(&mut self, state: StateId, action: ActionId, rng: &mut dyn RngCore) -> (Option<StateId>, f64) {
        let i = state.0 * self.num_actions + action.0;
        let reward = self.reward_mean[i];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(s, p) in &self.transitions[i] {
            acc += p;
            if u < acc {
                return (Some(StateId(s)), reward);
            }
        }
        if self.terminal[i] > 0.0 {
            (None, reward)
        } else {
            // rounding slack: fall back to the last listed successor
            (self.transitions[i].last().map(|&(s, _)| StateId(s)), reward)
        }
    }
}

fn sample_index(weights: &[f64], u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

pub const CHAIN_LEFT: ActionId = ActionId(0);
pub const CHAIN_RIGHT: ActionId = ActionId(1);

/// `n`-state chain starting at state 0. "Right" advances with probability
/// `1 - slip` (otherwise stays), "left" returns to state 0. Going left at state
/// 0 pays 0.01; going right at the far end pays 1. Horizon is `4n`.
pub fn make_chain_mdp(n: usize, slip: f64) -> Result<TabularMdp> {
    if n < 2 {
        return Err(CsrlError::InvalidInput("chain needs at least 2 states".into()));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(CsrlError::InvalidInput(format!("slip {slip} outside [0, 1)")));
    }
    let mut transitions = Vec::with_capacity(2 * n);
    let mut reward = Vec::with_capacity(2 * n);
    for s in 0..n {
        transitions.push(vec![(0, 1.0)]);
        reward.push(if s == 0 { 0.01 } else { 0.0 });

        let ahead = (s + 1).min(n - 1);
        if ahead == s || slip == 0.0 {
            transitions.push(vec![(ahead, 1.0)]);
        } else {
            transitions.push(vec![(s, slip), (ahead, 1.0 - slip)]);
        }
        reward.push(if s == n - 1 { 1.0 } else { 0.0 });
    }
    let mut init = vec![0.0; n];
    init[0] = 1.0;
    TabularMdp::from_parts(n, 2, transitions, vec![0.0; 2 * n], reward, 4 * n, init)
}

/// Random MDP: each row is a normalized vector of positive uniform draws,
/// rewards uniform in `[0, reward_scale]`, uniform start, horizon 10.
pub fn make_random_mdp(seed: u64, num_states: usize, num_actions: usize, reward_scale: f64) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(CsrlError::InvalidInput("S and A must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(num_states * num_actions);
    let mut reward = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states * num_actions {
        let draws: Vec<f64> = (0..num_states).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = draws.iter().sum();
        transitions.push(draws.into_iter().enumerate().map(|(s, w)| (s, w / total)).collect());
        reward.push(rng.random::<f64>() * reward_scale);
    }
    TabularMdp::from_parts(
        num_states,
        num_actions,
        transitions,
        vec![0.0; num_states * num_actions],
        reward,
        10,
        vec![1.0 / num_states as f64; num_states],
    )
}

/// One state, every action ends the episode with reward 0. Stationary mock
/// learners supply their own returns on top of it.
pub fn make_bandit_mdp(num_arms: usize) -> Result<TabularMdp> {
    if num_arms == 0 {
        return Err(CsrlError::InvalidInput("bandit needs at least one arm".into()));
    }
    TabularMdp::from_parts(1, num_arms, vec![vec![]; num_arms], vec![1.0; num_arms], vec![0.0; num_arms], 1, vec![1.0])
}

/// State-action values over a restriction; disallowed pairs hold 0 and report `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionValues {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    allowed: Vec<bool>,
}

impl ActionValues {
    pub fn zeros(restriction: &Restriction) -> Self {
        Self {
            num_states: restriction.num_states(),
            num_actions: restriction.num_actions(),
            values: vec![0.0; restriction.num_states() * restriction.num_actions()],
            allowed: restriction.mask().to_vec(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: StateId, a: ActionId) -> Option<f64> {
        let i = s.0 * self.num_actions + a.0;
        self.allowed[i].then(|| self.values[i])
    }

    pub(crate) fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub(crate) fn set_flat(&mut self, i: usize, v: f64) {
        self.values[i] = v;
    }

    /// Raw row-major table with zeros at disallowed pairs.
    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    /// Greedy allowed action, lowest index on ties.
    pub fn greedy(&self, s: StateId) -> ActionId {
        let base = s.0 * self.num_actions;
        let mut best: Option<(usize, f64)> = None;
        for a in 0..self.num_actions {
            if !self.allowed[base + a] {
                continue;
            }
            let v = self.values[base + a];
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((a, v));
            }
        }
        ActionId(best.expect("restriction masks are nonempty").0)
    }

    pub fn greedy_policy(&self) -> TabularPolicy {
        let actions: Vec<ActionId> = (0..self.num_states).map(|s| self.greedy(StateId(s))).collect();
        TabularPolicy::deterministic(self.num_actions, &actions)
    }

    pub fn max_value(&self, s: StateId) -> f64 {
        let g = self.greedy(s);
        self.values[s.0 * self.num_actions + g.0]
    }
}

#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    pub q: ActionValues,
    pub policy: TabularPolicy,
}

impl ValueSolution {
    /// Expected value under the MDP's initial distribution.
    pub fn initial_value(&self, mdp: &TabularMdp) -> f64 {
        self.values.iter().zip(mdp.initial_dist()).map(|(v, p)| v * p).sum()
    }
}

/// Exact optimal values over policies satisfying `restriction`.
///
/// With `gamma == 1` this is backward induction over the MDP horizon and the
/// result holds the values with the full horizon remaining. With `gamma < 1`
/// it iterates the discounted Bellman operator to a 1e-10 sup-norm change.
pub fn exact_constrained_vi(mdp: &TabularMdp, restriction: &Restriction, gamma: f64) -> Result<ValueSolution> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(CsrlError::InvalidInput(format!("gamma {gamma} outside [0, 1]")));
    }
    if restriction.num_states() != mdp.num_states || restriction.num_actions() != mdp.num_actions {
        return Err(CsrlError::InvalidInput("restriction and MDP spaces differ".into()));
    }
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    let mut v = vec![0.0; ns];
    let mut q = ActionValues::zeros(restriction);
    let backup = |v: &[f64], q: &mut ActionValues, next_v: &mut [f64]| {
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for &a in restriction.allowed(StateId(s)) {
                let i = s * na + a.0;
                let future: f64 = mdp.transitions[i].iter().map(|&(s2, p)| p * v[s2]).sum();
                let value = mdp.reward_mean[i] + gamma * future;
                q.set(s, a.0, value);
                best = best.max(value);
            }
            next_v[s] = best;
        }
    };
    let mut next_v = vec![0.0; ns];
    if gamma >= 1.0 {
        for _ in 0..mdp.horizon {
            backup(&v, &mut q, &mut next_v);
            std::mem::swap(&mut v, &mut next_v);
        }
    } else {
        for _ in 0..1_000_000 {
            backup(&v, &mut q, &mut next_v);
            let change = v.iter().zip(&next_v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            std::mem::swap(&mut v, &mut next_v);
            if change < 1e-10 {
                break;
            }
        }
    }
    let policy = q.greedy_policy();
    Ok(ValueSolution { values: v, q, policy })
}
