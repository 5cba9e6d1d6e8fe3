use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, Result};
use crate::learners::{filter_allowed, Learner};
use crate::mdp::{ActionId, Restriction, StateId, Step, TabularPolicy, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon0: f64,
    /// Per-update decay factor for constrained learners.
    pub decay: f64,
    /// Per-update decay factor for the unconstrained learner.
    pub decay_unconstrained: f64,
    pub epsilon_min: f64,
    /// Report |Σ TD error| instead of Σ |TD error|.
    pub signed_delta: bool,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            epsilon0: 1.0,
            decay: 0.999,
            decay_unconstrained: 0.99999,
            epsilon_min: 0.01,
            signed_delta: false,
        }
    }
}

/// Tabular action values with an ε schedule. Disallowed entries stay at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub num_states: usize,
    pub num_actions: usize,
    pub q: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub decay: f64,
    pub epsilon_min: f64,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            num_states,
            num_actions,
            q: vec![0.0; num_states * num_actions],
            alpha,
            gamma,
            epsilon: 1.0,
            decay: 1.0,
            epsilon_min: 0.0,
        }
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.q[s.0 * self.num_actions + a.0]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.q[s.0 * self.num_actions..(s.0 + 1) * self.num_actions]
    }

    fn masked_max(&self, s: StateId, restriction: &Restriction) -> f64 {
        let row = self.row(s);
        restriction.allowed(s).iter().map(|a| row[a.0]).fold(f64::NEG_INFINITY, f64::max)
    }

    fn td_error(&self, step: &Step, restriction: &Restriction) -> f64 {
        let bootstrap = step.next.map_or(0.0, |n| self.masked_max(n, restriction));
        step.reward + self.gamma * bootstrap - self.get(step.state, step.action)
    }

    fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.decay).max(self.epsilon_min);
    }
}

/// With probability `eps` a uniform allowed action, otherwise the allowed
/// argmax of `q_row` (lowest index on ties).
pub fn masked_epsilon_greedy(q_row: &[f64], allowed: &[ActionId], eps: f64, rng: &mut dyn RngCore) -> Result<ActionId> {
    match allowed {
        [] => Err(CsrlError::InvalidInput("no allowed actions".into())),
        [only] => Ok(*only),
        _ if eps > 0.0 && rng.random::<f64>() < eps => Ok(allowed[rng.random_range(0..allowed.len())]),
        _ => Ok(masked_argmax(q_row, allowed)),
    }
}

fn masked_argmax(q_row: &[f64], allowed: &[ActionId]) -> ActionId {
    let mut best = allowed[0];
    for &a in &allowed[1..] {
        if q_row[a.0] > q_row[best.0] {
            best = a;
        }
    }
    best
}

/// TD update over `steps` with bootstraps maximized over allowed actions only.
///
/// The returned change value is Σ|TD error| (or |Σ TD error| when `signed`),
/// computed on the table as it was before any of these updates.
pub fn q_learner_update<'a>(
    q: &mut QTable,
    steps: impl IntoIterator<Item = &'a Step>,
    restriction: &Restriction,
    signed: bool,
) -> f64 {
    let steps: Vec<&Step> = steps.into_iter().collect();
    let errors: Vec<f64> = steps.iter().map(|st| q.td_error(st, restriction)).collect();
    let delta = if signed { errors.iter().sum::<f64>().abs() } else { errors.iter().map(|e| e.abs()).sum() };
    for st in steps {
        let err = q.td_error(st, restriction);
        q.q[st.state.0 * q.num_actions + st.action.0] += q.alpha * err;
        q.decay_epsilon();
    }
    delta
}

/// Masked ε-greedy tabular Q-learning.
pub struct QLearner {
    restriction: Restriction,
    table: QTable,
    signed_delta: bool,
}

impl QLearner {
    pub fn new(restriction: Restriction, config: &QConfig) -> Self {
        let mut table = QTable::new(restriction.num_states(), restriction.num_actions(), config.alpha, config.gamma);
        table.epsilon = config.epsilon0;
        table.decay = if restriction.is_full() { config.decay_unconstrained } else { config.decay };
        table.epsilon_min = config.epsilon_min;
        Self { restriction, table, signed_delta: config.signed_delta }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }
}

impl Learner for QLearner {
    fn restriction(&self) -> &Restriction {
        &self.restriction
    }

    fn act(&mut self, state: StateId, rng: &mut dyn RngCore) -> ActionId {
        masked_epsilon_greedy(self.table.row(state), self.restriction.allowed(state), self.table.epsilon, rng)
            .expect("restriction masks are nonempty")
    }

    fn end_episode(&mut self, traj: &Trajectory) -> f64 {
        q_learner_update(&mut self.table, &traj.steps, &self.restriction, self.signed_delta)
    }

    fn ingest_shared(&mut self, traj: &Trajectory) {
        let steps: Vec<&Step> = filter_allowed(traj, &self.restriction).collect();
        q_learner_update(&mut self.table, steps, &self.restriction, self.signed_delta);
    }

    fn greedy_policy(&self) -> TabularPolicy {
        let actions: Vec<ActionId> = (0..self.table.num_states)
            .map(|s| masked_argmax(self.table.row(StateId(s)), self.restriction.allowed(StateId(s))))
            .collect();
        TabularPolicy::deterministic(self.table.num_actions, &actions)
    }
}
