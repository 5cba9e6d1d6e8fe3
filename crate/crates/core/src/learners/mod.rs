//! Restricted base learners. Each learner acts and optimizes only inside its
//! own [`Restriction`].

mod mock;
mod qlearn;
mod ucrl;

pub use mock::{MockLearner, MockParams};
pub use qlearn::{masked_epsilon_greedy, q_learner_update, QConfig, QLearner, QTable};
pub use ucrl::{constrained_evi, EviOptions, SharedModel, UcrlConfig, UcrlLearner, UcrlModel};

use rand::RngCore;

use crate::error::{CsrlError, Result};
use crate::mdp::{ActionId, Environment, Restriction, StateId, Step, TabularPolicy, Trajectory};

/// The contract every base learner satisfies.
pub trait Learner {
    fn restriction(&self) -> &Restriction;

    fn id(&self) -> &str {
        self.restriction().id()
    }

    /// Called before the learner's own episode.
    fn begin_episode(&mut self) {}

    /// Action for `state`; always inside the restriction.
    fn act(&mut self, state: StateId, rng: &mut dyn RngCore) -> ActionId;

    /// Roll out one episode with [`Learner::act`].
    fn rollout(&mut self, env: &mut dyn Environment, rng: &mut dyn RngCore) -> Trajectory {
        self.begin_episode();
        let mut traj = Trajectory::default();
        let mut state = env.reset(rng);
        for _ in 0..env.horizon_cap() {
            let action = self.act(state, rng);
            let (next, reward) = env.step(state, action, rng);
            traj.steps.push(Step { state, action, reward, next });
            match next {
                Some(n) => state = n,
                None => {
                    traj.terminated = true;
                    break;
                }
            }
        }
        traj
    }

    /// Learn from the learner's own trajectory and return its change value δ.
    fn end_episode(&mut self, traj: &Trajectory) -> f64;

    /// Learn from a trajectory produced by another learner.
    fn ingest_shared(&mut self, traj: &Trajectory);

    fn greedy_policy(&self) -> TabularPolicy;
}

/// Normalized L1 distance between two state-action tables: Σ|a − b| / (|S|·|A|).
pub fn tabular_change(prev: &[f64], new: &[f64], num_states: usize, num_actions: usize) -> Result<f64> {
    let n = num_states * num_actions;
    if prev.len() != n || new.len() != n || n == 0 {
        return Err(CsrlError::InvalidInput(format!(
            "tables of length {} and {} do not match {num_states}x{num_actions}",
            prev.len(),
            new.len()
        )));
    }
    let total: f64 = prev.iter().zip(new).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / n as f64)
}

/// Steps whose action the restriction allows at their state.
pub fn filter_allowed<'a>(traj: &'a Trajectory, restriction: &'a Restriction) -> impl Iterator<Item = &'a Step> + 'a {
    traj.steps.iter().filter(|st| restriction.allows(st.state, st.action))
}
