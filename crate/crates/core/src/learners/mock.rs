use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, Result};
use crate::learners::Learner;
use crate::mdp::{ActionId, Environment, Restriction, StateId, Step, TabularPolicy, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockParams {
    pub mu: f64,
    pub sigma: f64,
}

/// A converged learner: every episode is one step whose reward is drawn
/// i.i.d. from a normal(mu, sigma) truncated to [0, 1]. Its change value is always 0.
pub struct MockLearner {
    restriction: Restriction,
    params: MockParams,
    normal: Option<Normal<f64>>,
}

impl MockLearner {
    pub fn new(restriction: Restriction, params: MockParams) -> Result<Self> {
        if !(0.0..=1.0).contains(&params.mu) || !(params.sigma >= 0.0 && params.sigma.is_finite()) {
            return Err(CsrlError::Config(format!(
                "{}: mock needs mu in [0, 1] and finite sigma >= 0",
                restriction.id()
            )));
        }
        let normal = (params.sigma > 0.0)
            .then(|| Normal::new(params.mu, params.sigma).expect("sigma checked above"));
        Ok(Self { restriction, params, normal })
    }

    pub fn params(&self) -> MockParams {
        self.params
    }

    pub fn sample_return(&self, rng: &mut dyn RngCore) -> f64 {
        let Some(normal) = &self.normal else { return self.params.mu };
        loop {
            let x = normal.sample(rng);
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
    }
}

impl Learner for MockLearner {
    fn restriction(&self) -> &Restriction {
        &self.restriction
    }

    fn act(&mut self, state: StateId, _rng: &mut dyn RngCore) -> ActionId {
        self.restriction.allowed(state)[0]
    }

    fn rollout(&mut self, _env: &mut dyn Environment, rng: &mut dyn RngCore) -> Trajectory {
        let state = StateId(0);
        let action = self.act(state, rng);
        let reward = self.sample_return(rng);
        Trajectory { steps: vec![Step { state, action, reward, next: None }], terminated: true }
    }

    fn end_episode(&mut self, _traj: &Trajectory) -> f64 {
        0.0
    }

    fn ingest_shared(&mut self, _traj: &Trajectory) {}

    fn greedy_policy(&self) -> TabularPolicy {
        let actions: Vec<ActionId> =
            (0..self.restriction.num_states()).map(|s| self.restriction.allowed(StateId(s))[0]).collect();
        TabularPolicy::deterministic(self.restriction.num_actions(), &actions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::episode_return;
    use crate::synthetic::make_random_mdp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_is_exact() {
        let mut m = MockLearner::new(Restriction::unconstrained(1, 1), MockParams { mu: 0.3, sigma: 0.0 }).unwrap();
        let mut env = make_random_mdp(0, 1, 1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let t = m.rollout(&mut env, &mut rng);
            assert_eq!(episode_return(&t), 0.3);
            assert_eq!(m.end_episode(&t), 0.0);
        }
    }

    #[test]
    fn sample_mean_concentrates() {
        let (mu, sigma) = (0.6, 0.05);
        let m = MockLearner::new(Restriction::unconstrained(1, 1), MockParams { mu, sigma }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| m.sample_return(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - mu).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MockLearner::new(Restriction::unconstrained(1, 1), MockParams { mu: 1.5, sigma: 0.1 }).is_err());
        assert!(MockLearner::new(Restriction::unconstrained(1, 1), MockParams { mu: 0.5, sigma: -1.0 }).is_err());
    }
}
