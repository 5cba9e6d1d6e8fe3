use std::cell::RefCell;
use std::rc::Rc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, Result};
use crate::learners::{tabular_change, Learner};
use crate::mdp::{ActionId, Restriction, StateId, Step, TabularPolicy, Trajectory};
use crate::synthetic::ActionValues;

/// Empirical model of rewards and transitions, shared by every UCRL learner in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct UcrlModel {
    num_states: usize,
    num_actions: usize,
    visits: Vec<u64>,
    reward_sums: Vec<f64>,
    // sorted by successor state
    transitions: Vec<Vec<(usize, u64)>>,
    terminal: Vec<u64>,
    version: u64,
}

pub type SharedModel = Rc<RefCell<UcrlModel>>;

impl UcrlModel {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        let n = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            visits: vec![0; n],
            reward_sums: vec![0.0; n],
            transitions: vec![Vec::new(); n],
            terminal: vec![0; n],
            version: 0,
        }
    }

    pub fn shared(num_states: usize, num_actions: usize) -> SharedModel {
        Rc::new(RefCell::new(Self::new(num_states, num_actions)))
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Bumped by every update that adds at least one step.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn record(&mut self, step: &Step) {
        let i = step.state.0 * self.num_actions + step.action.0;
        self.visits[i] += 1;
        self.reward_sums[i] += step.reward;
        match step.next {
            None => self.terminal[i] += 1,
            Some(next) => {
                let row = &mut self.transitions[i];
                match row.binary_search_by_key(&next.0, |&(s, _)| s) {
                    Ok(j) => row[j].1 += 1,
                    Err(j) => row.insert(j, (next.0, 1)),
                }
            }
        }
    }

    pub fn update(&mut self, traj: &Trajectory) {
        for step in &traj.steps {
            self.record(step);
        }
        if !traj.steps.is_empty() {
            self.version += 1;
        }
    }

    pub fn visits(&self, s: StateId, a: ActionId) -> u64 {
        self.visits[s.0 * self.num_actions + a.0]
    }

    pub fn reward_sum(&self, s: StateId, a: ActionId) -> f64 {
        self.reward_sums[s.0 * self.num_actions + a.0]
    }

    pub fn transition_count(&self, s: StateId, a: ActionId, next: StateId) -> u64 {
        let row = &self.transitions[s.0 * self.num_actions + a.0];
        row.binary_search_by_key(&next.0, |&(t, _)| t).map_or(0, |j| row[j].1)
    }

    pub fn transition_counts(&self, s: StateId, a: ActionId) -> &[(usize, u64)] {
        &self.transitions[s.0 * self.num_actions + a.0]
    }

    pub fn terminal_count(&self, s: StateId, a: ActionId) -> u64 {
        self.terminal[s.0 * self.num_actions + a.0]
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().sum()
    }
}

/// Parameters of optimistic planning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EviOptions {
    pub horizon: usize,
    pub gamma: f64,
    pub delta_conf: f64,
    pub r_max: f64,
    /// Multiplies both confidence widths; 0 plans on the empirical model.
    pub bonus_scale: f64,
    /// Stop early once successive value differences are this flat (span for
    /// `gamma == 1`, sup-norm otherwise). 0 always runs the full horizon.
    pub tolerance: f64,
}

impl Default for EviOptions {
    fn default() -> Self {
        Self { horizon: 100, gamma: 1.0, delta_conf: 0.1, r_max: 1.0, bonus_scale: 1.0, tolerance: 0.0 }
    }
}

#[derive(Clone, Copy)]
struct PairModel {
    reward: f64,
    unvisited: bool,
    // half the L1 radius: the mass that may move onto the best successor
    shift: f64,
    start: usize,
    end: usize,
}

/// Optimistic value iteration restricted to the allowed actions of `restriction`.
///
/// Rewards get a Hoeffding bonus capped at `r_max`; transitions are chosen in an
/// L1 ball around the empirical estimate by moving mass onto the highest-valued
/// successor. Unvisited pairs are fully optimistic. Disallowed pairs hold 0.
pub fn constrained_evi(model: &UcrlModel, restriction: &Restriction, opts: &EviOptions) -> Result<ActionValues> {
    let (ns, na) = (model.num_states, model.num_actions);
    if restriction.num_states() != ns || restriction.num_actions() != na {
        return Err(CsrlError::InvalidInput("restriction and model spaces differ".into()));
    }
    if !(opts.delta_conf > 0.0 && opts.delta_conf < 1.0) || !(0.0..=1.0).contains(&opts.gamma) {
        return Err(CsrlError::InvalidInput("delta_conf must be in (0, 1) and gamma in [0, 1]".into()));
    }
    let log_term = (2.0 / opts.delta_conf).ln();
    // successor `ns` is the terminal state
    let terminal = ns;

    let mut pairs: Vec<(usize, PairModel)> = Vec::new();
    let mut outcomes: Vec<(usize, f64)> = Vec::new();
    for s in 0..ns {
        for &a in restriction.allowed(StateId(s)) {
            let i = s * na + a.0;
            let n = model.visits[i];
            let start = outcomes.len();
            if n == 0 {
                let pair = PairModel { reward: opts.r_max, unvisited: true, shift: 0.0, start, end: start };
                pairs.push((i, pair));
                continue;
            }
            let nf = n as f64;
            let conf_r = opts.r_max.min((log_term / (2.0 * nf)).sqrt());
            let reward = opts.r_max.min(model.reward_sums[i] / nf + opts.bonus_scale * conf_r);
            let conf_p = opts.bonus_scale * (2.0 * ns as f64 * log_term / nf).sqrt();
            outcomes.extend(model.transitions[i].iter().map(|&(t, c)| (t, c as f64 / nf)));
            if model.terminal[i] > 0 {
                outcomes.push((terminal, model.terminal[i] as f64 / nf));
            }
            let pair = PairModel { reward, unvisited: false, shift: conf_p / 2.0, start, end: outcomes.len() };
            pairs.push((i, pair));
        }
    }

    let mut q = ActionValues::zeros(restriction);
    let mut q_prev = q.clone();
    let mut v = vec![0.0; ns + 1];
    let mut v_next = vec![0.0; ns + 1];
    let mut scratch: Vec<(f64, f64)> = Vec::new();
    for n in 1..=opts.horizon {
        let (best_state, best_v) = v[..ns]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (s, &x)| if x > acc.1 { (s, x) } else { acc });
        // the terminal state is worth 0 and competes for the best successor
        let best = if best_v >= 0.0 { best_state } else { terminal };

        std::mem::swap(&mut q, &mut q_prev);
        v_next[..ns].fill(f64::NEG_INFINITY);
        for &(i, ref pair) in &pairs {
            let future = if pair.unvisited {
                v[best]
            } else {
                optimistic_future(&outcomes[pair.start..pair.end], pair.shift, best, &v, &mut scratch)
            };
            let value = pair.reward + opts.gamma * future;
            q.set_flat(i, value);
            let s = i / na;
            if value > v_next[s] {
                v_next[s] = value;
            }
        }

        if opts.tolerance > 0.0 && n >= 2 && n < opts.horizon {
            let (lo, hi) = v_next[..ns]
                .iter()
                .zip(&v[..ns])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a - b), hi.max(a - b)));
            if opts.gamma >= 1.0 && hi - lo < opts.tolerance {
                // values now grow by a constant per step: extrapolate to the full horizon
                let remaining = (opts.horizon - n) as f64;
                for &(i, _) in &pairs {
                    let cur = q.raw()[i];
                    q.set_flat(i, cur + remaining * (cur - q_prev.raw()[i]));
                }
                return Ok(q);
            }
            if opts.gamma < 1.0 && hi.abs().max(lo.abs()) < opts.tolerance {
                return Ok(q);
            }
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    Ok(q)
}

/// Expected next value under the most optimistic distribution within the ball:
/// `shift` mass moves onto `best`, taken from the lowest-valued outcomes first.
fn optimistic_future(outcomes: &[(usize, f64)], shift: f64, best: usize, v: &[f64], scratch: &mut Vec<(f64, f64)>) -> f64 {
    let best_v = v[best];
    let p_best: f64 = outcomes.iter().filter(|(o, _)| *o == best).map(|(_, p)| p).sum();
    let added = shift.min(1.0 - p_best);

    scratch.clear();
    scratch.extend(outcomes.iter().filter(|(o, _)| *o != best).map(|&(o, p)| (v[o], p)));
    if scratch.len() > 1 {
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    }

    let mut excess = added;
    let mut total = (p_best + added) * best_v;
    for &(value, p) in scratch.iter() {
        let removed = p.min(excess);
        excess -= removed;
        total += (p - removed) * value;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcrlConfig {
    pub delta_conf: f64,
    pub r_max: f64,
    pub gamma: f64,
    /// Planning horizon; defaults to the environment's horizon cap.
    pub horizon: Option<usize>,
    pub bonus_scale: f64,
    pub evi_tolerance: f64,
}

impl Default for UcrlConfig {
    fn default() -> Self {
        Self { delta_conf: 0.1, r_max: 1.0, gamma: 1.0, horizon: None, bonus_scale: 1.0, evi_tolerance: 1e-6 }
    }
}

impl UcrlConfig {
    pub fn evi_options(&self, env_horizon: usize) -> EviOptions {
        EviOptions {
            horizon: self.horizon.unwrap_or(env_horizon),
            gamma: self.gamma,
            delta_conf: self.delta_conf,
            r_max: self.r_max,
            bonus_scale: self.bonus_scale,
            tolerance: self.evi_tolerance,
        }
    }
}

/// UCRL restricted to one constraint. Plans on the shared model at episode
/// start and acts greedily on the resulting full-horizon action values.
///
/// `end_episode` records the learner's own trajectory into the shared model, so
/// `ingest_shared` has nothing left to do.
pub struct UcrlLearner {
    restriction: Restriction,
    model: SharedModel,
    opts: EviOptions,
    plan: Option<(u64, ActionValues)>,
    start: Option<ActionValues>,
}

impl UcrlLearner {
    pub fn new(restriction: Restriction, model: SharedModel, opts: EviOptions) -> Result<Self> {
        {
            let m = model.borrow();
            if m.num_states != restriction.num_states() || m.num_actions != restriction.num_actions() {
                return Err(CsrlError::Config(format!("{}: restriction does not match the model", restriction.id())));
            }
        }
        constrained_evi(&UcrlModel::new(1, 1), &Restriction::unconstrained(1, 1), &opts)?;
        Ok(Self { restriction, model, opts, plan: None, start: None })
    }

    pub fn model(&self) -> &SharedModel {
        &self.model
    }

    fn ensure_plan(&mut self) -> &ActionValues {
        let version = self.model.borrow().version;
        if self.plan.as_ref().is_none_or(|(v, _)| *v != version) {
            let q = constrained_evi(&self.model.borrow(), &self.restriction, &self.opts)
                .expect("options and shapes validated at construction");
            self.plan = Some((version, q));
        }
        &self.plan.as_ref().expect("plan just set").1
    }

    /// Current optimistic action values.
    pub fn q_values(&mut self) -> &ActionValues {
        self.ensure_plan()
    }
}

impl Learner for UcrlLearner {
    fn restriction(&self) -> &Restriction {
        &self.restriction
    }

    fn begin_episode(&mut self) {
        let q = self.ensure_plan().clone();
        self.start = Some(q);
    }

    fn act(&mut self, state: StateId, _rng: &mut dyn RngCore) -> ActionId {
        self.ensure_plan().greedy(state)
    }

    fn end_episode(&mut self, traj: &Trajectory) -> f64 {
        let before = match self.start.take() {
            Some(q) => q,
            None => self.ensure_plan().clone(),
        };
        self.model.borrow_mut().update(traj);
        let after = self.ensure_plan();
        tabular_change(before.raw(), after.raw(), after.num_states(), after.num_actions()).expect("same shape")
    }

    fn ingest_shared(&mut self, _traj: &Trajectory) {}

    fn greedy_policy(&self) -> TabularPolicy {
        let version = self.model.borrow().version;
        match &self.plan {
            Some((v, q)) if *v == version => q.greedy_policy(),
            _ => constrained_evi(&self.model.borrow(), &self.restriction, &self.opts)
                .expect("options and shapes validated at construction")
                .greedy_policy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{exact_constrained_vi, make_chain_mdp};

    fn step(s: usize, a: usize, r: f64, next: Option<usize>) -> Step {
        Step { state: StateId(s), action: ActionId(a), reward: r, next: next.map(StateId) }
    }

    #[test]
    fn single_transition_bookkeeping() {
        let mut m = UcrlModel::new(2, 2);
        m.update(&Trajectory::default());
        assert_eq!(m, UcrlModel::new(2, 2));
        m.update(&Trajectory { steps: vec![step(0, 0, 1.0, Some(1))], terminated: false });
        assert_eq!(m.visits(StateId(0), ActionId(0)), 1);
        assert_eq!(m.reward_sum(StateId(0), ActionId(0)), 1.0);
        assert_eq!(m.transition_count(StateId(0), ActionId(0), StateId(1)), 1);
        assert_eq!(m.terminal_count(StateId(0), ActionId(0)), 0);
        assert_eq!(m.version(), 1);
    }

    #[test]
    fn unvisited_is_fully_optimistic() {
        let m = UcrlModel::new(3, 2);
        let r = Restriction::from_lists("r", 2, vec![vec![ActionId(0)], vec![ActionId(1)], vec![ActionId(0), ActionId(1)]], vec![])
            .unwrap();
        let q = constrained_evi(&m, &r, &EviOptions { horizon: 7, ..Default::default() }).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                let expected = r.allows(StateId(s), ActionId(a)).then_some(7.0);
                assert_eq!(q.get(StateId(s), ActionId(a)), expected);
            }
        }
    }

    #[test]
    fn zero_bonus_on_exact_model_matches_exact_vi() {
        // deterministic chain: empirical model equals the true one after one visit per pair
        let mdp = make_chain_mdp(4, 0.0).unwrap();
        let mut m = UcrlModel::new(4, 2);
        for s in 0..4 {
            for a in 0..2 {
                let (next, _) = (mdp.row(StateId(s), ActionId(a))[0].0, ());
                m.record(&step(s, a, mdp.reward_mean(StateId(s), ActionId(a)), Some(next)));
            }
        }
        let u = Restriction::unconstrained(4, 2);
        let opts = EviOptions { horizon: mdp.horizon(), bonus_scale: 0.0, ..Default::default() };
        let q = constrained_evi(&m, &u, &opts).unwrap();
        let exact = exact_constrained_vi(&mdp, &u, 1.0).unwrap();
        for (a, b) in q.raw().iter().zip(exact.q.raw()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn early_stop_extrapolation_matches_full_sweep() {
        let mut m = UcrlModel::new(3, 2);
        m.record(&step(0, 0, 0.5, Some(1)));
        m.record(&step(1, 1, 0.2, None));
        let u = Restriction::unconstrained(3, 2);
        let full = EviOptions { horizon: 300, ..Default::default() };
        let a = constrained_evi(&m, &u, &full).unwrap();
        let b = constrained_evi(&m, &u, &EviOptions { tolerance: 1e-9, ..full }).unwrap();
        for (x, y) in a.raw().iter().zip(b.raw()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn optimistic_transition_moves_mass_to_best() {
        let outcomes = [(0, 0.5), (1, 0.5)];
        let v = [1.0, 0.0, 5.0];
        let mut scratch = Vec::new();
        // 0.2 moves onto state 2 and leaves the lowest-valued state 1
        let f = optimistic_future(&outcomes, 0.2, 2, &v, &mut scratch);
        assert!((f - (0.5 * 1.0 + 0.3 * 0.0 + 0.2 * 5.0)).abs() < 1e-12);
        assert!((optimistic_future(&outcomes, 5.0, 2, &v, &mut scratch) - 5.0).abs() < 1e-12);
    }
}
