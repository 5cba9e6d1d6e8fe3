//! Shared MDP vocabulary: state and action ids, trajectories, policies, and
//! per-state action restrictions with their subset partial order.

use std::collections::HashSet;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, OrderViolation, Result};

/// Conventional id of the unconstrained restriction.
pub const UNCONSTRAINED_ID: &str = "U";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// One transition. `next` is `None` when the step entered the terminal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next: Option<StateId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// True when the episode ended in the terminal state rather than at the horizon cap.
    pub terminated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }
}

/// Undiscounted sum of rewards.
pub fn episode_return(traj: &Trajectory) -> f64 {
    traj.rewards().sum()
}

/// An episodic environment over an enumerable state space.
///
/// `step` returns `None` as the next state when the episode terminates.
pub trait Environment {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn horizon_cap(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> StateId;
    fn step(&mut self, state: StateId, action: ActionId, rng: &mut dyn RngCore) -> (Option<StateId>, f64);
}

/// Maps each state to a nonempty set of allowed actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    id: String,
    num_states: usize,
    num_actions: usize,
    // row-major num_states x num_actions
    allowed: Vec<bool>,
    lists: Vec<Vec<ActionId>>,
    declared_loosers: Vec<String>,
}

impl Restriction {
    /// Builds a restriction from per-state allowed-action lists.
    pub fn from_lists(
        id: impl Into<String>,
        num_actions: usize,
        lists: Vec<Vec<ActionId>>,
        declared_loosers: Vec<String>,
    ) -> Result<Self> {
        let id = id.into();
        if num_actions == 0 {
            return Err(CsrlError::Construction(format!("{id}: action space is empty")));
        }
        let num_states = lists.len();
        let mut allowed = vec![false; num_states * num_actions];
        let mut sorted_lists = Vec::with_capacity(num_states);
        for (s, list) in lists.into_iter().enumerate() {
            if list.is_empty() {
                return Err(CsrlError::Construction(format!("{id}: empty mask at state {s}")));
            }
            for a in &list {
                if a.0 >= num_actions {
                    return Err(CsrlError::Construction(format!(
                        "{id}: action {} out of range at state {s} (|A| = {num_actions})",
                        a.0
                    )));
                }
                allowed[s * num_actions + a.0] = true;
            }
            let row: Vec<ActionId> = (0..num_actions)
                .filter(|&a| allowed[s * num_actions + a])
                .map(ActionId)
                .collect();
            sorted_lists.push(row);
        }
        Ok(Self { id, num_states, num_actions, allowed, lists: sorted_lists, declared_loosers })
    }

    /// Builds a restriction from a per-(state, action) predicate.
    pub fn from_fn(
        id: impl Into<String>,
        num_states: usize,
        num_actions: usize,
        declared_loosers: Vec<String>,
        mut allow: impl FnMut(StateId, ActionId) -> bool,
    ) -> Result<Self> {
        let lists = (0..num_states)
            .map(|s| {
                (0..num_actions)
                    .map(ActionId)
                    .filter(|&a| allow(StateId(s), a))
                    .collect()
            })
            .collect();
        Self::from_lists(id, num_actions, lists, declared_loosers)
    }

    /// The restriction allowing every action in every state.
    pub fn unconstrained(num_states: usize, num_actions: usize) -> Self {
        Self::from_fn(UNCONSTRAINED_ID, num_states, num_actions, Vec::new(), |_, _| true)
            .expect("unconstrained mask is nonempty when |A| > 0")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn declared_loosers(&self) -> &[String] {
        &self.declared_loosers
    }

    pub fn with_declared_loosers(mut self, loosers: Vec<String>) -> Self {
        self.declared_loosers = loosers;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn allowed_actions(&self, s: StateId) -> Result<&[ActionId]> {
        self.lists
            .get(s.0)
            .map(Vec::as_slice)
            .ok_or_else(|| CsrlError::InvalidInput(format!("state {} outside |S| = {}", s.0, self.num_states)))
    }

    /// Unchecked variant of [`Restriction::allowed_actions`] for hot loops.
    #[inline]
    pub fn allowed(&self, s: StateId) -> &[ActionId] {
        &self.lists[s.0]
    }

    #[inline]
    pub fn allows(&self, s: StateId, a: ActionId) -> bool {
        s.0 < self.num_states && a.0 < self.num_actions && self.allowed[s.0 * self.num_actions + a.0]
    }

    /// Row-major allowed flags.
    pub fn mask(&self) -> &[bool] {
        &self.allowed
    }

    pub fn is_full(&self) -> bool {
        self.allowed.iter().all(|&b| b)
    }

    fn check_same_space(&self, other: &Restriction) -> Result<()> {
        if self.num_states != other.num_states || self.num_actions != other.num_actions {
            return Err(CsrlError::InvalidInput(format!(
                "space mismatch: {} is {}x{}, {} is {}x{}",
                self.id, self.num_states, self.num_actions, other.id, other.num_states, other.num_actions
            )));
        }
        Ok(())
    }

    /// `mask_self(s) ⊆ mask_other(s)` for every state.
    pub fn is_subset_nonstrict(&self, other: &Restriction) -> Result<bool> {
        self.check_same_space(other)?;
        Ok(self.allowed.iter().zip(&other.allowed).all(|(&a, &b)| !a || b))
    }

    /// Strict subset: non-strict subset and the masks differ in at least one state.
    pub fn is_subset(&self, other: &Restriction) -> Result<bool> {
        Ok(self.is_subset_nonstrict(other)? && self.allowed != other.allowed)
    }
}

/// Does every action with positive probability lie inside the restriction?
pub fn policy_satisfies(policy: &TabularPolicy, restriction: &Restriction) -> Result<bool> {
    if policy.num_states != restriction.num_states || policy.num_actions != restriction.num_actions {
        return Err(CsrlError::InvalidInput(format!(
            "policy is {}x{} but restriction {} is {}x{}",
            policy.num_states,
            policy.num_actions,
            restriction.id,
            restriction.num_states,
            restriction.num_actions
        )));
    }
    Ok(policy.probs.iter().zip(&restriction.allowed).all(|(&p, &ok)| p <= 0.0 || ok))
}

/// Stochastic tabular policy; each state's row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(CsrlError::InvalidInput(format!(
                "expected {} probabilities, got {}",
                num_states * num_actions,
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(num_actions.max(1)).enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(CsrlError::InvalidInput(format!("state {s}: probability outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(CsrlError::InvalidInput(format!("state {s}: probabilities sum to {total}")));
            }
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self { num_states, num_actions, probs: vec![p; num_states * num_actions] }
    }

    pub fn deterministic(num_actions: usize, actions: &[ActionId]) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, a) in actions.iter().enumerate() {
            probs[s * num_actions + a.0] = 1.0;
        }
        Self { num_states: actions.len(), num_actions, probs }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, s: StateId, a: ActionId) -> f64 {
        self.probs[s.0 * self.num_actions + a.0]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.probs[s.0 * self.num_actions..(s.0 + 1) * self.num_actions]
    }

    /// Most probable action per state, lowest index on ties.
    pub fn greedy_actions(&self) -> Vec<ActionId> {
        (0..self.num_states)
            .map(|s| {
                let row = self.row(StateId(s));
                let mut best = 0;
                for (a, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = a;
                    }
                }
                ActionId(best)
            })
            .collect()
    }
}

/// A set of uniquely named, pairwise distinct restrictions over one space, with
/// the brute-force strict subset order between them.
#[derive(Debug, Clone)]
pub struct RestrictionSet {
    members: Vec<Restriction>,
    // looser[k][j]: member j is strictly less restricted than member k
    looser: Vec<Vec<bool>>,
}

impl RestrictionSet {
    /// Validates uniqueness and shape, then computes the strict order. Declared
    /// relations are not checked here; see [`RestrictionSet::verify`].
    pub fn new(members: Vec<Restriction>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(CsrlError::Construction("restriction set is empty".into()));
        };
        let (ns, na) = (first.num_states, first.num_actions);
        let mut ids = HashSet::new();
        for r in &members {
            if r.num_states != ns || r.num_actions != na {
                return Err(CsrlError::Construction(format!(
                    "{} is {}x{}, expected {ns}x{na}",
                    r.id, r.num_states, r.num_actions
                )));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(CsrlError::Construction(format!("duplicate restriction id {}", r.id)));
            }
        }
        for r in &members {
            for l in &r.declared_loosers {
                if !ids.contains(l.as_str()) {
                    return Err(CsrlError::Construction(format!("{} declares unknown looser {l}", r.id)));
                }
            }
        }
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                if a.allowed == b.allowed {
                    return Err(CsrlError::Construction(format!(
                        "{} and {} have identical masks",
                        a.id, b.id
                    )));
                }
            }
        }
        let k = members.len();
        let mut looser = vec![vec![false; k]; k];
        for (i, row) in looser.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if i != j {
                    *cell = members[i].is_subset(&members[j])?;
                }
            }
        }
        Ok(Self { members, looser })
    }

    /// Construct and verify in one go.
    pub fn verified(members: Vec<Restriction>) -> Result<Self> {
        let set = Self::new(members)?;
        set.verify()?;
        Ok(set)
    }

    /// Every declared looser relation must hold in the brute-force order.
    pub fn verify(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CsrlError::Verification(violations))
        }
    }

    pub fn violations(&self) -> Vec<OrderViolation> {
        let mut out = Vec::new();
        for (k, r) in self.members.iter().enumerate() {
            for l in &r.declared_loosers {
                let j = self.index_of(l).expect("validated at construction");
                if !self.looser[k][j] {
                    out.push(OrderViolation { tighter: r.id.clone(), looser: l.clone() });
                }
            }
        }
        out
    }

    /// Relations found by brute force that no member declares, as (tighter, looser).
    pub fn undeclared_relations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (k, r) in self.members.iter().enumerate() {
            for (j, l) in self.members.iter().enumerate() {
                if self.looser[k][j] && !r.declared_loosers.iter().any(|d| d == &l.id) {
                    out.push((r.id.clone(), l.id.clone()));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Restriction] {
        &self.members
    }

    pub fn get(&self, k: usize) -> &Restriction {
        &self.members[k]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.members.iter().position(|r| r.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.members.iter().map(|r| r.id.clone()).collect()
    }

    /// Is member `j` strictly less restricted than member `k`?
    pub fn is_looser(&self, j: usize, k: usize) -> bool {
        self.looser[k][j]
    }

    /// Ids strictly looser than member `k`, in member order.
    pub fn loosers_of(&self, k: usize) -> Vec<&str> {
        (0..self.len()).filter(|&j| self.looser[k][j]).map(|j| self.members[j].id()).collect()
    }

    /// No other member is strictly looser.
    pub fn is_maximal(&self, k: usize) -> bool {
        !self.looser[k].iter().any(|&b| b)
    }

    pub fn num_states(&self) -> usize {
        self.members[0].num_states
    }

    pub fn num_actions(&self) -> usize {
        self.members[0].num_actions
    }

    pub fn into_members(self) -> Vec<Restriction> {
        self.members
    }
}
