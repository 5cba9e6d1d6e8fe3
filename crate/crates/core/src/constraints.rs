//! Builders that turn high-level constraint specifications into per-state masks:
//! the recommendation variability families (g#, e#, o#, t#, U), explicit mask
//! tables, and the JSON restriction-set format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CsrlError, Result};
use crate::mdp::{ActionId, Restriction, RestrictionSet, StateId, UNCONSTRAINED_ID};
use crate::recsys::{variability, RecsysEnv, RecsysState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariabilityKind {
    #[serde(alias = "atleast", alias = "at-least")]
    AtLeast,
    Exactly,
}

/// What to do at a window where the requested variability (or the ban list)
/// leaves no action.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infeasible {
    /// Fail construction, naming the state.
    #[default]
    Error,
    /// Use the attainable variability closest to the requested level, then
    /// lift bans from the most popular banned action down until something is allowed.
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariabilitySpec {
    pub kind: VariabilityKind,
    pub level: usize,
    /// Ordered least popular first.
    pub banned: Vec<ActionId>,
    pub infeasible: Infeasible,
}

/// What the variability builders need to know about the recommendation env.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecsysShape {
    pub num_actions: usize,
    pub window: usize,
    /// Actions from least to most popular.
    pub popularity: Vec<ActionId>,
}

impl RecsysShape {
    pub fn from_env(env: &RecsysEnv) -> Self {
        let p = env.params();
        Self { num_actions: p.num_actions, window: p.window, popularity: env.popularity_ascending() }
    }

    pub fn num_states(&self) -> usize {
        self.num_actions.pow(self.window as u32)
    }

    pub fn max_variability(&self) -> usize {
        (self.window + 1).min(self.num_actions)
    }

    /// The `n` least popular actions.
    pub fn least_popular(&self, n: usize) -> Vec<ActionId> {
        self.popularity.iter().take(n).copied().collect()
    }
}

pub fn build_variability_restriction(
    id: impl Into<String>,
    spec: &VariabilitySpec,
    shape: &RecsysShape,
    declared_loosers: Vec<String>,
) -> Result<Restriction> {
    let id = id.into();
    let vmax = shape.max_variability();
    if spec.level == 0 || spec.level > vmax {
        return Err(CsrlError::Construction(format!("{id}: level {} outside [1, {vmax}]", spec.level)));
    }
    if spec.banned.len() >= shape.num_actions || spec.banned.iter().any(|a| a.0 >= shape.num_actions) {
        return Err(CsrlError::Construction(format!("{id}: banned actions must be a proper subset of the action set")));
    }

    let na = shape.num_actions;
    let mut lists = Vec::with_capacity(shape.num_states());
    for s in 0..shape.num_states() {
        let state = RecsysState::from_index(StateId(s), na, shape.window);
        let vs: Vec<usize> = (0..na).map(|a| variability(&state, ActionId(a))).collect();
        let target = match (spec.infeasible, spec.kind) {
            (Infeasible::Error, _) => spec.level,
            (Infeasible::Nearest, VariabilityKind::AtLeast) => spec.level.min(*vs.iter().max().expect("|A| > 0")),
            (Infeasible::Nearest, VariabilityKind::Exactly) => *vs
                .iter()
                .min_by_key(|&&v| (v.abs_diff(spec.level), v))
                .expect("|A| > 0"),
        };
        let candidates: Vec<ActionId> = (0..na)
            .filter(|&a| match spec.kind {
                VariabilityKind::AtLeast => vs[a] >= target,
                VariabilityKind::Exactly => vs[a] == target,
            })
            .map(ActionId)
            .collect();
        if candidates.is_empty() {
            return Err(CsrlError::Construction(format!(
                "{id}: no action reaches variability {} at window {:?} (state {s})",
                spec.level,
                window_1based(&state)
            )));
        }

        let mut bans = spec.banned.len();
        let allowed = loop {
            let kept: Vec<ActionId> =
                candidates.iter().copied().filter(|a| !spec.banned[..bans].contains(a)).collect();
            if !kept.is_empty() {
                break kept;
            }
            if spec.infeasible == Infeasible::Error {
                return Err(CsrlError::Construction(format!(
                    "{id}: bans leave no action at window {:?} (state {s})",
                    window_1based(&state)
                )));
            }
            bans -= 1;
        };
        lists.push(allowed);
    }
    Restriction::from_lists(id, na, lists, declared_loosers)
}

fn window_1based(s: &RecsysState) -> Vec<usize> {
    s.window.iter().map(|a| a.0 + 1).collect()
}

/// Wraps an explicit state → allowed-actions table. Every state must be listed.
pub fn build_mask_table_restriction(
    id: impl Into<String>,
    num_states: usize,
    num_actions: usize,
    table: &BTreeMap<usize, Vec<usize>>,
    declared_loosers: Vec<String>,
) -> Result<Restriction> {
    let id = id.into();
    if let Some((&s, _)) = table.iter().find(|(&s, _)| s >= num_states) {
        return Err(CsrlError::Construction(format!("{id}: state {s} outside |S| = {num_states}")));
    }
    let lists = (0..num_states)
        .map(|s| match table.get(&s) {
            Some(list) => Ok(list.iter().map(|&a| ActionId(a)).collect()),
            None => Err(CsrlError::Construction(format!("{id}: state {s} missing from mask table"))),
        })
        .collect::<Result<Vec<Vec<ActionId>>>>()?;
    Restriction::from_lists(id, num_actions, lists, declared_loosers)
}

/// Inverse of [`build_mask_table_restriction`].
pub fn mask_table(r: &Restriction) -> BTreeMap<usize, Vec<usize>> {
    (0..r.num_states()).map(|s| (s, r.allowed(StateId(s)).iter().map(|a| a.0).collect())).collect()
}

/// The 13-member recommendation set: U, g2..g5, e2..e4, o2..o4, t2, t3.
///
/// `o#` bans the least popular action and `t#` the two least popular. Masks use
/// [`Infeasible::Nearest`], since most levels are unattainable at low-diversity windows.
pub fn build_recsys_set(shape: &RecsysShape) -> Result<RestrictionSet> {
    if shape.max_variability() < 5 || shape.num_actions < 3 {
        return Err(CsrlError::Construction(
            "recommendation set needs |A| >= 5 and w >= 4 so that variability 5 is attainable".into(),
        ));
    }
    let ids = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let least1 = shape.least_popular(1);
    let least2 = shape.least_popular(2);
    let rows: [(&str, VariabilityKind, usize, &[ActionId], Vec<String>); 12] = [
        ("g2", VariabilityKind::AtLeast, 2, &[], ids(&["U"])),
        ("g3", VariabilityKind::AtLeast, 3, &[], ids(&["U", "g2"])),
        ("g4", VariabilityKind::AtLeast, 4, &[], ids(&["U", "g2", "g3"])),
        ("g5", VariabilityKind::AtLeast, 5, &[], ids(&["U", "g2", "g3", "g4"])),
        ("e2", VariabilityKind::Exactly, 2, &[], ids(&["U", "g2"])),
        ("e3", VariabilityKind::Exactly, 3, &[], ids(&["U", "g3"])),
        ("e4", VariabilityKind::Exactly, 4, &[], ids(&["U", "g4"])),
        ("o2", VariabilityKind::Exactly, 2, &least1, ids(&["U", "g2", "e2"])),
        ("o3", VariabilityKind::Exactly, 3, &least1, ids(&["U", "g3", "e3"])),
        ("o4", VariabilityKind::Exactly, 4, &least1, ids(&["U", "g4", "e4"])),
        ("t2", VariabilityKind::Exactly, 2, &least2, ids(&["U", "g2", "e2", "o2"])),
        ("t3", VariabilityKind::Exactly, 3, &least2, ids(&["U", "g3", "e3", "o3"])),
    ];
    let mut members = vec![Restriction::unconstrained(shape.num_states(), shape.num_actions)];
    for (id, kind, level, banned, loosers) in rows {
        let spec = VariabilitySpec { kind, level, banned: banned.to_vec(), infeasible: Infeasible::Nearest };
        members.push(build_variability_restriction(id, &spec, shape, loosers)?);
    }
    RestrictionSet::verified(members)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ban {
    #[default]
    None,
    Least1,
    Least2,
}

impl Ban {
    fn count(self) -> usize {
        match self {
            Ban::None => 0,
            Ban::Least1 => 1,
            Ban::Least2 => 2,
        }
    }
}

/// One entry of a restriction-set document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionEntry {
    pub id: String,
    #[serde(default)]
    pub loosers: Vec<String>,
    #[serde(flatten)]
    pub kind: EntryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryKind {
    /// Every action in every state.
    Universal,
    /// Explicit state index → action index list. Keys are decimal strings in JSON.
    Table { table: BTreeMap<String, Vec<usize>> },
    #[serde(alias = "atleast")]
    AtLeast {
        level: usize,
        #[serde(default)]
        ban: Ban,
        #[serde(default)]
        infeasible: Infeasible,
    },
    Exactly {
        level: usize,
        #[serde(default)]
        ban: Ban,
        #[serde(default)]
        infeasible: Infeasible,
    },
}

/// `{"restrictions": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionSetDoc {
    pub restrictions: Vec<RestrictionEntry>,
}

/// "l3" and "g3" name the same at-least family; "g" is canonical.
pub fn canonical_id(id: &str) -> String {
    match id.strip_prefix('l') {
        Some(rest) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) => format!("g{rest}"),
        _ if id == "u" => UNCONSTRAINED_ID.to_string(),
        _ => id.to_string(),
    }
}

impl RestrictionSetDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CsrlError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Materialize and verify. Variability entries need `shape`.
    pub fn build(&self, num_states: usize, num_actions: usize, shape: Option<&RecsysShape>) -> Result<RestrictionSet> {
        let mut members = Vec::with_capacity(self.restrictions.len());
        for entry in &self.restrictions {
            let id = canonical_id(&entry.id);
            let loosers: Vec<String> = entry.loosers.iter().map(|l| canonical_id(l)).collect();
            let r = match &entry.kind {
                EntryKind::Universal => {
                    Restriction::unconstrained(num_states, num_actions).with_id(id).with_declared_loosers(loosers)
                }
                EntryKind::Table { table } => {
                    let table = table
                        .iter()
                        .map(|(k, v)| {
                            k.parse::<usize>()
                                .map(|s| (s, v.clone()))
                                .map_err(|_| CsrlError::load(format!("{id}.table.{k}"), "state key is not an index"))
                        })
                        .collect::<Result<BTreeMap<_, _>>>()?;
                    build_mask_table_restriction(id, num_states, num_actions, &table, loosers)?
                }
                EntryKind::AtLeast { level, ban, infeasible } | EntryKind::Exactly { level, ban, infeasible } => {
                    let shape = shape.ok_or_else(|| {
                        CsrlError::Config(format!("{id}: variability restrictions need the recommendation env"))
                    })?;
                    if shape.num_states() != num_states {
                        return Err(CsrlError::Config(format!("{id}: env shape does not match the state space")));
                    }
                    let kind = if matches!(entry.kind, EntryKind::AtLeast { .. }) {
                        VariabilityKind::AtLeast
                    } else {
                        VariabilityKind::Exactly
                    };
                    let spec = VariabilitySpec {
                        kind,
                        level: *level,
                        banned: shape.least_popular(ban.count()),
                        infeasible: *infeasible,
                    };
                    build_variability_restriction(id, &spec, shape, loosers)?
                }
            };
            members.push(r);
        }
        RestrictionSet::verified(members)
    }

    /// Document holding explicit tables for every member of `set`.
    pub fn from_set(set: &RestrictionSet) -> Self {
        let restrictions = set
            .members()
            .iter()
            .map(|r| RestrictionEntry {
                id: r.id().to_string(),
                loosers: r.declared_loosers().to_vec(),
                kind: if r.is_full() {
                    EntryKind::Universal
                } else { EntryKind::Table {
                        table: mask_table(r).into_iter().map(|(s, v)| (s.to_string(), v)).collect(),
                    }
                },
            })
            .collect();
        Self { restrictions }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("doc serializes")
    }
}
