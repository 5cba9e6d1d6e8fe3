//! End-to-end acceptance checks. Runs every criterion, prints one PASS/FAIL
//! line each and exits non-zero if any failed.
//!
//! The recommendation runs take several minutes on one core. `CSRL_THREADS`
//! sizes the worker pool.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csrl_core::constraints::{build_recsys_set, RecsysShape};
use csrl_core::harness::{summarize, Experiment, ExperimentConfig, LearnerSpec, RecordRow, Seeds, Summary};
use csrl_core::learners::{q_learner_update, tabular_change, Learner, QTable, UcrlConfig, UcrlLearner, UcrlModel};
use csrl_core::mdp::{ActionId, Restriction, RestrictionSet, StateId, Step};
use csrl_core::meta::{should_eliminate, LearnerStats, MetaConfig};
use csrl_core::recsys::{gen_default_params, RecsysEnv};
use csrl_core::synthetic::{exact_constrained_vi, make_chain_mdp};

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(configs_dir().join(name)).expect("shipped config loads")
}

/// What the checks keep from one experiment: the summary, the run set and the
/// log-scan findings (rows are dropped after scanning).
struct RunResult {
    summary: Summary,
    problems: Vec<String>,
    rows: usize,
    /// Seed → learner id → selections.
    counts: BTreeMap<u64, BTreeMap<String, usize>>,
    elapsed: Duration,
}

fn execute(label: &str, cfg: ExperimentConfig) -> RunResult {
    let start = Instant::now();
    let exp = Experiment::new(cfg).expect("experiment builds");
    let (rows, clips) = exp.run_all().expect("experiment runs");
    let problems = scan_log(label, &rows, exp.restriction_set(), &exp.run_ids());
    let summary = summarize(&rows, exp.manifest(clips)).expect("summary");
    let elapsed = start.elapsed();
    let mut counts: BTreeMap<u64, BTreeMap<String, usize>> = BTreeMap::new();
    for r in &rows {
        *counts.entry(r.seed).or_default().entry(r.learner_id.clone()).or_default() += 1;
    }
    RunResult { summary, problems, rows: rows.len(), counts, elapsed }
}

/// Exhaustive elimination-safety scan of one run's records.
fn scan_log(label: &str, rows: &[RecordRow], set: &RestrictionSet, run_ids: &[String]) -> Vec<String> {
    let maximal: BTreeSet<&str> =
        (0..set.len()).filter(|&k| set.is_maximal(k)).map(|k| set.get(k).id()).collect();
    let mut problems = Vec::new();
    let mut eliminated: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    for r in rows {
        let gone = eliminated.entry(r.seed).or_default();
        if gone.contains(&r.learner_id) {
            problems.push(format!("{label} seed {} ep {}: selected eliminated {}", r.seed, r.episode, r.learner_id));
        }
        if r.active_set.is_empty() {
            problems.push(format!("{label} seed {} ep {}: empty active set", r.seed, r.episode));
        }
        if !r.eliminated.is_empty() {
            if maximal.contains(r.eliminated.as_str()) {
                problems.push(format!("{label} seed {} ep {}: eliminated maximal {}", r.seed, r.episode, r.eliminated));
            }
            gone.insert(r.eliminated.clone());
        }
        for id in r.active_set.split(';').filter(|s| !s.is_empty()) {
            if gone.contains(id) || !run_ids.iter().any(|x| x == id) {
                problems.push(format!("{label} seed {} ep {}: {id} listed active", r.seed, r.episode));
            }
        }
    }
    problems
}

fn recsys(name: &'static str, t_l: Option<f64>) -> &'static RunResult {
    static CSRL: OnceLock<RunResult> = OnceLock::new();
    static SSBAS: OnceLock<RunResult> = OnceLock::new();
    static UNCONSTRAINED: OnceLock<RunResult> = OnceLock::new();
    static LOW: OnceLock<RunResult> = OnceLock::new();
    static HIGH: OnceLock<RunResult> = OnceLock::new();
    let cell = match (name, t_l) {
        ("recsys_csrl.json", None) => &CSRL,
        ("recsys_ssbas.json", None) => &SSBAS,
        ("recsys_unconstrained.json", None) => &UNCONSTRAINED,
        ("recsys_csrl.json", Some(t)) if t < 0.05 => &LOW,
        ("recsys_csrl.json", Some(_)) => &HIGH,
        _ => unreachable!("no cached run for {name}"),
    };
    cell.get_or_init(|| {
        let mut cfg = load_config(name);
        cfg.seeds = Seeds::Count(50);
        cfg.episodes = 5000;
        if let Some(t) = t_l {
            cfg.meta.t_l = t;
        }
        let label = format!("{name} t_l={}", cfg.meta.t_l);
        let run = execute(&label, cfg);
        eprintln!("  ({label}: {} rows in {:.1?})", run.rows, run.elapsed);
        run
    })
}

fn mock_run() -> &'static RunResult {
    static RUN: OnceLock<RunResult> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = load_config("mock_bandit.json");
        cfg.seeds = Seeds::Count(100);
        cfg.episodes = 20_000;
        execute("mock", cfg)
    })
}

fn theorem_one_desk_check() -> Outcome {
    let arms = match &load_config("mock_bandit.json").learner {
        LearnerSpec::Mock { arms } => arms.clone(),
        _ => return Err("mock config lost its mock learner".into()),
    };
    let best = arms.values().map(|p| p.mu).fold(f64::NEG_INFINITY, f64::max);
    let run = mock_run();
    let good = run
        .counts
        .values()
        .filter(|c| {
            let count = |id: &str| c.get(id).copied().unwrap_or(0);
            let top = arms.iter().filter(|(_, p)| p.mu == best).map(|(id, _)| count(id)).max().unwrap_or(0);
            arms.iter().filter(|(_, p)| p.mu < best).all(|(id, _)| top > count(id))
        })
        .count();
    let detail = format!("{good}/{} seeds, {:.1?}", run.counts.len(), run.elapsed);
    if good >= 95 && run.counts.len() == 100 && run.elapsed < Duration::from_secs(60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Direct transcription of the elimination rule.
fn eliminate_oracle(k: usize, returns: &[Vec<f64>], deltas: &[Vec<f64>], active: &[bool], looser: &[Vec<bool>], cfg: &MetaConfig) -> bool {
    let n = returns[k].len();
    if n < cfg.t_n {
        return false;
    }
    for d in &deltas[k][n - cfg.t_n..] {
        if *d > cfg.t_l {
            return false;
        }
    }
    let mut has_looser = false;
    for i in 0..active.len() {
        if i != k && active[i] && looser[k][i] {
            has_looser = true;
        }
    }
    if !has_looser {
        return false;
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let mu_k = mean(&returns[k]);
    let se = if n < 2 {
        0.0
    } else {
        let var = returns[k].iter().map(|x| (x - mu_k) * (x - mu_k)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    let mut best_other = f64::NEG_INFINITY;
    for j in 0..active.len() {
        if j != k && active[j] && !returns[j].is_empty() {
            best_other = best_other.max(mean(&returns[j]));
        }
    }
    best_other > mu_k + cfg.elimination_tolerance_sigmas * se
}

fn stats_from(returns: &[f64], deltas: &[f64], active: bool) -> LearnerStats {
    let mut st = LearnerStats { active, ..Default::default() };
    for (r, d) in returns.iter().zip(deltas) {
        st.record(*r, *d);
    }
    st
}

/// Chain set: U, then `mid` below U, then `low` below both.
fn chain_set() -> RestrictionSet {
    let u = Restriction::unconstrained(2, 3);
    let mid = Restriction::from_lists("mid", 3, vec![vec![ActionId(0), ActionId(1)]; 2], vec!["U".into()]).unwrap();
    let low = Restriction::from_lists("low", 3, vec![vec![ActionId(0)]; 2], vec!["U".into(), "mid".into()]).unwrap();
    RestrictionSet::verified(vec![u, mid, low]).unwrap()
}

fn elimination_rule_suite() -> Outcome {
    let set = chain_set();
    let cfg = MetaConfig::default();
    let looser: Vec<Vec<bool>> = (0..3).map(|k| (0..3).map(|j| set.is_looser(j, k)).collect()).collect();

    // converged, looser active, clearly behind the best
    let low_returns: Vec<f64> = (0..20).map(|i| 0.2 + 0.01 * (i % 2) as f64).collect();
    let stats = vec![
        stats_from(&[0.8; 20], &[0.01; 20], true),
        stats_from(&[0.5; 20], &[0.01; 20], true),
        stats_from(&low_returns, &[0.01; 20], true),
    ];
    let mut failures = Vec::new();
    if !should_eliminate(2, &stats, &cfg, &set) {
        failures.push("converged trailing learner kept".to_string());
    }
    let mut noisy = stats.clone();
    let mut late_change = vec![0.01; 20];
    late_change[18] = 0.06;
    noisy[2] = stats_from(&low_returns, &late_change, true);
    if should_eliminate(2, &noisy, &cfg, &set) {
        failures.push("unconverged learner eliminated".to_string());
    }
    let mut top = stats.clone();
    top[0] = stats_from(&[0.1; 20], &[0.0; 20], true);
    if should_eliminate(0, &top, &cfg, &set) {
        failures.push("maximal learner eliminated".to_string());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut disagreements = 0;
    for _ in 0..1000 {
        let cfg = MetaConfig {
            t_l: rng.random_range(0.0..0.1),
            t_n: rng.random_range(1..6),
            elimination_tolerance_sigmas: [0.0, 1.0, 2.0][rng.random_range(0..3)],
            ..MetaConfig::default()
        };
        let active: Vec<bool> = (0..3).map(|_| rng.random::<f64>() < 0.8).collect();
        let k = rng.random_range(0..3);
        let mut active = active;
        active[k] = true;
        let returns: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let n = rng.random_range(0..10);
                let centre = rng.random::<f64>();
                (0..n).map(|_| (centre + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0)).collect()
            })
            .collect();
        let deltas: Vec<Vec<f64>> = returns.iter().map(|r| r.iter().map(|_| rng.random_range(0.0..0.1)).collect()).collect();
        let stats: Vec<LearnerStats> = (0..3).map(|j| stats_from(&returns[j], &deltas[j], active[j])).collect();
        if should_eliminate(k, &stats, &cfg, &set) != eliminate_oracle(k, &returns, &deltas, &active, &looser, &cfg) {
            disagreements += 1;
        }
    }
    if disagreements > 0 {
        failures.push(format!("{disagreements}/1000 randomized cases disagree"));
    }
    if failures.is_empty() {
        Ok("3 examples, 1000 randomized cases agree".into())
    } else {
        Err(failures.join("; "))
    }
}

fn change_value_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_table = 0.0f64;
    for _ in 0..100 {
        let (ns, na) = (rng.random_range(1..20), rng.random_range(1..6));
        let a: Vec<f64> = (0..ns * na).map(|_| rng.random_range(-50.0..50.0)).collect();
        let b: Vec<f64> = (0..ns * na).map(|_| rng.random_range(-50.0..50.0)).collect();
        let mut total = 0.0;
        for i in 0..ns * na {
            let d = a[i] - b[i];
            total += if d < 0.0 { -d } else { d };
        }
        let expected = total / (ns * na) as f64;
        let got = tabular_change(&a, &b, ns, na).map_err(|e| e.to_string())?;
        worst_table = worst_table.max((got - expected).abs());
    }

    let mut worst_td = 0.0f64;
    for case in 0..100 {
        let (ns, na) = (6, 3);
        let mask = Restriction::from_fn("m", ns, na, vec![], |_, a| a.0 == 0 || rng.random::<f64>() < 0.6).unwrap();
        let gamma = rng.random_range(0.5..1.0);
        let mut q = QTable::new(ns, na, 0.3, gamma);
        q.q = (0..ns * na).map(|_| rng.random_range(-1.0..1.0)).collect();
        let snapshot = q.q.clone();
        let len = rng.random_range(1..30);
        let steps: Vec<Step> = (0..len)
            .map(|t| {
                let s = rng.random_range(0..ns);
                let allowed = mask.allowed(StateId(s));
                Step {
                    state: StateId(s),
                    action: allowed[rng.random_range(0..allowed.len())],
                    reward: rng.random_range(-1.0..1.0),
                    next: if t + 1 == len { None } else { Some(StateId(rng.random_range(0..ns))) },
                }
            })
            .collect();
        let mut expected = 0.0;
        for st in &steps {
            let bootstrap = match st.next {
                None => 0.0,
                Some(n) => {
                    let mut m = f64::NEG_INFINITY;
                    for a in 0..na {
                        if mask.allows(n, ActionId(a)) && snapshot[n.0 * na + a] > m {
                            m = snapshot[n.0 * na + a];
                        }
                    }
                    m
                }
            };
            expected += (st.reward + gamma * bootstrap - snapshot[st.state.0 * na + st.action.0]).abs();
        }
        let got = q_learner_update(&mut q, &steps, &mask, false);
        let err = (got - expected).abs();
        if !err.is_finite() {
            return Err(format!("case {case}: non-finite change value"));
        }
        worst_td = worst_td.max(err);
    }
    let detail = format!("max |table error| {worst_table:.1e}, max |TD error| {worst_td:.1e}");
    if worst_table <= 1e-12 && worst_td <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ucrl_chain_correctness() -> Outcome {
    let start = Instant::now();
    let mdp = make_chain_mdp(5, 0.1).map_err(|e| e.to_string())?;
    let u = Restriction::unconstrained(5, 2);
    let exact = exact_constrained_vi(&mdp, &u, 1.0).map_err(|e| e.to_string())?;
    // states where the optimum is unique
    let decisive: Vec<usize> = (0..5)
        .filter(|&s| {
            let q: Vec<f64> = (0..2).map(|a| exact.q.get(StateId(s), ActionId(a)).unwrap()).collect();
            (q[0] - q[1]).abs() > 1e-9
        })
        .collect();
    let target = exact.policy.greedy_actions();
    let opts = UcrlConfig::default().evi_options(mdp.horizon());
    let mut matched = 0;
    for seed in 0..50u64 {
        let mut env = mdp.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = UcrlModel::shared(5, 2);
        let mut learner = UcrlLearner::new(u.clone(), model, opts).map_err(|e| e.to_string())?;
        for _ in 0..2000 {
            let traj = learner.rollout(&mut env, &mut rng);
            learner.end_episode(&traj);
        }
        let got = learner.greedy_policy().greedy_actions();
        if decisive.iter().all(|&s| got[s] == target[s]) {
            matched += 1;
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("{matched}/50 seeds match on {} decisive states, {:.1?}", decisive.len(), elapsed);
    if matched * 100 >= 95 * 50 && elapsed < Duration::from_secs(120) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Declared looser lists of the 13-member recommendation set.
const DECLARED: [(&str, &[&str]); 13] = [
    ("U", &[]),
    ("g2", &["U"]),
    ("g3", &["U", "g2"]),
    ("g4", &["U", "g2", "g3"]),
    ("g5", &["U", "g2", "g3", "g4"]),
    ("e2", &["U", "g2"]),
    ("e3", &["U", "g3"]),
    ("e4", &["U", "g4"]),
    ("o2", &["U", "g2", "e2"]),
    ("o3", &["U", "g3", "e3"]),
    ("o4", &["U", "g4", "e4"]),
    ("t2", &["U", "g2", "e2", "o2"]),
    ("t3", &["U", "g3", "e3", "o3"]),
];

fn strict_subset(a: &[bool], b: &[bool], na: usize) -> bool {
    let within = a.iter().zip(b).all(|(x, y)| !*x || *y);
    let proper = a.chunks(na).zip(b.chunks(na)).any(|(x, y)| x.iter().filter(|v| **v).count() < y.iter().filter(|v| **v).count());
    within && proper
}

fn subset_order_brute_force() -> Outcome {
    let start = Instant::now();
    let env = RecsysEnv::new(gen_default_params(0)).map_err(|e| e.to_string())?;
    let set = build_recsys_set(&RecsysShape::from_env(&env)).map_err(|e| e.to_string())?;
    if set.get(0).num_states() != 625 {
        return Err(format!("{} states", set.get(0).num_states()));
    }
    let na = set.get(0).num_actions();
    let index = |id: &str| set.index_of(id).ok_or(format!("missing {id}"));
    let mut computed: BTreeSet<(String, String)> = BTreeSet::new();
    for k in 0..set.len() {
        for j in 0..set.len() {
            if strict_subset(set.get(k).mask(), set.get(j).mask(), na) {
                computed.insert((set.get(k).id().to_string(), set.get(j).id().to_string()));
            }
        }
    }
    // declared relations closed under transitivity
    let mut closure: BTreeSet<(String, String)> =
        DECLARED.iter().flat_map(|(k, ls)| ls.iter().map(move |l| (k.to_string(), l.to_string()))).collect();
    loop {
        let extra: Vec<(String, String)> = closure
            .iter()
            .flat_map(|(a, b)| closure.iter().filter(move |(c, _)| c == b).map(move |(_, d)| (a.clone(), d.clone())))
            .filter(|p| !closure.contains(p))
            .collect();
        if extra.is_empty() {
            break;
        }
        closure.extend(extra);
    }
    let mut failures = Vec::new();
    for (k, ls) in DECLARED {
        let declared: Vec<String> = set.get(index(k)?).declared_loosers().to_vec();
        if declared != ls.iter().map(|s| s.to_string()).collect::<Vec<_>>() {
            failures.push(format!("{k} declares {declared:?}"));
        }
    }
    if computed != closure {
        let missing: Vec<_> = closure.difference(&computed).collect();
        let unexpected: Vec<_> = computed.difference(&closure).collect();
        failures.push(format!("declared but absent {missing:?}; present but undeclared {unexpected:?}"));
    }
    let e2 = index("e2")?;
    let g2 = index("g2")?;
    let g3 = index("g3")?;
    if !strict_subset(set.get(e2).mask(), set.get(g2).mask(), na) {
        failures.push("e2 not inside g2".into());
    }
    if strict_subset(set.get(g3).mask(), set.get(e2).mask(), na) {
        failures.push("g3 inside e2".into());
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        failures.push(format!("took {elapsed:.1?}"));
    }
    if failures.is_empty() {
        Ok(format!("{} strict relations, {:.1?}", computed.len(), elapsed))
    } else {
        Err(failures.join("; "))
    }
}

fn episodes_to(run: &RunResult, f: &str) -> Option<usize> {
    run.summary.sample_complexity.get(f).copied().flatten()
}

fn fmt_eps(e: Option<usize>) -> String {
    e.map_or("never".into(), |e| e.to_string())
}

fn speedup_over_unconstrained() -> Outcome {
    let csrl = recsys("recsys_csrl.json", None);
    let unconstrained = recsys("recsys_unconstrained.json", None);
    let ssbas = recsys("recsys_ssbas.json", None);
    let (c, u) = (episodes_to(csrl, "0.9"), episodes_to(unconstrained, "0.9"));
    let faster = matches!((c, u), (Some(c), Some(u)) if c <= u) || matches!((c, u), (Some(_), None));
    let keeps = csrl.summary.final_mean >= 0.97 * ssbas.summary.final_mean;
    let detail = format!(
        "episodes to 90%: csrl {} vs unconstrained {}; final mean csrl {:.2} vs ssbas {:.2} ({:.1}%)",
        fmt_eps(c),
        fmt_eps(u),
        csrl.summary.final_mean,
        ssbas.summary.final_mean,
        100.0 * csrl.summary.final_mean / ssbas.summary.final_mean
    );
    if faster && keeps {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const WARM_UP: usize = 500;

fn threshold_robustness() -> Outcome {
    let default = recsys("recsys_csrl.json", None);
    let low = recsys("recsys_csrl.json", Some(0.00125));
    let high = recsys("recsys_csrl.json", Some(0.25));
    let (fd, fh) = (default.summary.final_mean, high.summary.final_mean);
    let close = (fh - fd).abs() <= 0.05 * fd;
    let rd = &default.summary.optimal_rate;
    let rl = &low.summary.optimal_rate;
    let above: Vec<usize> = (WARM_UP..rd.len().min(rl.len())).filter(|&e| rl[e] > rd[e]).map(|e| e + 1).collect();
    let detail = format!(
        "final mean t_l=0.25 {fh:.2} vs 0.05 {fd:.2}; t_l=0.00125 rate above default at {} episodes after warm-up{}",
        above.len(),
        above.first().map_or(String::new(), |e| format!(" (first {e})"))
    );
    if close && above.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn elimination_safety() -> Outcome {
    let runs = [
        ("mock", mock_run()),
        ("csrl", recsys("recsys_csrl.json", None)),
        ("ssbas", recsys("recsys_ssbas.json", None)),
        ("unconstrained", recsys("recsys_unconstrained.json", None)),
        ("t_l=0.00125", recsys("recsys_csrl.json", Some(0.00125))),
        ("t_l=0.25", recsys("recsys_csrl.json", Some(0.25))),
    ];
    let rows: usize = runs.iter().map(|(_, r)| r.rows).sum();
    let problems: Vec<&String> = runs.iter().flat_map(|(_, r)| &r.problems).collect();
    if problems.is_empty() {
        Ok(format!("{rows} records across {} runs", runs.len()))
    } else {
        Err(format!("{} problems, first: {}", problems.len(), problems[0]))
    }
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("csrl-acceptance-{}", std::process::id()));
    let cfg = configs_dir().join("recsys_csrl.json");
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_csrl"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--seeds", "2", "--episodes", "300", "--out", out.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        let res = run(out)?;
        if !res.status.success() {
            return Err(String::from_utf8_lossy(&res.stderr).into_owned());
        }
    }
    let ra = std::fs::read(a.join("records.csv")).map_err(|e| e.to_string())?;
    let rb = std::fs::read(b.join("records.csv")).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    if ra == rb {
        Ok(format!("{} identical bytes", ra.len()))
    } else {
        Err("records differ".into())
    }
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 9] = [
        ("stationary selection favours a best-mean learner", theorem_one_desk_check),
        ("elimination rule examples and randomized cross-check", elimination_rule_suite),
        ("change values match independent oracles", change_value_oracles),
        ("UCRL recovers the optimal chain policy", ucrl_chain_correctness),
        ("recommendation set order by brute force", subset_order_brute_force),
        ("CSRL reaches 90% no later than unconstrained and keeps 97% of SSBAS", speedup_over_unconstrained),
        ("change-threshold sweep robustness", threshold_robustness),
        ("elimination safety over all runs", elimination_safety),
        ("identical config and seed give identical records", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
