//! Curve statistics over per-seed series. Episode numbers are 1-based.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Trailing means over full windows: element `i` averages `xs[i..i + w]`
/// and belongs to episode `i + w`.
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || xs.len() < w {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(xs.len() - w + 1);
    let mut sum: f64 = xs[..w].iter().sum();
    out.push(sum / w as f64);
    for i in w..xs.len() {
        sum += xs[i] - xs[i - w];
        out.push(sum / w as f64);
    }
    out
}

/// First episode whose `w`-episode trailing mean reaches `f` times the maximum
/// of the smoothed curve (or `reference_max` when given). `None` if never.
pub fn sample_complexity(curve: &[f64], f: f64, w: usize, reference_max: Option<f64>) -> Option<usize> {
    let smooth = moving_average(curve, w);
    let max = reference_max.or_else(|| smooth.iter().copied().reduce(f64::max))?;
    smooth.iter().position(|&x| x >= f * max).map(|i| i + w)
}

/// Per-episode mean across seeds and the 95% half-width 1.96·SD/√n
/// (`None` with fewer than two seeds). Curves are truncated to the shortest.
pub fn mean_ci<C: AsRef<[f64]>>(curves: &[C]) -> (Vec<f64>, Option<Vec<f64>>) {
    let curves: Vec<&[f64]> = curves.iter().map(AsRef::as_ref).collect();
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    let n = curves.len() as f64;
    let mean: Vec<f64> = (0..len).map(|e| curves.iter().map(|c| c[e]).sum::<f64>() / n).collect();
    if curves.len() < 2 {
        return (mean, None);
    }
    let ci = (0..len)
        .map(|e| {
            let var = curves.iter().map(|c| (c[e] - mean[e]).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * var.sqrt() / n.sqrt()
        })
        .collect();
    (mean, Some(ci))
}

/// Fraction of seeds choosing an optimal learner at each episode, averaged
/// over the trailing `w` episodes (fewer at the start).
pub fn optimal_rate(hits: &[Vec<bool>], w: usize) -> Vec<f64> {
    let len = hits.iter().map(Vec::len).min().unwrap_or(0);
    if hits.is_empty() || w == 0 {
        return Vec::new();
    }
    let per_episode: Vec<f64> =
        (0..len).map(|e| hits.iter().filter(|h| h[e]).count() as f64 / hits.len() as f64).collect();
    let mut out = Vec::with_capacity(len);
    let mut sum = 0.0;
    for e in 0..len {
        sum += per_episode[e];
        if e >= w {
            sum -= per_episode[e - w];
        }
        out.push(sum / (e + 1).min(w) as f64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupEstimate {
    /// Baseline episodes over candidate episodes.
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
    /// Resamples in which both conditions reached the fraction.
    pub resamples_used: usize,
}

/// Ratio of sample complexities (baseline / candidate) with a percentile
/// bootstrap over seeds. `None` when either full-sample curve never reaches `f`.
pub fn bootstrap_speedup(
    candidate: &[Vec<f64>],
    baseline: &[Vec<f64>],
    f: f64,
    w: usize,
    resamples: usize,
    seed: u64,
) -> Option<SpeedupEstimate> {
    let ratio_of = |a: &[&Vec<f64>], b: &[&Vec<f64>]| -> Option<f64> {
        let sa = sample_complexity(&mean_ci(a).0, f, w, None)?;
        let sb = sample_complexity(&mean_ci(b).0, f, w, None)?;
        Some(sb as f64 / sa as f64)
    };
    let all_a: Vec<&Vec<f64>> = candidate.iter().collect();
    let all_b: Vec<&Vec<f64>> = baseline.iter().collect();
    let ratio = ratio_of(&all_a, &all_b)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let a: Vec<&Vec<f64>> = (0..candidate.len()).map(|_| &candidate[rng.random_range(0..candidate.len())]).collect();
        let b: Vec<&Vec<f64>> = (0..baseline.len()).map(|_| &baseline[rng.random_range(0..baseline.len())]).collect();
        if let Some(r) = ratio_of(&a, &b) {
            draws.push(r);
        }
    }
    draws.sort_by(f64::total_cmp);
    let pick = |q: f64| {
        if draws.is_empty() {
            f64::NAN
        } else {
            draws[((draws.len() - 1) as f64 * q).round() as usize]
        }
    };
    Some(SpeedupEstimate { ratio, lo: pick(0.025), hi: pick(0.975), resamples_used: draws.len() })
}
