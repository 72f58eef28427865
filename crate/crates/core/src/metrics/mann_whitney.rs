use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::MetricsError;

/// Largest sample size (per group) handled by exact enumeration.
pub const EXACT_MAX_SAMPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Pairs where `a` beats `b`, ties counting one half.
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    pub method: PValueMethod,
}

/// `U` of `a` against `b` by direct pair counting.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided Mann-Whitney U test. Uses the exact permutation distribution
/// when both samples have at most [`EXACT_MAX_SAMPLE`] values, otherwise the
/// tie-corrected normal approximation with continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let u_a = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let u_b = (n * m) as f64 - u_a;
    let centre = (n * m) as f64 / 2.0;

    let (p, method) = if n <= EXACT_MAX_SAMPLE && m <= EXACT_MAX_SAMPLE {
        (exact_p(&ranks, n, (u_a - centre).abs()), PValueMethod::Exact)
    } else {
        (normal_p(&pooled, n, u_a), PValueMethod::Normal)
    };
    Ok(MannWhitney { u_a, u_b, p_two_sided: p, method })
}

/// Two-sided p from the tie-corrected normal approximation with continuity
/// correction, whatever the sample sizes.
pub fn normal_approximation_p(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = a.len();
    let rank_sum_a: f64 = midranks(&pooled)[..n].iter().sum();
    Ok(normal_p(&pooled, n, rank_sum_a - (n * (n + 1)) as f64 / 2.0))
}

fn normal_p(pooled: &[f64], n: usize, u_a: f64) -> f64 {
    let m = pooled.len() - n;
    let centre = (n * m) as f64 / 2.0;
    let big_n = pooled.len() as f64;
    let ties = tie_term(pooled);
    let var = (n * m) as f64 / 12.0 * ((big_n + 1.0) - ties / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u_a - centre).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * (1.0 - Normal::standard().cdf(z))).min(1.0)
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        total += t * t * t - t;
        start = end;
    }
    total
}

/// Fraction of the `C(n+m, n)` relabelings whose `U` deviates from its mean
/// at least as far as the observed one. Ranks are multiples of one half, so
/// every comparison below is exact in `f64`.
fn exact_p(ranks: &[f64], n: usize, observed_dev: f64) -> f64 {
    let total_n = ranks.len();
    let m = total_n - n;
    let centre = (n * m) as f64 / 2.0;
    let offset = (n * (n + 1)) as f64 / 2.0;
    let mut extreme = 0u64;
    let mut count = 0u64;
    let mut chosen = Vec::with_capacity(n);
    choose(ranks, n, 0, &mut chosen, &mut |sum| {
        count += 1;
        if (sum - offset - centre).abs() >= observed_dev {
            extreme += 1;
        }
    });
    extreme as f64 / count as f64
}

fn choose(ranks: &[f64], k: usize, from: usize, chosen: &mut Vec<f64>, visit: &mut impl FnMut(f64)) {
    if chosen.len() == k {
        visit(chosen.iter().sum());
        return;
    }
    let need = k - chosen.len();
    for i in from..=ranks.len() - need {
        chosen.push(ranks[i]);
        choose(ranks, k, i + 1, chosen, visit);
        chosen.pop();
    }
}
