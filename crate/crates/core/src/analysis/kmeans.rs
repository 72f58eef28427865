use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster of every input row.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
    /// Restart that produced this clustering.
    pub restart: usize,
}

/// Distinct rows with their multiplicities, in lexicographic order, plus the
/// index of each input row's distinct row.
struct Weighted {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    index_of_row: Vec<usize>,
}

fn dedup(rows: &[Vec<f64>]) -> Weighted {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let lex = |a: &Vec<f64>, b: &Vec<f64>| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    };
    order.sort_by(|&i, &j| lex(&rows[i], &rows[j]));
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut weights = Vec::new();
    let mut index_of_row = vec![0; rows.len()];
    for i in order {
        if points.last().is_none_or(|p| lex(p, &rows[i]).is_ne()) {
            points.push(rows[i].clone());
            weights.push(0.0);
        }
        *weights.last_mut().expect("pushed") += 1.0;
        index_of_row[i] = points.len() - 1;
    }
    Weighted { points, weights, index_of_row }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, lowest index on ties.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.iter().enumerate() {
        let d = sq_dist(p, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(data: &Weighted, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let pick = |scores: &[f64], rng: &mut ChaCha8Rng| {
        let total: f64 = scores.iter().sum();
        let mut u = rng.random_range(0.0..total);
        for (i, s) in scores.iter().enumerate() {
            if u < *s {
                return i;
            }
            u -= s;
        }
        scores.iter().rposition(|&s| s > 0.0).expect("positive total")
    };
    let mut centroids = vec![data.points[pick(&data.weights, rng)].clone()];
    let mut d2: Vec<f64> = data.points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let scores: Vec<f64> = d2.iter().zip(&data.weights).map(|(d, w)| d * w).collect();
        let next = if scores.iter().sum::<f64>() > 0.0 {
            pick(&scores, rng)
        } else {
            pick(&data.weights, rng)
        };
        let c = data.points[next].clone();
        for (d, p) in d2.iter_mut().zip(&data.points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct Run {
    centroids: Vec<Vec<f64>>,
    labels: Vec<usize>,
    inertia: f64,
    history: Vec<f64>,
}

fn lloyd(data: &Weighted, mut centroids: Vec<Vec<f64>>) -> Run {
    let dim = data.points[0].len();
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut inertia = 0.0;
        let new_labels: Vec<usize> = data
            .points
            .iter()
            .zip(&data.weights)
            .map(|(p, w)| {
                let (c, d) = nearest(p, &centroids);
                inertia += w * d;
                c
            })
            .collect();
        history.push(inertia);
        if new_labels == labels {
            break;
        }
        labels = new_labels;
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut mass = vec![0.0; centroids.len()];
        for ((p, w), &c) in data.points.iter().zip(&data.weights).zip(&labels) {
            mass[c] += w;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        for ((centre, sum), m) in centroids.iter_mut().zip(sums).zip(mass) {
            if m > 0.0 {
                *centre = sum.into_iter().map(|s| s / m).collect();
            }
        }
    }
    let inertia = *history.last().expect("at least one iteration");
    Run { centroids, labels, inertia, history }
}

/// K-means with k-means++ seeding and Lloyd iterations; the best of
/// [`RESTARTS`] seeded restarts by inertia. Repeated rows are clustered as
/// one weighted point, so duplicating a dataset leaves the result unchanged.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::InvalidK { k, rows: rows.len() });
    }
    if k > rows.len() {
        return Err(AnalysisError::InvalidK { k, rows: rows.len() });
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(AnalysisError::RaggedRows);
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let data = dedup(rows);
    let runs: Vec<Run> = (0..RESTARTS)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(&data, plus_plus_init(&data, k, &mut rng))
        })
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.inertia.total_cmp(&b.1.inertia).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    Ok(Clustering {
        k,
        assignments: data.index_of_row.iter().map(|&u| best.labels[u]).collect(),
        centroids: best.centroids,
        inertia: best.inertia,
        inertia_history: best.history,
        restart,
    })
}

/// Adjusted Rand index between two labelings of the same rows.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
