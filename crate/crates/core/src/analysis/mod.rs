//! Analysis of learned behaviour: k-means over actions, centroid differences
//! to the designers' defaults, quantile tables and a 2-D projection for
//! plotting.

mod kmeans;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::pb::Param;
use crate::pla::{denormalize, normalize_params, ACTION_DIM};

pub use kmeans::{adjusted_rand_index, kmeans, Clustering, MAX_LLOYD_ITERATIONS, RESTARTS};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("cannot form {k} clusters from {rows} rows")]
    InvalidK { k: usize, rows: usize },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("non-finite value in data")]
    NonFinite,
    #[error("labelings have lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sample is empty")]
    EmptySample,
    #[error("centroid has {got} dimensions, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One logged action with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRow {
    pub t: f64,
    pub day: u32,
    pub action: Vec<f64>,
}

/// Designer defaults in normalised action coordinates, clipped into the
/// action box.
pub fn pb_default_action() -> [f64; ACTION_DIM] {
    normalize_params(&crate::pb::default_params()).map(|v| v.clamp(-1.0, 1.0))
}

/// `centroid − default` for every cluster and learned parameter.
pub fn centroid_vs_pb(clustering: &Clustering) -> Result<Vec<[f64; ACTION_DIM]>, AnalysisError> {
    let pb = pb_default_action();
    clustering
        .centroids
        .iter()
        .map(|c| {
            if c.len() != ACTION_DIM {
                return Err(AnalysisError::Dimension { got: c.len(), expected: ACTION_DIM });
            }
            Ok(std::array::from_fn(|i| c[i] - pb[i]))
        })
        .collect()
}

/// Quantile with linear interpolation between order statistics:
/// position `(n − 1)·q/100` in the sorted sample.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub q: u32,
    pub a: f64,
    pub b: f64,
}

/// Paired percentiles `q = 0..=100` of two samples.
pub fn qq_table(a: &[f64], b: &[f64]) -> Result<Vec<QqPoint>, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok((0..=100).map(|q| QqPoint { q, a: percentile(&sa, q as f64), b: percentile(&sb, q as f64) }).collect())
}

/// Projection onto the two leading principal axes.
pub fn principal_axes_2d(rows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let dim = first.len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for r in rows {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for _ in 0..2.min(dim) {
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + i as f64 * 1e-3).collect();
        for _ in 0..500 {
            let mut w: Vec<f64> = (0..dim).map(|i| (0..dim).map(|j| cov[i][j] * v[j]).sum()).collect();
            for a in &axes {
                let dot: f64 = w.iter().zip(a).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(a).for_each(|(x, y)| *x -= dot * y);
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                break;
            }
            v = w.into_iter().map(|x| x / norm).collect();
        }
        let pivot = v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        axes.push(v);
    }
    rows.iter()
        .map(|r| {
            let mut out = [0.0; 2];
            for (k, a) in axes.iter().enumerate() {
                out[k] = r.iter().zip(&mean).zip(a).map(|((x, m), w)| (x - m) * w).sum();
            }
            out
        })
        .collect()
}

fn header(out: &mut impl Write) -> std::io::Result<()> {
    let names: Vec<&str> = Param::LEARNED.iter().map(|p| p.name()).collect();
    write!(out, "{}", names.join(","))
}

pub fn write_assignments_csv<W: Write>(
    mut out: W,
    rows: &[ActionRow],
    clustering: &Clustering,
    projection: &[[f64; 2]],
) -> Result<(), AnalysisError> {
    writeln!(out, "row,t,day,cluster,pc1,pc2")?;
    for (i, ((r, c), p)) in rows.iter().zip(&clustering.assignments).zip(projection).enumerate() {
        writeln!(out, "{i},{},{},{c},{},{}", r.t, r.day, p[0], p[1])?;
    }
    Ok(())
}

/// Centroids in normalised coordinates and in physical units.
pub fn write_centroids_csv<W: Write>(mut out: W, clustering: &Clustering) -> Result<(), AnalysisError> {
    write!(out, "cluster,units,")?;
    header(&mut out)?;
    writeln!(out)?;
    for (k, c) in clustering.centroids.iter().enumerate() {
        let norm: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{k},normalized,{}", norm.join(","))?;
        let phys: Vec<String> =
            Param::LEARNED.iter().zip(c).map(|(p, &v)| denormalize(v, p.range()).to_string()).collect();
        writeln!(out, "{k},physical,{}", phys.join(","))?;
    }
    Ok(())
}

pub fn write_diff_csv<W: Write>(mut out: W, diffs: &[[f64; ACTION_DIM]]) -> Result<(), AnalysisError> {
    write!(out, "cluster,")?;
    header(&mut out)?;
    writeln!(out)?;
    for (k, d) in diffs.iter().enumerate() {
        let cells: Vec<String> = d.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{k},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_qq_csv<W: Write>(mut out: W, label_a: &str, label_b: &str, table: &[QqPoint]) -> Result<(), AnalysisError> {
    writeln!(out, "q,{label_a},{label_b}")?;
    for p in table {
        writeln!(out, "{},{},{}", p.q, p.a, p.b)?;
    }
    Ok(())
}
