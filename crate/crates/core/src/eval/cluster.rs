use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Result, SugarError};
use crate::generation::substream;
use crate::kernel::sq_dist;

const MAX_LLOYD_ITERS: usize = 300;

/// A fitted k-means partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub wcss: f64,
    /// WCSS after each Lloyd iteration of the winning restart.
    pub wcss_trace: Vec<f64>,
}

fn nearest_centroid(p: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.outer_iter().enumerate() {
        let d = sq_dist(p, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seed<R: Rng>(x: &DataMatrix, k: usize, rng: &mut R) -> Array2<f64> {
    let v = x.values();
    let n = x.rows();
    let mut centroids = Array2::zeros((k, x.cols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&v.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(v.row(i), v.row(first))).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point coincides with a centroid already
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).assign(&v.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(v.row(i), v.row(pick)));
        }
    }
    centroids
}

fn lloyd(x: &DataMatrix, mut centroids: Array2<f64>) -> KMeansFit {
    let v = x.values();
    let (n, d) = (x.rows(), x.cols());
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        let mut wcss = 0.0;
        for i in 0..n {
            let (c, dist) = nearest_centroid(v.row(i), &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            wcss += dist;
        }
        trace.push(wcss);
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            sums.row_mut(labels[i]).scaled_add(1.0, &v.row(i));
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // Re-seed an empty cluster at the point worst served by its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(v.row(a), centroids.row(labels[a]))
                            .total_cmp(&sq_dist(v.row(b), centroids.row(labels[b])))
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centroids.row_mut(c).assign(&v.row(far));
            }
        }
    }
    let wcss = (0..n).map(|i| sq_dist(v.row(i), centroids.row(labels[i]))).sum();
    KMeansFit {
        labels,
        centroids,
        wcss,
        wcss_trace: trace,
    }
}

/// Lloyd's algorithm from k-means++ seeds; the best of `restarts` runs by WCSS.
pub fn kmeans_fit(x: &DataMatrix, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    if k == 0 || k > x.rows() {
        return Err(SugarError::param("k", format!("need 1 <= k <= N = {}, got {k}", x.rows())));
    }
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) {
        let mut rng = substream(seed, r);
        let fit = lloyd(x, plus_plus_seed(x, k, &mut rng));
        if best.as_ref().is_none_or(|b| fit.wcss < b.wcss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Cluster labels from [`kmeans_fit`].
pub fn kmeans(x: &DataMatrix, k: usize, seed: u64, restarts: usize) -> Result<Vec<usize>> {
    Ok(kmeans_fit(x, k, seed, restarts)?.labels)
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Fraction of point pairs on which two partitions agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SugarError::DimensionMismatch(format!(
            "label vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as u64;
    if n < 2 {
        return Err(SugarError::param("labels", "need at least two points"));
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ca: HashMap<usize, u64> = HashMap::new();
    let mut cb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let same_both: f64 = joint.values().map(|&c| choose2(c)).sum();
    let same_a: f64 = ca.values().map(|&c| choose2(c)).sum();
    let same_b: f64 = cb.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    // agreements = pairs together in both + pairs apart in both
    let apart_both = total - same_a - same_b + same_both;
    Ok((same_both + apart_both) / total)
}
