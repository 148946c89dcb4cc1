//! Local Gaussian models around each point, the number of points to draw
//! from each, and the draws themselves.
//!
//! The level for point i is the midpoint of
//!
//! ```text
//! lower(i) = √det(I + Σ_i/(2σ²)) · (max d̂ − d̂(i)) / (d̂(i) + 1) − 1
//! upper(i) = √det(I + Σ_i/(2σ²)) · (max d̂ − d̂(i))
//! ```
//!
//! rounded half-up and clamped at zero, so the densest point gets no new
//! neighbors and sparse points get the most.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Result, SugarError};
use crate::kernel::{sq_dist, DegreeProfile};
use crate::spectral::{check_psd, sym_eigendecomp};

/// Diagonal loading added to each local covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Jitter {
    /// The same ε on every point.
    Absolute(f64),
    /// ε_i = factor · trace(Σ_i) / D.
    RelativeTrace(f64),
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter::RelativeTrace(1e-12)
    }
}

/// One covariance per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCovarianceSet {
    pub covariances: Vec<Array2<f64>>,
    pub k: usize,
    pub jitter: Jitter,
    /// The ε actually added to each Σ_i.
    pub applied_jitter: Vec<f64>,
}

impl LocalCovarianceSet {
    pub fn len(&self) -> usize {
        self.covariances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariances.is_empty()
    }
}

/// Indices of the `k` nearest rows to row `i` (squared L², self excluded,
/// ties broken by index).
pub(crate) fn nearest_neighbors(x: &DataMatrix, i: usize, k: usize) -> Vec<usize> {
    let v = x.values();
    let xi = v.row(i);
    let mut cand: Vec<(f64, usize)> = (0..x.rows())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(xi, v.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// `Σ_i = (1/k) Σ_{j ∈ kNN(i)} (x_j − x_i)(x_j − x_i)ᵀ + ε_i I`.
///
/// Centered on x_i itself rather than on the neighbor mean, matching the
/// Gaussian `N(x_i, Σ_i)` the draws come from.
pub fn local_covariances(x: &DataMatrix, k: usize, jitter: Jitter) -> Result<LocalCovarianceSet> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(SugarError::param("k", format!("need 1 <= k < N = {n}, got {k}")));
    }
    let eps = match jitter {
        Jitter::Absolute(e) | Jitter::RelativeTrace(e) => e,
    };
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(SugarError::param("jitter", format!("must be finite and >= 0, got {eps}")));
    }
    let d = x.cols();
    let v = x.values();
    let pairs: Vec<(Array2<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = v.row(i);
            let mut cov = Array2::zeros((d, d));
            for j in nearest_neighbors(x, i, k) {
                let diff = &v.row(j) - &xi;
                for a in 0..d {
                    for b in 0..d {
                        cov[[a, b]] += diff[a] * diff[b];
                    }
                }
            }
            cov /= k as f64;
            let applied = match jitter {
                Jitter::Absolute(e) => e,
                Jitter::RelativeTrace(f) => f * cov.diag().sum() / d as f64,
            };
            for a in 0..d {
                cov[[a, a]] += applied;
            }
            (cov, applied)
        })
        .collect();
    let (covariances, applied_jitter) = pairs.into_iter().unzip();
    Ok(LocalCovarianceSet {
        covariances,
        k,
        jitter,
        applied_jitter,
    })
}

/// How many points to draw around each input point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub levels: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// M = Σ levels.
    pub total: usize,
    /// The target degree, max d̂.
    pub target_degree: f64,
}

impl GenerationPlan {
    /// A plan that draws `levels[i]` points around point i, without bounds.
    pub fn from_levels(levels: Vec<usize>) -> Self {
        let total = levels.iter().sum();
        let n = levels.len();
        GenerationPlan {
            levels,
            lower: vec![0.0; n],
            upper: vec![0.0; n],
            total,
            target_degree: 0.0,
        }
    }
}

/// `√det(I + Σ/(2σ²))` from the eigenvalues of a PSD Σ.
pub fn det_factor(cov: &Array2<f64>, sigma2: f64) -> Result<f64> {
    let eig = sym_eigendecomp(cov)?;
    check_psd(&eig)?;
    let det: f64 = eig
        .eigenvalues
        .iter()
        .map(|l| 1.0 + l.max(0.0) / (2.0 * sigma2))
        .product();
    Ok(det.sqrt())
}

/// Midpoint-of-bounds generation levels for every point.
pub fn generation_bounds(d: &DegreeProfile, cov: &LocalCovarianceSet, sigma2: f64) -> Result<GenerationPlan> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(SugarError::param("sigma2", format!("must be > 0, got {sigma2}")));
    }
    if d.len() != cov.len() {
        return Err(SugarError::DimensionMismatch(format!(
            "{} degrees but {} covariances",
            d.len(),
            cov.len()
        )));
    }
    let max_d = d.max_degree();
    let factors: Vec<f64> = cov
        .covariances
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            det_factor(c, sigma2).map_err(|e| match e {
                SugarError::NotPsd { eigenvalue, .. } => SugarError::NotPsd { index: i, eigenvalue },
                other => other,
            })
        })
        .collect::<Result<_>>()?;

    let mut lower = Vec::with_capacity(d.len());
    let mut upper = Vec::with_capacity(d.len());
    let mut levels = Vec::with_capacity(d.len());
    for (&di, &f) in d.degrees.iter().zip(&factors) {
        let gap = max_d - di;
        let lo = f * gap / (di + 1.0) - 1.0;
        let hi = f * gap;
        let mid = 0.5 * (lo + hi);
        lower.push(lo);
        upper.push(hi);
        levels.push((mid + 0.5).floor().max(0.0) as usize);
    }
    let total = levels.iter().sum();
    Ok(GenerationPlan {
        levels,
        lower,
        upper,
        total,
        target_degree: max_d,
    })
}

/// The raw generated points and the index of the point each was drawn around.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedBatch {
    pub points: DataMatrix,
    pub origin: Vec<usize>,
}

impl GeneratedBatch {
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }
}

/// RNG for point `i`: stream `i` of the ChaCha generator keyed by `seed`.
pub(crate) fn substream(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Draws `levels[i]` points from `N(x_i, Σ_i)` for every i.
pub fn sample_batch(x: &DataMatrix, cov: &LocalCovarianceSet, plan: &GenerationPlan, seed: u64) -> Result<GeneratedBatch> {
    let n = x.rows();
    if cov.len() != n || plan.levels.len() != n {
        return Err(SugarError::DimensionMismatch(format!(
            "{n} points, {} covariances, {} levels",
            cov.len(),
            plan.levels.len()
        )));
    }
    let d = x.cols();
    let v = x.values();
    let blocks: Vec<Array2<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let count = plan.levels[i];
            if count == 0 {
                return Ok(Array2::zeros((0, d)));
            }
            let root = crate::spectral::psd_sqrt(&cov.covariances[i]).map_err(|e| match e {
                SugarError::NotPsd { eigenvalue, .. } => SugarError::NotPsd { index: i, eigenvalue },
                other => other,
            })?;
            let mut rng = substream(seed, i);
            let mut out = Array2::zeros((count, d));
            let mut z = Array1::zeros(d);
            for mut row in out.rows_mut() {
                z.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
                let step = root.dot(&z);
                row.assign(&(&v.row(i) + &step));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let total: usize = plan.levels.iter().sum();
    let mut points = Array2::zeros((total, d));
    let mut origin = Vec::with_capacity(total);
    let mut at = 0;
    for (i, block) in blocks.iter().enumerate() {
        for row in block.rows() {
            points.row_mut(at).assign(&row);
            origin.push(i);
            at += 1;
        }
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(SugarError::InvalidData("generated a non-finite point".into()));
    }
    Ok(GeneratedBatch {
        points: DataMatrix::from_values_unchecked(points, x.col_names().map(<[String]>::to_vec)),
        origin,
    })
}
