//! Measure-based Gaussian correlation over generated points, the diffusion
//! that pulls them onto the manifold, and the final range rescaling.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Result, SugarError};
use crate::generation::GeneratedBatch;
use crate::kernel::{
    adaptive_bandwidths, kernel_with_bandwidth, normalize_rows, resolve_bandwidth, BandwidthSpec,
    DiffusionOperator, ResolvedBandwidth,
};

/// `K̂(y_i, y_j) = Σ_r K(y_i, x_r) K(x_r, y_j) μ(r)` over reference points X.
#[derive(Debug, Clone, PartialEq)]
pub struct MgcKernel {
    affinities: Array2<f64>,
    references: DataMatrix,
    measure: Vec<f64>,
    bandwidth: ResolvedBandwidth,
}

impl MgcKernel {
    /// The M×M kernel K̂, formed on demand. [`diffuse`] never builds it.
    pub fn values(&self) -> Array2<f64> {
        self.weighted().dot(&self.affinities.t())
    }

    /// A·diag(μ).
    fn weighted(&self) -> Array2<f64> {
        let mut w = self.affinities.clone();
        for mut row in w.rows_mut() {
            for (v, m) in row.iter_mut().zip(&self.measure) {
                *v *= m;
            }
        }
        w
    }

    /// `K̂·y = A·(μ ∘ (Aᵀ·y))` without forming K̂.
    fn apply_unnormalized(&self, y: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut through = self.affinities.t().dot(&y);
        for (mut row, m) in through.rows_mut().into_iter().zip(&self.measure) {
            row.mapv_inplace(|v| v * m);
        }
        self.affinities.dot(&through)
    }

    /// Row sums of K̂.
    fn row_sums(&self) -> Result<Vec<f64>> {
        let ones = Array2::ones((self.len(), 1));
        let sums: Vec<f64> = self.apply_unnormalized(ones.view()).into_iter().collect();
        if let Some(index) = sums.iter().position(|&d| !(d > 0.0)) {
            return Err(SugarError::ZeroRowSum { index });
        }
        Ok(sums)
    }

    /// The M×N generated-to-reference affinities A.
    pub fn affinities(&self) -> ArrayView2<'_, f64> {
        self.affinities.view()
    }

    pub fn references(&self) -> &DataMatrix {
        &self.references
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn bandwidth(&self) -> &ResolvedBandwidth {
        &self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.affinities.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.affinities.nrows() == 0
    }

    /// Row-normalized K̂ as a dense M×M operator.
    pub fn operator(&self) -> Result<DiffusionOperator> {
        Ok(DiffusionOperator::from_stochastic(normalize_rows(self.values().view())?))
    }
}

fn check_measure(measure: &[f64], n: usize) -> Result<()> {
    if measure.len() != n {
        return Err(SugarError::DimensionMismatch(format!(
            "measure has {} entries for {n} reference points",
            measure.len()
        )));
    }
    if let Some((r, m)) = measure.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
        return Err(SugarError::param("measure", format!("entry {r} is {m}, must be > 0")));
    }
    Ok(())
}

fn assemble(y: &DataMatrix, x: &DataMatrix, measure: &[f64], resolved: ResolvedBandwidth) -> Result<MgcKernel> {
    check_measure(measure, x.rows())?;
    let a = kernel_with_bandwidth(y, x, resolved.clone(), false)?.into_values();
    Ok(MgcKernel {
        affinities: a,
        references: x.clone(),
        measure: measure.to_vec(),
        bandwidth: resolved,
    })
}

/// MGC kernel between arbitrary points `y` and references `x`.
///
/// Adaptive scales for `y` are distances to their r-th nearest reference.
pub fn mgc_kernel(y: &DataMatrix, x: &DataMatrix, measure: &[f64], bw: &BandwidthSpec) -> Result<MgcKernel> {
    if y.is_empty() {
        return empty_kernel(y, x, measure, bw);
    }
    let resolved = resolve_bandwidth(y, x, bw)?;
    assemble(y, x, measure, resolved)
}

/// MGC kernel for a generated batch; in adaptive mode every generated point
/// uses the scale of the point it was drawn around.
pub fn mgc_kernel_for_batch(batch: &GeneratedBatch, x: &DataMatrix, measure: &[f64], bw: &BandwidthSpec) -> Result<MgcKernel> {
    if batch.is_empty() {
        return empty_kernel(&batch.points, x, measure, bw);
    }
    if let Some(&bad) = batch.origin.iter().find(|&&o| o >= x.rows()) {
        return Err(SugarError::DimensionMismatch(format!(
            "origin index {bad} out of range for {} reference points",
            x.rows()
        )));
    }
    let resolved = match *bw {
        BandwidthSpec::Adaptive { r } => {
            bw.validate()?;
            let col_scales = adaptive_bandwidths(x, r)?;
            let row_scales = batch.origin.iter().map(|&o| col_scales[o]).collect();
            ResolvedBandwidth::Adaptive {
                r,
                row_scales,
                col_scales,
            }
        }
        _ => resolve_bandwidth(&batch.points, x, bw)?,
    };
    assemble(&batch.points, x, measure, resolved)
}

fn empty_kernel(y: &DataMatrix, x: &DataMatrix, measure: &[f64], bw: &BandwidthSpec) -> Result<MgcKernel> {
    if y.cols() != x.cols() {
        return Err(SugarError::DimensionMismatch(format!(
            "point sets have {} and {} columns",
            y.cols(),
            x.cols()
        )));
    }
    check_measure(measure, x.rows())?;
    bw.validate()?;
    Ok(MgcKernel {
        affinities: Array2::zeros((0, x.rows())),
        references: x.clone(),
        measure: measure.to_vec(),
        bandwidth: ResolvedBandwidth::Global { spec: *bw, sigma2: f64::NAN },
    })
}

/// `Y_t = P̂^t Y₀` with `P̂` the row-normalized MGC kernel.
pub fn diffuse(khat: &MgcKernel, y0: &GeneratedBatch, t: u32) -> Result<DataMatrix> {
    if khat.len() != y0.len() {
        return Err(SugarError::DimensionMismatch(format!(
            "kernel over {} points applied to {} points",
            khat.len(),
            y0.len()
        )));
    }
    if t == 0 || y0.is_empty() {
        return Ok(y0.points.clone());
    }
    let sums = khat.row_sums()?;
    let mut out = y0.points.values().to_owned();
    for _ in 0..t {
        out = khat.apply_unnormalized(out.view());
        for (mut row, s) in out.rows_mut().into_iter().zip(&sums) {
            row.mapv_inplace(|v| v / s);
        }
    }
    Ok(DataMatrix::from_values_unchecked(out, y0.points.col_names().map(<[String]>::to_vec)))
}

/// Linear-interpolation percentile, `p` in [0, 1].
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Output of [`rescale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub data: DataMatrix,
    /// Multiplier applied to each column (1 for skipped columns).
    pub factors: Vec<f64>,
    /// Columns left unscaled because their maximum was zero.
    pub skipped: Vec<usize>,
}

/// `Y[·,j] = Y_t[·,j] · percentile(X[·,j], .99) / max Y_t[·,j]`.
pub fn rescale(yt: &DataMatrix, x: &DataMatrix) -> Result<Rescaled> {
    if yt.cols() != x.cols() {
        return Err(SugarError::DimensionMismatch(format!(
            "generated points have {} columns, data has {}",
            yt.cols(),
            x.cols()
        )));
    }
    let d = yt.cols();
    if yt.is_empty() {
        return Ok(Rescaled {
            data: yt.clone(),
            factors: vec![1.0; d],
            skipped: Vec::new(),
        });
    }
    let mut out = yt.values().to_owned();
    let mut factors = Vec::with_capacity(d);
    let mut skipped = Vec::new();
    for j in 0..d {
        let target = percentile(&x.values().column(j).to_vec(), 0.99);
        let max = yt.values().column(j).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == 0.0 {
            log::warn!("rescale: column {j} has maximum 0; left unscaled");
            skipped.push(j);
            factors.push(1.0);
            continue;
        }
        let f = target / max;
        out.column_mut(j).mapv_inplace(|v| v * f);
        factors.push(f);
    }
    Ok(Rescaled {
        data: DataMatrix::from_values_unchecked(out, yt.col_names().map(<[String]>::to_vec)),
        factors,
        skipped,
    })
}
