//! Gaussian affinities, bandwidth selection, degrees and row-stochastic
//! normalization.
//!
//! Kernels are dense. Rows are assembled in parallel, but every entry and
//! every row reduction is computed in a fixed order, so results do not depend
//! on the worker count.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Result, SugarError};

/// How the kernel scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BandwidthSpec {
    /// Global σ².
    Fixed { sigma2: f64 },
    /// σ² = C · max over points of the squared nearest-neighbor distance.
    MaxMin { c: f64 },
    /// Per-point σ_i = L¹ distance to the r-th nearest neighbor.
    Adaptive { r: usize },
}

impl BandwidthSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthSpec::Fixed { sigma2 } if !(sigma2.is_finite() && sigma2 > 0.0) => Err(
                SugarError::param("bandwidth", format!("fixed sigma^2 must be > 0, got {sigma2}")),
            ),
            BandwidthSpec::MaxMin { c } if !(2.0..=3.0).contains(&c) => Err(SugarError::param(
                "bandwidth",
                format!("max-min constant must lie in [2, 3], got {c}"),
            )),
            BandwidthSpec::Adaptive { r: 0 } => {
                Err(SugarError::param("bandwidth", "adaptive neighbor rank must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BandwidthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthSpec::Fixed { sigma2 } => write!(f, "fixed:{sigma2}"),
            BandwidthSpec::MaxMin { c } => write!(f, "maxmin:{c}"),
            BandwidthSpec::Adaptive { r } => write!(f, "adaptive:{r}"),
        }
    }
}

impl FromStr for BandwidthSpec {
    type Err = SugarError;

    /// Parses `fixed:<sigma2>`, `maxmin:<C>` or `adaptive:<r>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            SugarError::param(
                "bandwidth",
                format!("`{s}` is not one of fixed:<sigma2>, maxmin:<C>, adaptive:<r>"),
            )
        };
        let (mode, arg) = s.split_once(':').ok_or_else(bad)?;
        let spec = match mode.trim() {
            "fixed" => BandwidthSpec::Fixed {
                sigma2: arg.trim().parse().map_err(|_| bad())?,
            },
            "maxmin" => BandwidthSpec::MaxMin {
                c: arg.trim().parse().map_err(|_| bad())?,
            },
            "adaptive" => BandwidthSpec::Adaptive {
                r: arg.trim().parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for BandwidthSpec {
    type Error = SugarError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BandwidthSpec> for String {
    fn from(b: BandwidthSpec) -> String {
        b.to_string()
    }
}

/// A bandwidth with its scales computed for a concrete pair of point sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResolvedBandwidth {
    Global {
        spec: BandwidthSpec,
        sigma2: f64,
    },
    Adaptive {
        r: usize,
        row_scales: Vec<f64>,
        col_scales: Vec<f64>,
    },
}

impl ResolvedBandwidth {
    /// The global σ², if this is not a per-point bandwidth.
    pub fn sigma2(&self) -> Option<f64> {
        match self {
            ResolvedBandwidth::Global { sigma2, .. } => Some(*sigma2),
            ResolvedBandwidth::Adaptive { .. } => None,
        }
    }
}

/// Dense affinity matrix between a row set and a column set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: Array2<f64>,
    bandwidth: ResolvedBandwidth,
    square: bool,
}

impl KernelMatrix {
    /// Wraps a precomputed square affinity matrix.
    pub fn from_square(values: Array2<f64>, bandwidth: ResolvedBandwidth) -> Result<Self> {
        let (n, m) = values.dim();
        if n != m {
            return Err(SugarError::DimensionMismatch(format!("{n}x{m} kernel is not square")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SugarError::InvalidData(format!("kernel entry {v} is not a finite nonnegative value")));
        }
        Ok(KernelMatrix {
            values,
            bandwidth,
            square: true,
        })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn bandwidth(&self) -> &ResolvedBandwidth {
        &self.bandwidth
    }

    pub fn is_square(&self) -> bool {
        self.square
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    fn require_square(&self) -> Result<()> {
        if self.square {
            Ok(())
        } else {
            let (n, m) = self.values.dim();
            Err(SugarError::DimensionMismatch(format!("{n}x{m} kernel is not square")))
        }
    }
}

/// Degrees, sparsities and the measure derived from a square kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub degrees: Vec<f64>,
    pub sparsities: Vec<f64>,
    pub measure: Vec<f64>,
}

impl DegreeProfile {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Row-stochastic matrix P together with the diffusion time it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    values: Array2<f64>,
    time: u32,
}

impl DiffusionOperator {
    pub(crate) fn from_stochastic(values: Array2<f64>) -> Self {
        DiffusionOperator { values, time: 0 }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn time(&self) -> u32 {
        self.time
    }

    /// `P^t` by repeated multiplication; `t = 0` gives the identity.
    pub fn power(&self, t: u32) -> DiffusionOperator {
        let n = self.values.nrows();
        let mut acc = Array2::eye(n);
        for _ in 0..t {
            acc = acc.dot(&self.values);
        }
        DiffusionOperator {
            values: acc,
            time: t,
        }
    }

    /// Applies `P` `t` times to the rows of `y`.
    pub fn apply(&self, y: ArrayView2<'_, f64>, t: u32) -> Array2<f64> {
        let mut out = y.to_owned();
        for _ in 0..t {
            out = self.values.dot(&out);
        }
        out
    }
}

fn check_same_dims(a: &DataMatrix, b: &DataMatrix) -> Result<()> {
    if a.cols() != b.cols() {
        return Err(SugarError::DimensionMismatch(format!(
            "point sets have {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn l1_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}

/// Squared Euclidean distance between every row of `a` and every row of `b`.
pub fn pairwise_sq_dist(a: &DataMatrix, b: &DataMatrix) -> Result<Array2<f64>> {
    check_same_dims(a, b)?;
    let (av, bv) = (a.values(), b.values());
    let mut out = Array2::zeros((a.rows(), b.rows()));
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(av.axis_iter(Axis(0)))
        .par_for_each(|mut row, ai| {
            for (o, bj) in row.iter_mut().zip(bv.axis_iter(Axis(0))) {
                *o = sq_dist(ai, bj);
            }
        });
    Ok(out)
}

/// `C · max_j min_{i≠j} ‖x_i − x_j‖²`.
pub fn maxmin_bandwidth(x: &DataMatrix, c: f64) -> Result<f64> {
    BandwidthSpec::MaxMin { c }.validate()?;
    let n = x.rows();
    if n < 2 {
        return Err(SugarError::param("x", "max-min bandwidth needs at least 2 points"));
    }
    let v = x.values();
    let nn: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .filter(|&i| i != j)
                .map(|i| sq_dist(v.row(i), v.row(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(c * nn.into_iter().fold(0.0, f64::max))
}

/// r-th smallest value of `dists`, 1-based.
fn rth_smallest(mut dists: Vec<f64>, r: usize) -> f64 {
    let (_, v, _) = dists.select_nth_unstable_by(r - 1, |a, b| a.total_cmp(b));
    *v
}

/// Per-point scale: L¹ distance from each point to its r-th nearest neighbor.
pub fn adaptive_bandwidths(x: &DataMatrix, r: usize) -> Result<Vec<f64>> {
    let n = x.rows();
    if r == 0 || r >= n {
        return Err(SugarError::param(
            "r",
            format!("neighbor rank must satisfy 1 <= r < N = {n}, got {r}"),
        ));
    }
    let v = x.values();
    let scales: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| l1_dist(v.row(i), v.row(j)))
                .collect();
            rth_smallest(d, r)
        })
        .collect();
    if let Some(index) = scales.iter().position(|&s| s <= 0.0) {
        return Err(SugarError::DegenerateBandwidth { index });
    }
    Ok(scales)
}

/// Scale of each query point: L¹ distance to its r-th nearest reference point.
pub fn adaptive_bandwidths_against(query: &DataMatrix, reference: &DataMatrix, r: usize) -> Result<Vec<f64>> {
    check_same_dims(query, reference)?;
    if r == 0 || r > reference.rows() {
        return Err(SugarError::param(
            "r",
            format!("neighbor rank must satisfy 1 <= r <= {}, got {r}", reference.rows()),
        ));
    }
    let (q, rv) = (query.values(), reference.values());
    let scales: Vec<f64> = (0..query.rows())
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = rv.outer_iter().map(|row| l1_dist(q.row(i), row)).collect();
            rth_smallest(d, r)
        })
        .collect();
    if let Some(index) = scales.iter().position(|&s| s <= 0.0) {
        return Err(SugarError::DegenerateBandwidth { index });
    }
    Ok(scales)
}

/// Resolves `bw` for kernels between `rows` and `cols`.
///
/// Global scales are computed on `cols`. Adaptive row scales are the
/// leave-one-out neighbor distances when `rows` and `cols` are the same set,
/// and distances to the r-th nearest column point otherwise.
pub fn resolve_bandwidth(rows: &DataMatrix, cols: &DataMatrix, bw: &BandwidthSpec) -> Result<ResolvedBandwidth> {
    bw.validate()?;
    check_same_dims(rows, cols)?;
    Ok(match *bw {
        BandwidthSpec::Fixed { sigma2 } => ResolvedBandwidth::Global { spec: *bw, sigma2 },
        BandwidthSpec::MaxMin { c } => {
            let sigma2 = maxmin_bandwidth(cols, c)?;
            if sigma2 <= 0.0 {
                return Err(SugarError::DegenerateBandwidth { index: 0 });
            }
            ResolvedBandwidth::Global { spec: *bw, sigma2 }
        }
        BandwidthSpec::Adaptive { r } => {
            let col_scales = adaptive_bandwidths(cols, r)?;
            let row_scales = if std::ptr::eq(rows, cols) || rows == cols {
                col_scales.clone()
            } else {
                adaptive_bandwidths_against(rows, cols, r)?
            };
            ResolvedBandwidth::Adaptive {
                r,
                row_scales,
                col_scales,
            }
        }
    })
}

/// Gaussian affinities `exp(−‖a_i − b_j‖² / (2σ²))`.
///
/// In adaptive mode the denominator is `2σ_iσ_j`, which keeps the square
/// kernel symmetric.
pub fn gaussian_kernel(a: &DataMatrix, b: &DataMatrix, bw: &BandwidthSpec) -> Result<KernelMatrix> {
    let resolved = resolve_bandwidth(a, b, bw)?;
    let square = std::ptr::eq(a, b) || a == b;
    kernel_with_bandwidth(a, b, resolved, square)
}

fn check_resolved(resolved: &ResolvedBandwidth, n: usize, m: usize) -> Result<()> {
    match resolved {
        ResolvedBandwidth::Global { sigma2, .. } => {
            if !(sigma2.is_finite() && *sigma2 > 0.0) {
                return Err(SugarError::param("bandwidth", format!("sigma^2 must be > 0, got {sigma2}")));
            }
        }
        ResolvedBandwidth::Adaptive {
            row_scales,
            col_scales,
            ..
        } => {
            if row_scales.len() != n || col_scales.len() != m {
                return Err(SugarError::DimensionMismatch(format!(
                    "{} row scales / {} column scales for a {n}x{m} kernel",
                    row_scales.len(),
                    col_scales.len()
                )));
            }
            if let Some(index) = row_scales.iter().position(|&s| !(s > 0.0)) {
                return Err(SugarError::DegenerateBandwidth { index });
            }
            if let Some(index) = col_scales.iter().position(|&s| !(s > 0.0)) {
                return Err(SugarError::DegenerateBandwidth { index });
            }
        }
    }
    Ok(())
}

#[inline]
fn denominator(resolved: &ResolvedBandwidth, i: usize, j: usize) -> f64 {
    match resolved {
        ResolvedBandwidth::Global { sigma2, .. } => 2.0 * sigma2,
        ResolvedBandwidth::Adaptive {
            row_scales,
            col_scales,
            ..
        } => 2.0 * row_scales[i] * col_scales[j],
    }
}

#[inline]
fn entry(resolved: &ResolvedBandwidth, i: usize, j: usize, d2: f64) -> f64 {
    (-(d2 / denominator(resolved, i, j))).exp()
}

/// Gaussian affinities under an already-resolved bandwidth.
pub fn kernel_with_bandwidth(
    a: &DataMatrix,
    b: &DataMatrix,
    resolved: ResolvedBandwidth,
    square: bool,
) -> Result<KernelMatrix> {
    check_same_dims(a, b)?;
    check_resolved(&resolved, a.rows(), b.rows())?;
    let (n, m) = (a.rows(), b.rows());
    let (av, bv) = (a.values(), b.values());
    let mut values = Array2::zeros((n, m));
    Zip::indexed(values.axis_iter_mut(Axis(0))).par_for_each(|i, mut row| {
        let ai = av.row(i);
        for (j, o) in row.iter_mut().enumerate() {
            *o = entry(&resolved, i, j, sq_dist(ai, bv.row(j)));
        }
    });
    Ok(KernelMatrix {
        values,
        bandwidth: resolved,
        square,
    })
}

/// Row sums d̂, sparsities ŝ = 1/d̂, and the default measure μ = ŝ.
pub fn degrees(k: &KernelMatrix) -> Result<DegreeProfile> {
    k.require_square()?;
    profile(row_sums(k.values.view()))
}

/// [`degrees`] of the kernel of `x` against itself, one row at a time so the
/// N×N matrix is never held in memory. Returns the bandwidth used as well.
pub fn kernel_degrees(x: &DataMatrix, bw: &BandwidthSpec) -> Result<(DegreeProfile, ResolvedBandwidth)> {
    let resolved = resolve_bandwidth(x, x, bw)?;
    check_resolved(&resolved, x.rows(), x.rows())?;
    let v = x.values().as_standard_layout().into_owned();
    let d = x.cols().max(1);
    let flat = v.as_slice().expect("standard layout");
    let sums: Vec<f64> = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let xi = &flat[i * d..(i + 1) * d];
            let mut s = 0.0;
            for (j, xj) in flat.chunks_exact(d).enumerate() {
                let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                let e = d2 / denominator(&resolved, i, j);
                // exp underflows to exactly 0 past here
                if e < UNDERFLOW {
                    s += (-e).exp();
                }
            }
            s
        })
        .collect();
    Ok((profile(sums)?, resolved))
}

const UNDERFLOW: f64 = 746.0;

fn profile(degrees: Vec<f64>) -> Result<DegreeProfile> {
    if let Some(index) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(SugarError::ZeroRowSum { index });
    }
    let sparsities: Vec<f64> = degrees.iter().map(|d| 1.0 / d).collect();
    Ok(DegreeProfile {
        measure: sparsities.clone(),
        degrees,
        sparsities,
    })
}

pub(crate) fn row_sums(v: ArrayView2<'_, f64>) -> Vec<f64> {
    v.outer_iter().map(|r| r.iter().sum()).collect()
}

/// Divides each row of a square kernel by its sum, giving P = D⁻¹K.
pub fn row_normalize(k: &KernelMatrix) -> Result<DiffusionOperator> {
    k.require_square()?;
    Ok(DiffusionOperator {
        values: normalize_rows(k.values.view())?,
        time: 0,
    })
}

pub(crate) fn normalize_rows(v: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let sums = Array1::from(row_sums(v));
    if let Some(index) = sums.iter().position(|&d| !(d > 0.0)) {
        return Err(SugarError::ZeroRowSum { index });
    }
    let mut out = v.to_owned();
    for (mut row, s) in out.outer_iter_mut().zip(sums.iter()) {
        row.mapv_inplace(|x| x / s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(&v.iter().map(|x| vec![*x]).collect::<Vec<_>>()).unwrap()
    }

    fn random_points(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0))).unwrap()
    }

    #[test]
    fn streaming_degrees_match_dense() {
        let x = DataMatrix::from_rows(&(0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64).sqrt()]).collect::<Vec<_>>()).unwrap();
        for bw in [BandwidthSpec::MaxMin { c: 2.0 }, BandwidthSpec::Adaptive { r: 4 }, BandwidthSpec::Fixed { sigma2: 0.3 }] {
            let dense = degrees(&gaussian_kernel(&x, &x, &bw).unwrap()).unwrap();
            let (streamed, resolved) = kernel_degrees(&x, &bw).unwrap();
            assert_eq!(dense, streamed);
            assert_eq!(&resolved, gaussian_kernel(&x, &x, &bw).unwrap().bandwidth());
        }
    }

    #[test]
    fn bandwidth_spec_parsing() {
        assert_eq!("maxmin:2.0".parse::<BandwidthSpec>().unwrap(), BandwidthSpec::MaxMin { c: 2.0 });
        assert_eq!("adaptive:10".parse::<BandwidthSpec>().unwrap(), BandwidthSpec::Adaptive { r: 10 });
        assert_eq!("fixed:0.5".parse::<BandwidthSpec>().unwrap(), BandwidthSpec::Fixed { sigma2: 0.5 });
        for bad in ["maxmin:1.5", "maxmin:3.5", "adaptive:0", "fixed:0", "fixed:-1", "gauss:1", "maxmin"] {
            assert!(bad.parse::<BandwidthSpec>().is_err(), "{bad}");
        }
        let json = serde_json::to_string(&BandwidthSpec::Adaptive { r: 3 }).unwrap();
        assert_eq!(json, "\"adaptive:3\"");
        assert_eq!(serde_json::from_str::<BandwidthSpec>(&json).unwrap(), BandwidthSpec::Adaptive { r: 3 });
    }

    #[test]
    fn pairwise_small() {
        let a = col(&[0.0, 3.0]);
        assert_eq!(pairwise_sq_dist(&a, &a).unwrap(), array![[0.0, 9.0], [9.0, 0.0]]);
        let b = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(pairwise_sq_dist(&b, &b).unwrap().iter().all(|&v| v == 0.0));
        assert!(pairwise_sq_dist(&a, &b).is_err());
    }

    #[test]
    fn pairwise_matches_double_loop() {
        let x = random_points(50, 4, 1);
        let fast = pairwise_sq_dist(&x, &x).unwrap();
        let v = x.values();
        for i in 0..50 {
            for j in 0..50 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += (v[[i, k]] - v[[j, k]]).powi(2);
                }
                assert!((fast[[i, j]] - s).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn maxmin_examples() {
        // nearest-neighbor squared distances of {0,1,3} are {1,1,4}
        assert_eq!(maxmin_bandwidth(&col(&[0.0, 1.0, 3.0]), 2.0).unwrap(), 8.0);
        // duplicates give 0 for themselves; max over points keeps q's distance
        assert_eq!(maxmin_bandwidth(&col(&[1.0, 1.0, 4.0]), 2.0).unwrap(), 18.0);
        assert!(maxmin_bandwidth(&col(&[1.0]), 2.0).is_err());
        assert!(maxmin_bandwidth(&col(&[0.0, 1.0]), 1.0).is_err());
    }

    #[test]
    fn maxmin_is_homogeneous() {
        let x = random_points(30, 3, 2);
        let s = 3.7;
        let scaled = DataMatrix::new(x.values().mapv(|v| v * s)).unwrap();
        let a = maxmin_bandwidth(&x, 2.5).unwrap();
        let b = maxmin_bandwidth(&scaled, 2.5).unwrap();
        assert!((b - s * s * a).abs() < 1e-10 * b);
    }

    #[test]
    fn maxmin_guarantees_a_neighbor() {
        let x = random_points(60, 2, 3);
        let c = 2.0;
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::MaxMin { c }).unwrap();
        let floor = (-1.0 / (2.0 * c)).exp();
        for (i, row) in k.values().outer_iter().enumerate() {
            let best = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).fold(0.0, f64::max);
            assert!(best >= floor - 1e-15);
        }
    }

    #[test]
    fn adaptive_examples() {
        assert_eq!(adaptive_bandwidths(&col(&[0.0, 1.0, 3.0]), 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert_eq!(adaptive_bandwidths(&col(&[0.0, 1.0, 3.0]), 2).unwrap(), vec![3.0, 2.0, 3.0]);
        assert!(matches!(
            adaptive_bandwidths(&col(&[0.0, 0.0, 3.0]), 1).unwrap_err(),
            SugarError::DegenerateBandwidth { index: 0 }
        ));
        assert!(adaptive_bandwidths(&col(&[0.0, 1.0, 3.0]), 3).is_err());
        assert!(adaptive_bandwidths(&col(&[0.0, 1.0, 3.0]), 0).is_err());
        let x = random_points(40, 3, 4);
        assert!(adaptive_bandwidths(&x, 5).unwrap().iter().all(|&s| s > 0.0));
    }

    #[test]
    fn adaptive_uses_l1() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]]).unwrap();
        assert_eq!(adaptive_bandwidths(&x, 1).unwrap(), vec![2.0, 2.0, 8.0]);
    }

    #[test]
    fn kernel_values() {
        let x = col(&[0.0, 2.0]);
        // ‖x_0 − x_1‖² = 4 = 2σ² with σ² = 2
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::Fixed { sigma2: 2.0 }).unwrap();
        assert_eq!(k.values()[[0, 0]], 1.0);
        assert_eq!(k.values()[[1, 1]], 1.0);
        assert!((k.values()[[0, 1]] - 0.36787944117144233).abs() < 1e-15);
        assert!(k.is_square());
        assert!(gaussian_kernel(&x, &random_points(2, 2, 0), &BandwidthSpec::Fixed { sigma2: 1.0 }).is_err());
    }

    #[test]
    fn kernel_symmetric_on_random_points() {
        let x = random_points(100, 3, 5);
        for bw in [BandwidthSpec::MaxMin { c: 2.0 }, BandwidthSpec::Adaptive { r: 7 }] {
            let k = gaussian_kernel(&x, &x, &bw).unwrap();
            let v = k.values();
            let kt = v.t();
            for (a, b) in v.iter().zip(kt.iter()) {
                assert!((a - b).abs() <= 1e-12);
                assert!(*a > 0.0 && *a <= 1.0);
            }
        }
    }

    #[test]
    fn adaptive_kernel_formula() {
        let x = col(&[0.0, 1.0, 3.0]);
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::Adaptive { r: 1 }).unwrap();
        // σ = (1,1,2); entry (0,2) = exp(−9 / (2·1·2))
        assert!((k.values()[[0, 2]] - (-9.0f64 / 4.0).exp()).abs() < 1e-15);
        assert!((k.values()[[2, 2]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degree_examples() {
        let two = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let k = gaussian_kernel(&two, &two, &BandwidthSpec::Fixed { sigma2: 1.0 }).unwrap();
        assert_eq!(k.values(), array![[1.0, 1.0], [1.0, 1.0]]);
        let d = degrees(&k).unwrap();
        assert_eq!(d.degrees, vec![2.0, 2.0]);
        assert_eq!(d.sparsities, vec![0.5, 0.5]);
        assert_eq!(d.measure, d.sparsities);

        let one = col(&[4.0]);
        let k = gaussian_kernel(&one, &one, &BandwidthSpec::Fixed { sigma2: 1.0 }).unwrap();
        assert_eq!(degrees(&k).unwrap().degrees, vec![1.0]);
    }

    #[test]
    fn degrees_match_loop() {
        let x = random_points(80, 2, 6);
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::MaxMin { c: 2.0 }).unwrap();
        let d = degrees(&k).unwrap();
        let v = k.values();
        for i in 0..80 {
            let mut s = 0.0;
            for j in 0..80 {
                s += v[[i, j]];
            }
            assert!((d.degrees[i] - s).abs() < 1e-12);
            assert!((d.sparsities[i] * d.degrees[i] - 1.0).abs() < 1e-12);
            assert!(d.degrees[i] >= 1.0);
        }
    }

    #[test]
    fn zero_row_sum_reported() {
        let k = KernelMatrix::from_square(
            array![[1.0, 0.0], [0.0, 0.0]],
            ResolvedBandwidth::Global {
                spec: BandwidthSpec::Fixed { sigma2: 1.0 },
                sigma2: 1.0,
            },
        )
        .unwrap();
        assert!(matches!(degrees(&k).unwrap_err(), SugarError::ZeroRowSum { index: 1 }));
        assert!(matches!(row_normalize(&k).unwrap_err(), SugarError::ZeroRowSum { index: 1 }));
    }

    #[test]
    fn non_square_rejected() {
        let a = col(&[0.0, 1.0, 2.0]);
        let b = col(&[0.5]);
        let k = gaussian_kernel(&a, &b, &BandwidthSpec::Fixed { sigma2: 1.0 }).unwrap();
        assert_eq!(k.dim(), (3, 1));
        assert!(degrees(&k).is_err());
        assert!(row_normalize(&k).is_err());
    }

    fn global(sigma2: f64) -> ResolvedBandwidth {
        ResolvedBandwidth::Global {
            spec: BandwidthSpec::Fixed { sigma2 },
            sigma2,
        }
    }

    #[test]
    fn row_normalize_examples() {
        let k = KernelMatrix::from_square(Array2::ones((2, 2)), global(1.0)).unwrap();
        let p = row_normalize(&k).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.5));
        assert_eq!(p.time(), 0);

        let k = KernelMatrix::from_square(Array2::eye(4), global(1.0)).unwrap();
        assert_eq!(row_normalize(&k).unwrap().values(), Array2::<f64>::eye(4));
    }

    #[test]
    fn row_normalize_is_stochastic_on_random_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let k = KernelMatrix::from_square(Array2::from_shape_fn((n, n), |_| rng.random_range(0.01..1.0)), global(1.0))
                .unwrap();
            let p = row_normalize(&k).unwrap();
            for row in p.values().outer_iter() {
                assert!((row.sum() - 1.0).abs() < 1e-10);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn operator_spectrum_within_unit_interval() {
        let x = random_points(25, 2, 8);
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::MaxMin { c: 2.0 }).unwrap();
        let p = row_normalize(&k).unwrap();
        // P is similar to the symmetric D^{-1/2} K D^{-1/2}
        let d = degrees(&k).unwrap().degrees;
        let s = Array2::from_shape_fn((25, 25), |(i, j)| k.values()[[i, j]] / (d[i] * d[j]).sqrt());
        let eig = crate::spectral::sym_eigendecomp(&s).unwrap();
        assert!(eig.eigenvalues.iter().all(|&l| (-1.0 - 1e-10..=1.0 + 1e-10).contains(&l)));
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-10);
        // and the similarity holds: P·ψ = λψ with ψ = D^{-1/2} v
        let v0 = eig.eigenvectors.column(0).to_owned();
        let psi = Array1::from_shape_fn(25, |i| v0[i] / d[i].sqrt());
        let ppsi = p.values().dot(&psi);
        for (a, b) in ppsi.iter().zip(psi.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn translation_invariance(seed in 0u64..1000, shift in prop::collection::vec(-50.0f64..50.0, 3)) {
            let x = random_points(20, 3, seed);
            let shifted = DataMatrix::new(&x.values() + &Array1::from(shift)).unwrap();
            for bw in [BandwidthSpec::MaxMin { c: 2.0 }, BandwidthSpec::Adaptive { r: 3 }] {
                let k1 = gaussian_kernel(&x, &x, &bw).unwrap();
                let k2 = gaussian_kernel(&shifted, &shifted, &bw).unwrap();
                for (a, b) in k1.values().iter().zip(k2.values().iter()) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
                let (d1, d2) = (degrees(&k1).unwrap(), degrees(&k2).unwrap());
                for (a, b) in d1.degrees.iter().zip(&d2.degrees) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
                let (p1, p2) = (row_normalize(&k1).unwrap(), row_normalize(&k2).unwrap());
                for (a, b) in p1.values().iter().zip(p2.values().iter()) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn fixed_kernel_entries_in_unit_interval(seed in 0u64..1000, sigma2 in 0.05f64..10.0) {
            let x = random_points(15, 2, seed);
            let k = gaussian_kernel(&x, &x, &BandwidthSpec::Fixed { sigma2 }).unwrap();
            for ((i, j), &v) in k.values().indexed_iter() {
                prop_assert!(v >= 0.0 && v <= 1.0);
                if i == j {
                    prop_assert_eq!(v, 1.0);
                }
            }
        }
    }
}
