use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataMatrix, LabeledDataset};
use crate::error::{Result, SugarError};
use crate::spectral::psd_sqrt;

/// Power-law warp of `u ∈ [-1, 1]`: `sign(u)·|u|^(1+bias)`.
fn warp(u: f64, bias: f64) -> f64 {
    u.signum() * u.abs().powf(1.0 + bias)
}

fn check_bias(bias: f64) -> Result<()> {
    if !(bias.is_finite() && bias >= 0.0) {
        return Err(SugarError::param("bias", format!("must be finite and >= 0, got {bias}")));
    }
    Ok(())
}

fn names(n: &[&str]) -> Vec<String> {
    n.iter().map(|s| (*s).to_owned()).collect()
}

/// Points on the unit circle, densest at angle 0 when `bias > 0`.
///
/// Angles are `π·sign(u)·|u|^(1+bias)` for `u` uniform on `[-1, 1]`.
pub fn gen_circle(n: usize, bias: f64, seed: u64) -> Result<DataMatrix> {
    if n < 3 {
        return Err(SugarError::param("n", format!("circle needs at least 3 points, got {n}")));
    }
    check_bias(bias)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((n, 2));
    for mut row in values.rows_mut() {
        let u: f64 = rng.random_range(-1.0..=1.0);
        let angle = PI * warp(u, bias);
        row[0] = angle.cos();
        row[1] = angle.sin();
    }
    DataMatrix::new(values)?.with_col_names(names(&["x", "y"]))
}

/// Points on the unit 2-sphere, dense at the equator and sparse at the poles
/// when `bias > 0`.
///
/// The height is `sign(u)·|u|^(1+bias)` for `u` uniform on `[-1, 1]`; the
/// azimuth is uniform. With `bias = 0` the surface is sampled uniformly.
pub fn gen_sphere(n: usize, bias: f64, seed: u64) -> Result<DataMatrix> {
    if n < 4 {
        return Err(SugarError::param("n", format!("sphere needs at least 4 points, got {n}")));
    }
    check_bias(bias)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((n, 3));
    for mut row in values.rows_mut() {
        let z = warp(rng.random_range(-1.0..=1.0), bias);
        let phi = rng.random_range(-PI..PI);
        let rho = (1.0 - z * z).max(0.0).sqrt();
        row[0] = rho * phi.cos();
        row[1] = rho * phi.sin();
        row[2] = z;
    }
    DataMatrix::new(values)?.with_col_names(names(&["x", "y", "z"]))
}

/// Parameters for a nonuniformly sampled Swiss roll.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwissRollSpec {
    pub n: usize,
    pub theta_range: (f64, f64),
    /// Warp exponent; 0 samples θ uniformly, larger values crowd points toward the low end.
    pub theta_bias: f64,
    pub h_range: (f64, f64),
    pub seed: u64,
}

impl Default for SwissRollSpec {
    fn default() -> Self {
        SwissRollSpec {
            n: 600,
            theta_range: (1.5 * PI, 4.5 * PI),
            theta_bias: 1.0,
            h_range: (0.0, 20.0),
            seed: 0,
        }
    }
}

impl SwissRollSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SugarError::param("n", "must be positive"));
        }
        let (t0, t1) = self.theta_range;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(SugarError::param("theta_range", format!("empty interval [{t0}, {t1}]")));
        }
        let (h0, h1) = self.h_range;
        if !(h0.is_finite() && h1.is_finite() && h1 > h0) {
            return Err(SugarError::param("h_range", format!("empty interval [{h0}, {h1}]")));
        }
        check_bias(self.theta_bias)
    }

    /// The roll's embedding of one `(θ, h)` pair.
    pub fn embed(theta: f64, h: f64) -> [f64; 3] {
        [6.0 * theta * theta.cos(), h, 6.0 * theta * theta.sin()]
    }

    /// Draws the latent `(θ, h)` pairs; `gen_swiss_roll` embeds exactly these.
    pub fn sample_latent(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (t0, t1) = self.theta_range;
        let (h0, h1) = self.h_range;
        Ok((0..self.n)
            .map(|_| {
                let u: f64 = rng.random_range(0.0..=1.0);
                let theta = t0 + (t1 - t0) * warp(u, self.theta_bias);
                let h = rng.random_range(h0..=h1);
                (theta, h)
            })
            .collect())
    }
}

/// Swiss roll rows `(6θ cos θ, h, 6θ sin θ)`.
pub fn gen_swiss_roll(spec: &SwissRollSpec) -> Result<DataMatrix> {
    let latent = spec.sample_latent()?;
    let mut values = Array2::zeros((spec.n, 3));
    for (mut row, (theta, h)) in values.rows_mut().into_iter().zip(latent) {
        let p = SwissRollSpec::embed(theta, h);
        row.assign(&Array1::from(p.to_vec()));
    }
    DataMatrix::new(values)?.with_col_names(names(&["x", "y", "z"]))
}

/// One Gaussian component of a labelled mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub weight: f64,
    pub label: usize,
}

impl MixtureComponent {
    /// Isotropic component with variance `var` on every axis.
    pub fn spherical(mean: Vec<f64>, var: f64, weight: f64, label: usize) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { var } else { 0.0 }).collect())
            .collect();
        MixtureComponent {
            mean,
            cov,
            weight,
            label,
        }
    }
}

/// Samples `n` labelled points from a Gaussian mixture.
pub fn gen_gaussian_mixture(
    components: &[MixtureComponent],
    n: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let first = components
        .first()
        .ok_or_else(|| SugarError::param("components", "mixture has no components"))?;
    let d = first.mean.len();
    if d == 0 {
        return Err(SugarError::param("components", "zero-dimensional mean"));
    }
    if n == 0 {
        return Err(SugarError::param("n", "must be positive"));
    }
    let mut roots = Vec::with_capacity(components.len());
    for (c, comp) in components.iter().enumerate() {
        if comp.mean.len() != d || comp.cov.len() != d || comp.cov.iter().any(|r| r.len() != d) {
            return Err(SugarError::DimensionMismatch(format!(
                "component {c} does not match dimension {d}"
            )));
        }
        if !(comp.weight.is_finite() && comp.weight > 0.0) {
            return Err(SugarError::param("weight", format!("component {c} weight must be positive")));
        }
        let cov = Array2::from_shape_fn((d, d), |(i, j)| comp.cov[i][j]);
        let root = psd_sqrt(&cov).map_err(|e| match e {
            SugarError::NotPsd { eigenvalue, .. } => SugarError::NotPsd { index: c, eigenvalue },
            other => other,
        })?;
        roots.push(root);
    }

    let chooser = WeightedIndex::new(components.iter().map(|c| c.weight))
        .map_err(|e| SugarError::param("weight", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut z = Array1::zeros(d);
    for mut row in values.rows_mut() {
        let c = chooser.sample(&mut rng);
        z.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
        let draw = roots[c].dot(&z);
        for j in 0..d {
            row[j] = components[c].mean[j] + draw[j];
        }
        labels.push(components[c].label);
    }
    LabeledDataset::new(DataMatrix::new(values)?, labels).map_err(|e| {
        SugarError::InvalidData(format!("mixture sample left a class empty ({e}); raise n"))
    })
}
