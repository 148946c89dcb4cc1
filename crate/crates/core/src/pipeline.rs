//! End-to-end generation: kernel, sparsity, local covariances, sampling,
//! MGC diffusion and rescaling, plus the iterated loop.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Result, SugarError};
use crate::eval::{ks_uniform_test, normalized_variance, KsResult};
use crate::generation::{generation_bounds, local_covariances, sample_batch, substream, GenerationPlan, Jitter};
use crate::kernel::{kernel_degrees, resolve_bandwidth, BandwidthSpec, ResolvedBandwidth};
use crate::mgc::{diffuse, mgc_kernel_for_batch, rescale, percentile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SugarConfig {
    pub degree_bandwidth: BandwidthSpec,
    pub diffusion_bandwidth: BandwidthSpec,
    pub k_cov: usize,
    pub t: u32,
    pub rescale: bool,
    pub seed: u64,
    pub max_iters: usize,
    pub ks_target_p: Option<f64>,
    /// Upper limit on the size of the combined set. A round whose plan would
    /// exceed it is not run.
    pub max_rows: usize,
}

impl Default for SugarConfig {
    fn default() -> Self {
        SugarConfig {
            degree_bandwidth: BandwidthSpec::MaxMin { c: 2.0 },
            diffusion_bandwidth: BandwidthSpec::Adaptive { r: 10 },
            k_cov: 5,
            t: 1,
            rescale: true,
            seed: 0,
            max_iters: 1,
            ks_target_p: None,
            max_rows: 50_000,
        }
    }
}

impl SugarConfig {
    pub fn validate(&self) -> Result<()> {
        self.degree_bandwidth.validate()?;
        self.diffusion_bandwidth.validate()?;
        if self.k_cov == 0 {
            return Err(SugarError::param("k_cov", "must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(SugarError::param("max_iters", "must be >= 1"));
        }
        if let Some(p) = self.ks_target_p {
            if !(p > 0.0 && p < 1.0) {
                return Err(SugarError::param("ks_target_p", format!("must lie in (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SugarConfig =
            serde_json::from_str(text).map_err(|e| SugarError::InvalidData(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// One pass of the loop. Degree variances are of unit-mean degrees under
/// the comparison bandwidth (see [`comparison_bandwidth`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub input_rows: usize,
    pub generated: usize,
    pub degree_variance_before: f64,
    pub degree_variance_after: f64,
    pub ks_p_value: Option<f64>,
}

/// X, the generated Y, and Z = X ∪ Y (X first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub original: DataMatrix,
    pub generated: DataMatrix,
    pub combined: DataMatrix,
    /// For each generated row, the row of `combined` it was drawn around.
    pub origin: Vec<usize>,
    pub history: Vec<IterationRecord>,
    /// Fixed σ² under which every history variance was computed, if global.
    pub comparison_sigma2: Option<f64>,
    /// Why the loop ended before `max_iters`, if it did.
    pub stop_reason: Option<String>,
}

/// A 1-D coordinate extracted from the running point set for K-S testing.
pub struct KsProbe {
    extract: Box<dyn Fn(&DataMatrix) -> Vec<f64> + Send + Sync>,
    range: (f64, f64),
}

impl KsProbe {
    pub fn new(range: (f64, f64), extract: impl Fn(&DataMatrix) -> Vec<f64> + Send + Sync + 'static) -> Self {
        KsProbe {
            extract: Box::new(extract),
            range,
        }
    }

    /// Polar angle of the first two columns, on [−π, π].
    pub fn angle() -> Self {
        KsProbe::new((-std::f64::consts::PI, std::f64::consts::PI), |m| {
            m.values().outer_iter().map(|r| r[1].atan2(r[0])).collect()
        })
    }

    pub fn test(&self, m: &DataMatrix) -> Result<KsResult> {
        ks_uniform_test(&(self.extract)(m), self.range)
    }

    pub fn p_value(&self, m: &DataMatrix) -> Result<f64> {
        Ok(self.test(m)?.p_value)
    }
}

impl fmt::Debug for KsProbe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KsProbe").field("range", &self.range).finish_non_exhaustive()
    }
}

fn step<T>(n: u8, name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| SugarError::Step {
        step: n,
        name,
        source: Box::new(e),
    })
}

/// Bandwidth for before/after degree comparisons: a global bandwidth is frozen to
/// the σ² it resolves to on `x`; an adaptive one is kept per point set.
pub fn comparison_bandwidth(x: &DataMatrix, bw: &BandwidthSpec) -> Result<BandwidthSpec> {
    Ok(match resolve_bandwidth(x, x, bw)? {
        ResolvedBandwidth::Global { sigma2, .. } => BandwidthSpec::Fixed { sigma2 },
        ResolvedBandwidth::Adaptive { .. } => *bw,
    })
}

/// σ² for the determinant term: the global σ², or the median σ_i² under an
/// adaptive degree bandwidth.
fn det_sigma2(resolved: &ResolvedBandwidth) -> f64 {
    match resolved {
        ResolvedBandwidth::Global { sigma2, .. } => *sigma2,
        ResolvedBandwidth::Adaptive { row_scales, .. } => {
            let sq: Vec<f64> = row_scales.iter().map(|s| s * s).collect();
            percentile(&sq, 0.5)
        }
    }
}

struct Pass {
    generated: DataMatrix,
    origin: Vec<usize>,
    plan: GenerationPlan,
}

enum Outcome {
    Done(Pass),
    /// The plan would push the combined set past `max_rows`.
    TooLarge(usize),
}

fn one_pass(x: &DataMatrix, cfg: &SugarConfig, seed: u64) -> Result<Outcome> {
    let (profile, resolved) = step(1, "kernel", kernel_degrees(x, &cfg.degree_bandwidth))?;
    // step 2: ŝ = 1/d̂ is carried in the profile
    let sparsity = &profile.sparsities;
    let cov = step(3, "local_covariance", local_covariances(x, cfg.k_cov, Jitter::default()))?;
    let plan = step(4, "generation", generation_bounds(&profile, &cov, det_sigma2(&resolved)))?;
    if x.rows() + plan.total > cfg.max_rows {
        return Ok(Outcome::TooLarge(plan.total));
    }
    let batch = step(4, "generation", sample_batch(x, &cov, &plan, seed))?;
    if batch.is_empty() {
        return Ok(Outcome::Done(Pass {
            generated: DataMatrix::empty(x.cols()),
            origin: Vec::new(),
            plan,
        }));
    }
    let khat = step(5, "mgc_kernel", mgc_kernel_for_batch(&batch, x, sparsity, &cfg.diffusion_bandwidth))?;
    let yt = step(6, "diffusion", diffuse(&khat, &batch, cfg.t))?;
    let y = if cfg.rescale {
        step(7, "rescale", rescale(&yt, x))?.data
    } else {
        yt
    };
    Ok(Outcome::Done(Pass {
        generated: y,
        origin: batch.origin,
        plan,
    }))
}

fn check_input(x: &DataMatrix, cfg: &SugarConfig) -> Result<()> {
    cfg.validate()?;
    let need = (cfg.k_cov + 1).max(2);
    if x.rows() < need {
        return Err(SugarError::InvalidData(format!(
            "need at least {need} rows for k_cov = {}, got {}",
            cfg.k_cov,
            x.rows()
        )));
    }
    Ok(())
}

fn round_seed(seed: u64, round: usize) -> u64 {
    if round == 0 {
        seed
    } else {
        substream(seed, usize::MAX - round).next_u64()
    }
}

/// A single generation pass over `x`; `cfg.max_iters` is ignored.
pub fn sugar(x: &DataMatrix, cfg: &SugarConfig) -> Result<AugmentedDataset> {
    sugar_rounds(x, cfg, 1, None)
}

/// Repeats [`sugar`] on the running combined set up to `cfg.max_iters` times.
pub fn sugar_iterate(x: &DataMatrix, cfg: &SugarConfig) -> Result<AugmentedDataset> {
    sugar_rounds(x, cfg, cfg.max_iters, None)
}

/// [`sugar_iterate`] recording a K-S p-value of the combined set each round.
/// Stops at the first round reaching `cfg.ks_target_p`, if set.
pub fn sugar_iterate_with(x: &DataMatrix, cfg: &SugarConfig, probe: &KsProbe) -> Result<AugmentedDataset> {
    sugar_rounds(x, cfg, cfg.max_iters, Some(probe))
}

fn sugar_rounds(x: &DataMatrix, cfg: &SugarConfig, rounds: usize, probe: Option<&KsProbe>) -> Result<AugmentedDataset> {
    check_input(x, cfg)?;
    let cmp_bw = step(1, "kernel", comparison_bandwidth(x, &cfg.degree_bandwidth))?;
    let variance = |m: &DataMatrix| -> Result<f64> { Ok(normalized_variance(&kernel_degrees(m, &cmp_bw)?.0.degrees)) };

    let mut combined = x.clone();
    let mut origin = Vec::new();
    let mut history = Vec::new();
    let mut before = step(1, "kernel", variance(&combined))?;
    let mut stop_reason = None;
    for round in 0..rounds {
        let pass = match one_pass(&combined, cfg, round_seed(cfg.seed, round))? {
            Outcome::Done(p) => p,
            Outcome::TooLarge(m) => {
                let msg = format!(
                    "round {} would add {m} points to {} rows, above max_rows = {}",
                    round + 1,
                    combined.rows(),
                    cfg.max_rows
                );
                if round == 0 {
                    return Err(SugarError::Step {
                        step: 4,
                        name: "generation",
                        source: Box::new(SugarError::InvalidParameter {
                            name: "max_rows",
                            reason: msg,
                        }),
                    });
                }
                log::warn!("{msg}; stopping");
                stop_reason = Some(msg);
                break;
            }
        };
        let input_rows = combined.rows();
        let generated = pass.generated.rows();
        debug_assert_eq!(generated, pass.plan.total);
        if generated > 0 {
            combined = combined.vstack(&pass.generated)?;
            origin.extend(pass.origin);
        }
        let after = if generated > 0 { step(1, "kernel", variance(&combined))? } else { before };
        let ks_p_value = probe.map(|p| p.p_value(&combined)).transpose()?;
        history.push(IterationRecord {
            iteration: round + 1,
            input_rows,
            generated,
            degree_variance_before: before,
            degree_variance_after: after,
            ks_p_value,
        });
        log::info!("round {}: {generated} points generated, degree variance {before:.6} -> {after:.6}", round + 1);
        before = after;
        if generated == 0 {
            if round + 1 < rounds {
                stop_reason = Some(format!("round {} generated no points", round + 1));
            }
            break;
        }
        if let (Some(target), Some(p)) = (cfg.ks_target_p, ks_p_value) {
            if p >= target {
                if round + 1 < rounds {
                    stop_reason = Some(format!("K-S p-value {p} reached target {target}"));
                }
                break;
            }
        }
    }

    let n = x.rows();
    let generated = combined.select_rows(&(n..combined.rows()).collect::<Vec<_>>());
    Ok(AugmentedDataset {
        original: x.clone(),
        generated,
        combined,
        origin,
        history,
        comparison_sigma2: match cmp_bw {
            BandwidthSpec::Fixed { sigma2 } => Some(sigma2),
            _ => None,
        },
        stop_reason,
    })
}
