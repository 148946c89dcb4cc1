use serde::{Deserialize, Serialize};

use crate::error::{Result, SugarError};

/// One-sample Kolmogorov-Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
///
/// The series is cut at the first term below 1e-10.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..100_000u32 {
        let jf = f64::from(j);
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-10 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Tests `v` against the uniform distribution on `range`.
///
/// The p-value uses the Kolmogorov distribution at
/// `λ = (√n + 0.12 + 0.11/√n)·D`.
pub fn ks_uniform_test(v: &[f64], range: (f64, f64)) -> Result<KsResult> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(SugarError::param("range", format!("[{lo}, {hi}] has no width")));
    }
    if v.is_empty() {
        return Err(SugarError::param("v", "need at least one sample"));
    }
    if let Some(x) = v.iter().find(|x| !(**x >= lo && **x <= hi)) {
        return Err(SugarError::param("v", format!("value {x} lies outside [{lo}, {hi}]")));
    }
    let mut u: Vec<f64> = v.iter().map(|x| (x - lo) / (hi - lo)).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len();
    let nf = n as f64;
    let statistic = u
        .iter()
        .enumerate()
        .map(|(i, &f)| ((i + 1) as f64 / nf - f).max(f - i as f64 / nf))
        .fold(0.0f64, f64::max);
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_q(lambda),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Sup-distance by checking the ECDF just before and at every sample.
    fn brute_force_statistic(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mut best = 0.0f64;
        for &x in v {
            let at = v.iter().filter(|&&y| y <= x).count() as f64 / n;
            let before = v.iter().filter(|&&y| y < x).count() as f64 / n;
            best = best.max((at - x).abs()).max((before - x).abs());
        }
        best
    }

    #[test]
    fn single_midpoint() {
        let r = ks_uniform_test(&[0.5], (0.0, 1.0)).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert_eq!(r.n, 1);
        let r = ks_uniform_test(&[5.0], (0.0, 10.0)).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn midpoint_grid() {
        for n in [1usize, 4, 10, 37] {
            let v: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
            let r = ks_uniform_test(&v, (0.0, 1.0)).unwrap();
            assert!((r.statistic - 0.5 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=100 {
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powf(1.5)).collect();
            let r = ks_uniform_test(&v, (0.0, 1.0)).unwrap();
            assert_eq!(r.statistic, brute_force_statistic(&v), "n = {n}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ks_uniform_test(&[1.5], (0.0, 1.0)).is_err());
        assert!(ks_uniform_test(&[], (0.0, 1.0)).is_err());
        assert!(ks_uniform_test(&[0.5], (1.0, 1.0)).is_err());
        assert!(ks_uniform_test(&[f64::NAN], (0.0, 1.0)).is_err());
    }

    #[test]
    fn q_reference_values() {
        // tabulated Kolmogorov distribution: 1 − K(λ)
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_q(1.2238) - 0.10).abs() < 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(0.2) > 0.999_999);
    }

    #[test]
    fn p_decreases_with_statistic() {
        let mut last = f64::INFINITY;
        for i in 0..=2000 {
            let p = kolmogorov_q(i as f64 * 0.002);
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= last + 1e-9);
            last = p;
        }
    }

    #[test]
    fn uniform_draws_mostly_pass() {
        let mut passes = 0;
        for trial in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let v: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
            if ks_uniform_test(&v, (0.0, 1.0)).unwrap().p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 99, "{passes}");
    }
}
