use crate::error::{Result, SugarError};

/// Default bin count `⌈√(n/5)⌉`, at least 2.
pub fn default_bins(n: usize) -> usize {
    ((n as f64 / 5.0).sqrt().ceil() as usize).max(2)
}

fn bin_indices(v: &[f64], bins: usize, name: &'static str) -> Result<Vec<usize>> {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(SugarError::param(name, "range has zero width"));
    }
    let w = (hi - lo) / bins as f64;
    Ok(v.iter()
        .map(|x| (((x - lo) / w).floor() as usize).min(bins - 1))
        .collect())
}

/// Plug-in mutual information (nats) from an equal-width 2-D histogram.
pub fn mutual_information(u: &[f64], v: &[f64], bins: usize) -> Result<f64> {
    if u.len() != v.len() {
        return Err(SugarError::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    if bins < 2 {
        return Err(SugarError::param("bins", format!("need at least 2, got {bins}")));
    }
    let bu = bin_indices(u, bins, "u")?;
    let bv = bin_indices(v, bins, "v")?;
    let n = u.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut mu = vec![0usize; bins];
    let mut mv = vec![0usize; bins];
    for (&a, &b) in bu.iter().zip(&bv) {
        joint[a * bins + b] += 1;
        mu[a] += 1;
        mv[b] += 1;
    }
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c == 0 {
                continue;
            }
            let pab = c as f64 / n;
            mi += pab * (c as f64 * n / (mu[a] as f64 * mv[b] as f64)).ln();
        }
    }
    Ok(mi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binned_entropy(u: &[f64], bins: usize) -> f64 {
        let idx = bin_indices(u, bins, "u").unwrap();
        let n = u.len() as f64;
        let mut counts = vec![0usize; bins];
        for i in idx {
            counts[i] += 1;
        }
        counts.iter().filter(|&&c| c > 0).map(|&c| -(c as f64 / n) * (c as f64 / n).ln()).sum()
    }

    #[test]
    fn self_information_is_entropy() {
        let u: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let mi = mutual_information(&u, &u, u.len()).unwrap();
        assert!(mi > 0.0);
        assert!((mi - binned_entropy(&u, u.len())).abs() < 1e-12);
    }

    #[test]
    fn independent_samples_have_little_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let v: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        assert!(mutual_information(&u, &v, 10).unwrap() < 0.02);
    }

    #[test]
    fn symmetric_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let u: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
            let v: Vec<f64> = u.iter().map(|x| x * x + rng.random::<f64>() * 0.3).collect();
            let a = mutual_information(&u, &v, 8).unwrap();
            let b = mutual_information(&v, &u, 8).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert!(a >= -1e-12);
        }
    }

    #[test]
    fn errors() {
        assert!(mutual_information(&[1.0, 1.0], &[0.0, 1.0], 2).is_err());
        assert!(mutual_information(&[0.0, 1.0], &[0.0, 1.0], 1).is_err());
        assert!(mutual_information(&[0.0, 1.0], &[0.0], 2).is_err());
        assert_eq!(default_bins(10), 2);
        assert_eq!(default_bins(1000), 15);
    }
}
