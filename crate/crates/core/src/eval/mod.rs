//! Metrics and baselines: K-S, degree variance, k-means, Rand Index, k-NN,
//! ACP/ACR, SMOTE and mutual information.

mod classify;
mod cluster;
mod info;
mod ks;

use std::collections::BTreeMap;
use std::path::Path;

pub use classify::{classification_report, kfold_indices, knn_classify, knn_predict, smote, ClassificationReport};
pub use cluster::{kmeans, kmeans_fit, rand_index, KMeansFit};
pub use info::{default_bins, mutual_information};
pub use ks::{kolmogorov_q, ks_uniform_test, KsResult};

use crate::dataset::DataMatrix;
use crate::error::{Result, SugarError};
use crate::kernel::{kernel_degrees, BandwidthSpec};

/// Sample variance (denominator N − 1) of the kernel degrees of `x`.
pub fn degree_variance(x: &DataMatrix, bw: &BandwidthSpec) -> Result<f64> {
    if x.rows() < 2 {
        return Err(SugarError::param("x", "need at least two rows"));
    }
    Ok(sample_variance(&kernel_degrees(x, bw)?.0.degrees))
}

/// Sample variance of the degrees divided by their mean.
///
/// Raw degrees grow with the number of points, so this scale-free form is
/// the one to compare between a point set and an augmented version of it.
pub fn normalized_degree_variance(x: &DataMatrix, bw: &BandwidthSpec) -> Result<f64> {
    if x.rows() < 2 {
        return Err(SugarError::param("x", "need at least two rows"));
    }
    Ok(normalized_variance(&kernel_degrees(x, bw)?.0.degrees))
}

pub(crate) fn normalized_variance(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let scaled: Vec<f64> = v.iter().map(|d| d / mean).collect();
    sample_variance(&scaled)
}

pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)
}

/// Flat metric name to value map, written as JSON or as a two-column CSV.
pub type MetricMap = BTreeMap<String, f64>;

pub fn write_metrics_json(metrics: &MetricMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(metrics).expect("f64 map serializes");
    std::fs::write(path, text + "\n").map_err(|source| SugarError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_metrics_csv(metrics: &MetricMap, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<Vec<String>> = metrics.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect();
    write_table_csv(&["metric", "value"], &rows, path)
}

/// Writes a header plus string rows.
pub fn write_table_csv(header: &[&str], rows: &[Vec<String>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| SugarError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|source| SugarError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ClassificationReport {
    /// `acp`, `acr`, and `precision_<c>` / `recall_<c>` per class, optionally prefixed.
    pub fn metrics(&self, prefix: &str) -> MetricMap {
        let mut m = MetricMap::new();
        m.insert(format!("{prefix}acp"), self.acp);
        m.insert(format!("{prefix}acr"), self.acr);
        for (i, c) in self.classes.iter().enumerate() {
            m.insert(format!("{prefix}precision_{c}"), self.precision[i]);
            m.insert(format!("{prefix}recall_{c}"), self.recall[i]);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{degrees, gaussian_kernel};
    use std::f64::consts::PI;

    #[test]
    fn regular_polygon_has_flat_degrees() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 12.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        assert!(degree_variance(&x, &BandwidthSpec::MaxMin { c: 2.0 }).unwrap() <= 1e-10);
    }

    #[test]
    fn isolated_point_has_lowest_degree() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2], vec![10.0]]).unwrap();
        let bw = BandwidthSpec::Fixed { sigma2: 0.5 };
        let k = gaussian_kernel(&x, &x, &bw).unwrap();
        let d = degrees(&k).unwrap().degrees;
        assert!(d[3] < d[0] && d[3] < d[1] && d[3] < d[2]);

        // explicit loop over exp(−Δ²/(2σ²))
        let pts = [0.0f64, 0.1, 0.2, 10.0];
        let deg: Vec<f64> = pts
            .iter()
            .map(|a| pts.iter().map(|b| (-(a - b) * (a - b) / 1.0).exp()).sum())
            .collect();
        let mean = deg.iter().sum::<f64>() / 4.0;
        let var = deg.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 3.0;
        let got = degree_variance(&x, &bw).unwrap();
        assert!(got > 0.0);
        assert!((got - var).abs() < 1e-12);
    }

    #[test]
    fn degree_variance_needs_two_rows() {
        let x = DataMatrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(degree_variance(&x, &BandwidthSpec::Fixed { sigma2: 1.0 }).is_err());
    }

    #[test]
    fn normalized_variance_ignores_duplication() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![0.3], vec![0.5], vec![2.0]]).unwrap();
        let doubled = x.vstack(&x).unwrap();
        let bw = BandwidthSpec::Fixed { sigma2: 0.4 };
        let a = normalized_degree_variance(&x, &bw).unwrap();
        let b = normalized_degree_variance(&doubled, &bw).unwrap();
        // doubling every point doubles every degree; only the n − 1 denominator differs
        assert!((a * 3.0 / 4.0 - b * 7.0 / 8.0).abs() < 1e-12, "{a} {b}");
        let raw = degree_variance(&x, &bw).unwrap();
        let k = gaussian_kernel(&x, &x, &bw).unwrap();
        let d = degrees(&k).unwrap().degrees;
        let mean = d.iter().sum::<f64>() / 4.0;
        assert!((a - raw / (mean * mean)).abs() < 1e-12);
    }

    #[test]
    fn metric_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = classification_report(&[0, 1], &[0, 0]).unwrap();
        let m = r.metrics("orig_");
        write_metrics_json(&m, dir.path().join("m.json")).unwrap();
        write_metrics_csv(&m, dir.path().join("m.csv")).unwrap();
        let back: MetricMap =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(back, m);
        let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
        assert!(csv.starts_with("metric,value\norig_acp,0.25\n"));
    }
}
