//! Classification and clustering experiments comparing original data with
//! augmented versions of it.

use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, LabeledDataset};
use crate::error::Result;
use crate::eval::{
    classification_report, kfold_indices, kmeans, knn_predict, rand_index, smote, ClassificationReport, MetricMap,
};
use crate::kernel::{gaussian_kernel, BandwidthSpec};
use crate::pipeline::{sugar, SugarConfig};
use crate::spectral::connected_components;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyConfig {
    pub folds: usize,
    pub k_nn: usize,
    pub smote_k: usize,
    pub smote_ratio: f64,
    pub seed: u64,
    pub sugar: SugarConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            folds: 10,
            k_nn: 5,
            smote_k: 5,
            smote_ratio: 1.0,
            seed: 0,
            sugar: SugarConfig::default(),
        }
    }
}

/// Pooled out-of-fold reports for each training-set variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub orig: ClassificationReport,
    pub smote: ClassificationReport,
    pub sugar: ClassificationReport,
    /// Synthetic training rows added per fold, summed.
    pub smote_generated: usize,
    pub sugar_generated: usize,
}

impl ClassifyReport {
    pub fn metrics(&self) -> MetricMap {
        let mut m = self.orig.metrics("orig_");
        m.extend(self.smote.metrics("smote_"));
        m.extend(self.sugar.metrics("sugar_"));
        m.insert("smote_generated".into(), self.smote_generated as f64);
        m.insert("sugar_generated".into(), self.sugar_generated as f64);
        m
    }
}

/// Generated rows take the label of the point they were drawn around.
pub fn sugar_augment(train: &LabeledDataset, cfg: &SugarConfig) -> Result<LabeledDataset> {
    let out = sugar(train.data(), cfg)?;
    let mut labels = train.labels().to_vec();
    labels.extend(out.origin.iter().map(|&o| train.labels()[o]));
    LabeledDataset::new(out.combined, labels)
}

/// k-fold k-NN on original, SMOTE-augmented and SUGAR-augmented training
/// folds. Test folds only ever hold original points.
pub fn classify_experiment(data: &LabeledDataset, cfg: &ClassifyConfig) -> Result<ClassifyReport> {
    let folds = kfold_indices(data.labels(), cfg.folds, cfg.seed)?;
    let n = data.len();
    let mut truth = Vec::with_capacity(n);
    let mut preds = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let (mut smote_generated, mut sugar_generated) = (0, 0);
    for (f, test_idx) in folds.iter().enumerate() {
        let mut in_test = vec![false; n];
        for &i in test_idx {
            in_test[i] = true;
        }
        let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let (tx, ty) = data.subset(&train_idx);
        let train = LabeledDataset::new(tx, ty)?;
        let (test_x, test_y) = data.subset(test_idx);

        let sm = smote(&train, cfg.smote_k, cfg.smote_ratio, cfg.seed.wrapping_add(f as u64))?;
        let su_cfg = SugarConfig {
            seed: cfg.sugar.seed.wrapping_add(f as u64),
            ..cfg.sugar.clone()
        };
        let su = sugar_augment(&train, &su_cfg)?;
        smote_generated += sm.len() - train.len();
        sugar_generated += su.len() - train.len();

        for (slot, set) in preds.iter_mut().zip([&train, &sm, &su]) {
            slot.extend(knn_predict(set.data(), set.labels(), &test_x, cfg.k_nn)?);
        }
        truth.extend(test_y);
    }
    let [p_orig, p_smote, p_sugar] = preds;
    Ok(ClassifyReport {
        orig: classification_report(&truth, &p_orig)?,
        smote: classification_report(&truth, &p_smote)?,
        sugar: classification_report(&truth, &p_sugar)?,
        smote_generated,
        sugar_generated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Kernel used for the component graph, resolved on each point set.
    pub graph_bandwidth: BandwidthSpec,
    /// Minimum affinity for an edge.
    pub threshold: f64,
    pub sugar: SugarConfig,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 2,
            restarts: 10,
            seed: 0,
            graph_bandwidth: BandwidthSpec::MaxMin { c: 2.0 },
            threshold: (-1.0f64).exp(),
            sugar: SugarConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub ri_orig: f64,
    pub ri_sugar: f64,
    pub components_orig: usize,
    pub components_sugar: usize,
    pub generated: usize,
}

impl ClusterReport {
    pub fn metrics(&self) -> MetricMap {
        MetricMap::from([
            ("ri_orig".to_string(), self.ri_orig),
            ("ri_sugar".to_string(), self.ri_sugar),
            ("components_orig".to_string(), self.components_orig as f64),
            ("components_sugar".to_string(), self.components_sugar as f64),
            ("generated".to_string(), self.generated as f64),
        ])
    }
}

/// Graph components of `x` under `bw`, with edges at affinity ≥ `threshold`.
pub fn component_count(x: &DataMatrix, bw: &BandwidthSpec, threshold: f64) -> Result<usize> {
    let k = gaussian_kernel(x, x, bw)?;
    Ok(connected_components(&k, threshold)?.0)
}

/// k-means Rand Index of the original points against `truth`, clustering
/// either the original points alone or the augmented set.
pub fn cluster_experiment(x: &DataMatrix, truth: &[usize], cfg: &ClusterConfig) -> Result<ClusterReport> {
    let aug = sugar(x, &cfg.sugar)?;
    let orig_labels = kmeans(x, cfg.k, cfg.seed, cfg.restarts)?;
    let sugar_labels = kmeans(&aug.combined, cfg.k, cfg.seed, cfg.restarts)?;
    Ok(ClusterReport {
        ri_orig: rand_index(&orig_labels, truth)?,
        ri_sugar: rand_index(&sugar_labels[..x.rows()], truth)?,
        components_orig: component_count(x, &cfg.graph_bandwidth, cfg.threshold)?,
        components_sugar: component_count(&aug.combined, &cfg.graph_bandwidth, cfg.threshold)?,
        generated: aug.generated.rows(),
    })
}
