use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, LabeledDataset};
use crate::error::{Result, SugarError};
use crate::generation::{nearest_neighbors, substream};
use crate::kernel::sq_dist;

/// k-NN vote over an arbitrary labelled training set.
///
/// Neighbors are ordered by (distance, index). When several classes tie on
/// votes, the class of the nearest neighbor among the tied classes wins.
pub fn knn_predict(train: &DataMatrix, train_labels: &[usize], test: &DataMatrix, k: usize) -> Result<Vec<usize>> {
    if train.is_empty() || train_labels.is_empty() {
        return Err(SugarError::param("train", "training set is empty"));
    }
    if train_labels.len() != train.rows() {
        return Err(SugarError::DimensionMismatch(format!(
            "{} labels for {} training rows",
            train_labels.len(),
            train.rows()
        )));
    }
    if k == 0 || k > train.rows() {
        return Err(SugarError::param("k", format!("need 1 <= k <= {}, got {k}", train.rows())));
    }
    if train.cols() != test.cols() {
        return Err(SugarError::DimensionMismatch(format!(
            "train has {} columns, test has {}",
            train.cols(),
            test.cols()
        )));
    }
    let n_classes = train_labels.iter().max().map_or(0, |m| m + 1);
    let tv = train.values();
    use rayon::prelude::*;
    let preds = test
        .values()
        .outer_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|q| {
            let mut cand: Vec<(f64, usize)> =
                tv.outer_iter().enumerate().map(|(j, r)| (sq_dist(q, r), j)).collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_by(cmp);
            let mut votes = vec![0usize; n_classes];
            for &(_, j) in &cand {
                votes[train_labels[j]] += 1;
            }
            let top = *votes.iter().max().unwrap_or(&0);
            cand.iter()
                .map(|&(_, j)| train_labels[j])
                .find(|&c| votes[c] == top)
                .unwrap_or(0)
        })
        .collect();
    Ok(preds)
}

/// k-NN classification of `test` against a labelled training set.
pub fn knn_classify(train: &LabeledDataset, test: &DataMatrix, k: usize) -> Result<Vec<usize>> {
    knn_predict(train.data(), train.labels(), test, k)
}

/// Per-class precision and recall with their macro averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Class labels, ascending; indexes every other per-class vector.
    pub classes: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub support: Vec<usize>,
    pub acp: f64,
    pub acr: f64,
    /// `confusion[t][p]` counts points of class `classes[t]` predicted as `classes[p]`.
    pub confusion: Vec<Vec<usize>>,
}

/// One-vs-rest precision `TP/(TP+FP)` and recall `TP/(TP+FN)`, macro-averaged
/// over every class seen in either vector. A class never predicted has
/// precision 0; a class with no true members has recall 0.
pub fn classification_report(y_true: &[usize], y_pred: &[usize]) -> Result<ClassificationReport> {
    if y_true.len() != y_pred.len() {
        return Err(SugarError::DimensionMismatch(format!(
            "{} true labels, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(SugarError::param("y_true", "no samples"));
    }
    let classes: Vec<usize> = y_true.iter().chain(y_pred).copied().collect::<BTreeSet<_>>().into_iter().collect();
    let index = |c: usize| classes.binary_search(&c).expect("class collected above");
    let nc = classes.len();
    let mut confusion = vec![vec![0usize; nc]; nc];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[index(t)][index(p)] += 1;
    }
    let mut precision = Vec::with_capacity(nc);
    let mut recall = Vec::with_capacity(nc);
    let mut support = Vec::with_capacity(nc);
    for c in 0..nc {
        let tp = confusion[c][c] as f64;
        let predicted: usize = (0..nc).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        precision.push(if predicted == 0 { 0.0 } else { tp / predicted as f64 });
        recall.push(if actual == 0 { 0.0 } else { tp / actual as f64 });
        support.push(actual);
    }
    let acp = precision.iter().sum::<f64>() / nc as f64;
    let acr = recall.iter().sum::<f64>() / nc as f64;
    Ok(ClassificationReport {
        classes,
        precision,
        recall,
        support,
        acp,
        acr,
        confusion,
    })
}

/// Oversamples every class below `target_ratio × majority count` by
/// interpolating between a class member and one of its `k` nearest
/// same-class neighbors. Synthetic rows are appended after the originals.
pub fn smote(data: &LabeledDataset, k: usize, target_ratio: f64, seed: u64) -> Result<LabeledDataset> {
    if k == 0 {
        return Err(SugarError::param("k", "must be >= 1"));
    }
    if !(target_ratio.is_finite() && target_ratio > 0.0) {
        return Err(SugarError::param("target_ratio", format!("must be > 0, got {target_ratio}")));
    }
    let counts = data.class_counts();
    let majority = counts.iter().copied().max().unwrap_or(0);
    let d = data.data().cols();
    let mut synth_rows: Vec<f64> = Vec::new();
    let mut synth_labels = Vec::new();

    for (class, &count) in counts.iter().enumerate() {
        let wanted = (target_ratio * majority as f64 - 1e-9).ceil().max(0.0) as usize;
        if wanted <= count {
            continue;
        }
        if count < 2 {
            return Err(SugarError::InvalidData(format!(
                "class {class} has {count} member(s); SMOTE needs at least 2"
            )));
        }
        let members = data.class_indices(class);
        let (sub, _) = data.subset(&members);
        let k_eff = k.min(count - 1);
        let neighbors: Vec<Vec<usize>> = (0..count).map(|i| nearest_neighbors(&sub, i, k_eff)).collect();
        let mut rng = substream(seed, class);
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut rng);
        for s in 0..(wanted - count) {
            let base = order[s % count];
            let nb = neighbors[base][rng.random_range(0..k_eff)];
            let u: f64 = rng.random();
            let (xb, xn) = (sub.row(base), sub.row(nb));
            synth_rows.extend(xb.iter().zip(xn.iter()).map(|(a, b)| a + u * (b - a)));
            synth_labels.push(class);
        }
    }

    if synth_labels.is_empty() {
        return Ok(data.clone());
    }
    let synth = DataMatrix::new(Array2::from_shape_vec((synth_labels.len(), d), synth_rows).expect("row-major fill"))?;
    let combined = data.data().vstack(&synth)?;
    let mut labels = data.labels().to_vec();
    labels.extend(synth_labels);
    LabeledDataset::new(combined, labels)
}

/// Splits row indices into `folds` test folds, dealing each class's shuffled
/// members round-robin so every fold sees every class.
pub fn kfold_indices(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(SugarError::param("folds", format!("need at least 2 folds, got {folds}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); folds];
    let mut offset = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(SugarError::param(
                "folds",
                format!("{folds} folds exceed the {} members of class {class}", members.len()),
            ));
        }
        members.shuffle(&mut substream(seed, class));
        for (i, m) in members.into_iter().enumerate() {
            out[(i + offset) % folds].push(m);
        }
        offset += 1;
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}
