//! Point-set data model, CSV persistence and seeded synthetic manifolds.

mod csv_io;
mod synth;

pub use csv_io::{detect_header, load_csv, load_labels, save_csv, save_labels};
pub use synth::{
    gen_circle, gen_gaussian_mixture, gen_sphere, gen_swiss_roll, MixtureComponent, SwissRollSpec,
};

use ndarray::{concatenate, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SugarError};

/// An N×D point set, one point per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Array2<f64>,
    col_names: Option<Vec<String>>,
}

impl DataMatrix {
    /// Wraps `values`, rejecting empty shapes and non-finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(SugarError::InvalidData(format!(
                "data matrix must be at least 1x1, got {n}x{d}"
            )));
        }
        Self::check_finite(&values)?;
        Ok(DataMatrix {
            values,
            col_names: None,
        })
    }

    /// A zero-row matrix with `cols` columns; the shape of an empty generated set.
    pub fn empty(cols: usize) -> Self {
        DataMatrix {
            values: Array2::zeros((0, cols)),
            col_names: None,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(SugarError::Ragged {
                row: i + 1,
                found: r.len(),
                expected: d,
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| SugarError::InvalidData(e.to_string()))?;
        Self::new(values)
    }

    fn check_finite(values: &Array2<f64>) -> Result<()> {
        for ((i, j), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(SugarError::InvalidData(format!(
                    "non-finite value {v} at row {}, column {}",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn with_col_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.cols() {
            return Err(SugarError::DimensionMismatch(format!(
                "{} column names for {} columns",
                names.len(),
                self.cols()
            )));
        }
        self.col_names = Some(names);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn col_names(&self) -> Option<&[String]> {
        self.col_names.as_deref()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.outer_iter().map(|r| r.to_vec()).collect()
    }

    /// Stacks `other` below `self`. Column names are taken from `self`.
    pub fn vstack(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if self.cols() != other.cols() {
            return Err(SugarError::DimensionMismatch(format!(
                "cannot stack {} columns onto {}",
                other.cols(),
                self.cols()
            )));
        }
        let values = concatenate(Axis(0), &[self.values.view(), other.values.view()])
            .map_err(|e| SugarError::InvalidData(e.to_string()))?;
        Ok(DataMatrix {
            values,
            col_names: self.col_names.clone(),
        })
    }

    /// Rows at `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        DataMatrix {
            values: self.values.select(Axis(0), indices),
            col_names: self.col_names.clone(),
        }
    }

    pub(crate) fn from_values_unchecked(values: Array2<f64>, col_names: Option<Vec<String>>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        DataMatrix { values, col_names }
    }
}

/// A point set with one integer class label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    data: DataMatrix,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    /// Labels must cover `0..C` with every class present.
    pub fn new(data: DataMatrix, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != data.rows() {
            return Err(SugarError::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                data.rows()
            )));
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_classes];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(SugarError::InvalidData(format!(
                "class {c} has no members (labels must be contiguous from 0)"
            )));
        }
        Ok(LabeledDataset {
            data,
            labels,
            n_classes,
        })
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices belonging to `class`.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn into_parts(self) -> (DataMatrix, Vec<usize>) {
        (self.data, self.labels)
    }

    /// Subset that keeps label values as-is; classes may become empty.
    pub fn subset(&self, indices: &[usize]) -> (DataMatrix, Vec<usize>) {
        (
            self.data.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(DataMatrix::new(array![[1.0, f64::NAN]]).is_err());
        assert!(DataMatrix::new(array![[f64::INFINITY]]).is_err());
        assert!(DataMatrix::new(Array2::zeros((0, 2))).is_err());
        assert!(DataMatrix::new(Array2::zeros((2, 0))).is_err());
        assert!(DataMatrix::new(array![[0.0]]).is_ok());
    }

    #[test]
    fn from_rows_rejects_ragged() {
        let err = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, SugarError::Ragged { row: 2, .. }));
    }

    #[test]
    fn vstack_keeps_order() {
        let a = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = DataMatrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let z = a.vstack(&b).unwrap();
        assert_eq!(z.to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert!(a.vstack(&DataMatrix::empty(3)).is_err());
        assert_eq!(a.vstack(&DataMatrix::empty(2)).unwrap(), a);
    }

    #[test]
    fn labels_must_be_contiguous() {
        let d = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(LabeledDataset::new(d.clone(), vec![0, 2, 2]).is_err());
        assert!(LabeledDataset::new(d.clone(), vec![0, 1]).is_err());
        let ld = LabeledDataset::new(d, vec![1, 0, 1]).unwrap();
        assert_eq!(ld.n_classes(), 2);
        assert_eq!(ld.class_counts(), vec![1, 2]);
        assert_eq!(ld.class_indices(1), vec![0, 2]);
    }
}
