//! Dense activation matrices and ground-truth label vectors.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Dense row-major matrix of activations: one row per sample, one column per node.
///
/// Every value is finite and the shape is at least 1×1. Row identifiers are
/// optional; when present there is exactly one per row and they are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    row_ids: Option<Vec<String>>,
}

impl ActivationMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "activation matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "activation matrix".into(),
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self {
            rows,
            cols,
            values,
            row_ids: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {i} has {} values, expected {cols}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.rows {
            return Err(Error::Shape(format!(
                "{} row identifiers for {} rows",
                ids.len(),
                self.rows
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Precondition(format!(
                    "duplicate row identifier '{id}'"
                )));
            }
        }
        self.row_ids = Some(ids);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Copies the given rows, in the given order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.rows) {
            return Err(Error::Precondition(format!(
                "row index {bad} out of bounds for {} rows",
                self.rows
            )));
        }
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        let m = Self::new(indices.len(), self.cols, values)?;
        match &self.row_ids {
            Some(ids) => m.with_row_ids(indices.iter().map(|&i| ids[i].clone()).collect()),
            None => Ok(m),
        }
    }

    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
            row_ids: self.row_ids.clone(),
        }
    }
}

/// Per-row ground truth: `true` marks a synthesized (anomalous) sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<bool>,
}

impl LabelVector {
    pub fn new(labels: Vec<bool>) -> Self {
        Self { labels }
    }

    /// Builds labels from 0/1 flags, rejecting anything else.
    pub fn from_flags(flags: &[u8]) -> Result<Self> {
        if let Some(i) = flags.iter().position(|&f| f > 1) {
            return Err(Error::Precondition(format!(
                "label {i} is {}, expected 0 or 1",
                flags[i]
            )));
        }
        Ok(Self::new(flags.iter().map(|&f| f == 1).collect()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i]).collect()
    }

    pub fn count_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn check_matches(&self, m: &ActivationMatrix) -> Result<()> {
        if self.labels.len() != m.rows() {
            return Err(Error::Shape(format!(
                "{} labels for a matrix with {} rows",
                self.labels.len(),
                m.rows()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = ActivationMatrix::new(2, 2, vec![1.0, 2.0, f64::NAN, 4.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 0, .. }));
        assert!(ActivationMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_empty_and_wrong_length() {
        assert!(ActivationMatrix::new(0, 3, vec![]).is_err());
        assert!(ActivationMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn row_ids_must_be_unique() {
        let m = ActivationMatrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        assert!(m
            .clone()
            .with_row_ids(vec!["a".into(), "a".into()])
            .is_err());
        let m = m.with_row_ids(vec!["a".into(), "b".into()]).unwrap();
        let s = m.select_rows(&[1]).unwrap();
        assert_eq!(s.row_ids().unwrap(), &["b".to_string()]);
        assert_eq!(s.values(), &[2.0]);
    }

    #[test]
    fn labels_only_accept_binary() {
        assert!(LabelVector::from_flags(&[0, 1, 2]).is_err());
        let l = LabelVector::from_flags(&[0, 1, 1]).unwrap();
        assert_eq!(l.positives(), vec![1, 2]);
    }
}
