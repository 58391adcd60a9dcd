//! Empirical p-values of test activations against a background (null) sample.
//!
//! For test activation `A[i][j]` and background activations `B[z][j]`,
//!
//! ```text
//! p[i][j] = (1 + #{z : B[z][j] >= A[i][j]}) / (Z + 1)
//! ```
//!
//! so every p-value is a multiple of `1/(Z+1)` in `[1/(Z+1), 1]`. The
//! matrix stores the integer numerator (the "level") and converts on read.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::ActivationMatrix;

/// Matrix of empirical p-values, stored as numerators over `Z + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PValueMatrix {
    rows: usize,
    cols: usize,
    background_size: usize,
    levels: Vec<u32>,
}

impl PValueMatrix {
    /// Builds a matrix from numerators; each must lie in `1..=Z+1`.
    pub fn from_levels(
        rows: usize,
        cols: usize,
        background_size: usize,
        levels: Vec<u32>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "p-value matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if background_size == 0 {
            return Err(Error::Precondition("background size must be >= 1".into()));
        }
        if u32::try_from(background_size + 1).is_err() {
            return Err(Error::Precondition(format!(
                "background size {background_size} too large"
            )));
        }
        if levels.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} p-value matrix needs {} entries, got {}",
                rows * cols,
                levels.len()
            )));
        }
        let top = (background_size + 1) as u32;
        if let Some(pos) = levels.iter().position(|&l| l == 0 || l > top) {
            return Err(Error::Domain(format!(
                "p-value numerator {} at (row {}, col {}) outside 1..={top}",
                levels[pos],
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            background_size,
            levels,
        })
    }

    /// Builds a matrix from real p-values that must be multiples of `1/(Z+1)`.
    pub fn from_values(
        rows: usize,
        cols: usize,
        background_size: usize,
        values: &[f64],
    ) -> Result<Self> {
        let denom = (background_size + 1) as f64;
        let mut levels = Vec::with_capacity(values.len());
        for (pos, &p) in values.iter().enumerate() {
            let scaled = p * denom;
            let rounded = scaled.round();
            if !p.is_finite() || (scaled - rounded).abs() >= 1e-9 || rounded < 1.0 {
                return Err(Error::Domain(format!(
                    "p-value {p} at index {pos} is not a positive multiple of 1/{denom}"
                )));
            }
            levels.push(rounded as u32);
        }
        Self::from_levels(rows, cols, background_size, levels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of background samples `Z` the p-values were computed against.
    pub fn background_size(&self) -> usize {
        self.background_size
    }

    #[inline]
    pub fn level(&self, row: usize, col: usize) -> u32 {
        self.levels[row * self.cols + col]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        level_to_pvalue(self.level(row, col), self.background_size)
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn to_values(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|&l| level_to_pvalue(l, self.background_size))
            .collect()
    }

    /// P-values of the submatrix `rows × cols`, flattened row-major.
    pub fn values_in(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                out.push(self.get(r, c));
            }
        }
        out
    }

    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if rows.iter().any(|&r| r >= self.rows) || cols.iter().any(|&c| c >= self.cols) {
            return Err(Error::Precondition("restriction index out of bounds".into()));
        }
        let mut levels = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                levels.push(self.level(r, c));
            }
        }
        Self::from_levels(rows.len(), cols.len(), self.background_size, levels)
    }

    pub fn transpose(&self) -> Self {
        let mut levels = Vec::with_capacity(self.levels.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                levels.push(self.level(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            background_size: self.background_size,
            levels,
        }
    }

    /// The p-values as a real matrix, for export in the activation formats.
    pub fn to_matrix(&self) -> ActivationMatrix {
        ActivationMatrix::new(self.rows, self.cols, self.to_values())
            .expect("p-values are finite and the shape is valid")
    }
}

#[inline]
pub(crate) fn level_to_pvalue(level: u32, background_size: usize) -> f64 {
    level as f64 / (background_size + 1) as f64
}

/// Per-node sorted background activations, built once and reused for every
/// test batch scanned against the same null.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    size: usize,
    sorted_columns: Vec<Vec<f64>>,
}

impl BackgroundModel {
    pub fn new(background: &ActivationMatrix) -> Result<Self> {
        if background.rows() == 0 {
            return Err(Error::Precondition("background must contain at least one row".into()));
        }
        if u32::try_from(background.rows() + 1).is_err() {
            return Err(Error::Precondition("background too large".into()));
        }
        let sorted_columns = (0..background.cols())
            .into_par_iter()
            .map(|j| {
                let mut col = background.column(j);
                col.sort_unstable_by(f64::total_cmp);
                col
            })
            .collect();
        Ok(Self {
            size: background.rows(),
            sorted_columns,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cols(&self) -> usize {
        self.sorted_columns.len()
    }

    /// Numerator `1 + #{background >= value}` for node `col`.
    #[inline]
    pub fn level(&self, col: usize, value: f64) -> u32 {
        let sorted = &self.sorted_columns[col];
        let below = sorted.partition_point(|&b| b < value);
        (1 + sorted.len() - below) as u32
    }

    pub fn pvalues(&self, test: &ActivationMatrix) -> Result<PValueMatrix> {
        if test.cols() != self.cols() {
            return Err(Error::Shape(format!(
                "test matrix has {} columns, background has {}",
                test.cols(),
                self.cols()
            )));
        }
        let cols = test.cols();
        let mut levels = vec![0u32; test.rows() * cols];
        levels
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, out)| {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = self.level(j, test.get(i, j));
                }
            });
        PValueMatrix::from_levels(test.rows(), cols, self.size, levels)
    }
}

/// Empirical upper-tail p-values of `test` against `background`.
pub fn compute_pvalues(
    background: &ActivationMatrix,
    test: &ActivationMatrix,
) -> Result<PValueMatrix> {
    if background.cols() != test.cols() {
        return Err(Error::Shape(format!(
            "background has {} columns, test has {}",
            background.cols(),
            test.cols()
        )));
    }
    BackgroundModel::new(background)?.pvalues(test)
}

/// Flips every sign so that upper-tail p-values measure lower-than-expected
/// activations. Zeros come out as `+0.0`.
pub fn negate_for_lower_tail(m: &ActivationMatrix) -> ActivationMatrix {
    m.map_values(|v| -v + 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct-count definition, kept independent of the sorted search.
    fn direct_levels(background: &ActivationMatrix, test: &ActivationMatrix) -> Vec<u32> {
        let mut out = Vec::new();
        for i in 0..test.rows() {
            for j in 0..test.cols() {
                let a = test.get(i, j);
                let ge = (0..background.rows())
                    .filter(|&z| background.get(z, j) >= a)
                    .count();
                out.push(1 + ge as u32);
            }
        }
        out
    }

    fn col(values: &[f64]) -> ActivationMatrix {
        ActivationMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn worked_examples() {
        let bg = col(&[0.1, 0.2, 0.3, 0.4]);
        let p = compute_pvalues(&bg, &col(&[0.5, 0.05, 0.25])).unwrap();
        assert_eq!(p.get(0, 0), 0.2);
        assert_eq!(p.get(1, 0), 1.0);
        assert_eq!(p.get(2, 0), 0.6);
    }

    #[test]
    fn ties_with_background_count_as_greater_or_equal() {
        let bg = col(&[0.1, 0.2, 0.3, 0.4]);
        let p = compute_pvalues(&bg, &col(&[0.1, 0.4])).unwrap();
        // tied with the minimum -> every background value is >= it
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(1, 0), 0.4);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let bg = ActivationMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let t = ActivationMatrix::new(1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(compute_pvalues(&bg, &t), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_background_is_rejected() {
        assert!(PValueMatrix::from_levels(1, 1, 0, vec![1]).is_err());
    }

    #[test]
    fn values_are_multiples_of_inverse_background_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bg: Vec<f64> = (0..37 * 4).map(|_| rng.random::<f64>()).collect();
        let t: Vec<f64> = (0..20 * 4).map(|_| rng.random::<f64>() * 1.2 - 0.1).collect();
        let bg = ActivationMatrix::new(37, 4, bg).unwrap();
        let t = ActivationMatrix::new(20, 4, t).unwrap();
        let p = compute_pvalues(&bg, &t).unwrap();
        for v in p.to_values() {
            assert!((1.0 / 38.0..=1.0).contains(&v));
            let scaled = v * 38.0;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn sorted_search_matches_direct_count_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let z = rng.random_range(1..40);
            let m = rng.random_range(1..30);
            let j = rng.random_range(1..8);
            // coarse grid so ties are frequent
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n).map(|_| rng.random_range(0..10) as f64 / 4.0).collect()
            };
            let bg = ActivationMatrix::new(z, j, draw(z * j)).unwrap();
            let t = ActivationMatrix::new(m, j, draw(m * j)).unwrap();
            let p = compute_pvalues(&bg, &t).unwrap();
            assert_eq!(p.levels(), direct_levels(&bg, &t).as_slice());
        }
    }

    #[test]
    fn negation_examples() {
        let m = ActivationMatrix::new(1, 3, vec![1.0, -2.0, 0.0]).unwrap();
        let n = negate_for_lower_tail(&m);
        assert_eq!(n.values(), &[-1.0, 2.0, 0.0]);
        assert!(n.get(0, 2).is_sign_positive());
        assert_eq!(negate_for_lower_tail(&n), m);
    }

    #[test]
    fn from_values_checks_grid() {
        assert!(PValueMatrix::from_values(1, 2, 4, &[0.2, 1.0]).is_ok());
        assert!(PValueMatrix::from_values(1, 1, 4, &[0.25]).is_err());
    }

    proptest! {
        #[test]
        fn larger_activation_never_has_larger_pvalue(
            bg in proptest::collection::vec(-5.0f64..5.0, 1..50),
            a in -6.0f64..6.0,
            b in -6.0f64..6.0,
        ) {
            let model = BackgroundModel::new(&col(&bg)).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(model.level(0, hi) <= model.level(0, lo));
        }
    }
}
