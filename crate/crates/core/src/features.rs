//! Dense vertex and hyperedge feature matrices.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
    normalized: bool,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFiniteEntry { row, col });
        }
        let normalized = columns_are_unit(&data);
        Ok(Self { data, normalized })
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Array2::zeros((rows.len(), cols));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "feature row length",
                    expected: cols,
                    got: row.len(),
                });
            }
            for (k, &x) in row.iter().enumerate() {
                data[[i, k]] = x;
            }
        }
        Self::new(data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: Array2::zeros((rows, cols)),
            normalized: false,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    /// True when every nonzero column has unit Euclidean norm.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.outer_iter().map(|r| r.to_vec()).collect()
    }

    /// Scales every column with positive norm to unit length. Zero columns
    /// stay zero so the feature dimension is unchanged.
    pub fn column_normalize(&self) -> Result<Self> {
        let mut data = self.data.clone();
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFiniteEntry { row, col });
        }
        for mut col in data.axis_iter_mut(Axis(1)) {
            let norm = col.dot(&col).sqrt();
            if norm > 0.0 && (norm - 1.0).abs() > f64::EPSILON {
                col.mapv_inplace(|x| x / norm);
            }
        }
        Ok(Self {
            data,
            normalized: true,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest singular value by power iteration on the smaller Gram matrix.
    pub fn spectral_norm(&self, tol: f64, max_iter: usize) -> Result<f64> {
        if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "spectral_norm needs tol > 0 and max_iter >= 1 (got {tol}, {max_iter})"
            )));
        }
        if self.data.is_empty() {
            return Ok(0.0);
        }
        let x = &self.data;
        let col_side = x.ncols() <= x.nrows();
        let dim = if col_side { x.ncols() } else { x.nrows() };
        let gram = |v: &Array1<f64>| -> Array1<f64> {
            if col_side {
                x.t().dot(&x.dot(v))
            } else {
                x.dot(&x.t().dot(v))
            }
        };

        // Any fixed start works unless it is orthogonal to the top singular
        // vector; a seeded positive vector makes that a measure-zero event.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Array1<f64> = (0..dim).map(|_| 0.5 + rng.random::<f64>()).collect();
        let n0 = v.dot(&v).sqrt();
        v /= n0;

        let mut prev = f64::NAN;
        let mut estimate = 0.0;
        for _ in 0..max_iter {
            let w = gram(&v);
            estimate = v.dot(&w).max(0.0).sqrt();
            let norm = w.dot(&w).sqrt();
            if norm == 0.0 {
                return Ok(0.0);
            }
            if (estimate - prev).abs() <= tol {
                return Ok(estimate);
            }
            prev = estimate;
            v = w / norm;
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            last: estimate,
        })
    }

    pub fn spectral_norm_default(&self) -> Result<f64> {
        self.spectral_norm(1e-12, 100_000)
    }
}

fn columns_are_unit(data: &Array2<f64>) -> bool {
    data.ncols() > 0
        && data.axis_iter(Axis(1)).all(|col| {
            let norm = col.dot(&col).sqrt();
            norm == 0.0 || (norm - 1.0).abs() <= UNIT_NORM_TOL
        })
}
