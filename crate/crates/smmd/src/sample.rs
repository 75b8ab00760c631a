//! Batches of latent codes: an n×d matrix with one point per row.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// An n×d batch of points. Rows are points z_i, columns are latent dimensions.
///
/// Construction validates that the batch is nonempty and every entry is
/// finite; estimators rely on both.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Array2<f64>,
}

impl Sample {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(Error::EmptySample);
        }
        for ((row, col), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self { data })
    }

    /// Builds a sample from row slices, checking that all rows agree in length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        let d = rows[0].len();
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: r.len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), d), flat)
            .expect("row-major shape checked above");
        Self::new(data)
    }

    /// Number of points n.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Latent dimension d.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Rows as contiguous slices (the data is row-major by construction).
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + Clone {
        self.as_flat().chunks_exact(self.dim())
    }

    pub(crate) fn as_flat(&self) -> &[f64] {
        self.data
            .as_slice()
            .expect("sample storage is contiguous row-major")
    }
}
