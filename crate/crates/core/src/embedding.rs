//! PCA embedding that orders features by explained variance.
//!
//! Feature `j` of an embedded sample is its coordinate along the `j`-th
//! principal axis, so truncating to the first `k` features keeps the `k` most
//! important ones.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::LabeledDataset;
use crate::linalg::{dot, jacobi_eigen, subspace_eigen, Matrix};
use crate::rng::seeded;

/// Pixels are scaled into `[0, 1]` before fitting and embedding.
pub const PIXEL_SCALE: f64 = 1.0 / 255.0;

/// Above this dimension the leading eigenpairs come from subspace iteration
/// instead of a full Jacobi decomposition.
pub const FULL_DECOMPOSITION_MAX_DIM: usize = 96;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding size {f_dim} out of range 1..={max}")]
    InvalidRange { f_dim: usize, max: usize },
    #[error("need at least 2 samples to fit PCA, got {0}")]
    TooFewSamples(usize),
    #[error("data has zero variance in every direction")]
    Degenerate,
    #[error("expected a vector of dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sidecar I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed sidecar: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    mean: Vec<f64>,
    /// `F × D`, orthonormal rows ordered by descending explained variance.
    components: Matrix,
    explained_variance: Vec<f64>,
}

/// Fits PCA on the dataset's pixels scaled by [`PIXEL_SCALE`].
pub fn fit_pca(ds: &LabeledDataset, f_dim: usize) -> Result<EmbeddingModel, EmbeddingError> {
    let data = pixel_matrix(ds);
    fit_pca_rows(&data, f_dim)
}

/// Scaled pixel matrix, one sample per row.
pub fn pixel_matrix(ds: &LabeledDataset) -> Matrix {
    let data = ds
        .samples()
        .flat_map(|s| s.iter().map(|&p| p as f64 * PIXEL_SCALE))
        .collect();
    Matrix::from_vec(ds.len(), ds.dim(), data)
}

/// Fits PCA on real-valued rows (`M × D`).
pub fn fit_pca_rows(data: &Matrix, f_dim: usize) -> Result<EmbeddingModel, EmbeddingError> {
    let (m, d) = (data.rows(), data.cols());
    if m < 2 {
        return Err(EmbeddingError::TooFewSamples(m));
    }
    let max = m.min(d);
    if f_dim == 0 || f_dim > max {
        return Err(EmbeddingError::InvalidRange { f_dim, max });
    }

    let mut mean = vec![0.0; d];
    for row in data.row_iter() {
        for (acc, x) in mean.iter_mut().zip(row) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m as f64);

    let cov = covariance(data, &mean);
    if cov.trace() <= 0.0 {
        return Err(EmbeddingError::Degenerate);
    }

    let eig = if d <= FULL_DECOMPOSITION_MAX_DIM {
        jacobi_eigen(&cov, 1e-15, 100)
    } else {
        let mut rng = seeded(0x5043_41);
        subspace_eigen(&cov, f_dim, 1e-10, 10_000, &mut rng)
    };

    let mut components = Matrix::zeros(f_dim, d);
    for i in 0..f_dim {
        let row = components.row_mut(i);
        row.copy_from_slice(eig.vectors.row(i));
        let pivot = row
            .iter()
            .copied()
            .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let explained_variance = eig.values[..f_dim].iter().map(|v| v.max(0.0)).collect();
    Ok(EmbeddingModel {
        mean,
        components,
        explained_variance,
    })
}

/// Sample covariance (denominator `M − 1`) of the rows of `data`.
fn covariance(data: &Matrix, mean: &[f64]) -> Matrix {
    let (m, d) = (data.rows(), data.cols());
    let mut centered_t = Matrix::zeros(d, m);
    for (i, row) in data.row_iter().enumerate() {
        for (j, (x, mu)) in row.iter().zip(mean).enumerate() {
            centered_t[(j, i)] = x - mu;
        }
    }
    let lower: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            (0..=i)
                .map(|j| dot(centered_t.row(i), centered_t.row(j)) / (m - 1) as f64)
                .collect()
        })
        .collect();
    let mut cov = Matrix::zeros(d, d);
    for (i, row) in lower.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

impl EmbeddingModel {
    pub fn f_dim(&self) -> usize {
        self.components.rows()
    }

    /// Raw input dimension `D`.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    /// Variance captured by each component. Empty for models loaded from a
    /// sidecar, which stores only the mean and components.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `x = components · (y − mean)`.
    pub fn embed(&self, y: &[f64]) -> Result<Vec<f64>, EmbeddingError> {
        if y.len() != self.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        let centered: Vec<f64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        Ok(self.components.matvec(&centered))
    }

    pub fn embed_pixels(&self, pixels: &[u8]) -> Result<Vec<f64>, EmbeddingError> {
        let y: Vec<f64> = pixels.iter().map(|&p| p as f64 * PIXEL_SCALE).collect();
        self.embed(&y)
    }

    /// Embeds every sample of a dataset; one row per sample.
    pub fn embed_dataset(&self, ds: &LabeledDataset) -> Result<Matrix, EmbeddingError> {
        let rows: Vec<Vec<f64>> = ds
            .samples()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|s| self.embed_pixels(s))
            .collect::<Result<_, _>>()?;
        Ok(Matrix::from_rows(&rows).unwrap_or_else(|| Matrix::zeros(0, self.f_dim())))
    }

    /// `‖y − mean − componentsᵀ x‖` using the first `f` components.
    pub fn reconstruction_error(&self, y: &[f64], f: usize) -> Result<f64, EmbeddingError> {
        let x = self.embed(y)?;
        let mut residual: Vec<f64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (j, xj) in x.iter().enumerate().take(f) {
            for (r, c) in residual.iter_mut().zip(self.components.row(j)) {
                *r -= xj * c;
            }
        }
        Ok(dot(&residual, &residual).sqrt())
    }

    /// CSV sidecar: the mean row, then one row per component.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut line = |row: &[f64]| {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        };
        line(&self.mean);
        for row in self.components.row_iter() {
            line(row);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, EmbeddingError> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .map_err(|e| EmbeddingError::Malformed(format!("line {}: {e}", i + 1)))
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let (mean, comps) = rows
            .split_first()
            .ok_or_else(|| EmbeddingError::Malformed("empty sidecar".into()))?;
        let components = Matrix::from_rows(comps)
            .filter(|c| c.cols() == mean.len() && c.rows() > 0)
            .ok_or_else(|| EmbeddingError::Malformed("component rows do not match the mean".into()))?;
        Ok(Self {
            mean: mean.clone(),
            components,
            explained_variance: Vec::new(),
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
