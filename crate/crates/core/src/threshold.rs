//! Ambiguity threshold for a depth classifier.
//!
//! Each class is modelled as one Gaussian fitted to its labelled points. Both
//! Gaussians are truncated at the same Mahalanobis radius `δ̄`, the radius
//! enclosing mass `p_th` of a `k`-variate normal. The threshold `d̄` is the
//! largest distance to the hyperplane found inside the overlap of the two
//! truncated regions, searched over the training points plus seeded draws
//! from each Gaussian.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{cholesky, dot, solve_lower, Matrix};
use crate::rng::{derive_seed, seeded};
use crate::special::{chi_square_quantile, SpecialError};
use crate::svm::Hyperplane;

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("need at least 2 points to fit a class Gaussian, got {0}")]
    InsufficientData(usize),
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covariance could not be made positive definite")]
    NotPositiveDefinite,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassGaussian {
    class_id: u8,
    mean: Vec<f64>,
    cov: Matrix,
    chol: Matrix,
    ridge: f64,
}

/// Sample mean and covariance (denominator `N`) of one class.
///
/// A covariance that fails Cholesky gets `εI` added with
/// `ε = 1e-6 · trace / k`, growing tenfold until the factorization succeeds.
pub fn fit_class_gaussian<P: AsRef<[f64]>>(
    points: &[P],
    class_id: u8,
) -> Result<ClassGaussian, ThresholdError> {
    let n = points.len();
    if n < 2 {
        return Err(ThresholdError::InsufficientData(n));
    }
    let k = points[0].as_ref().len();
    let mut mean = vec![0.0; k];
    for p in points {
        let p = p.as_ref();
        if p.len() != k {
            return Err(ThresholdError::DimensionMismatch {
                expected: k,
                found: p.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = Matrix::zeros(k, k);
    for p in points {
        let d: Vec<f64> = p.as_ref().iter().zip(&mean).map(|(a, b)| a - b).collect();
        for i in 0..k {
            for j in 0..=i {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..=i {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let (cov, chol, ridge) = regularized_cholesky(cov)?;
    Ok(ClassGaussian {
        class_id,
        mean,
        cov,
        chol,
        ridge,
    })
}

fn regularized_cholesky(cov: Matrix) -> Result<(Matrix, Matrix, f64), ThresholdError> {
    if let Some(l) = cholesky(&cov) {
        return Ok((cov, l, 0.0));
    }
    let k = cov.rows();
    let base = cov.trace() / k as f64;
    let mut eps = if base > 0.0 { 1e-6 * base } else { 1e-12 };
    for _ in 0..12 {
        let mut reg = cov.clone();
        for i in 0..k {
            reg[(i, i)] += eps;
        }
        if let Some(l) = cholesky(&reg) {
            return Ok((reg, l, eps));
        }
        eps *= 10.0;
    }
    Err(ThresholdError::NotPositiveDefinite)
}

impl ClassGaussian {
    /// Builds a Gaussian from explicit parameters (regularizing `cov` the same
    /// way as [`fit_class_gaussian`] if needed).
    pub fn from_parts(class_id: u8, mean: Vec<f64>, cov: Matrix) -> Result<Self, ThresholdError> {
        if cov.rows() != mean.len() || cov.cols() != mean.len() {
            return Err(ThresholdError::DimensionMismatch {
                expected: mean.len(),
                found: cov.rows(),
            });
        }
        let (cov, chol, ridge) = regularized_cholesky(cov)?;
        Ok(Self {
            class_id,
            mean,
            cov,
            chol,
            ridge,
        })
    }

    pub fn class_id(&self) -> u8 {
        self.class_id
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Covariance actually used, including any ridge.
    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn cov_chol(&self) -> &Matrix {
        &self.chol
    }

    /// Ridge added to the diagonal during fitting (0 when none was needed).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// `sqrt((x − μ)ᵀ Σ⁻¹ (x − μ))` via a forward solve against the factor.
    pub fn mahalanobis(&self, x: &[f64]) -> Result<f64, ThresholdError> {
        if x.len() != self.dim() {
            return Err(ThresholdError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let d: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let z = solve_lower(&self.chol, &d);
        Ok(dot(&z, &z).sqrt())
    }

    /// One draw `μ + L z` with `z ~ N(0, I)`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.mean.clone();
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dot(&self.chol.row(i)[..=i], &z[..=i]);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    /// Shared Mahalanobis truncation radius `δ̄`.
    pub delta_bar: f64,
    /// Distance threshold `d̄`; samples with `d ≤ d̄` stay ambiguous.
    pub d_bar: f64,
    pub p_th: f64,
    /// True when no candidate point fell inside both truncated regions.
    pub overlap_empty: bool,
    /// Number of candidate points found inside the overlap.
    pub candidates: usize,
}

/// Threshold search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub p_th: f64,
    /// Draws taken from each class Gaussian.
    pub mc_samples: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            p_th: 0.95,
            mc_samples: 20_000,
        }
    }
}

/// Computes `d̄` for hyperplane `h` from the two class Gaussians.
///
/// The candidate set is every point of `points_in_s` inside both truncated
/// regions plus the in-overlap subset of `cfg.mc_samples` seeded draws from
/// each Gaussian. An empty candidate set yields `d̄ = 0`.
pub fn compute_d_bar<P: AsRef<[f64]>>(
    h: &Hyperplane,
    g0: &ClassGaussian,
    g1: &ClassGaussian,
    cfg: &ThresholdConfig,
    points_in_s: &[P],
    seed: u64,
) -> Result<ThresholdResult, ThresholdError> {
    let k = h.depth();
    for found in [g0.dim(), g1.dim()] {
        if found != k {
            return Err(ThresholdError::DimensionMismatch { expected: k, found });
        }
    }
    let delta_bar = chi_square_quantile(cfg.p_th, k as u32)?;

    let mut d_bar = 0.0_f64;
    let mut candidates = 0usize;
    let mut consider = |x: &[f64]| -> Result<(), ThresholdError> {
        if g0.mahalanobis(x)? <= delta_bar && g1.mahalanobis(x)? <= delta_bar {
            candidates += 1;
            let d = h
                .margin_distance(x)
                .map_err(|_| ThresholdError::DimensionMismatch {
                    expected: k,
                    found: x.len(),
                })?;
            d_bar = d_bar.max(d);
        }
        Ok(())
    };

    for p in points_in_s {
        consider(p.as_ref())?;
    }
    for (tag, g) in [(0u64, g0), (1u64, g1)] {
        let mut rng = seeded(derive_seed(seed, tag));
        for _ in 0..cfg.mc_samples {
            let x = g.sample(&mut rng);
            consider(&x)?;
        }
    }

    Ok(ThresholdResult {
        delta_bar,
        d_bar,
        p_th: cfg.p_th,
        overlap_empty: candidates == 0,
        candidates,
    })
}
