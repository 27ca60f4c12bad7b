//! Linear soft-margin SVM used by every depth classifier.
//!
//! The trainer minimizes `½‖w‖² + C Σ max(0, 1 − yᵢ(wᵀxᵢ + b))` with an
//! unregularized offset. It runs dual coordinate descent on centered data with
//! the offset folded in as a constant feature, then re-optimizes the offset
//! exactly for the learned `w` (the hinge sum is piecewise linear in `b`).
//! Coordinate order is a seeded shuffle per epoch, so training is
//! deterministic for a given seed.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::linalg::{dot, norm};
use crate::rng::seeded;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training set contains only class {0}")]
    SingleClass(u8),
    #[error("training set is empty")]
    Empty,
    #[error("labels must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("{points} points but {labels} labels")]
    LengthMismatch { points: usize, labels: usize },
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("hyperplane normal has zero norm")]
    ZeroNormal,
    #[error("regularization constant must be positive, got {0}")]
    BadRegularization(f64),
}

/// Decision boundary `wᵀx + b = 0` of a depth-`k` classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    w: Vec<f64>,
    b: f64,
    w_norm: f64,
}

impl Hyperplane {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self, SvmError> {
        let w_norm = norm(&w);
        if !(w_norm > 0.0) || !w_norm.is_finite() || !b.is_finite() {
            return Err(SvmError::ZeroNormal);
        }
        Ok(Self { w, b, w_norm })
    }

    pub fn depth(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn w_norm(&self) -> f64 {
        self.w_norm
    }

    fn check(&self, x: &[f64]) -> Result<(), SvmError> {
        if x.len() != self.depth() {
            return Err(SvmError::DimensionMismatch {
                expected: self.depth(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `wᵀx + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64, SvmError> {
        self.check(x)?;
        Ok(dot(&self.w, x) + self.b)
    }

    /// Euclidean distance `|wᵀx + b| / ‖w‖` from `x` to the hyperplane.
    pub fn margin_distance(&self, x: &[f64]) -> Result<f64, SvmError> {
        Ok(self.decision(x)?.abs() / self.w_norm)
    }

    /// Class 1 when `wᵀx + b ≥ 0`, class 0 otherwise. Points exactly on the
    /// boundary go to class 1.
    pub fn predict(&self, x: &[f64]) -> Result<u8, SvmError> {
        Ok(u8::from(self.decision(x)? >= 0.0))
    }

    /// Same geometry with `(w, b)` multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SvmError> {
        Self::new(self.w.iter().map(|v| v * factor).collect(), self.b * factor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub reg_c: f64,
    pub max_epochs: usize,
    /// Stop when the spread of projected dual gradients falls below this.
    pub tolerance: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            reg_c: 1.0,
            max_epochs: 1000,
            tolerance: 1e-6,
        }
    }
}

fn signed(label: u8) -> Result<f64, SvmError> {
    match label {
        0 => Ok(-1.0),
        1 => Ok(1.0),
        other => Err(SvmError::BadLabel(other)),
    }
}

/// Primal objective `½‖w‖² + C Σ hinge` of a hyperplane on a training set.
pub fn objective<P: AsRef<[f64]>>(h: &Hyperplane, points: &[P], labels: &[u8], reg_c: f64) -> f64 {
    let hinge: f64 = points
        .iter()
        .zip(labels)
        .map(|(x, &l)| {
            let y = if l == 1 { 1.0 } else { -1.0 };
            (1.0 - y * (dot(h.w(), x.as_ref()) + h.b())).max(0.0)
        })
        .sum();
    0.5 * dot(h.w(), h.w()) + reg_c * hinge
}

/// Trains a linear SVM on `points` (all of dimension `k`) with 0/1 labels.
pub fn train_svm<P: AsRef<[f64]>>(
    points: &[P],
    labels: &[u8],
    cfg: &SvmConfig,
    seed: u64,
) -> Result<Hyperplane, SvmError> {
    if points.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    if points.is_empty() {
        return Err(SvmError::Empty);
    }
    if !(cfg.reg_c > 0.0) {
        return Err(SvmError::BadRegularization(cfg.reg_c));
    }
    let y: Vec<f64> = labels.iter().map(|&l| signed(l)).collect::<Result<_, _>>()?;
    if y.iter().all(|&v| v > 0.0) {
        return Err(SvmError::SingleClass(1));
    }
    if y.iter().all(|&v| v < 0.0) {
        return Err(SvmError::SingleClass(0));
    }
    let k = points[0].as_ref().len();
    if let Some(bad) = points.iter().find(|p| p.as_ref().len() != k) {
        return Err(SvmError::DimensionMismatch {
            expected: k,
            found: bad.as_ref().len(),
        });
    }

    let n = points.len();
    let mut center = vec![0.0; k];
    for p in points {
        for (c, v) in center.iter_mut().zip(p.as_ref()) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= n as f64);

    // Augmented, centered samples: [x − center, bias_scale].
    let radius = points
        .iter()
        .map(|p| {
            p.as_ref()
                .iter()
                .zip(&center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0_f64, f64::max);
    let bias_scale = radius.max(1.0);
    let aug: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            p.as_ref()
                .iter()
                .zip(&center)
                .map(|(a, b)| a - b)
                .chain(std::iter::once(bias_scale))
                .collect()
        })
        .collect();
    let q_diag: Vec<f64> = aug.iter().map(|x| dot(x, x)).collect();

    let c = cfg.reg_c;
    let mut alpha = vec![0.0; n];
    let mut w_aug = vec![0.0; k + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded(seed);
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let g = y[i] * dot(&w_aug, &aug[i]) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-14 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                for (wj, xj) in w_aug.iter_mut().zip(&aug[i]) {
                    *wj += step * xj;
                }
            }
        }
        if pg_max - pg_min < cfg.tolerance {
            break;
        }
    }

    let w: Vec<f64> = w_aug[..k].to_vec();
    let scores: Vec<f64> = aug.iter().map(|x| dot(&w, &x[..k])).collect();
    let offset = best_offset(&scores, &y, w_aug[k] * bias_scale);
    let b = offset - dot(&w, &center);
    Hyperplane::new(w, b)
}

/// Minimizes `Σ max(0, 1 − yᵢ(sᵢ + b))` over `b`. Keeps `current` when it is
/// already optimal, otherwise returns the midpoint of the optimal interval.
fn best_offset(scores: &[f64], y: &[f64], current: f64) -> f64 {
    let mut breaks: Vec<f64> = scores.iter().zip(y).map(|(s, yi)| yi - s).collect();
    breaks.sort_by(f64::total_cmp);
    let positives = y.iter().filter(|&&v| v > 0.0).count();
    // Slope starts at −positives and rises by one at every breakpoint.
    let lo = if positives == 0 {
        f64::NEG_INFINITY
    } else {
        breaks[positives - 1]
    };
    let hi = breaks.get(positives).copied().unwrap_or(f64::INFINITY);
    if current >= lo && current <= hi {
        current
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else {
        hi
    }
}
