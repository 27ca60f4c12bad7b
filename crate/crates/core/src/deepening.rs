//! Depth-wise classifier cascade.
//!
//! Round `k` trains a linear SVM on the first `k` embedded features of the
//! current ambiguous set `S(k)`, computes its distance threshold `d̄(k)`, and
//! keeps in `S(k+1)` exactly the members with `d ≤ d̄(k)`. Inference walks the
//! same cascade and stops at the first depth where a sample is clear of the
//! threshold.

use log::warn;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::rng::derive_seed;
use crate::svm::{train_svm, Hyperplane, SvmConfig, SvmError};
use crate::threshold::{
    compute_d_bar, fit_class_gaussian, ThresholdConfig, ThresholdError, ThresholdResult,
};
use crate::special::chi_square_quantile;

#[derive(Debug, Error, PartialEq)]
pub enum DeepeningError {
    #[error("maximum depth must be at least 1")]
    ZeroDepth,
    #[error("maximum depth {max_depth} exceeds the {features} available features")]
    TooDeep { max_depth: usize, features: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("cascade has no trained depth")]
    EmptyCascade,
    #[error("sample has {found} features, cascade needs {needed}")]
    DimensionMismatch { needed: usize, found: usize },
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepeningConfig {
    /// `K`, the number of rounds / deepest classifier.
    pub max_depth: usize,
    pub svm: SvmConfig,
    pub threshold: ThresholdConfig,
}

impl Default for DeepeningConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            svm: SvmConfig::default(),
            threshold: ThresholdConfig::default(),
        }
    }
}

/// One trained depth of the cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthStage {
    pub depth: usize,
    pub hyperplane: Hyperplane,
    pub threshold: ThresholdResult,
    /// Misclassification rate of this depth on its own training set `S(k)`.
    pub train_error: f64,
}

/// Result of one deepening round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    /// `None` when `S(k)` held a single class and no classifier could be trained.
    pub stage: Option<DepthStage>,
    pub next_aci: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepeningState {
    pub max_depth: usize,
    /// `S(1), S(2), …`; always one longer than `stages` unless training stopped
    /// on a degenerate set.
    pub aci_sets: Vec<Vec<usize>>,
    pub stages: Vec<DepthStage>,
}

fn prefix(features: &Matrix, i: usize, k: usize) -> &[f64] {
    &features.row(i)[..k]
}

/// Runs round `k` on the ambiguous set `aci` (indices into `features`).
pub fn deepen_round(
    features: &Matrix,
    labels: &[u8],
    aci: &[usize],
    depth: usize,
    cfg: &DeepeningConfig,
    seed: u64,
) -> Result<RoundOutcome, DeepeningError> {
    if depth == 0 {
        return Err(DeepeningError::ZeroDepth);
    }
    if depth > features.cols() {
        return Err(DeepeningError::TooDeep {
            max_depth: depth,
            features: features.cols(),
        });
    }
    let points: Vec<&[f64]> = aci.iter().map(|&i| prefix(features, i, depth)).collect();
    let y: Vec<u8> = aci.iter().map(|&i| labels[i]).collect();

    let hyperplane = match train_svm(&points, &y, &cfg.svm, derive_seed(seed, 2 * depth as u64)) {
        Ok(h) => h,
        Err(err @ (SvmError::SingleClass(_) | SvmError::Empty | SvmError::ZeroNormal)) => {
            warn!("depth {depth}: {err}; stopping the cascade");
            return Ok(RoundOutcome {
                stage: None,
                next_aci: Vec::new(),
            });
        }
        Err(err) => return Err(err.into()),
    };

    let class_points = |c: u8| -> Vec<&[f64]> {
        points
            .iter()
            .zip(&y)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| *p)
            .collect()
    };
    let (c0, c1) = (class_points(0), class_points(1));
    let threshold = if c0.len() < 2 || c1.len() < 2 {
        // Too few points to fit a class Gaussian: no overlap region to speak of.
        ThresholdResult {
            delta_bar: chi_square_quantile(cfg.threshold.p_th, depth as u32)
                .map_err(ThresholdError::from)?,
            d_bar: 0.0,
            p_th: cfg.threshold.p_th,
            overlap_empty: true,
            candidates: 0,
        }
    } else {
        let g0 = fit_class_gaussian(&c0, 0)?;
        let g1 = fit_class_gaussian(&c1, 1)?;
        compute_d_bar(
            &hyperplane,
            &g0,
            &g1,
            &cfg.threshold,
            &points,
            derive_seed(seed, 2 * depth as u64 + 1),
        )?
    };

    let mut wrong = 0usize;
    let mut next_aci = Vec::new();
    for (&i, p) in aci.iter().zip(&points) {
        if hyperplane.predict(p)? != labels[i] {
            wrong += 1;
        }
        if hyperplane.margin_distance(p)? <= threshold.d_bar {
            next_aci.push(i);
        }
    }
    Ok(RoundOutcome {
        stage: Some(DepthStage {
            depth,
            hyperplane,
            threshold,
            train_error: wrong as f64 / aci.len() as f64,
        }),
        next_aci,
    })
}

/// Builds the cascade for `k = 1..=K`, stopping once `S(k+1)` is empty.
pub fn run_deepening(
    features: &Matrix,
    labels: &[u8],
    cfg: &DeepeningConfig,
    seed: u64,
) -> Result<DeepeningState, DeepeningError> {
    if cfg.max_depth == 0 {
        return Err(DeepeningError::ZeroDepth);
    }
    if cfg.max_depth > features.cols() {
        return Err(DeepeningError::TooDeep {
            max_depth: cfg.max_depth,
            features: features.cols(),
        });
    }
    if features.rows() != labels.len() {
        return Err(DeepeningError::LengthMismatch {
            rows: features.rows(),
            labels: labels.len(),
        });
    }
    let mut state = DeepeningState {
        max_depth: cfg.max_depth,
        aci_sets: vec![(0..labels.len()).collect()],
        stages: Vec::new(),
    };
    for depth in 1..=cfg.max_depth {
        let current = state.aci_sets.last().expect("S(1) always present");
        if current.is_empty() {
            break;
        }
        let outcome = deepen_round(features, labels, current, depth, cfg, seed)?;
        let Some(stage) = outcome.stage else {
            state.aci_sets.push(Vec::new());
            break;
        };
        state.stages.push(stage);
        state.aci_sets.push(outcome.next_aci);
    }
    Ok(state)
}

impl DeepeningState {
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    /// `S(k)` for 1-based `k`, if it was formed.
    pub fn aci_set(&self, k: usize) -> Option<&[usize]> {
        k.checked_sub(1)
            .and_then(|i| self.aci_sets.get(i))
            .map(Vec::as_slice)
    }

    /// Hierarchical inference: returns `(class, depth used)`.
    pub fn infer(&self, x: &[f64]) -> Result<(u8, usize), DeepeningError> {
        let last = self.stages.last().ok_or(DeepeningError::EmptyCascade)?;
        if x.len() < last.depth {
            return Err(DeepeningError::DimensionMismatch {
                needed: last.depth,
                found: x.len(),
            });
        }
        for stage in &self.stages {
            let xk = &x[..stage.depth];
            if stage.hyperplane.margin_distance(xk)? > stage.threshold.d_bar {
                return Ok((stage.hyperplane.predict(xk)?, stage.depth));
            }
        }
        Ok((last.hyperplane.predict(&x[..last.depth])?, last.depth))
    }

    /// Error rate of [`Self::infer`] over the rows of `features`.
    pub fn error_rate(&self, features: &Matrix, labels: &[u8]) -> Result<f64, DeepeningError> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let mut wrong = 0usize;
        for (row, &l) in features.row_iter().zip(labels) {
            if self.infer(row)?.0 != l {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / labels.len() as f64)
    }
}
