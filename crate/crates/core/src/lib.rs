//! Joint data deepening and prefetching for energy-efficient edge learning.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod deepening;
pub mod embedding;
pub mod linalg;
pub mod prefetch;
pub mod report;
pub mod rng;
pub mod sim;
pub mod special;
pub mod svm;
pub mod threshold;
pub mod validate;

pub use channel::{ChannelModel, Fading};
pub use config::{ExperimentManifest, Scheme, SimConfig};
pub use dataset::{parse_idx, LabeledDataset, QuantizationSpec};
pub use deepening::{run_deepening, DeepeningConfig, DeepeningState};
pub use embedding::{fit_pca, EmbeddingModel};
pub use linalg::Matrix;
pub use prefetch::{optimal_prefetch, PrefetchContext, RhoMode};
pub use sim::{run_experiment, PreparedPair, RoundLedger, SchemeRun};
pub use svm::{train_svm, Hyperplane, SvmConfig};
pub use threshold::{compute_d_bar, ClassGaussian, ThresholdConfig, ThresholdResult};
