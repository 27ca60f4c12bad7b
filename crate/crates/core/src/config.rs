//! Simulation settings and the experiment manifest.
//!
//! The manifest is a flat TOML file with three sections:
//!
//! ```toml
//! [data]
//! train_images = "data/mnist/train-images-idx3-ubyte"
//! train_labels = "data/mnist/train-labels-idx1-ubyte"
//! test_images = "data/mnist/t10k-images-idx3-ubyte"
//! test_labels = "data/mnist/t10k-labels-idx1-ubyte"
//!
//! [sim]
//! rounds = 10
//! slot = 1.0
//! tau = 0.5
//!
//! [experiment]
//! seeds = [0, 1, 2, 3, 4]
//! pairs = "all"
//! ```
//!
//! Every `[sim]` key is optional; see [`SimConfig::default`]. Relative data
//! paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelModel, Fading};
use crate::deepening::DeepeningConfig;
use crate::prefetch::RhoMode;
use crate::svm::SvmConfig;
use crate::threshold::ThresholdConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Jd2p,
    DeepeningOnly,
    FullOffload,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Jd2p, Scheme::DeepeningOnly, Scheme::FullOffload];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Jd2p => "jd2p",
            Scheme::DeepeningOnly => "deepening_only",
            Scheme::FullOffload => "full_offload",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    #[default]
    Gamma,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Number of rounds `K`.
    pub rounds: usize,
    /// Slot length `t0` (s).
    pub slot: f64,
    /// Training / prefetch window `τ` (s); offloading gets `t0 − τ`.
    pub tau: f64,
    /// Quantization bits per feature `α`.
    pub bits_per_feature: u32,
    pub p_th: f64,
    pub fading: FadingKind,
    /// Gamma fading shape `β`.
    pub beta: f64,
    /// Energy coefficient `λ`.
    pub lambda_coef: f64,
    /// Monomial order `ℓ`.
    pub ell: f64,
    /// Embedding size `F`.
    pub f_dim: usize,
    /// Training samples kept per class (first in file order); 0 keeps all.
    pub subsample_per_class: usize,
    /// Draws per class Gaussian in the threshold search.
    pub mc_samples: usize,
    pub svm_c: f64,
    pub svm_max_epochs: usize,
    pub svm_tolerance: f64,
    pub rho_mode: RhoMode,
    /// `ρ` used in round 1 by the estimator.
    pub rho_prior: f64,
    /// Also log the exhaustive-search prefetch count each round.
    pub brute_force_check: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            slot: 1.0,
            tau: 0.5,
            bits_per_feature: 8,
            p_th: 0.95,
            fading: FadingKind::Gamma,
            beta: 4.0,
            lambda_coef: 1e-17,
            ell: 3.0,
            f_dim: 10,
            subsample_per_class: 500,
            mc_samples: 20_000,
            svm_c: 1.0,
            svm_max_epochs: 1000,
            svm_tolerance: 1e-6,
            rho_mode: RhoMode::Estimator,
            rho_prior: 0.5,
            brute_force_check: false,
        }
    }
}

impl SimConfig {
    /// Rejects settings the round timeline cannot honour.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if !(self.tau > 0.0 && self.tau < self.slot) {
            return bad(format!(
                "tau must satisfy 0 < tau < slot so that the offloading window t0 - tau is positive \
                 (got tau = {}, slot = {})",
                self.tau, self.slot
            ));
        }
        if self.f_dim < self.rounds {
            return bad(format!(
                "f_dim ({}) must be at least rounds ({}): round k sends feature k",
                self.f_dim, self.rounds
            ));
        }
        if self.bits_per_feature == 0 {
            return bad("bits_per_feature must be at least 1".into());
        }
        if !(self.p_th > 0.0 && self.p_th < 1.0) {
            return bad(format!("p_th must lie in (0, 1), got {}", self.p_th));
        }
        if !(0.0..=1.0).contains(&self.rho_prior) {
            return bad(format!("rho_prior must lie in [0, 1], got {}", self.rho_prior));
        }
        if !(self.svm_c > 0.0) {
            return bad(format!("svm_c must be positive, got {}", self.svm_c));
        }
        self.channel()?;
        Ok(())
    }

    pub fn channel(&self) -> Result<ChannelModel, ChannelError> {
        let fading = match self.fading {
            FadingKind::Gamma => Fading::Gamma { beta: self.beta },
            FadingKind::Constant => Fading::Constant,
        };
        ChannelModel::new(fading, self.lambda_coef, self.ell)
    }

    /// Offloading window `t_k = t0 − τ` of the cascade schemes.
    pub fn offload_window(&self) -> f64 {
        self.slot - self.tau
    }

    pub fn deepening(&self) -> DeepeningConfig {
        DeepeningConfig {
            max_depth: self.rounds,
            svm: self.svm(),
            threshold: ThresholdConfig {
                p_th: self.p_th,
                mc_samples: self.mc_samples,
            },
        }
    }

    pub fn svm(&self) -> SvmConfig {
        SvmConfig {
            reg_c: self.svm_c,
            max_epochs: self.svm_max_epochs,
            tolerance: self.svm_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PairSelection {
    /// The literal string `"all"`: every one of the 45 digit pairs.
    Keyword(String),
    List(Vec<[u8; 2]>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub pairs: PairSelection,
    pub schemes: Vec<Scheme>,
    /// Values of `τ` for `sweep-tau`, as fractions of the slot length.
    pub tau_fractions: Vec<f64>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            master_seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            pairs: PairSelection::Keyword("all".into()),
            schemes: Scheme::ALL.to_vec(),
            tau_fractions: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

/// All 45 unordered digit pairs `(a, b)` with `a < b`.
pub fn all_pairs() -> Vec<(u8, u8)> {
    (0..10u8)
        .flat_map(|a| (a + 1..10).map(move |b| (a, b)))
        .collect()
}

impl ExperimentGrid {
    pub fn pair_list(&self) -> Result<Vec<(u8, u8)>, ConfigError> {
        match &self.pairs {
            PairSelection::Keyword(k) if k == "all" => Ok(all_pairs()),
            PairSelection::Keyword(k) => Err(ConfigError::Invalid(format!(
                "pairs must be \"all\" or a list of [a, b], got \"{k}\""
            ))),
            PairSelection::List(list) => list
                .iter()
                .map(|&[a, b]| {
                    if a == b || a > 9 || b > 9 {
                        Err(ConfigError::Invalid(format!("invalid class pair [{a}, {b}]")))
                    } else {
                        Ok((a, b))
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub data: DataPaths,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub experiment: ExperimentGrid,
}

impl ExperimentManifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut m: Self = toml::from_str(text)?;
        for p in [
            &mut m.data.train_images,
            &mut m.data.train_labels,
            &mut m.data.test_images,
            &mut m.data.test_labels,
        ] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim.validate()?;
        self.experiment.pair_list()?;
        if self.experiment.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must not be empty".into()));
        }
        if self.experiment.schemes.is_empty() {
            return Err(ConfigError::Invalid("schemes must not be empty".into()));
        }
        if let Some(f) = self
            .experiment
            .tau_fractions
            .iter()
            .find(|&&f| !(f > 0.0 && f < 1.0))
        {
            return Err(ConfigError::Invalid(format!(
                "tau_fractions must lie in (0, 1) so that tau < slot, got {f}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA: &str = r#"
[data]
train_images = "a"
train_labels = "b"
test_images = "/abs/c"
test_labels = "d"
"#;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        let m = ExperimentManifest::parse(DATA, Path::new("/base")).unwrap();
        assert_eq!(m.data.train_images, Path::new("/base/a"));
        assert_eq!(m.data.test_images, Path::new("/abs/c"));
        assert_eq!(m.experiment.pair_list().unwrap().len(), 45);
    }

    #[test]
    fn tau_must_fit_in_slot() {
        let text = format!("{DATA}\n[sim]\ntau = 0.5\nslot = 0.1\n");
        let err = ExperimentManifest::parse(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("0 < tau < slot"), "{err}");
    }

    #[test]
    fn explicit_pairs_and_unknown_keys() {
        let text = format!("{DATA}\n[experiment]\npairs = [[0, 1], [3, 5]]\nseeds = [7]\n");
        let m = ExperimentManifest::parse(&text, Path::new(".")).unwrap();
        assert_eq!(m.experiment.pair_list().unwrap(), vec![(0, 1), (3, 5)]);
        let text = format!("{DATA}\n[sim]\nbogus = 1\n");
        assert!(matches!(
            ExperimentManifest::parse(&text, Path::new(".")),
            Err(ConfigError::Parse(_))
        ));
        let text = format!("{DATA}\n[experiment]\npairs = [[2, 2]]\n");
        assert!(ExperimentManifest::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn rho_mode_and_fading_parse() {
        let text = format!("{DATA}\n[sim]\nrho_mode = \"oracle\"\nfading = \"constant\"\n");
        let m = ExperimentManifest::parse(&text, Path::new(".")).unwrap();
        assert_eq!(m.sim.rho_mode, RhoMode::Oracle);
        assert_eq!(m.sim.channel().unwrap().nu(), 1.0);
    }
}
