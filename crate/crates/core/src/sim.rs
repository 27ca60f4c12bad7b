//! Round-by-round offloading simulation and experiment aggregation.
//!
//! Timeline of the cascade schemes, round `k = 1..K`:
//!
//! 1. the device sends feature `k` of every member of `S(k)` that was not
//!    prefetched, within `t_k = t0 − τ` at a fresh gain `g_k`;
//! 2. the server trains the depth-`k` classifier during `τ`;
//! 3. meanwhile (JD2P only) the device prefetches feature `k+1` of `p_k`
//!    randomly chosen members of `S(k)` within `τ`, at the same gain `g_k`;
//! 4. the server announces `S(k+1)`.
//!
//! Full offloading instead spreads all `α F M` bits evenly over `K` slots of
//! length `t0` (the last one `t0 − τ`) and trains one classifier on all `F`
//! features.
//!
//! All schemes of one `(pair, seed)` share the channel draws and the cascade,
//! so they differ only in what they transmit.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::ChannelError;
use crate::config::{ConfigError, Scheme, SimConfig};
use crate::dataset::{DatasetError, LabeledDataset};
use crate::deepening::{run_deepening, DeepeningError, DeepeningState};
use crate::embedding::{fit_pca, EmbeddingError, EmbeddingModel};
use crate::linalg::Matrix;
use crate::prefetch::{
    brute_force_p1, estimate_rho, optimal_prefetch, oracle_rho, PrefetchContext, PrefetchError,
    RhoMode, BRUTE_FORCE_MAX,
};
use crate::rng::{derive_seed, stream, Purpose};
use crate::svm::{train_svm, Hyperplane, SvmError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Deepening(#[from] DeepeningError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Prefetch(#[from] PrefetchError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// Train and test split of one binary class pair.
#[derive(Debug, Clone)]
pub struct PairData {
    pub pair: (u8, u8),
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

impl PairData {
    /// Extracts `(a, b)` from ten-class train/test sets. When `per_class > 0`
    /// only the first `per_class` training samples of each class are kept.
    pub fn extract(
        train: &LabeledDataset,
        test: &LabeledDataset,
        pair: (u8, u8),
        per_class: usize,
    ) -> Result<Self, DatasetError> {
        let mut tr = train.extract_pair(pair.0, pair.1)?;
        if per_class > 0 {
            tr = tr.take_per_class(per_class);
        }
        Ok(Self {
            pair,
            train: tr,
            test: test.extract_pair(pair.0, pair.1)?,
        })
    }

    pub fn id(&self) -> u64 {
        pair_id(self.pair)
    }
}

pub fn pair_id(pair: (u8, u8)) -> u64 {
    pair.0 as u64 * 10 + pair.1 as u64
}

/// A pair after fitting the embedding on its training split.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub pair: (u8, u8),
    pub embedding: EmbeddingModel,
    pub train_x: Matrix,
    pub train_y: Vec<u8>,
    pub test_x: Matrix,
    pub test_y: Vec<u8>,
}

impl PreparedPair {
    pub fn new(data: &PairData, f_dim: usize) -> Result<Self, SimError> {
        let embedding = fit_pca(&data.train, f_dim)?;
        Ok(Self {
            pair: data.pair,
            train_x: embedding.embed_dataset(&data.train)?,
            train_y: data.train.labels().to_vec(),
            test_x: embedding.embed_dataset(&data.test)?,
            test_y: data.test.labels().to_vec(),
            embedding,
        })
    }

    /// Builds a prepared pair directly from already-embedded features.
    pub fn from_features(
        pair: (u8, u8),
        embedding: EmbeddingModel,
        train_x: Matrix,
        train_y: Vec<u8>,
        test_x: Matrix,
        test_y: Vec<u8>,
    ) -> Self {
        Self {
            pair,
            embedding,
            train_x,
            train_y,
            test_x,
            test_y,
        }
    }

    pub fn id(&self) -> u64 {
        pair_id(self.pair)
    }

    pub fn train_len(&self) -> usize {
        self.train_y.len()
    }
}

/// Ledger entry for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// `|S(k)|` (all samples for full offloading).
    pub aci_size: usize,
    /// Samples whose feature `k` went out in the offloading window.
    pub offloaded_indices: Vec<usize>,
    pub offload_bits: f64,
    pub offload_duration: f64,
    pub gain: f64,
    pub offload_energy: f64,
    pub rho_hat: f64,
    pub phi: f64,
    pub p_star: f64,
    pub p_bruteforce: Option<usize>,
    /// Samples whose feature `k+1` was prefetched during `τ`.
    pub prefetched_indices: Vec<usize>,
    pub prefetch_bits: f64,
    pub prefetch_energy: f64,
    /// `|S(k+1)|`.
    pub next_aci_size: usize,
    /// Prefetched samples that did not make it into `S(k+1)`.
    pub wasted: usize,
}

impl RoundRecord {
    pub fn energy(&self) -> f64 {
        self.offload_energy + self.prefetch_energy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLedger {
    pub scheme: Scheme,
    pub rounds: Vec<RoundRecord>,
    pub total_energy: f64,
    pub wasted_bits: f64,
}

impl RoundLedger {
    fn from_rounds(scheme: Scheme, rounds: Vec<RoundRecord>, alpha: f64) -> Self {
        let total_energy = rounds.iter().map(RoundRecord::energy).sum();
        let wasted_bits = alpha * rounds.iter().map(|r| r.wasted).sum::<usize>() as f64;
        Self {
            scheme,
            rounds,
            total_energy,
            wasted_bits,
        }
    }

    /// Checks bit conservation against the cascade that produced the ledger:
    /// every member of `S(k)` has feature `k` delivered exactly once (either
    /// offloaded in round `k` or prefetched in round `k−1`), prefetches come
    /// from `S(k)`, and the totals add up.
    pub fn verify(&self, cascade: &DeepeningState, alpha: f64) -> Result<(), String> {
        let mut prev_prefetch: HashSet<usize> = HashSet::new();
        for r in &self.rounds {
            let k = r.round;
            let s_k: HashSet<usize> = cascade.aci_set(k).unwrap_or(&[]).iter().copied().collect();
            let s_next: HashSet<usize> =
                cascade.aci_set(k + 1).unwrap_or(&[]).iter().copied().collect();
            let offloaded: HashSet<usize> = r.offloaded_indices.iter().copied().collect();
            if offloaded.len() != r.offloaded_indices.len() {
                return Err(format!("round {k}: a sample was offloaded twice"));
            }
            if let Some(i) = offloaded.iter().find(|i| prev_prefetch.contains(i)) {
                return Err(format!("round {k}: sample {i} offloaded after being prefetched"));
            }
            let delivered: HashSet<usize> = offloaded
                .union(&prev_prefetch.intersection(&s_k).copied().collect())
                .copied()
                .collect();
            if delivered != s_k {
                return Err(format!("round {k}: delivered set differs from S({k})"));
            }
            if (r.offload_bits - alpha * offloaded.len() as f64).abs() > 0.0 {
                return Err(format!("round {k}: offload bits do not match the sample count"));
            }
            let prefetched: HashSet<usize> = r.prefetched_indices.iter().copied().collect();
            if !prefetched.is_subset(&s_k) {
                return Err(format!("round {k}: prefetched a sample outside S({k})"));
            }
            if prefetched.difference(&s_next).count() != r.wasted {
                return Err(format!("round {k}: wasted count mismatch"));
            }
            prev_prefetch = prefetched;
        }
        let total: f64 = self.rounds.iter().map(RoundRecord::energy).sum();
        if total != self.total_energy {
            return Err("total energy differs from the sum of rounds".into());
        }
        let wasted = alpha * self.rounds.iter().map(|r| r.wasted).sum::<usize>() as f64;
        if wasted != self.wasted_bits {
            return Err("wasted bits differ from the per-round counts".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub total_energy: f64,
    pub error_rate: f64,
    pub rounds_used: usize,
    pub wasted_bits: f64,
}

#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub pair: (u8, u8),
    pub seed: u64,
    pub scheme: Scheme,
    pub ledger: RoundLedger,
    pub metrics: RunMetrics,
}

/// Whether the cascade schemes prefetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefetchPolicy {
    ClosedForm,
    Disabled,
}

/// Everything one `(pair, seed)` shares across schemes.
#[derive(Debug, Clone)]
pub struct SeedContext {
    pub seed: u64,
    pub gains: Vec<f64>,
    pub cascade: DeepeningState,
    pub cascade_error: f64,
}

impl SeedContext {
    pub fn new(prep: &PreparedPair, cfg: &SimConfig, master: u64, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        let channel = cfg.channel()?;
        let mut rng = stream(master, seed, prep.id(), Purpose::Channel);
        let gains = (0..cfg.rounds).map(|_| channel.sample_gain(&mut rng)).collect();
        let train_seed = derive_seed(derive_seed(master, seed), prep.id());
        let cascade = run_deepening(&prep.train_x, &prep.train_y, &cfg.deepening(), train_seed)?;
        let cascade_error = cascade.error_rate(&prep.test_x, &prep.test_y)?;
        Ok(Self {
            seed,
            gains,
            cascade,
            cascade_error,
        })
    }
}

/// Offloading ledger of a cascade scheme under the given prefetch policy.
pub fn cascade_ledger(
    prep: &PreparedPair,
    cfg: &SimConfig,
    master: u64,
    ctx: &SeedContext,
    policy: PrefetchPolicy,
) -> Result<RoundLedger, SimError> {
    let channel = cfg.channel()?;
    let alpha = cfg.bits_per_feature as f64;
    let window = cfg.offload_window();
    let mut select_rng = stream(master, ctx.seed, prep.id(), Purpose::Prefetch);
    let cascade = &ctx.cascade;

    let mut rounds = Vec::new();
    let mut history: Vec<(usize, usize)> = Vec::new();
    let mut prefetched: HashSet<usize> = HashSet::new();
    for k in 1..=cfg.rounds {
        let s_k = cascade.aci_set(k).unwrap_or(&[]);
        if s_k.is_empty() {
            break;
        }
        let s_next = cascade.aci_set(k + 1).unwrap_or(&[]);
        let gain = ctx.gains[k - 1];

        let offloaded: Vec<usize> = s_k.iter().copied().filter(|i| !prefetched.contains(i)).collect();
        let offload_bits = alpha * offloaded.len() as f64;
        let offload_energy = channel.energy(offload_bits, window, gain)?;

        let can_prefetch = policy == PrefetchPolicy::ClosedForm && k < cfg.rounds && k < cfg.f_dim;
        let (mut rho_hat, mut phi, mut p_star, mut p_bruteforce) = (0.0, 0.0, 0.0, None);
        let mut chosen: Vec<usize> = Vec::new();
        if can_prefetch {
            rho_hat = match cfg.rho_mode {
                RhoMode::Estimator => estimate_rho(&history, cfg.rho_prior),
                RhoMode::Oracle => oracle_rho(s_k.len(), s_next.len()),
            };
            let pctx = PrefetchContext {
                s_k: s_k.len(),
                rho: rho_hat,
                gain,
                tau: cfg.tau,
                t_next: window,
                alpha,
                channel,
            };
            phi = pctx.phi();
            p_star = optimal_prefetch(&pctx)?;
            let count = (p_star.round() as usize).min(s_k.len());
            if cfg.brute_force_check && s_k.len() <= BRUTE_FORCE_MAX {
                p_bruteforce = Some(brute_force_p1(&pctx)?);
            }
            chosen = sample_indices(&mut select_rng, s_k.len(), count)
                .into_iter()
                .map(|j| s_k[j])
                .collect();
            chosen.sort_unstable();
        }
        let prefetch_bits = alpha * chosen.len() as f64;
        let prefetch_energy = channel.energy(prefetch_bits, cfg.tau, gain)?;
        let next: HashSet<usize> = s_next.iter().copied().collect();
        let wasted = chosen.iter().filter(|i| !next.contains(i)).count();

        history.push((s_k.len(), s_next.len()));
        prefetched = chosen.iter().copied().collect();
        rounds.push(RoundRecord {
            round: k,
            aci_size: s_k.len(),
            offloaded_indices: offloaded,
            offload_bits,
            offload_duration: window,
            gain,
            offload_energy,
            rho_hat,
            phi,
            p_star,
            p_bruteforce,
            prefetched_indices: chosen,
            prefetch_bits,
            prefetch_energy,
            next_aci_size: s_next.len(),
            wasted,
        });
    }
    let scheme = match policy {
        PrefetchPolicy::ClosedForm => Scheme::Jd2p,
        PrefetchPolicy::Disabled => Scheme::DeepeningOnly,
    };
    Ok(RoundLedger::from_rounds(scheme, rounds, alpha))
}

fn cascade_run(
    prep: &PreparedPair,
    cfg: &SimConfig,
    master: u64,
    ctx: &SeedContext,
    policy: PrefetchPolicy,
) -> Result<SchemeRun, SimError> {
    let ledger = cascade_ledger(prep, cfg, master, ctx, policy)?;
    Ok(SchemeRun {
        pair: prep.pair,
        seed: ctx.seed,
        scheme: ledger.scheme,
        metrics: RunMetrics {
            total_energy: ledger.total_energy,
            error_rate: ctx.cascade_error,
            rounds_used: ledger.rounds.len(),
            wasted_bits: ledger.wasted_bits,
        },
        ledger,
    })
}

/// JD2P: data deepening with closed-form prefetching.
pub fn run_jd2p(prep: &PreparedPair, cfg: &SimConfig, master: u64, ctx: &SeedContext) -> Result<SchemeRun, SimError> {
    cascade_run(prep, cfg, master, ctx, PrefetchPolicy::ClosedForm)
}

/// Data deepening without prefetching.
pub fn run_deepening_only(
    prep: &PreparedPair,
    cfg: &SimConfig,
    master: u64,
    ctx: &SeedContext,
) -> Result<SchemeRun, SimError> {
    cascade_run(prep, cfg, master, ctx, PrefetchPolicy::Disabled)
}

/// The full-feature classifier used by full offloading.
pub fn full_classifier(prep: &PreparedPair, cfg: &SimConfig, master: u64, seed: u64) -> Result<Hyperplane, SimError> {
    let rows: Vec<&[f64]> = prep.train_x.row_iter().collect();
    let train_seed = derive_seed(derive_seed(derive_seed(master, seed), prep.id()), 0xf011);
    Ok(train_svm(&rows, &prep.train_y, &cfg.svm(), train_seed)?)
}

/// Full offloading: all `F` features of every sample, spread over `K` slots.
pub fn run_full_offload(
    prep: &PreparedPair,
    cfg: &SimConfig,
    master: u64,
    ctx: &SeedContext,
) -> Result<SchemeRun, SimError> {
    cfg.validate()?;
    let channel = cfg.channel()?;
    let alpha = cfg.bits_per_feature as f64;
    let m = prep.train_len();
    let per_round = alpha * prep.train_x.cols() as f64 * m as f64 / cfg.rounds as f64;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for k in 1..=cfg.rounds {
        let duration = if k == cfg.rounds { cfg.offload_window() } else { cfg.slot };
        let gain = ctx.gains[k - 1];
        rounds.push(RoundRecord {
            round: k,
            aci_size: m,
            offloaded_indices: Vec::new(),
            offload_bits: per_round,
            offload_duration: duration,
            gain,
            offload_energy: channel.energy(per_round, duration, gain)?,
            rho_hat: 0.0,
            phi: 0.0,
            p_star: 0.0,
            p_bruteforce: None,
            prefetched_indices: Vec::new(),
            prefetch_bits: 0.0,
            prefetch_energy: 0.0,
            next_aci_size: m,
            wasted: 0,
        });
    }
    let ledger = RoundLedger::from_rounds(Scheme::FullOffload, rounds, alpha);

    let h = full_classifier(prep, cfg, master, ctx.seed)?;
    let mut wrong = 0usize;
    for (row, &l) in prep.test_x.row_iter().zip(&prep.test_y) {
        if h.predict(row)? != l {
            wrong += 1;
        }
    }
    let error_rate = if prep.test_y.is_empty() {
        0.0
    } else {
        wrong as f64 / prep.test_y.len() as f64
    };
    Ok(SchemeRun {
        pair: prep.pair,
        seed: ctx.seed,
        scheme: Scheme::FullOffload,
        metrics: RunMetrics {
            total_energy: ledger.total_energy,
            error_rate,
            rounds_used: cfg.rounds,
            wasted_bits: 0.0,
        },
        ledger,
    })
}

pub fn run_scheme(
    prep: &PreparedPair,
    cfg: &SimConfig,
    master: u64,
    ctx: &SeedContext,
    scheme: Scheme,
) -> Result<SchemeRun, SimError> {
    match scheme {
        Scheme::Jd2p => run_jd2p(prep, cfg, master, ctx),
        Scheme::DeepeningOnly => run_deepening_only(prep, cfg, master, ctx),
        Scheme::FullOffload => run_full_offload(prep, cfg, master, ctx),
    }
}

/// Output of one `(pair, seed)`: the shared context and one run per scheme.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub pair: (u8, u8),
    pub context: SeedContext,
    pub runs: Vec<SchemeRun>,
}

/// Runs every `(pair, seed, scheme)` combination. Work is spread over the
/// current rayon pool; the output order is `pairs × seeds`, schemes in the
/// order given.
pub fn run_experiment(
    prepared: &[PreparedPair],
    cfg: &SimConfig,
    master: u64,
    seeds: &[u64],
    schemes: &[Scheme],
) -> Result<Vec<SeedOutcome>, SimError> {
    cfg.validate()?;
    let jobs: Vec<(&PreparedPair, u64)> = prepared
        .iter()
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    jobs.par_iter()
        .map(|&(prep, seed)| {
            let context = SeedContext::new(prep, cfg, master, seed)?;
            let runs = schemes
                .iter()
                .map(|&s| run_scheme(prep, cfg, master, &context, s))
                .collect::<Result<_, _>>()?;
            Ok(SeedOutcome {
                pair: prep.pair,
                context,
                runs,
            })
        })
        .collect()
}

/// `10 log10(reference / energy)`.
pub fn gain_db(reference: f64, energy: f64) -> f64 {
    10.0 * (reference / energy).log10()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Seed-averaged energy and error for one `(pair, scheme)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSchemeMean {
    pub pair: (u8, u8),
    pub scheme: Scheme,
    pub energy: f64,
    pub error_rate: f64,
}

/// Mean over seeds for every `(pair, scheme)`, ordered by pair then scheme.
pub fn pair_means(outcomes: &[SeedOutcome]) -> Vec<PairSchemeMean> {
    let mut acc: BTreeMap<((u8, u8), Scheme), (f64, f64, usize)> = BTreeMap::new();
    for run in outcomes.iter().flat_map(|o| &o.runs) {
        let e = acc.entry((run.pair, run.scheme)).or_insert((0.0, 0.0, 0));
        e.0 += run.metrics.total_energy;
        e.1 += run.metrics.error_rate;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|((pair, scheme), (e, err, n))| PairSchemeMean {
            pair,
            scheme,
            energy: e / n as f64,
            error_rate: err / n as f64,
        })
        .collect()
}

/// Energy-versus-error summary of one scheme over all pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSummary {
    pub tau: f64,
    pub scheme: Scheme,
    pub pairs: usize,
    pub energy_mean: f64,
    pub energy_std: f64,
    pub error_mean: f64,
    pub error_std: f64,
}

/// Energy gain of JD2P against another scheme over all pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSummary {
    pub tau: f64,
    pub baseline: Scheme,
    pub pairs: usize,
    /// Mean over pairs of the per-pair gain in dB.
    pub gain_db_mean: f64,
    pub gain_db_std: f64,
    /// Gain of the pair-averaged energies.
    pub gain_db_of_means: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub schemes: Vec<SchemeSummary>,
    pub gains: Vec<GainSummary>,
    pub pair_means: Vec<(f64, PairSchemeMean)>,
}

/// Aggregates one configuration's outcomes; pair values are seed means.
pub fn summarize(outcomes: &[SeedOutcome], tau: f64) -> SweepTable {
    let means = pair_means(outcomes);
    let mut table = SweepTable::default();
    let schemes: Vec<Scheme> = {
        let mut s: Vec<Scheme> = means.iter().map(|m| m.scheme).collect();
        s.sort();
        s.dedup();
        s
    };
    for &scheme in &schemes {
        let rows: Vec<&PairSchemeMean> = means.iter().filter(|m| m.scheme == scheme).collect();
        let energies: Vec<f64> = rows.iter().map(|m| m.energy).collect();
        let errors: Vec<f64> = rows.iter().map(|m| m.error_rate).collect();
        let (energy_mean, energy_std) = mean_std(&energies);
        let (error_mean, error_std) = mean_std(&errors);
        table.schemes.push(SchemeSummary {
            tau,
            scheme,
            pairs: rows.len(),
            energy_mean,
            energy_std,
            error_mean,
            error_std,
        });
    }
    let lookup = |pair: (u8, u8), scheme: Scheme| {
        means
            .iter()
            .find(|m| m.pair == pair && m.scheme == scheme)
            .map(|m| m.energy)
    };
    for baseline in [Scheme::FullOffload, Scheme::DeepeningOnly] {
        let per_pair: Vec<(f64, f64)> = means
            .iter()
            .filter(|m| m.scheme == Scheme::Jd2p)
            .filter_map(|m| lookup(m.pair, baseline).map(|b| (b, m.energy)))
            .collect();
        if per_pair.is_empty() {
            continue;
        }
        let gains: Vec<f64> = per_pair.iter().map(|&(b, j)| gain_db(b, j)).collect();
        let (gain_db_mean, gain_db_std) = mean_std(&gains);
        let n = per_pair.len() as f64;
        let b_mean = per_pair.iter().map(|p| p.0).sum::<f64>() / n;
        let j_mean = per_pair.iter().map(|p| p.1).sum::<f64>() / n;
        table.gains.push(GainSummary {
            tau,
            baseline,
            pairs: per_pair.len(),
            gain_db_mean,
            gain_db_std,
            gain_db_of_means: gain_db(b_mean, j_mean),
        });
    }
    table.pair_means = means.into_iter().map(|m| (tau, m)).collect();
    table
}

/// Runs every configuration of `cfg_grid` and concatenates the summaries.
pub fn sweep(
    cfg_grid: &[SimConfig],
    prepared: &[PreparedPair],
    master: u64,
    seeds: &[u64],
) -> Result<SweepTable, SimError> {
    let mut out = SweepTable::default();
    for cfg in cfg_grid {
        let outcomes = run_experiment(prepared, cfg, master, seeds, &Scheme::ALL)?;
        let t = summarize(&outcomes, cfg.tau);
        out.schemes.extend(t.schemes);
        out.gains.extend(t.gains);
        out.pair_means.extend(t.pair_means);
    }
    Ok(out)
}

/// Loads the pairs of a manifest and fits their embeddings, in parallel.
pub fn prepare_pairs(
    train: &LabeledDataset,
    test: &LabeledDataset,
    pairs: &[(u8, u8)],
    cfg: &SimConfig,
) -> Result<Vec<PreparedPair>, SimError> {
    pairs
        .par_iter()
        .map(|&pair| {
            let data = PairData::extract(train, test, pair, cfg.subsample_per_class)?;
            PreparedPair::new(&data, cfg.f_dim)
        })
        .collect()
}
