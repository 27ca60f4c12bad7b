//! Acceptance criteria, one test each. Every test writes a single
//! `criterion N: PASS|FAIL ...` line straight to stdout (bypassing libtest
//! capture) before asserting.
//!
//! The MNIST criteria read the four IDX files from `$JD2P_MNIST_DIR`, falling
//! back to `data/mnist` at the workspace root.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use jd2p::channel::{inverse_gain_mean, ChannelModel, Fading};
use jd2p::config::{all_pairs, FadingKind, Scheme, SimConfig};
use jd2p::dataset::{parse_idx, LabeledDataset};
use jd2p::prefetch::{
    binomial_moment, brute_force_p1, moment_bound, optimal_prefetch, p1_expected_energy,
    p2_objective, PrefetchContext, RhoMode,
};
use jd2p::report::{rounds_csv, runs_csv};
use jd2p::rng::{derive_seed, seeded};
use jd2p::sim::{
    pair_means, prepare_pairs, run_experiment, summarize, sweep, PreparedPair, SeedOutcome,
    SweepTable,
};
use jd2p::special::chi_square_quantile;

const MASTER_SEED: u64 = 0;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn verdict(n: u32, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {status} {detail}");
    let _ = out.flush();
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("JD2P_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist() -> &'static (LabeledDataset, LabeledDataset) {
    static DATA: OnceLock<(LabeledDataset, LabeledDataset)> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = mnist_dir();
        let load = |img: &str, lbl: &str| {
            parse_idx(dir.join(img), dir.join(lbl)).unwrap_or_else(|e| {
                panic!("MNIST not available in {} ({e}); set JD2P_MNIST_DIR", dir.display())
            })
        };
        (
            load("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        )
    })
}

/// Documented defaults: K = 10, ℓ = 3, λ = 1e-17, α = 8, t0 = 1, τ = 0.5,
/// β = 4, p_th = 0.95, 500 samples per class.
fn defaults() -> SimConfig {
    let cfg = SimConfig::default();
    assert_eq!(cfg.rounds, 10);
    assert_eq!(cfg.ell, 3.0);
    assert_eq!(cfg.lambda_coef, 1e-17);
    assert_eq!(cfg.bits_per_feature, 8);
    assert_eq!((cfg.slot, cfg.tau), (1.0, 0.5));
    assert_eq!((cfg.fading, cfg.beta), (FadingKind::Gamma, 4.0));
    assert_eq!(cfg.p_th, 0.95);
    assert_eq!(cfg.subsample_per_class, 500);
    cfg
}

fn prepared() -> &'static [PreparedPair] {
    static PREPARED: OnceLock<Vec<PreparedPair>> = OnceLock::new();
    PREPARED.get_or_init(|| {
        let (train, test) = mnist();
        prepare_pairs(train, test, &all_pairs(), &defaults()).expect("embedding fits")
    })
}

fn default_run() -> &'static (Vec<SeedOutcome>, SweepTable) {
    static RUN: OnceLock<(Vec<SeedOutcome>, SweepTable)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = defaults();
        let outcomes =
            run_experiment(prepared(), &cfg, MASTER_SEED, &SEEDS, &Scheme::ALL).expect("run");
        let table = summarize(&outcomes, cfg.tau);
        (outcomes, table)
    })
}

fn gain_vs(table: &SweepTable, tau: f64, baseline: Scheme) -> f64 {
    table
        .gains
        .iter()
        .find(|g| g.baseline == baseline && g.tau == tau)
        .map(|g| g.gain_db_mean)
        .expect("gain row")
}

#[test]
fn criterion_1_closed_form_prefetch_near_brute_force() {
    let mut rng = seeded(0xacc1);
    let (mut contexts, mut regime, mut regime_misses, mut worst_excess) = (0, 0, 0, 0.0_f64);
    let mut worst_case = String::new();
    for _ in 0..1000 {
        let ell = [2.0, 3.0, 4.0, 5.0][rng.random_range(0..4)];
        let rho = rng.random_range(0.05..=0.95);
        let s_k = rng.random_range(10..=500usize);
        let phi = 10f64.powf(rng.random_range(-1.0..=1.0));
        let ctx = PrefetchContext {
            s_k,
            rho,
            gain: 1.0,
            tau: phi,
            t_next: 1.0,
            alpha: 8.0,
            channel: ChannelModel::new(Fading::Constant, 1e-17, ell).unwrap(),
        };
        assert!((ctx.phi() - phi).abs() < 1e-12 * phi);
        contexts += 1;
        let p_star = optimal_prefetch(&ctx).unwrap();
        let p_round = p_star.round() as usize;
        let p_best = brute_force_p1(&ctx).unwrap();
        if ell < (s_k as f64 - p_star) * rho {
            regime += 1;
            if p_round.abs_diff(p_best) > 1 {
                regime_misses += 1;
            }
        }
        let best = p1_expected_energy(&ctx, p_best).unwrap();
        let excess = p1_expected_energy(&ctx, p_round).unwrap() / best - 1.0;
        if excess > worst_excess {
            worst_excess = excess;
            worst_case = format!("l={ell} rho={rho:.3} s={s_k} phi={phi:.3} p*={p_round} brute={p_best}");
        }
    }
    let passed = regime_misses == 0 && worst_excess <= 0.05;
    verdict(
        1,
        passed,
        &format!(
            "{contexts} contexts; {regime_misses}/{regime} in-regime counts off by more than 1; \
             worst energy excess {:.2}% (limit 5%) at {worst_case}",
            100.0 * worst_excess
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_2_chi_square_quantiles() {
    let normal = Normal::standard();
    let mut worst = 0.0_f64;
    for p in [0.5_f64, 0.9, 0.95, 0.99] {
        let k2 = chi_square_quantile(p, 2).unwrap().powi(2);
        worst = worst.max((k2 - (-2.0 * (1.0 - p).ln())).abs());
        let k1 = chi_square_quantile(p, 1).unwrap();
        worst = worst.max((k1 - normal.inverse_cdf((1.0 + p) / 2.0)).abs());
    }
    let passed = worst <= 1e-8;
    verdict(2, passed, &format!("max deviation {worst:.3e} (limit 1e-8)"));
    assert!(passed);
}

#[test]
fn criterion_3_channel_moments() {
    let mut detail = Vec::new();
    let mut passed = true;
    for beta in [2.0, 4.0, 8.0] {
        let channel = ChannelModel::gamma(beta, 1e-17, 3.0).unwrap();
        let mut rng = seeded(derive_seed(0xacc3, beta as u64));
        let n = 1_000_000;
        let (mut sum, mut sum_inv) = (0.0, 0.0);
        for _ in 0..n {
            let g = channel.sample_gain(&mut rng);
            sum += g;
            sum_inv += 1.0 / g;
        }
        let mean_err = (sum / n as f64 - 1.0).abs();
        let nu = beta / (beta - 1.0);
        assert_eq!(inverse_gain_mean(beta).unwrap(), nu);
        let inv_err = (sum_inv / n as f64 / nu - 1.0).abs();
        passed &= mean_err <= 0.005 && inv_err <= 0.01;
        detail.push(format!(
            "beta={beta}: |E[g]-1|={:.3}%, |E[1/g]/nu-1|={:.3}%",
            100.0 * mean_err,
            100.0 * inv_err
        ));
    }
    verdict(3, passed, &detail.join("; "));
    assert!(passed);
}

#[test]
fn criterion_4_energy_ordering() {
    let (outcomes, _) = default_run();
    let means = pair_means(outcomes);
    let energy = |pair, scheme| {
        means
            .iter()
            .find(|m| m.pair == pair && m.scheme == scheme)
            .map(|m| m.energy)
            .unwrap()
    };
    let pairs = all_pairs();
    let (mut ordered, mut jd2p_first, mut deep_second) = (0, 0, 0);
    for &pair in &pairs {
        let j = energy(pair, Scheme::Jd2p);
        let d = energy(pair, Scheme::DeepeningOnly);
        let f = energy(pair, Scheme::FullOffload);
        jd2p_first += usize::from(j <= d);
        deep_second += usize::from(d <= f);
        ordered += usize::from(j <= d && d <= f);
    }
    let passed = ordered >= 40;
    verdict(
        4,
        passed,
        &format!(
            "E_jd2p <= E_deep <= E_full on {ordered}/{} pairs (need 40); \
             jd2p <= deep on {jd2p_first}, deep <= full on {deep_second}",
            pairs.len()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_5_energy_gain_magnitude() {
    let (_, table) = default_run();
    let gain = gain_vs(table, defaults().tau, Scheme::FullOffload);
    let passed = gain >= 10.0;
    verdict(5, passed, &format!("mean JD2P-vs-full gain {gain:.2} dB (need >= 10 dB)"));
    assert!(passed);
}

#[test]
fn criterion_6_accuracy_preservation() {
    let (_, table) = default_run();
    let err = |scheme| {
        table
            .schemes
            .iter()
            .find(|s| s.scheme == scheme)
            .map(|s| s.error_mean)
            .unwrap()
    };
    let (j, f) = (err(Scheme::Jd2p), err(Scheme::FullOffload));
    let gap = 100.0 * (j - f);
    let passed = gap <= 2.0;
    verdict(
        6,
        passed,
        &format!("error JD2P {:.2}% vs full {:.2}%: gap {gap:.2} pp (limit 2 pp)", 100.0 * j, 100.0 * f),
    );
    assert!(passed);
}

#[test]
fn criterion_7_tau_sweep_trend() {
    let base = SimConfig {
        rho_mode: RhoMode::Oracle,
        ..defaults()
    };
    let taus = [0.3, 0.5, 0.7, 0.9];
    let grid: Vec<SimConfig> = taus
        .iter()
        .map(|f| SimConfig {
            tau: f * base.slot,
            ..base.clone()
        })
        .collect();
    let table = sweep(&grid, prepared(), MASTER_SEED, &SEEDS).expect("sweep");
    let vs_full: Vec<f64> = grid
        .iter()
        .map(|c| gain_vs(&table, c.tau, Scheme::FullOffload))
        .collect();
    let vs_deep: Vec<f64> = grid
        .iter()
        .map(|c| gain_vs(&table, c.tau, Scheme::DeepeningOnly))
        .collect();
    let monotone = vs_full.windows(2).all(|w| w[1] <= w[0] + 0.5);
    let dominant = vs_deep.iter().all(|&g| g >= 0.0);
    let passed = monotone && dominant;
    let fmt = |v: &[f64]| v.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>().join(", ");
    verdict(
        7,
        passed,
        &format!(
            "tau/t0 = {taus:?}: vs full [{}] dB, vs deepening-only [{}] dB",
            fmt(&vs_full),
            fmt(&vs_deep)
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_8_structural_invariants() {
    let cfg = defaults();
    let alpha = cfg.bits_per_feature as f64;
    let (outcomes, _) = default_run();

    let mut nesting = true;
    let mut conservation = true;
    for o in outcomes {
        let c = &o.context.cascade;
        for k in 1..c.aci_sets.len() {
            let outer: std::collections::HashSet<_> = c.aci_sets[k - 1].iter().collect();
            nesting &= c.aci_sets[k].iter().all(|i| outer.contains(i));
        }
        let m = c.aci_sets[0].len() as f64;
        for run in &o.runs {
            conservation &= match run.scheme {
                Scheme::FullOffload => {
                    let bits: f64 = run.ledger.rounds.iter().map(|r| r.offload_bits).sum();
                    (bits - alpha * cfg.f_dim as f64 * m).abs() <= 1e-9 * bits
                }
                _ => run.ledger.verify(c, alpha).is_ok(),
            };
        }
    }

    let small: Vec<PreparedPair> = prepared()
        .iter()
        .filter(|p| [(3, 5), (4, 9)].contains(&p.pair))
        .cloned()
        .collect();
    let csv = || {
        let o = run_experiment(&small, &cfg, 7, &[0, 1], &Scheme::ALL).unwrap();
        (runs_csv(&o), rounds_csv(&o))
    };
    let deterministic = csv() == csv();

    let mut rng = seeded(0xacc8);
    let mut convex = true;
    for _ in 0..200 {
        let ctx = PrefetchContext {
            s_k: rng.random_range(10..=500),
            rho: rng.random_range(0.05..=0.95),
            gain: rng.random_range(0.1..=3.0),
            tau: rng.random_range(0.05..=0.95),
            t_next: rng.random_range(0.05..=0.95),
            alpha: 8.0,
            channel: ChannelModel::gamma(4.0, 1e-17, rng.random_range(2.0..=5.0)).unwrap(),
        };
        let f = |j: usize| p2_objective(&ctx, j as f64 * ctx.s_k as f64 / 200.0).unwrap();
        for i in 1..200 {
            let second = f(i - 1) - 2.0 * f(i) + f(i + 1);
            convex &= second >= -1e-9 * f(i).abs();
        }
    }

    let mut bounded = true;
    for _ in 0..1000 {
        let n = rng.random_range(0..=500);
        let rho = rng.random_range(0.0..=1.0);
        let ell = rng.random_range(2.0..=5.0);
        bounded &= binomial_moment(n, rho, ell) <= moment_bound(n, rho, ell) * (1.0 + 1e-12);
    }

    let passed = nesting && conservation && deterministic && convex && bounded;
    verdict(
        8,
        passed,
        &format!(
            "nesting {nesting}, bit conservation {conservation}, deterministic CSV {deterministic}, \
             P2 convexity {convex}, moment bound {bounded}"
        ),
    );
    assert!(passed);
}
