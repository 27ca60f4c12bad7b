use rand::Rng;
use rand_distr::StandardNormal;

use jd2p::config::{FadingKind, Scheme, SimConfig};
use jd2p::embedding::fit_pca_rows;
use jd2p::linalg::Matrix;
use jd2p::prefetch::RhoMode;
use jd2p::rng::seeded;
use jd2p::sim::{
    cascade_ledger, gain_db, run_deepening_only, run_experiment, run_full_offload, run_jd2p,
    summarize, PrefetchPolicy, PreparedPair, SeedContext,
};

/// Two overlapping 12-D classes, `n` samples each, embedded to 10 features.
fn synthetic(n: usize, sep: f64, seed: u64) -> PreparedPair {
    let mut rng = seeded(seed);
    let mut make = |count: usize| {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * count {
            let l = (i % 2) as u8;
            let s = if l == 1 { sep } else { -sep };
            let row: Vec<f64> = (0..12)
                .map(|j| s / (1 + j) as f64 + rng.sample::<f64, _>(StandardNormal) * (12 - j) as f64 / 6.0)
                .collect();
            rows.push(row);
            labels.push(l);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    };
    let (train_raw, train_y) = make(n);
    let (test_raw, test_y) = make(n / 2);
    let model = fit_pca_rows(&train_raw, 10).unwrap();
    let embed = |m: &Matrix| {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| model.embed(r).unwrap()).collect();
        Matrix::from_rows(&rows).unwrap()
    };
    let (train_x, test_x) = (embed(&train_raw), embed(&test_raw));
    PreparedPair::from_features((2, 7), model, train_x, train_y, test_x, test_y)
}

fn config() -> SimConfig {
    SimConfig {
        mc_samples: 2000,
        ..Default::default()
    }
}

#[test]
fn disabled_prefetch_reduces_to_deepening_only() {
    let prep = synthetic(100, 1.0, 1);
    let cfg = config();
    let ctx = SeedContext::new(&prep, &cfg, 0, 3).unwrap();
    let disabled = cascade_ledger(&prep, &cfg, 0, &ctx, PrefetchPolicy::Disabled).unwrap();
    let deep = run_deepening_only(&prep, &cfg, 0, &ctx).unwrap();
    assert_eq!(disabled, deep.ledger);
    assert!(deep.ledger.rounds.iter().all(|r| r.prefetched_indices.is_empty()));
}

#[test]
fn deepening_energy_recomputes_from_set_sizes() {
    let prep = synthetic(100, 1.0, 2);
    let cfg = config();
    let channel = cfg.channel().unwrap();
    let ctx = SeedContext::new(&prep, &cfg, 0, 0).unwrap();
    let run = run_deepening_only(&prep, &cfg, 0, &ctx).unwrap();
    let mut total = 0.0;
    for r in &run.ledger.rounds {
        let bits = 8.0 * ctx.cascade.aci_set(r.round).unwrap().len() as f64;
        assert_eq!(r.offload_bits, bits);
        assert_eq!(r.gain, ctx.gains[r.round - 1]);
        total += channel.energy(bits, cfg.slot - cfg.tau, r.gain).unwrap();
    }
    assert!((run.metrics.total_energy - total).abs() <= 1e-12 * total);
}

#[test]
fn jd2p_ledger_conserves_bits_and_counts_waste() {
    let cfg = config();
    let mut prefetched = 0;
    for seed in 0..4 {
        let prep = synthetic(120, 0.8, 10 + seed);
        let ctx = SeedContext::new(&prep, &cfg, 5, seed).unwrap();
        let run = run_jd2p(&prep, &cfg, 5, &ctx).unwrap();
        run.ledger.verify(&ctx.cascade, 8.0).unwrap();
        let mut wasted = 0;
        for r in &run.ledger.rounds {
            let next = ctx.cascade.aci_set(r.round + 1).unwrap_or(&[]);
            wasted += r.prefetched_indices.iter().filter(|i| !next.contains(i)).count();
        }
        assert_eq!(run.metrics.wasted_bits, 8.0 * wasted as f64);
        prefetched += run.ledger.rounds.iter().map(|r| r.prefetched_indices.len()).sum::<usize>();
    }
    assert!(prefetched > 0);
}

#[test]
fn oracle_rho_on_constant_channel_never_loses_to_deepening_only() {
    let cfg = SimConfig {
        rho_mode: RhoMode::Oracle,
        fading: FadingKind::Constant,
        ..config()
    };
    let mut prefetched = 0;
    for seed in 0..6 {
        let prep = synthetic(150, 0.7, 20 + seed);
        let ctx = SeedContext::new(&prep, &cfg, 0, seed).unwrap();
        let jd2p = run_jd2p(&prep, &cfg, 0, &ctx).unwrap();
        prefetched += jd2p.ledger.rounds.iter().map(|r| r.prefetched_indices.len()).sum::<usize>();
        let j = jd2p.metrics.total_energy;
        let d = run_deepening_only(&prep, &cfg, 0, &ctx).unwrap().metrics.total_energy;
        assert!(j <= d, "seed {seed}: jd2p {j} > deepening-only {d}");
    }
    assert!(prefetched > 0);
}

#[test]
fn cleared_cascade_spends_nothing_after_round_one() {
    let prep = synthetic(100, 40.0, 3);
    let cfg = config();
    let ctx = SeedContext::new(&prep, &cfg, 0, 0).unwrap();
    assert!(ctx.cascade.aci_set(2).unwrap().is_empty());
    let run = run_deepening_only(&prep, &cfg, 0, &ctx).unwrap();
    assert_eq!(run.metrics.rounds_used, 1);
    assert_eq!(run.metrics.total_energy, run.ledger.rounds[0].offload_energy);
}

#[test]
fn single_round_schemes() {
    let prep = synthetic(50, 1.0, 4);
    let cfg = SimConfig {
        rounds: 1,
        ..config()
    };
    let ctx = SeedContext::new(&prep, &cfg, 0, 0).unwrap();
    let m = prep.train_len() as f64;
    let deep = run_deepening_only(&prep, &cfg, 0, &ctx).unwrap();
    assert_eq!(deep.ledger.rounds.len(), 1);
    assert_eq!(deep.ledger.rounds[0].offload_bits, 8.0 * m);
    let jd2p = run_jd2p(&prep, &cfg, 0, &ctx).unwrap();
    assert_eq!(jd2p.ledger, {
        let mut l = deep.ledger.clone();
        l.scheme = Scheme::Jd2p;
        l
    });
    let full = run_full_offload(&prep, &cfg, 0, &ctx).unwrap();
    assert_eq!(full.ledger.rounds.len(), 1);
    assert_eq!(full.ledger.rounds[0].offload_bits, 8.0 * 10.0 * m);
    assert_eq!(full.ledger.rounds[0].offload_duration, cfg.slot - cfg.tau);
}

#[test]
fn full_offload_spreads_bits_evenly() {
    let prep = synthetic(50, 1.0, 5);
    assert_eq!(prep.train_len(), 100);
    let cfg = config();
    let ctx = SeedContext::new(&prep, &cfg, 0, 0).unwrap();
    let full = run_full_offload(&prep, &cfg, 0, &ctx).unwrap();
    assert_eq!(full.ledger.rounds.len(), 10);
    for (k, r) in full.ledger.rounds.iter().enumerate() {
        assert_eq!(r.offload_bits, 800.0);
        let t = if k == 9 { 0.5 } else { 1.0 };
        assert_eq!(r.offload_duration, t);
        assert_eq!(r.gain, ctx.gains[k]);
    }
}

#[test]
fn inference_depth_bounded_by_cascade() {
    let prep = synthetic(100, 0.8, 6);
    let ctx = SeedContext::new(&prep, &config(), 0, 0).unwrap();
    let len = ctx.cascade.depth();
    for row in prep.test_x.row_iter() {
        let (_, used) = ctx.cascade.infer(row).unwrap();
        assert!((1..=len).contains(&used));
    }
}

#[test]
fn single_pair_single_seed_summary() {
    let prep = vec![synthetic(60, 1.0, 7)];
    let cfg = config();
    let outcomes = run_experiment(&prep, &cfg, 0, &[0], &Scheme::ALL).unwrap();
    assert_eq!(outcomes.len(), 1);
    let gains: Vec<f64> = outcomes[0].context.gains.clone();
    for run in &outcomes[0].runs {
        let used: Vec<f64> = run.ledger.rounds.iter().map(|r| r.gain).collect();
        assert_eq!(used, gains[..used.len()]);
    }
    let table = summarize(&outcomes, cfg.tau);
    assert_eq!(table.schemes.len(), 3);
    let energy = |s| outcomes[0].runs.iter().find(|r| r.scheme == s).unwrap().metrics.total_energy;
    let g = table.gains.iter().find(|g| g.baseline == Scheme::FullOffload).unwrap();
    let expected = 10.0 * (energy(Scheme::FullOffload) / energy(Scheme::Jd2p)).log10();
    assert!((g.gain_db_mean - expected).abs() < 1e-12);
    assert_eq!(gain_db(100.0, 1.0), 20.0);
}

#[test]
fn experiment_is_deterministic_and_ordered() {
    let prep = vec![synthetic(60, 1.0, 8), synthetic(60, 0.5, 9)];
    let cfg = config();
    let a = run_experiment(&prep, &cfg, 1, &[0, 1], &Scheme::ALL).unwrap();
    let b = run_experiment(&prep, &cfg, 1, &[0, 1], &Scheme::ALL).unwrap();
    assert_eq!(a.len(), 4);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.context.gains, y.context.gains);
        for (rx, ry) in x.runs.iter().zip(&y.runs) {
            assert_eq!(rx.ledger, ry.ledger);
            assert_eq!(rx.metrics, ry.metrics);
        }
    }
    let seeds: Vec<u64> = a.iter().map(|o| o.context.seed).collect();
    assert_eq!(seeds, [0, 1, 0, 1]);
}
