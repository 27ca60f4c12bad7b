//! CSV tables written by the experiment runner.
//!
//! Floats are printed in scientific notation with 17 significant digits, so
//! every value reads back to the identical `f64`. Pairs are written `a-b`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::sim::{SeedOutcome, SweepTable};

pub const RUNS_HEADER: &str = "pair,seed,scheme,total_energy_J,error_rate,rounds_used,wasted_bits";
pub const ROUNDS_HEADER: &str = "pair,seed,scheme,round,aci_size,offloaded,offload_bits,\
offload_duration_s,gain,offload_energy_J,rho_hat,phi,p_star,p_bruteforce,prefetched,\
prefetch_bits,prefetch_energy_J,next_aci_size,wasted";
pub const CASCADES_HEADER: &str =
    "pair,seed,k,aci_size,delta_bar,d_bar,p_th,overlap_empty,candidates,train_error";
pub const SUMMARY_HEADER: &str =
    "tau_s,scheme,pairs,energy_mean_J,energy_std_J,error_mean,error_std";
pub const GAINS_HEADER: &str = "tau_s,comparison,pairs,gain_dB_mean,gain_dB_std,gain_dB_of_means";
pub const PAIR_MEANS_HEADER: &str = "tau_s,pair,scheme,energy_mean_J,error_mean";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn pair(p: (u8, u8)) -> String {
    format!("{}-{}", p.0, p.1)
}

pub fn runs_csv(outcomes: &[SeedOutcome]) -> String {
    let mut out = format!("{RUNS_HEADER}\n");
    for run in outcomes.iter().flat_map(|o| &o.runs) {
        let m = &run.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            pair(run.pair),
            run.seed,
            run.scheme.name(),
            fmt_f64(m.total_energy),
            fmt_f64(m.error_rate),
            m.rounds_used,
            fmt_f64(m.wasted_bits),
        );
    }
    out
}

pub fn rounds_csv(outcomes: &[SeedOutcome]) -> String {
    let mut out = format!("{ROUNDS_HEADER}\n");
    for run in outcomes.iter().flat_map(|o| &o.runs) {
        for r in &run.ledger.rounds {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                pair(run.pair),
                run.seed,
                run.scheme.name(),
                r.round,
                r.aci_size,
                r.offloaded_indices.len(),
                fmt_f64(r.offload_bits),
                fmt_f64(r.offload_duration),
                fmt_f64(r.gain),
                fmt_f64(r.offload_energy),
                fmt_f64(r.rho_hat),
                fmt_f64(r.phi),
                fmt_f64(r.p_star),
                r.p_bruteforce.map(|p| p.to_string()).unwrap_or_default(),
                r.prefetched_indices.len(),
                fmt_f64(r.prefetch_bits),
                fmt_f64(r.prefetch_energy),
                r.next_aci_size,
                r.wasted,
            );
        }
    }
    out
}

pub fn cascades_csv(outcomes: &[SeedOutcome]) -> String {
    let mut out = format!("{CASCADES_HEADER}\n");
    for o in outcomes {
        let cascade = &o.context.cascade;
        for stage in &cascade.stages {
            let t = &stage.threshold;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                pair(o.pair),
                o.context.seed,
                stage.depth,
                cascade.aci_set(stage.depth).map_or(0, <[usize]>::len),
                fmt_f64(t.delta_bar),
                fmt_f64(t.d_bar),
                fmt_f64(t.p_th),
                t.overlap_empty,
                t.candidates,
                fmt_f64(stage.train_error),
            );
        }
    }
    out
}

/// Energy-versus-error table, one row per `(τ, scheme)`.
pub fn summary_csv(table: &SweepTable) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in &table.schemes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(s.tau),
            s.scheme.name(),
            s.pairs,
            fmt_f64(s.energy_mean),
            fmt_f64(s.energy_std),
            fmt_f64(s.error_mean),
            fmt_f64(s.error_std),
        );
    }
    out
}

/// Gain of JD2P over each baseline, one row per `(τ, comparison)`.
pub fn gains_csv(table: &SweepTable) -> String {
    let mut out = format!("{GAINS_HEADER}\n");
    for g in &table.gains {
        let _ = writeln!(
            out,
            "{},jd2p_vs_{},{},{},{},{}",
            fmt_f64(g.tau),
            g.baseline.name(),
            g.pairs,
            fmt_f64(g.gain_db_mean),
            fmt_f64(g.gain_db_std),
            fmt_f64(g.gain_db_of_means),
        );
    }
    out
}

pub fn pair_means_csv(table: &SweepTable) -> String {
    let mut out = format!("{PAIR_MEANS_HEADER}\n");
    for (tau, m) in &table.pair_means {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(*tau),
            pair(m.pair),
            m.scheme.name(),
            fmt_f64(m.energy),
            fmt_f64(m.error_rate),
        );
    }
    out
}

/// Writes `(file name, contents)` pairs into `dir`, creating it if needed.
pub fn write_tables(dir: &Path, tables: &[(&str, String)]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in tables {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}
