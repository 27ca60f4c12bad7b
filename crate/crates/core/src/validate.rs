//! Numerical self-checks run by `jd2p validate`.
//!
//! Each suite compares a library routine with an independent reference and
//! reports the largest deviation seen against its tolerance:
//!
//! | suite                | routine                     | reference                              |
//! |----------------------|-----------------------------|----------------------------------------|
//! | `prefetch_closed_form` | [`optimal_prefetch`]      | golden-section search of the bounded objective |
//! | `chi_square`         | [`chi_square_quantile`]     | `−2 ln(1−p)` (k = 2), Simpson-integrated normal quantile (k = 1) |
//! | `gamma_mean`         | Gamma fading sampler        | `E[g] = 1`                             |
//! | `gamma_inverse_mean` | Gamma fading sampler        | `E[1/g] = β/(β−1)`, as a ratio         |
//! | `pca`                | [`fit_pca_rows`] (subspace iteration) | Jacobi on the covariance     |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{inverse_gain_mean, ChannelModel, Fading};
use crate::embedding::{fit_pca_rows, FULL_DECOMPOSITION_MAX_DIM};
use crate::linalg::{dot, jacobi_eigen, orthonormalize, Matrix};
use crate::prefetch::{optimal_prefetch, p2_objective, PrefetchContext};
use crate::report::fmt_f64;
use crate::rng::{derive_seed, seeded};
use crate::special::chi_square_quantile;

pub const SUITES: [&str; 5] = [
    "prefetch_closed_form",
    "chi_square",
    "gamma_mean",
    "gamma_inverse_mean",
    "pca",
];

/// Default tolerance of each suite.
pub fn default_tolerance(suite: &str) -> Option<f64> {
    Some(match suite {
        "prefetch_closed_form" => 1e-6,
        "chi_square" => 1e-8,
        "gamma_mean" => 5e-3,
        "gamma_inverse_mean" => 1e-2,
        "pca" => 1e-6,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    /// Observed versus expected value at the worst case.
    pub worst: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationOptions {
    /// Per-suite tolerance overrides.
    pub tolerances: BTreeMap<String, f64>,
    /// Monte-Carlo draws per shape for the Gamma suites.
    pub gamma_draws: Option<usize>,
}

impl ValidationOptions {
    fn tolerance(&self, suite: &'static str) -> f64 {
        self.tolerances
            .get(suite)
            .copied()
            .or_else(|| default_tolerance(suite))
            .expect("known suite")
    }
}

struct Worst {
    error: f64,
    detail: String,
    cases: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            error: 0.0,
            detail: String::new(),
            cases: 0,
        }
    }

    fn record(&mut self, error: f64, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if error > self.error || error.is_nan() || self.detail.is_empty() {
            self.error = if error.is_nan() { f64::INFINITY } else { error };
            self.detail = detail();
        }
    }

    fn finish(self, name: &'static str, tolerance: f64) -> SuiteReport {
        SuiteReport {
            name,
            passed: self.error <= tolerance,
            max_abs_error: self.error,
            tolerance,
            cases: self.cases,
            worst: self.detail,
        }
    }
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The minimum may sit on a boundary of the feasible interval.
    [lo, mid, hi]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

/// Closed-form prefetch count against a direct minimization of the bounded
/// objective, over random contexts. Error is `|p* − p_search| / s`.
pub fn suite_prefetch(opts: &ValidationOptions) -> SuiteReport {
    let mut rng = seeded(0x7072_6f70);
    let mut worst = Worst::new();
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
            channel: ChannelModel::new(Fading::Constant, 1e-17, ell).expect("valid channel"),
        };
        let closed = optimal_prefetch(&ctx).expect("valid context");
        let search = golden_section_min(|p| p2_objective(&ctx, p).unwrap(), 0.0, s_k as f64);
        let err = (closed - search).abs() / s_k as f64;
        worst.record(err, || {
            format!("l={ell} rho={rho:.4} s={s_k} phi={phi:.4}: closed form {closed}, search {search}")
        });
    }
    worst.finish("prefetch_closed_form", opts.tolerance("prefetch_closed_form"))
}

fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `∫_0^z φ(x) dx` by composite Simpson.
fn normal_half_mass(z: f64) -> f64 {
    let n = 4000;
    let h = z / n as f64;
    let mut acc = normal_density(0.0) + normal_density(z);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * normal_density(i as f64 * h);
    }
    acc * h / 3.0
}

/// `z` with `P(|N(0,1)| ≤ z) = p`, by Newton on the quadrature.
fn normal_two_sided_quantile(p: f64) -> f64 {
    let mut z = 1.0;
    for _ in 0..100 {
        let step = (normal_half_mass(z) - p / 2.0) / normal_density(z);
        z -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    z
}

pub fn suite_chi_square(opts: &ValidationOptions) -> SuiteReport {
    let mut worst = Worst::new();
    for p in [0.5_f64, 0.9, 0.95, 0.99] {
        let expected2 = (-2.0 * (1.0 - p).ln()).sqrt();
        let expected1 = normal_two_sided_quantile(p);
        for (k, expected) in [(2u32, expected2), (1, expected1)] {
            let observed = chi_square_quantile(p, k).unwrap_or(f64::NAN);
            worst.record((observed - expected).abs(), || {
                format!("k={k} p={p}: observed {observed}, expected {expected}")
            });
        }
    }
    worst.finish("chi_square", opts.tolerance("chi_square"))
}

fn gamma_means(beta: f64, draws: usize) -> (f64, f64) {
    let channel = ChannelModel::gamma(beta, 1e-17, 3.0).expect("beta > 1");
    let mut rng = seeded(derive_seed(0x6761_6d6d, beta.to_bits()));
    let (mut sum, mut sum_inv) = (0.0, 0.0);
    for _ in 0..draws {
        let g = channel.sample_gain(&mut rng);
        sum += g;
        sum_inv += 1.0 / g;
    }
    (sum / draws as f64, sum_inv / draws as f64)
}

/// Both Gamma suites from one set of draws.
pub fn suite_gamma(opts: &ValidationOptions) -> [SuiteReport; 2] {
    let draws = opts.gamma_draws.unwrap_or(1_000_000);
    let mut mean = Worst::new();
    let mut inverse = Worst::new();
    for beta in [2.0, 4.0, 8.0] {
        let (m, inv) = gamma_means(beta, draws);
        let nu = inverse_gain_mean(beta).expect("beta > 1");
        mean.record((m - 1.0).abs(), || format!("beta={beta}: mean g {m}, expected 1"));
        inverse.record((inv / nu - 1.0).abs(), || {
            format!("beta={beta}: mean 1/g {inv}, expected {nu}")
        });
    }
    [
        mean.finish("gamma_mean", opts.tolerance("gamma_mean")),
        inverse.finish("gamma_inverse_mean", opts.tolerance("gamma_inverse_mean")),
    ]
}

/// PCA above the full-decomposition size against Jacobi on the covariance.
/// Error is the larger of the eigenvalue error relative to the top one and
/// `1 − |cos|` between matching components.
pub fn suite_pca(opts: &ValidationOptions) -> SuiteReport {
    let (m, d, f) = (400, FULL_DECOMPOSITION_MAX_DIM + 24, 10);
    let mut rng = seeded(0x7063_61);
    let mut axes: Vec<Vec<f64>> = (0..f + 2)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    orthonormalize(&mut axes, &mut rng);
    let mut data = Matrix::zeros(m, d);
    for i in 0..m {
        let row = data.row_mut(i);
        for x in row.iter_mut() {
            *x = 0.01 * rng.sample::<f64, _>(StandardNormal);
        }
        for (j, axis) in axes.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let scale = 10.0 * 0.7f64.powi(j as i32);
            for (x, a) in row.iter_mut().zip(axis) {
                *x += z * scale * a;
            }
        }
    }

    let mut worst = Worst::new();
    let model = match fit_pca_rows(&data, f) {
        Ok(model) => model,
        Err(e) => {
            worst.record(f64::INFINITY, || format!("fit failed: {e}"));
            return worst.finish("pca", opts.tolerance("pca"));
        }
    };

    let mut mean = vec![0.0; d];
    for row in data.row_iter() {
        for (a, x) in mean.iter_mut().zip(row) {
            *a += x / m as f64;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    for row in data.row_iter() {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]) / (m - 1) as f64;
            }
        }
    }
    let reference = jacobi_eigen(&cov, 1e-15, 100);
    let top = reference.values[0];
    for i in 0..f {
        let (obs, exp) = (model.explained_variance()[i], reference.values[i]);
        worst.record((obs - exp).abs() / top, || {
            format!("eigenvalue {i}: observed {obs}, expected {exp}")
        });
        let cos = dot(model.components().row(i), reference.vectors.row(i)).abs();
        worst.record(1.0 - cos, || format!("component {i}: |cos| {cos}, expected 1"));
    }
    worst.finish("pca", opts.tolerance("pca"))
}

/// Runs every suite in [`SUITES`] order.
pub fn run_all(opts: &ValidationOptions) -> Vec<SuiteReport> {
    let [mean, inverse] = suite_gamma(opts);
    vec![
        suite_prefetch(opts),
        suite_chi_square(opts),
        mean,
        inverse,
        suite_pca(opts),
    ]
}

pub const REPORT_HEADER: &str = "suite,status,max_abs_error,tolerance,cases,worst_case";

/// One CSV line per suite.
pub fn render(reports: &[SuiteReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},\"{}\"",
            r.name,
            if r.passed { "pass" } else { "fail" },
            fmt_f64(r.max_abs_error),
            fmt_f64(r.tolerance),
            r.cases,
            r.worst.replace('"', "'"),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let x = golden_section_min(|x| (x - 3.25).powi(2), 0.0, 10.0);
        assert!((x - 3.25).abs() < 1e-7);
        assert_eq!(golden_section_min(|x| x, 2.0, 5.0), 2.0);
    }

    #[test]
    fn simpson_normal_quantile() {
        assert!((normal_two_sided_quantile(0.95) - 1.959963984540054).abs() < 1e-10);
    }

    #[test]
    fn tolerance_override_applies() {
        let mut opts = ValidationOptions::default();
        opts.tolerances.insert("chi_square".into(), -1.0);
        assert!(!suite_chi_square(&opts).passed);
        assert!(suite_chi_square(&ValidationOptions::default()).passed);
    }

    #[test]
    fn every_suite_has_a_default() {
        for s in SUITES {
            assert!(default_tolerance(s).is_some());
        }
        assert!(default_tolerance("nope").is_none());
    }
}
