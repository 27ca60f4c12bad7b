//! How many next-depth features to prefetch during a training window.
//!
//! In round `k` the device may push the `(k+1)`-th feature of `p` members of
//! `S(k)` during the training window `τ` at the known gain `g_k`. The rest of
//! `S(k+1)`, a Binomial(`s − p`, `ρ`) count `n`, goes out next round in
//! `t_next` seconds at an unknown gain. The expected cost is
//!
//! ```text
//! λα^ℓ p^ℓ / (g τ^(ℓ−1)) + λ ν α^ℓ E[n^ℓ] / t_next^(ℓ−1)
//! ```
//!
//! Bounding `E[n^ℓ] ≤ (μ + ℓ/2)^ℓ` turns this into a convex problem with the
//! closed-form minimizer in [`optimal_prefetch`]. [`p1_expected_energy`] and
//! [`brute_force_p1`] evaluate the unbounded objective exactly.

use thiserror::Error;

use crate::channel::ChannelModel;

/// Largest `s_k` accepted by [`brute_force_p1`].
pub const BRUTE_FORCE_MAX: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum PrefetchError {
    #[error("survival ratio must lie in [0, 1], got {0}")]
    RhoOutOfRange(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("prefetch count {p} outside [0, {s}]")]
    CountOutOfRange { p: f64, s: usize },
    #[error("exhaustive search limited to s <= {BRUTE_FORCE_MAX}, got {0}")]
    TooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefetchContext {
    /// `s_k = |S(k)|`.
    pub s_k: usize,
    /// Probability that a member of `S(k)` is still ambiguous at depth `k+1`.
    pub rho: f64,
    /// Current round gain `g_k`.
    pub gain: f64,
    /// Prefetch / training window `τ_k` (s).
    pub tau: f64,
    /// Next-round offloading window `t_{k+1}` (s).
    pub t_next: f64,
    /// Bits per feature `α`.
    pub alpha: f64,
    pub channel: ChannelModel,
}

impl PrefetchContext {
    pub fn validate(&self) -> Result<(), PrefetchError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(PrefetchError::RhoOutOfRange(self.rho));
        }
        for (name, value) in [
            ("gain", self.gain),
            ("tau", self.tau),
            ("t_next", self.t_next),
            ("alpha", self.alpha),
        ] {
            if !(value > 0.0) {
                return Err(PrefetchError::NonPositive { name, value });
            }
        }
        Ok(())
    }

    /// Prefetch aggressiveness `φ = (g ν)^(1/(ℓ−1)) τ / t_next`.
    pub fn phi(&self) -> f64 {
        let ell = self.channel.ell();
        (self.gain * self.channel.nu()).powf(1.0 / (ell - 1.0)) * self.tau / self.t_next
    }

    fn check_count(&self, p: f64) -> Result<(), PrefetchError> {
        if !(0.0..=self.s_k as f64).contains(&p) {
            return Err(PrefetchError::CountOutOfRange { p, s: self.s_k });
        }
        Ok(())
    }
}

/// Closed-form minimizer of the bounded objective, clamped to `[0, s_k]`.
pub fn optimal_prefetch(ctx: &PrefetchContext) -> Result<f64, PrefetchError> {
    ctx.validate()?;
    if ctx.rho == 0.0 || ctx.s_k == 0 {
        return Ok(0.0);
    }
    let ell = ctx.channel.ell();
    let phi = ctx.phi();
    let gain = phi * ctx.rho.powf(1.0 / (ell - 1.0)) / (1.0 + phi * ctx.rho.powf(ell / (ell - 1.0)));
    let p = gain * (ctx.s_k as f64 * ctx.rho + ell / 2.0);
    Ok(p.clamp(0.0, ctx.s_k as f64))
}

/// Integer decision: the closed form rounded to the nearest count.
pub fn prefetch_count(ctx: &PrefetchContext) -> Result<usize, PrefetchError> {
    Ok((optimal_prefetch(ctx)?.round() as usize).min(ctx.s_k))
}

/// Bounded objective with the common factor `λ α^ℓ` dropped.
pub fn p2_objective(ctx: &PrefetchContext, p: f64) -> Result<f64, PrefetchError> {
    ctx.validate()?;
    ctx.check_count(p)?;
    let ell = ctx.channel.ell();
    let mu = (ctx.s_k as f64 - p) * ctx.rho;
    Ok(p.powf(ell) / (ctx.gain * ctx.tau.powf(ell - 1.0))
        + ctx.channel.nu() / ctx.t_next.powf(ell - 1.0) * (mu + ell / 2.0).powf(ell))
}

/// Exact `E[n^order]` for `n ~ Binomial(trials, rho)`, summed in log space.
pub fn binomial_moment(trials: usize, rho: f64, order: f64) -> f64 {
    if trials == 0 || rho <= 0.0 {
        return if order == 0.0 { 1.0 } else { 0.0 };
    }
    if rho >= 1.0 {
        return (trials as f64).powf(order);
    }
    let (ln_p, ln_q) = (rho.ln(), (1.0 - rho).ln());
    let n = trials as f64;
    // log of pmf(j) * j^order, j = 1..=trials
    let mut log_terms = Vec::with_capacity(trials);
    let mut ln_binom = 0.0;
    for j in 1..=trials {
        let jf = j as f64;
        ln_binom += (n - jf + 1.0).ln() - jf.ln();
        log_terms.push(ln_binom + jf * ln_p + (n - jf) * ln_q + order * jf.ln());
    }
    let top = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = log_terms.iter().map(|t| (t - top).exp()).sum();
    let zero_term = if order == 0.0 { (n * ln_q).exp() } else { 0.0 };
    top.exp() * scaled + zero_term
}

/// Upper bound `(n ρ + order/2)^order` on the binomial moment.
pub fn moment_bound(trials: usize, rho: f64, order: f64) -> f64 {
    (trials as f64 * rho + order / 2.0).powf(order)
}

/// Exact expected energy (Joule) of prefetching `p` samples.
pub fn p1_expected_energy(ctx: &PrefetchContext, p: usize) -> Result<f64, PrefetchError> {
    ctx.validate()?;
    ctx.check_count(p as f64)?;
    let ell = ctx.channel.ell();
    let scale = ctx.channel.lambda_coef() * ctx.alpha.powf(ell);
    let prefetch = scale * (p as f64).powf(ell) / (ctx.gain * ctx.tau.powf(ell - 1.0));
    let offload = scale * ctx.channel.nu() / ctx.t_next.powf(ell - 1.0)
        * binomial_moment(ctx.s_k - p, ctx.rho, ell);
    Ok(prefetch + offload)
}

/// Exhaustive minimizer of [`p1_expected_energy`]; ties resolve to the smaller `p`.
pub fn brute_force_p1(ctx: &PrefetchContext) -> Result<usize, PrefetchError> {
    if ctx.s_k > BRUTE_FORCE_MAX {
        return Err(PrefetchError::TooLarge(ctx.s_k));
    }
    let mut best = (0usize, p1_expected_energy(ctx, 0)?);
    for p in 1..=ctx.s_k {
        let e = p1_expected_energy(ctx, p)?;
        if e < best.1 {
            best = (p, e);
        }
    }
    Ok(best.0)
}

/// How the survival ratio `ρ_k` is obtained each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    /// Previous round's realized ratio, prior in round 1.
    #[default]
    Estimator,
    /// Current round's realized ratio (clairvoyant).
    Oracle,
}

/// Previous-round estimate of `ρ_k`.
///
/// `history` holds `(|S(j)|, |S(j+1)|)` for completed rounds `j < k`; the last
/// entry's ratio is returned, or `prior` when there is none (or it is 0/0).
pub fn estimate_rho(history: &[(usize, usize)], prior: f64) -> f64 {
    match history.last() {
        Some(&(before, after)) if before > 0 => after as f64 / before as f64,
        _ => prior,
    }
}

/// Realized ratio `|S(k+1)| / |S(k)|` used by [`RhoMode::Oracle`].
pub fn oracle_rho(s_k: usize, s_next: usize) -> f64 {
    if s_k == 0 {
        0.0
    } else {
        s_next as f64 / s_k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Fading;

    fn ctx(ell: f64, rho: f64, s_k: usize, tau: f64, t_next: f64) -> PrefetchContext {
        PrefetchContext {
            s_k,
            rho,
            gain: 1.0,
            tau,
            t_next,
            alpha: 8.0,
            channel: ChannelModel::new(Fading::Constant, 1e-17, ell).unwrap(),
        }
    }

    #[test]
    fn zero_rho_means_no_prefetch() {
        assert_eq!(optimal_prefetch(&ctx(3.0, 0.0, 50, 0.5, 0.5)).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_balanced_case() {
        let c = ctx(2.0, 1.0, 9, 0.5, 0.5);
        assert!((c.phi() - 1.0).abs() < 1e-15);
        assert!((optimal_prefetch(&c).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_half_survival() {
        let p = optimal_prefetch(&ctx(3.0, 0.5, 20, 1.0, 1.0)).unwrap();
        let expected = 0.5f64.sqrt() / (1.0 + 0.5f64.powf(1.5)) * 11.5;
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 6.008).abs() < 1e-3);
    }

    #[test]
    fn full_prefetch_leaves_only_the_bound_offset() {
        let c = ctx(3.0, 0.4, 12, 0.5, 0.25);
        let v = p2_objective(&c, 12.0).unwrap();
        let first = 12f64.powi(3) / 0.25;
        let second = 1.0 / 0.25f64.powi(2) * 1.5f64.powi(3);
        assert!((v - first - second).abs() < 1e-9);
        assert!(p2_objective(&c, 12.5).is_err());
    }

    #[test]
    fn exact_moments() {
        assert!((binomial_moment(10, 0.5, 2.0) - 27.5).abs() < 1e-12);
        assert!(27.5 <= moment_bound(10, 0.5, 2.0));
        assert!((binomial_moment(37, 0.3, 1.0) - 37.0 * 0.3).abs() < 1e-12);
        assert_eq!(binomial_moment(0, 0.3, 3.0), 0.0);
        assert_eq!(binomial_moment(5, 1.0, 2.0), 25.0);
        assert!((binomial_moment(12, 0.2, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_zero_leaves_prefetch_term() {
        let c = ctx(3.0, 0.0, 10, 0.5, 0.5);
        let e = p1_expected_energy(&c, 4).unwrap();
        let prefetch = 1e-17 * 512.0 * 64.0 / 0.25;
        assert!((e - prefetch).abs() < 1e-24);
    }

    #[test]
    fn brute_force_edges() {
        assert_eq!(brute_force_p1(&ctx(3.0, 0.5, 0, 0.5, 0.5)).unwrap(), 0);
        assert_eq!(
            brute_force_p1(&ctx(3.0, 0.5, BRUTE_FORCE_MAX + 1, 0.5, 0.5)),
            Err(PrefetchError::TooLarge(BRUTE_FORCE_MAX + 1))
        );
    }

    #[test]
    fn rho_estimates() {
        assert_eq!(estimate_rho(&[], 0.5), 0.5);
        assert_eq!(estimate_rho(&[(100, 40)], 0.5), 0.4);
        assert_eq!(estimate_rho(&[(100, 40), (40, 10)], 0.5), 0.25);
        assert_eq!(oracle_rho(80, 20), 0.25);
    }

    #[test]
    fn invalid_context() {
        assert_eq!(
            optimal_prefetch(&ctx(3.0, 1.5, 10, 0.5, 0.5)),
            Err(PrefetchError::RhoOutOfRange(1.5))
        );
        assert!(matches!(
            optimal_prefetch(&ctx(3.0, 0.5, 10, 0.5, 0.0)),
            Err(PrefetchError::NonPositive { name: "t_next", .. })
        ));
    }
}
