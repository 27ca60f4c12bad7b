//! Gamma-family special functions and the chi-square quantile.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecialError {
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("degrees of freedom must be at least 1")]
    ZeroDegreesOfFreedom,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, reflection below 0.5).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Chi-square CDF with `k` degrees of freedom: `P(k/2, r/2)`.
pub fn chi_square_cdf(r: f64, k: u32) -> f64 {
    gamma_p(k as f64 / 2.0, r / 2.0)
}

fn chi_square_pdf(r: f64, k: u32) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let h = k as f64 / 2.0;
    ((h - 1.0) * r.ln() - r / 2.0 - h * std::f64::consts::LN_2 - ln_gamma(h)).exp()
}

/// Inverse chi-square CDF: the `r` with `chi_square_cdf(r, k) = p`.
pub fn chi_square_inverse_cdf(p: f64, k: u32) -> Result<f64, SpecialError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SpecialError::ProbabilityOutOfRange(p));
    }
    if k == 0 {
        return Err(SpecialError::ZeroDegreesOfFreedom);
    }
    let mut lo = 0.0;
    let mut hi = (k as f64).max(1.0);
    while chi_square_cdf(hi, k) < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = chi_square_cdf(r, k) - p;
        if f.abs() <= 1e-15 {
            break;
        }
        if f < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let pdf = chi_square_pdf(r, k);
        let newton = if pdf > 0.0 { r - f / pdf } else { f64::NAN };
        r = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(r)
}

/// Mahalanobis radius `δ̄ = sqrt(G⁻¹(p_th; k))` enclosing probability mass
/// `p_th` of a `k`-variate Gaussian.
pub fn chi_square_quantile(p_th: f64, k: u32) -> Result<f64, SpecialError> {
    Ok(chi_square_inverse_cdf(p_th, k)?.sqrt())
}
