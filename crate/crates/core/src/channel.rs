//! Fading channel and monomial transmission-energy model.
//!
//! Sending `b` bits in `t` seconds over gain `g` costs
//! `E = λ b^ℓ / (g t^(ℓ−1))` Joule. Gains are i.i.d. per round and
//! Gamma-distributed with shape `β` and rate `β`, so `E[g] = 1` and
//! `E[1/g] = β / (β − 1)`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("Gamma shape must exceed 1 for E[1/g] to exist, got {0}")]
    DivergentMoment(f64),
    #[error("monomial order must lie in [2, 5], got {0}")]
    BadOrder(f64),
    #[error("energy coefficient must be positive, got {0}")]
    BadCoefficient(f64),
    #[error("transmission duration must be positive, got {0} s")]
    InvalidDuration(f64),
    #[error("channel gain must be positive, got {0}")]
    InvalidGain(f64),
    #[error("bit count must be non-negative, got {0}")]
    NegativeBits(f64),
}

/// Marsaglia–Tsang squeeze sampler for `Gamma(shape, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSampler {
    shape: f64,
    d: f64,
    c: f64,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Self {
        assert!(shape > 0.0, "gamma shape must be positive");
        let boosted = if shape < 1.0 { shape + 1.0 } else { shape };
        let d = boosted - 1.0 / 3.0;
        Self {
            shape,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let draw = loop {
            let x: f64 = rng.sample(StandardNormal);
            let v = 1.0 + self.c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u: f64 = rng.random();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                break self.d * v;
            }
        };
        if self.shape < 1.0 {
            let u: f64 = rng.random();
            draw * u.powf(1.0 / self.shape)
        } else {
            draw
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Unit-mean Gamma fading with shape `β > 1`.
    Gamma { beta: f64 },
    /// Deterministic channel, `g ≡ 1`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    fading: Fading,
    sampler: Option<GammaSampler>,
    lambda_coef: f64,
    ell: f64,
    nu: f64,
}

/// `E[1/g]` for unit-mean Gamma fading with shape `beta`.
pub fn inverse_gain_mean(beta: f64) -> Result<f64, ChannelError> {
    if !(beta > 1.0) {
        return Err(ChannelError::DivergentMoment(beta));
    }
    Ok(beta / (beta - 1.0))
}

impl ChannelModel {
    pub fn new(fading: Fading, lambda_coef: f64, ell: f64) -> Result<Self, ChannelError> {
        if !(2.0..=5.0).contains(&ell) {
            return Err(ChannelError::BadOrder(ell));
        }
        if !(lambda_coef > 0.0) || !lambda_coef.is_finite() {
            return Err(ChannelError::BadCoefficient(lambda_coef));
        }
        let (sampler, nu) = match fading {
            Fading::Gamma { beta } => (Some(GammaSampler::new_checked(beta)?), inverse_gain_mean(beta)?),
            Fading::Constant => (None, 1.0),
        };
        Ok(Self {
            fading,
            sampler,
            lambda_coef,
            ell,
            nu,
        })
    }

    pub fn gamma(beta: f64, lambda_coef: f64, ell: f64) -> Result<Self, ChannelError> {
        Self::new(Fading::Gamma { beta }, lambda_coef, ell)
    }

    pub fn fading(&self) -> Fading {
        self.fading
    }

    pub fn lambda_coef(&self) -> f64 {
        self.lambda_coef
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// `ν = E[1/g]`, known in advance from the fading law.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Draws the gain for one round.
    pub fn sample_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match (self.fading, self.sampler) {
            (Fading::Gamma { beta }, Some(s)) => s.sample(rng) / beta,
            _ => 1.0,
        }
    }

    /// `λ b^ℓ / (g t^(ℓ−1))`.
    pub fn energy(&self, bits: f64, duration: f64, gain: f64) -> Result<f64, ChannelError> {
        if !(duration > 0.0) {
            return Err(ChannelError::InvalidDuration(duration));
        }
        if !(gain > 0.0) {
            return Err(ChannelError::InvalidGain(gain));
        }
        if bits < 0.0 || bits.is_nan() {
            return Err(ChannelError::NegativeBits(bits));
        }
        if bits == 0.0 {
            return Ok(0.0);
        }
        Ok(self.lambda_coef * bits.powf(self.ell) / (gain * duration.powf(self.ell - 1.0)))
    }

    pub fn transmit(&self, bits: f64, duration: f64, gain: f64) -> Result<EnergyRecord, ChannelError> {
        Ok(EnergyRecord {
            bits,
            duration,
            gain,
            energy: self.energy(bits, duration, gain)?,
        })
    }
}

impl GammaSampler {
    fn new_checked(beta: f64) -> Result<Self, ChannelError> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(ChannelError::DivergentMoment(beta));
        }
        Ok(Self::new(beta))
    }
}

/// One transmission: payload, slot length, gain and the energy it cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub bits: f64,
    pub duration: f64,
    pub gain: f64,
    pub energy: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn model() -> ChannelModel {
        ChannelModel::gamma(4.0, 1e-17, 3.0).unwrap()
    }

    #[test]
    fn unit_inputs() {
        assert_eq!(model().energy(1.0, 1.0, 1.0).unwrap(), 1e-17);
        assert_eq!(model().energy(0.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn direct_evaluation() {
        let e = model().energy(8.0, 0.05, 1.0).unwrap();
        assert!((e - 2.048e-12).abs() < 1e-24);
    }

    #[test]
    fn doubling_bits_with_cubic_order() {
        let m = model();
        let ratio = m.energy(200.0, 0.3, 0.7).unwrap() / m.energy(100.0, 0.3, 0.7).unwrap();
        assert!((ratio - 8.0).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let m = model();
        assert_eq!(m.energy(1.0, 0.0, 1.0), Err(ChannelError::InvalidDuration(0.0)));
        assert_eq!(m.energy(1.0, -0.4, 1.0), Err(ChannelError::InvalidDuration(-0.4)));
        assert_eq!(m.energy(1.0, 1.0, 0.0), Err(ChannelError::InvalidGain(0.0)));
        assert_eq!(inverse_gain_mean(1.0), Err(ChannelError::DivergentMoment(1.0)));
        assert!(ChannelModel::gamma(0.5, 1e-17, 3.0).is_err());
        assert_eq!(ChannelModel::gamma(4.0, 1e-17, 1.0), Err(ChannelError::BadOrder(1.0)));
    }

    #[test]
    fn analytic_nu() {
        assert_eq!(inverse_gain_mean(2.0).unwrap(), 2.0);
        assert!((inverse_gain_mean(4.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((inverse_gain_mean(1e9).unwrap() - 1.0).abs() < 1e-8);
        let constant = ChannelModel::new(Fading::Constant, 1e-17, 3.0).unwrap();
        assert_eq!(constant.nu(), 1.0);
        assert_eq!(constant.sample_gain(&mut seeded(0)), 1.0);
    }

    #[test]
    fn unit_mean_gain_with_shape_variance() {
        let m = model();
        let mut rng = seeded(17);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| m.sample_gain(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
        assert!((var - 0.25).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn seeded_draws_repeat() {
        let m = model();
        let a: Vec<f64> = {
            let mut r = seeded(9);
            (0..16).map(|_| m.sample_gain(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = seeded(9);
            (0..16).map(|_| m.sample_gain(&mut r)).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|&g| g > 0.0));
    }
}
