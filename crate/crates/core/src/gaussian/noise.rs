use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG stream reserved for phase noise, disjoint from the record chunks.
pub(crate) const NOISE_STREAM: u64 = u64::MAX;

/// Hidden phase fluctuation `δφ` added to mode A's nominal phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseNoiseModel {
    None,
    /// Independent draws from `U[0, 2π)`.
    Uniform,
    /// Single-pole low-pass filtered white Gaussian noise with standard
    /// deviation `sigma` and an exponential correlation time measured in records.
    BandLimited {
        sigma: f64,
        correlation_time: f64,
    },
}

impl PhaseNoiseModel {
    pub fn validate(&self) -> Result<()> {
        if let PhaseNoiseModel::BandLimited {
            sigma,
            correlation_time,
        } = *self
        {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::invalid(format!(
                    "noise sigma must be finite and >= 0, got {sigma}"
                )));
            }
            if !(correlation_time.is_finite() && correlation_time > 0.0) {
                return Err(Error::invalid(format!(
                    "correlation time must be finite and > 0, got {correlation_time}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PhaseNoiseModel::None)
    }
}

pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `n` phase offsets drawn from `model`, wrapped into `[0, 2π)`.
pub fn sample_phase_noise(model: &PhaseNoiseModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    Ok(match *model {
        PhaseNoiseModel::None => vec![0.0; n],
        PhaseNoiseModel::Uniform => (0..n).map(|_| rng.random::<f64>() * TAU).collect(),
        PhaseNoiseModel::BandLimited {
            sigma,
            correlation_time,
        } => {
            let rho = (-1.0 / correlation_time).exp();
            let innovation = (1.0 - rho * rho).sqrt();
            let mut y: f64 = rng.sample(StandardNormal);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push(wrap_phase(sigma * y));
                let e: f64 = rng.sample(StandardNormal);
                y = rho * y + innovation * e;
            }
            out
        }
    })
}
