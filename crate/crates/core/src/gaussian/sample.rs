use std::f64::consts::TAU;

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetMeta, QuadratureDataset, Record, DATASET_SCHEMA};
use super::noise::{sample_phase_noise, wrap_phase, PhaseNoiseModel};
use super::{homodyne_covariance, AsymmetricSpec, SqueezingSpec, QUADRATURE_CONVENTION};
use crate::error::{Error, Result};

/// Records per independent RNG stream. Fixed so that output never depends on
/// the number of worker threads.
pub const CHUNK_RECORDS: usize = 1 << 16;

/// Nominal LO phases assigned to successive records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSchedule {
    /// Cycle through the centers of the `n_bins × n_bins` phase bins.
    BinCenters { n_bins: usize },
    /// Both phases held constant.
    Fixed { phi_a: f64, phi_b: f64 },
    /// Independent uniform draws for each mode.
    Uniform,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        PhaseSchedule::BinCenters { n_bins: 30 }
    }
}

impl PhaseSchedule {
    fn validate(&self) -> Result<()> {
        match *self {
            PhaseSchedule::BinCenters { n_bins: 0 } => {
                Err(Error::invalid("phase schedule needs at least one bin"))
            }
            PhaseSchedule::Fixed { phi_a, phi_b } if !(phi_a.is_finite() && phi_b.is_finite()) => {
                Err(Error::invalid("fixed phases must be finite"))
            }
            _ => Ok(()),
        }
    }

    fn phases(&self, index: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match *self {
            PhaseSchedule::BinCenters { n_bins } => {
                let k = index % (n_bins * n_bins);
                let delta = TAU / n_bins as f64;
                (
                    ((k / n_bins) as f64 + 0.5) * delta,
                    ((k % n_bins) as f64 + 0.5) * delta,
                )
            }
            PhaseSchedule::Fixed { phi_a, phi_b } => (wrap_phase(phi_a), wrap_phase(phi_b)),
            PhaseSchedule::Uniform => (rng.random::<f64>() * TAU, rng.random::<f64>() * TAU),
        }
    }
}

/// Optical state feeding the two homodyne detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Tmsv(SqueezingSpec),
    Asymmetric(AsymmetricSpec),
    /// Independent thermal states with the given mean photon numbers.
    Thermal {
        mean_photons_a: f64,
        mean_photons_b: f64,
    },
    /// Independent coherent states whose optical phases are redrawn uniformly
    /// for every record.
    PhaseAveragedCoherent {
        amplitude_a: f64,
        amplitude_b: f64,
    },
}

impl Source {
    fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{what} must be finite and >= 0, got {v}"
                )))
            }
        };
        match *self {
            Source::Tmsv(s) => SqueezingSpec::new(s.r, s.theta, s.eta).map(|_| ()),
            Source::Asymmetric(s) => AsymmetricSpec::new(s.r_1, s.r_2, s.psi, s.eta).map(|_| ()),
            Source::Thermal {
                mean_photons_a,
                mean_photons_b,
            } => nonneg(mean_photons_a, "mean photon number")
                .and(nonneg(mean_photons_b, "mean photon number")),
            Source::PhaseAveragedCoherent {
                amplitude_a,
                amplitude_b,
            } => nonneg(amplitude_a, "coherent amplitude")
                .and(nonneg(amplitude_b, "coherent amplitude")),
        }
    }
}

enum Plan {
    Tmsv { v: f64, c: f64, theta: f64 },
    Covariance(Matrix4<f64>),
    Thermal { sa: f64, sb: f64 },
    Coherent { a: f64, b: f64 },
}

impl Plan {
    fn new(source: &Source) -> Self {
        match *source {
            Source::Tmsv(s) => Plan::Tmsv {
                v: s.marginal_variance(),
                c: s.correlation_amplitude(),
                theta: s.theta,
            },
            Source::Asymmetric(s) => Plan::Covariance(s.phase_space_covariance()),
            Source::Thermal {
                mean_photons_a,
                mean_photons_b,
            } => Plan::Thermal {
                sa: (1.0 + 2.0 * mean_photons_a).sqrt(),
                sb: (1.0 + 2.0 * mean_photons_b).sqrt(),
            },
            Source::PhaseAveragedCoherent {
                amplitude_a,
                amplitude_b,
            } => Plan::Coherent {
                a: amplitude_a,
                b: amplitude_b,
            },
        }
    }

    /// Draws `(x_A, x_B)` given the effective phases.
    fn draw(&self, phi_a: f64, phi_b: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let (v11, v12, v22) = match self {
            Plan::Tmsv { v, c, theta } => (*v, c * (phi_a + phi_b - theta).cos(), *v),
            Plan::Covariance(sigma) => {
                let m = homodyne_covariance(sigma, phi_a, phi_b);
                (m[(0, 0)], m[(0, 1)], m[(1, 1)])
            }
            Plan::Thermal { sa, sb } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                return (sa * z1, sb * z2);
            }
            Plan::Coherent { a, b } => {
                let ta = rng.random::<f64>() * TAU;
                let tb = rng.random::<f64>() * TAU;
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                return (
                    2.0 * a * (ta - phi_a).cos() + z1,
                    2.0 * b * (tb - phi_b).cos() + z2,
                );
            }
        };
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let s11 = v11.sqrt();
        let l21 = v12 / s11;
        let l22 = (v22 - l21 * l21).max(0.0).sqrt();
        (s11 * z1, l21 * z1 + l22 * z2)
    }
}

/// General sampler behind [`sample_dataset`] and [`sample_asymmetric`].
///
/// Record `j` belongs to chunk `j / CHUNK_RECORDS`, whose RNG is the ChaCha
/// stream of that index under `seed`; the phase noise uses its own stream.
pub fn sample_source(
    source: &Source,
    noise: &PhaseNoiseModel,
    n: usize,
    schedule: &PhaseSchedule,
    seed: u64,
) -> Result<QuadratureDataset> {
    if n == 0 {
        return Err(Error::invalid("record count must be positive"));
    }
    source.validate()?;
    schedule.validate()?;
    let delta = sample_phase_noise(noise, n, seed)?;
    let plan = Plan::new(source);
    let n_chunks = n.div_ceil(CHUNK_RECORDS);
    let chunks: Vec<Vec<Record>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let start = chunk * CHUNK_RECORDS;
            let end = (start + CHUNK_RECORDS).min(n);
            (start..end)
                .map(|j| {
                    let (phi_a, phi_b) = schedule.phases(j, &mut rng);
                    let (x_a, x_b) = plan.draw(phi_a + delta[j], phi_b, &mut rng);
                    Record {
                        x_a,
                        x_b,
                        phi_a,
                        phi_b,
                    }
                })
                .collect()
        })
        .collect();
    let records: Vec<Record> = chunks.into_iter().flatten().collect();
    let meta = DatasetMeta {
        schema_version: DATASET_SCHEMA,
        convention: QUADRATURE_CONVENTION.to_string(),
        record_count: n as u64,
        seed: Some(seed),
        source: Some(*source),
        noise: Some(*noise),
        schedule: Some(*schedule),
        notes: Vec::new(),
    };
    QuadratureDataset::new(records, meta)
}

/// Homodyne records of the lossy TMSV with the hidden phase noise added to
/// mode A. Stored phases are the nominal ones.
pub fn sample_dataset(
    spec: &SqueezingSpec,
    noise: &PhaseNoiseModel,
    n: usize,
    schedule: &PhaseSchedule,
    seed: u64,
) -> Result<QuadratureDataset> {
    sample_source(&Source::Tmsv(*spec), noise, n, schedule, seed)
}

/// Homodyne records of two unequal single-mode squeezers combined on a
/// balanced beam splitter.
pub fn sample_asymmetric(
    spec: &AsymmetricSpec,
    noise: &PhaseNoiseModel,
    n: usize,
    schedule: &PhaseSchedule,
    seed: u64,
) -> Result<QuadratureDataset> {
    sample_source(&Source::Asymmetric(*spec), noise, n, schedule, seed)
}
