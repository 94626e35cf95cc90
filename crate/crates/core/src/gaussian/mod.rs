//! Synthetic balanced-homodyne data for Gaussian two-mode states.
//!
//! Quadratures follow `x̂(φ) = â e^{-iφ} + â† e^{iφ}`, so the vacuum has unit
//! variance and `x̂(φ) = x̂ cos φ + p̂ sin φ`.

mod dataset;
mod noise;
mod sample;

pub use dataset::{
    bin_phases, variance_profile, BinnedDataset, DatasetMeta, QuadratureDataset, Record,
    DATASET_SCHEMA, PQDS_MAGIC, PQDS_VERSION,
};
pub use noise::{sample_phase_noise, PhaseNoiseModel};
pub use sample::{
    sample_asymmetric, sample_dataset, sample_source, PhaseSchedule, Source, CHUNK_RECORDS,
};

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label stored with every dataset and table that depends on the quadrature scale.
pub const QUADRATURE_CONVENTION: &str = "vacuum-variance-1";

fn db_to_variance(db: f64) -> f64 {
    10f64.powf(-db.abs() / 10.0)
}

/// Two-mode squeezing `ξ = r e^{iθ}` detected with efficiency `η` per mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingSpec {
    pub r: f64,
    pub theta: f64,
    pub eta: f64,
}

impl SqueezingSpec {
    pub fn new(r: f64, theta: f64, eta: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid(format!(
                "squeezing r must be finite and >= 0, got {r}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::invalid("squeezing phase must be finite"));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(SqueezingSpec { r, theta, eta })
    }

    /// Squeezing quoted before losses: the squeezed quadrature variance of each
    /// source is `e^{-2r} = 10^{-|dB|/10}`. The sign of `db` is ignored.
    pub fn from_initial_db(db: f64, theta: f64, eta: f64) -> Result<Self> {
        if !db.is_finite() {
            return Err(Error::invalid("squeezing level must be finite"));
        }
        Self::new(-0.5 * db_to_variance(db).ln(), theta, eta)
    }

    /// Squeezing quoted after losses: `V_sq = η e^{-2r} + 1 - η = 10^{-|dB|/10}`.
    pub fn from_detected_db(db: f64, theta: f64, eta: f64) -> Result<Self> {
        if !db.is_finite() {
            return Err(Error::invalid("squeezing level must be finite"));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("eta must lie in [0, 1], got {eta}")));
        }
        let v = db_to_variance(db);
        let e2r = (v - 1.0 + eta) / eta;
        if !(e2r > 0.0) || eta == 0.0 && v < 1.0 {
            return Err(Error::invalid(format!(
                "{db} dB detected squeezing is unreachable at eta = {eta}"
            )));
        }
        Self::new(-0.5 * e2r.ln(), theta, eta)
    }

    pub fn vacuum() -> Self {
        SqueezingSpec {
            r: 0.0,
            theta: 0.0,
            eta: 1.0,
        }
    }

    /// `p = tanh r`.
    pub fn p(&self) -> f64 {
        self.r.tanh()
    }

    /// Ratio `tanh² r` of successive photon-number weights of the dephased
    /// lossless state.
    pub fn mixture_ratio(&self) -> f64 {
        self.p() * self.p()
    }

    pub fn initial_db(&self) -> f64 {
        -10.0 * (-2.0 * self.r).exp().log10()
    }

    pub fn detected_variance(&self) -> f64 {
        self.eta * (-2.0 * self.r).exp() + 1.0 - self.eta
    }

    pub fn detected_db(&self) -> f64 {
        -10.0 * self.detected_variance().log10()
    }

    /// Marginal quadrature variance `η cosh 2r + 1 - η` of either mode.
    pub fn marginal_variance(&self) -> f64 {
        self.eta * (2.0 * self.r).cosh() + 1.0 - self.eta
    }

    /// Amplitude `η sinh 2r` of the phase-dependent cross covariance.
    pub fn correlation_amplitude(&self) -> f64 {
        self.eta * (2.0 * self.r).sinh()
    }
}

/// Covariance of `(x̂_A(φ_A), x̂_B(φ_B))` for the lossy TMSV.
pub fn tmsv_covariance(spec: &SqueezingSpec, phi_a: f64, phi_b: f64) -> Matrix2<f64> {
    let v = spec.marginal_variance();
    let c = spec.correlation_amplitude() * (phi_a + phi_b - spec.theta).cos();
    Matrix2::new(v, c, c, v)
}

/// Two independently squeezed single-mode vacua combined on a balanced beam
/// splitter. Source 1 is squeezed along `x`; source 2 along the quadrature
/// rotated by `psi`. The outputs are `A = (1 + 2)/√2` and `B = (2 - 1)/√2`,
/// each detected with efficiency `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricSpec {
    pub r_1: f64,
    pub r_2: f64,
    pub psi: f64,
    pub eta: f64,
}

impl AsymmetricSpec {
    pub fn new(r_1: f64, r_2: f64, psi: f64, eta: f64) -> Result<Self> {
        for r in [r_1, r_2] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::invalid(format!(
                    "squeezing r must be finite and >= 0, got {r}"
                )));
            }
        }
        if !psi.is_finite() {
            return Err(Error::invalid("relative phase must be finite"));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(AsymmetricSpec { r_1, r_2, psi, eta })
    }

    /// Covariance of `(x_A, p_A, x_B, p_B)` after losses.
    pub fn phase_space_covariance(&self) -> Matrix4<f64> {
        let (s, c) = self.psi.sin_cos();
        let (a2, b2) = ((-2.0 * self.r_2).exp(), (2.0 * self.r_2).exp());
        let src2 = Matrix2::new(
            c * c * a2 + s * s * b2,
            c * s * (a2 - b2),
            c * s * (a2 - b2),
            s * s * a2 + c * c * b2,
        );
        let src1 = Matrix2::new((-2.0 * self.r_1).exp(), 0.0, 0.0, (2.0 * self.r_1).exp());
        let mut input = Matrix4::zeros();
        input.fixed_view_mut::<2, 2>(0, 0).copy_from(&src1);
        input.fixed_view_mut::<2, 2>(2, 2).copy_from(&src2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        #[rustfmt::skip]
        let bs = Matrix4::new(
             h, 0.0,   h, 0.0,
           0.0,   h, 0.0,   h,
            -h, 0.0,   h, 0.0,
           0.0,  -h, 0.0,   h,
        );
        let out = bs * input * bs.transpose();
        out * self.eta + Matrix4::identity() * (1.0 - self.eta)
    }
}

/// Covariance of `(x̂_A(φ_A), x̂_B(φ_B))` from a phase-space covariance over
/// `(x_A, p_A, x_B, p_B)`.
pub fn homodyne_covariance(sigma: &Matrix4<f64>, phi_a: f64, phi_b: f64) -> Matrix2<f64> {
    let (sa, ca) = phi_a.sin_cos();
    let (sb, cb) = phi_b.sin_cos();
    let ua = Vector4::new(ca, sa, 0.0, 0.0);
    let ub = Vector4::new(0.0, 0.0, cb, sb);
    let vaa = ua.dot(&(sigma * ua));
    let vbb = ub.dot(&(sigma * ub));
    let vab = ua.dot(&(sigma * ub));
    Matrix2::new(vaa, vab, vab, vbb)
}
