//! Direct sampling of the regularized two-mode P function `P_Ω(α, β)` from
//! homodyne records, with ensemble error bars and significance.
//!
//! The phase-averaged estimator depends on `|α|` and `|β|` only, so surfaces
//! live on a radial grid `(a, b)`.

mod estimate;
mod oracle;

pub use estimate::{
    ensemble_stats, estimate_pomega, normalization_check, significance, width_scan,
    NormalizationReport, SignificanceReport, WidthScanEntry, WidthScanResult, BLOCK_RECORDS,
    BOUNDARY_TOLERANCE, DEFAULT_ENSEMBLES,
};
pub use oracle::{pomega_oracle, pomega_oracle_gaussian};

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial axes `a = 0, Δ, ..., a_max` and `b = 0, Δ, ..., b_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a_max: f64,
    pub b_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            a_max: 3.0,
            b_max: 3.0,
            step: 0.1,
        }
    }
}

fn axis(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.a_max) && ok(self.b_max) && self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(
                "grid needs finite nonnegative extents and a positive step",
            ));
        }
        Ok(())
    }

    pub fn a_axis(&self) -> Vec<f64> {
        axis(self.a_max, self.step)
    }

    pub fn b_axis(&self) -> Vec<f64> {
        axis(self.b_max, self.step)
    }
}

/// `P_Ω` on a radial grid, optionally with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `p[(i, j)] = P_Ω(a_i, b_j)`.
    pub p: DMatrix<f64>,
    /// Standard error of the mean `σ_N` at each point.
    pub sigma: Option<DMatrix<f64>>,
    pub w: f64,
    /// Records entering the estimate.
    pub n_total: usize,
    pub n_ensembles: usize,
    /// Trailing records left out so that ensembles have equal size.
    pub dropped: usize,
}

impl PhaseSpaceGrid {
    pub fn value(&self, a: f64, b: f64) -> f64 {
        let (i, j) = self.nearest(a, b);
        self.p[(i, j)]
    }

    /// Indices of the grid point nearest to `(a, b)`.
    pub fn nearest(&self, a: f64, b: f64) -> (usize, usize) {
        let pick = |axis: &[f64], v: f64| {
            axis.iter()
                .enumerate()
                .min_by(|x, y| (x.1 - v).abs().total_cmp(&(y.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        (pick(&self.a, a), pick(&self.b, b))
    }

    pub fn min(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `z = P / σ_N`, when `σ_N` is available.
    pub fn z_scores(&self) -> Option<DMatrix<f64>> {
        self.sigma.as_ref().map(|s| self.p.zip_map(s, |p, s| p / s))
    }

    /// Tidy CSV with columns `a, b, P, sigma_N, z`, plus `oracle` when given.
    pub fn write_csv<W: Write>(&self, mut out: W, oracle: Option<&PhaseSpaceGrid>) -> Result<()> {
        if let Some(o) = oracle {
            if o.p.shape() != self.p.shape() {
                return Err(Error::invalid(
                    "oracle grid shape differs from the estimate",
                ));
            }
        }
        write!(out, "a,b,P,sigma_N,z")?;
        if oracle.is_some() {
            write!(out, ",oracle")?;
        }
        writeln!(out)?;
        for (i, &a) in self.a.iter().enumerate() {
            for (j, &b) in self.b.iter().enumerate() {
                let p = self.p[(i, j)];
                match &self.sigma {
                    Some(s) => write!(
                        out,
                        "{a:.6},{b:.6},{p:e},{:e},{:e}",
                        s[(i, j)],
                        p / s[(i, j)]
                    )?,
                    None => write!(out, "{a:.6},{b:.6},{p:e},,")?,
                }
                if let Some(o) = oracle {
                    write!(out, ",{:e}", o.p[(i, j)])?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}
