//! The filter `Ω̃(t)`: autocorrelation of `exp(-|γ|⁴)` over the complex plane,
//! normalized to `Ω̃(0) = 1`.
//!
//! Writing `γ' = u - t/2` and integrating the angle of `u` in closed form
//! leaves the one-dimensional integral
//! `Ω̃(t) = (2/π)^{3/2} π ∫_0^∞ exp(-2 (v + t²/4)²) e^{-t² v} I0(t² v) dv`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::QUADRATURE_CONVENTION;
use crate::quad::{adaptive, Estimate};
use crate::special::i0e;

const TABLE_FORMAT: &str = "phasecorr-filter-table";
const TABLE_VERSION: u32 = 1;

fn prefactor() -> f64 {
    (2.0 / PI).powf(1.5) * PI
}

/// `Ω̃(t)` by adaptive quadrature, with the integration error estimate.
pub fn omega_tilde_estimate(t: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    let t2 = t * t;
    let a = 0.25 * t2;
    // Past this point the Gaussian factor is below e^{-50} of its value at v = 0.
    let upper = (a * a + 25.0).sqrt() - a;
    let pre = prefactor();
    let est = adaptive(
        |v| (-2.0 * v * (v + 2.0 * a)).exp() * i0e(t2 * v),
        0.0,
        upper,
        abs_tol / pre,
        rel_tol,
    )?;
    let scale = pre * (-2.0 * a * a).exp();
    Ok(Estimate {
        value: scale * est.value,
        error: scale * est.error,
    })
}

/// `Ω̃(t)` evaluated directly to near machine precision.
pub fn omega_tilde(t: f64) -> f64 {
    omega_tilde_estimate(t, 1e-15, 1e-13)
        .expect("the filter integrand is smooth and converges")
        .value
}

/// Grid and accuracy settings of a [`FilterTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings {
    pub step: f64,
    pub t_max: f64,
    /// Absolute error bound required of every tabulated value.
    pub abs_tol: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            step: 1.0 / 128.0,
            t_max: 6.0,
            abs_tol: 1e-10,
        }
    }
}

impl FilterSettings {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!(
                "filter step must be positive, got {}",
                self.step
            )));
        }
        if !(self.t_max >= 4.0 * self.step && self.t_max.is_finite()) {
            return Err(Error::invalid("filter range must span at least four steps"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid("filter tolerance must be positive"));
        }
        Ok(())
    }

    /// Identifier of the cached table for these settings.
    pub fn cache_key(&self) -> String {
        format!(
            "omega-tilde_step-{:016x}_tmax-{:016x}_tol-{:016x}_{}",
            self.step.to_bits(),
            self.t_max.to_bits(),
            self.abs_tol.to_bits(),
            QUADRATURE_CONVENTION
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableHeader {
    format: String,
    version: u32,
    key: String,
    settings: FilterSettings,
    max_error: f64,
    len: usize,
}

/// `Ω̃` tabulated on `[0, t_max]` and interpolated by four-point Lagrange
/// interpolation of `ln Ω̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTable {
    settings: FilterSettings,
    values: Vec<f64>,
    logs: Vec<f64>,
    max_error: f64,
}

impl FilterTable {
    pub fn build(settings: FilterSettings) -> Result<Self> {
        settings.validate()?;
        let n = (settings.t_max / settings.step).round() as usize + 1;
        let mut values = Vec::with_capacity(n);
        let mut max_error = 0.0f64;
        for i in 0..n {
            let t = i as f64 * settings.step;
            let est = omega_tilde_estimate(t, settings.abs_tol * 1e-3, 1e-13)?;
            if est.error > settings.abs_tol {
                return Err(Error::Tolerance(format!(
                    "filter quadrature error {:e} at t = {t} exceeds {:e}",
                    est.error, settings.abs_tol
                )));
            }
            max_error = max_error.max(est.error);
            values.push(est.value);
        }
        let table = Self::from_values(settings, values, max_error)?;
        table.verify()?;
        Ok(table)
    }

    fn from_values(settings: FilterSettings, values: Vec<f64>, max_error: f64) -> Result<Self> {
        if values.len() < 4 || values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Tolerance(
                "filter table must hold at least four positive finite values".to_string(),
            ));
        }
        let logs = values.iter().map(|v| v.ln()).collect();
        Ok(FilterTable {
            settings,
            values,
            logs,
            max_error,
        })
    }

    /// Compares interpolated and direct values at interval midpoints.
    fn verify(&self) -> Result<()> {
        let h = self.settings.step;
        let stride = (self.values.len() / 64).max(1);
        for i in (0..self.values.len() - 1).step_by(stride) {
            let t = (i as f64 + 0.5) * h;
            let direct = omega_tilde(t);
            let err = (self.eval(t) - direct).abs();
            if err > 1e-9 {
                return Err(Error::Tolerance(format!(
                    "filter interpolation error {err:e} at t = {t}"
                )));
            }
        }
        Ok(())
    }

    /// The process-wide table with default settings.
    pub fn shared() -> &'static FilterTable {
        static TABLE: OnceLock<FilterTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            FilterTable::build(FilterSettings::default())
                .expect("the default filter table builds and verifies")
        })
    }

    pub fn settings(&self) -> &FilterSettings {
        &self.settings
    }

    pub fn t_max(&self) -> f64 {
        self.settings.t_max
    }

    pub fn step(&self) -> f64 {
        self.settings.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest quadrature error estimate among the tabulated values.
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    /// Interpolated `Ω̃(t)`; zero beyond `t_max`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        if t > self.settings.t_max {
            return 0.0;
        }
        let n = self.logs.len() as isize;
        let s = t / self.settings.step;
        let i = (s.floor() as isize).min(n - 2);
        // Stencil i-1..=i+2, reflected at the origin because ln Ω̃ is even
        // and shifted inwards at the far end.
        let start = (i - 1).min(n - 4);
        let u = s - start as f64;
        let y = |k: isize| self.logs[(start + k).unsigned_abs()];
        let (y0, y1, y2, y3) = (y(0), y(1), y(2), y(3));
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        (l0 * y0 + l1 * y1 + l2 * y2 + l3 * y3).exp()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = TableHeader {
            format: TABLE_FORMAT.to_string(),
            version: TABLE_VERSION,
            key: self.settings.cache_key(),
            settings: self.settings,
            max_error: self.max_error,
            len: self.values.len(),
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut r = BufReader::new(File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: TableHeader = serde_json::from_str(line.trim_end())?;
        if header.format != TABLE_FORMAT || header.version != TABLE_VERSION {
            return Err(bad("not a filter table".to_string()));
        }
        if header.key != header.settings.cache_key() {
            return Err(bad(
                "cache key does not match the stored settings".to_string()
            ));
        }
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != 8 * header.len {
            return Err(bad("payload length disagrees with the header".to_string()));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_values(header.settings, values, header.max_error).map_err(|e| bad(e.to_string()))
    }

    pub fn cache_path(dir: &Path, settings: &FilterSettings) -> PathBuf {
        dir.join(format!("{}.pqft", settings.cache_key()))
    }

    /// Loads the table for `settings` from `dir`, building and storing it on a miss.
    pub fn load_or_build(dir: &Path, settings: FilterSettings) -> Result<Self> {
        let path = Self::cache_path(dir, &settings);
        if path.exists() {
            if let Ok(table) = Self::read(&path) {
                if table.settings == settings {
                    return Ok(table);
                }
            }
        }
        let table = Self::build(settings)?;
        std::fs::create_dir_all(dir)?;
        table.write(&path)?;
        Ok(table)
    }
}
