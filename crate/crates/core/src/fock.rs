//! Truncated two-mode Fock-space states.
//!
//! Basis vectors `|k⟩_A ⊗ |m⟩_B` are stored at flat index `k * d + m`, so the
//! entry `ρ_{(k,m),(l,n)}` is `⟨k,m|ρ|l,n⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::binomial_pmf;

/// Version tag written into serialized density matrices.
pub const DENSITY_MATRIX_SCHEMA: u32 = 1;

/// One of the two optical modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Which off-diagonal entries count as coherences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoherenceRule {
    /// Both photon-number indices differ between row and column (`m≠n` and `k≠l`).
    #[default]
    Joint,
    /// Either index differs; also counts single-mode coherences.
    Either,
}

pub(crate) fn check_squeezing(p: f64, d: usize) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("p must lie in [0, 1), got {p}")));
    }
    if d < 1 {
        return Err(Error::invalid("cutoff must be at least 1"));
    }
    Ok(())
}

/// Pure state `Σ c_{k,m} |k⟩|m⟩` truncated at `d` photons per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PureTwoModeState {
    cutoff: usize,
    coefficients: Vec<Complex64>,
    trunc_deficit: f64,
}

impl PureTwoModeState {
    pub fn new(cutoff: usize, coefficients: Vec<Complex64>, trunc_deficit: f64) -> Result<Self> {
        if cutoff == 0 || coefficients.len() != cutoff * cutoff {
            return Err(Error::invalid(format!(
                "expected {} coefficients for cutoff {cutoff}, got {}",
                cutoff * cutoff,
                coefficients.len()
            )));
        }
        Ok(PureTwoModeState {
            cutoff,
            coefficients,
            trunc_deficit,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Probability weight lost to the truncation.
    pub fn trunc_deficit(&self) -> f64 {
        self.trunc_deficit
    }

    pub fn amplitude(&self, k: usize, m: usize) -> Complex64 {
        self.coefficients[k * self.cutoff + m]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn projector(&self) -> TwoModeDensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.coefficients);
        TwoModeDensityMatrix {
            cutoff: self.cutoff,
            entries: &v * v.adjoint(),
            trunc_deficit: self.trunc_deficit,
        }
    }
}

/// Two-mode squeezed vacuum with `p = tanh|ξ|` and `θ = arg ξ`.
pub fn build_tmsv(p: f64, theta: f64, d: usize) -> Result<PureTwoModeState> {
    check_squeezing(p, d)?;
    let mut coefficients = vec![Complex64::new(0.0, 0.0); d * d];
    let norm = (1.0 - p * p).sqrt();
    let step = Complex64::from_polar(p, theta);
    let mut c = Complex64::new(norm, 0.0);
    for n in 0..d {
        coefficients[n * d + n] = c;
        c *= step;
    }
    Ok(PureTwoModeState {
        cutoff: d,
        coefficients,
        trunc_deficit: p.powi(2 * d as i32),
    })
}

/// Density operator on the truncated two-mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeDensityMatrix {
    cutoff: usize,
    entries: DMatrix<Complex64>,
    trunc_deficit: f64,
}

impl TwoModeDensityMatrix {
    pub fn zeros(cutoff: usize) -> Self {
        let dim = cutoff * cutoff;
        TwoModeDensityMatrix {
            cutoff,
            entries: DMatrix::zeros(dim, dim),
            trunc_deficit: 0.0,
        }
    }

    pub fn from_matrix(
        cutoff: usize,
        entries: DMatrix<Complex64>,
        trunc_deficit: f64,
    ) -> Result<Self> {
        let dim = cutoff * cutoff;
        if cutoff == 0 || entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::invalid(format!(
                "matrix shape {:?} does not match cutoff {cutoff}",
                entries.shape()
            )));
        }
        Ok(TwoModeDensityMatrix {
            cutoff,
            entries,
            trunc_deficit,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn trunc_deficit(&self) -> f64 {
        self.trunc_deficit
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    #[inline]
    pub fn index(&self, k: usize, m: usize) -> usize {
        k * self.cutoff + m
    }

    /// `ρ_{(k,m),(l,n)}`: mode-A indices `k, l`, mode-B indices `m, n`.
    pub fn get(&self, k: usize, m: usize, l: usize, n: usize) -> Complex64 {
        self.entries[(self.index(k, m), self.index(l, n))]
    }

    pub fn set(&mut self, k: usize, m: usize, l: usize, n: usize, value: Complex64) {
        let (r, c) = (self.index(k, m), self.index(l, n));
        self.entries[(r, c)] = value;
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let dim = self.entries.nrows();
        (0..dim).all(|r| {
            (r..dim).all(|c| (self.entries[(r, c)] - self.entries[(c, r)].conj()).norm() <= tol)
        })
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Conjugation by `exp(i (φ_A n_A + φ_B n_B))`.
    pub fn rotate_phases(&self, phi_a: f64, phi_b: f64) -> Self {
        let d = self.cutoff;
        let mut out = self.clone();
        for k in 0..d {
            for m in 0..d {
                for l in 0..d {
                    for n in 0..d {
                        let phase = (k as f64 - l as f64) * phi_a + (m as f64 - n as f64) * phi_b;
                        let v = self.get(k, m, l, n) * Complex64::from_polar(1.0, phase);
                        out.set(k, m, l, n, v);
                    }
                }
            }
        }
        out
    }

    /// Independent uniform phase averaging of both modes: keeps only
    /// entries diagonal in both photon numbers.
    pub fn dephase(&self) -> Self {
        let d = self.cutoff;
        let mut out = TwoModeDensityMatrix {
            cutoff: d,
            entries: DMatrix::zeros(d * d, d * d),
            trunc_deficit: self.trunc_deficit,
        };
        for k in 0..d {
            for m in 0..d {
                let i = self.index(k, m);
                out.entries[(i, i)] = self.entries[(i, i)];
            }
        }
        out
    }

    pub fn partial_trace(&self, traced: Subsystem) -> SingleModeDensityMatrix {
        let d = self.cutoff;
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..d {
                    acc += match traced {
                        Subsystem::A => self.get(s, i, s, j),
                        Subsystem::B => self.get(i, s, j, s),
                    };
                }
                out[(i, j)] = acc;
            }
        }
        SingleModeDensityMatrix {
            cutoff: d,
            entries: out,
            trunc_deficit: self.trunc_deficit,
        }
    }

    /// Joint photon-number distribution `P(k, m) = ρ_{(k,m),(k,m)}` as a `d × d` matrix.
    pub fn photon_distribution(&self) -> DMatrix<f64> {
        let d = self.cutoff;
        DMatrix::from_fn(d, d, |k, m| self.get(k, m, k, m).re)
    }

    pub fn coherence(&self, rule: CoherenceRule) -> f64 {
        let d = self.cutoff;
        let mut sum = 0.0;
        for k in 0..d {
            for m in 0..d {
                for l in 0..d {
                    for n in 0..d {
                        let counted = match rule {
                            CoherenceRule::Joint => k != l && m != n,
                            CoherenceRule::Either => k != l || m != n,
                        };
                        if counted {
                            sum += self.get(k, m, l, n).norm();
                        }
                    }
                }
            }
        }
        sum
    }

    pub fn to_document(&self) -> DensityMatrixDocument {
        let d = self.cutoff;
        let mut entries = Vec::new();
        for k in 0..d {
            for m in 0..d {
                for l in 0..d {
                    for n in 0..d {
                        let v = self.get(k, m, l, n);
                        if v.re != 0.0 || v.im != 0.0 {
                            entries.push((k, m, l, n, v.re, v.im));
                        }
                    }
                }
            }
        }
        DensityMatrixDocument {
            schema_version: DENSITY_MATRIX_SCHEMA,
            cutoff: d,
            trunc_deficit: self.trunc_deficit,
            entries,
        }
    }

    pub fn from_document(doc: &DensityMatrixDocument) -> Result<Self> {
        let d = doc.cutoff;
        if d == 0 {
            return Err(Error::invalid("cutoff must be at least 1"));
        }
        let mut out = TwoModeDensityMatrix::zeros(d);
        out.trunc_deficit = doc.trunc_deficit;
        for &(k, m, l, n, re, im) in &doc.entries {
            if k >= d || m >= d || l >= d || n >= d {
                return Err(Error::invalid(format!(
                    "entry ({k},{m},{l},{n}) exceeds cutoff {d}"
                )));
            }
            out.set(k, m, l, n, Complex64::new(re, im));
        }
        Ok(out)
    }
}

/// JSON form of a two-mode density matrix listing its nonzero entries as
/// `[k, m, l, n, re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixDocument {
    pub schema_version: u32,
    pub cutoff: usize,
    pub trunc_deficit: f64,
    pub entries: Vec<(usize, usize, usize, usize, f64, f64)>,
}

/// Reduced state of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeDensityMatrix {
    cutoff: usize,
    entries: DMatrix<Complex64>,
    trunc_deficit: f64,
}

impl SingleModeDensityMatrix {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn trunc_deficit(&self) -> f64 {
        self.trunc_deficit
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.entries[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }
}

/// The fully phase-randomized TMSV `Σ (1-p) pⁿ |n,n⟩⟨n,n|`.
pub fn build_phase_averaged(p: f64, d: usize) -> Result<TwoModeDensityMatrix> {
    check_squeezing(p, d)?;
    let mut out = TwoModeDensityMatrix::zeros(d);
    let mut w = 1.0 - p;
    for n in 0..d {
        out.set(n, n, n, n, Complex64::new(w, 0.0));
        w *= p;
    }
    out.trunc_deficit = p.powi(d as i32);
    Ok(out)
}

/// Sum of magnitudes of the coherences with `m≠n` and `k≠l`.
pub fn coherence_measure(rho: &TwoModeDensityMatrix) -> f64 {
    rho.coherence(CoherenceRule::Joint)
}

pub fn dephase(rho: &TwoModeDensityMatrix) -> TwoModeDensityMatrix {
    rho.dephase()
}

pub fn partial_trace(rho: &TwoModeDensityMatrix, traced: Subsystem) -> SingleModeDensityMatrix {
    rho.partial_trace(traced)
}

/// Photon-number distribution of the phase-randomized TMSV after each mode
/// independently passes a loss channel of transmission `eta`:
/// `P(k, m) = Σ_n (1-p) pⁿ B(k; n, η) B(m; n, η)`.
pub fn loss_degraded_distribution(p: f64, eta: f64, d: usize) -> Result<DMatrix<f64>> {
    check_squeezing(p, d)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    let mut out = DMatrix::zeros(d, d);
    let mut w = 1.0 - p;
    let mut n = 0usize;
    while w > 1e-18 * (1.0 - p) || n < d {
        for k in 0..d.min(n + 1) {
            let bk = binomial_pmf(n, k, eta);
            for m in 0..d.min(n + 1) {
                out[(k, m)] += w * bk * binomial_pmf(n, m, eta);
            }
        }
        w *= p;
        n += 1;
        if n > 20_000 {
            break;
        }
    }
    Ok(out)
}
