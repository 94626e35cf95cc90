//! Monte Carlo error bars, z-score histograms and distribution tests for
//! reconstructed density matrices.

use std::f64::consts::SQRT_2;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pattern::NumberPatternTable;
use super::reconstruct::{reconstruct_with_table, DensityMatrixEstimate, SigmaTable};
use crate::error::{Error, Result};
use crate::fock::{coherence_measure, TwoModeDensityMatrix};
use crate::gaussian::{bin_phases, sample_dataset, PhaseNoiseModel, PhaseSchedule, SqueezingSpec};

/// Phase bins per mode used by the simulated pipelines.
pub const DEFAULT_PHASE_BINS: usize = 30;

/// Smallest accepted number of Monte Carlo replicas.
pub const MIN_MC_REPS: usize = 20;

/// Seed of Monte Carlo replica `rep` under the user seed.
pub fn replica_seed(seed: u64, rep: usize) -> u64 {
    let mut z = seed ^ (rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of repeated simulate, bin and reconstruct pipelines.
#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub reps: usize,
    pub records: usize,
    pub sigma: SigmaTable,
    /// Entry-wise mean over replicas.
    pub mean: TwoModeDensityMatrix,
    pub coherence_mean: f64,
    pub coherence_std: f64,
    /// The first replica, kept as the Monte Carlo reference path.
    pub reference: DensityMatrixEstimate,
}

/// Runs `reps` independent pipelines of `n` records each.
pub fn monte_carlo_errors(
    spec: &SqueezingSpec,
    noise: &PhaseNoiseModel,
    n: usize,
    reps: usize,
    d: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if reps < MIN_MC_REPS {
        return Err(Error::invalid(format!(
            "Monte Carlo needs at least {MIN_MC_REPS} replicas, got {reps}"
        )));
    }
    let table = NumberPatternTable::new(d)?;
    let schedule = PhaseSchedule::BinCenters {
        n_bins: DEFAULT_PHASE_BINS,
    };
    let dim = d * d;
    let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
    let mut sq_re = DMatrix::<f64>::zeros(dim, dim);
    let mut sq_im = DMatrix::<f64>::zeros(dim, dim);
    let mut coherences = Vec::with_capacity(reps);
    let mut reference = None;
    for rep in 0..reps {
        let ds = sample_dataset(spec, noise, n, &schedule, replica_seed(seed, rep))?;
        let binned = bin_phases(&ds, DEFAULT_PHASE_BINS)?;
        let est = reconstruct_with_table(&binned, &table)?;
        let m = est.rho.matrix();
        sum += m;
        sq_re += m.map(|z| z.re * z.re);
        sq_im += m.map(|z| z.im * z.im);
        coherences.push(coherence_measure(&est.rho));
        if rep == 0 {
            reference = Some(est);
        }
    }
    let r = reps as f64;
    let mean = &sum / Complex64::new(r, 0.0);
    let unbiased = |sq: &DMatrix<f64>, part: fn(&Complex64) -> f64| {
        DMatrix::from_fn(dim, dim, |i, j| {
            let mu = part(&mean[(i, j)]);
            ((sq[(i, j)] - r * mu * mu) / (r - 1.0)).max(0.0).sqrt()
        })
    };
    let sigma = SigmaTable::new(d, unbiased(&sq_re, |z| z.re), unbiased(&sq_im, |z| z.im))?;
    let (coherence_mean, coherence_std) = mean_std(&coherences);
    Ok(MonteCarloSummary {
        reps,
        records: n,
        sigma,
        mean: TwoModeDensityMatrix::from_matrix(d, mean, 0.0)?,
        coherence_mean,
        coherence_std,
        reference: reference.expect("at least one replica"),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Normalized real and imaginary parts `Re ρ / σ_re`, `Im ρ / σ_im` of the
/// entries above the diagonal, skipping parts whose `σ` is zero.
pub fn offdiagonal_z_scores(rho: &TwoModeDensityMatrix, sigma: &SigmaTable) -> Result<Vec<f64>> {
    if rho.cutoff() != sigma.cutoff() {
        return Err(Error::invalid(
            "sigma table cutoff does not match the estimate",
        ));
    }
    let m = rho.matrix();
    let dim = m.nrows();
    let mut out = Vec::with_capacity(dim * (dim - 1));
    for i in 0..dim {
        for j in i + 1..dim {
            let z = m[(i, j)];
            let (sr, si) = (sigma.re_matrix()[(i, j)], sigma.im_matrix()[(i, j)]);
            if sr > 0.0 {
                out.push(z.re / sr);
            }
            if si > 0.0 {
                out.push(z.im / si);
            }
        }
    }
    Ok(out)
}

/// Histogram of off-diagonal `|z|` for an estimate and a Monte Carlo reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalHistogram {
    /// Bin edges in units of the per-entry standard deviation.
    pub edges: Vec<f64>,
    pub count_exp: Vec<usize>,
    pub count_mc: Vec<usize>,
}

impl OffDiagonalHistogram {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_lo,bin_hi,count_exp,count_mc")?;
        for i in 0..self.count_exp.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.count_exp[i],
                self.count_mc[i]
            )?;
        }
        Ok(())
    }
}

/// Default histogram edges `0, 0.25, ..., 5`; larger values land in the last bin.
pub fn default_edges() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.25).collect()
}

fn histogram(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for &v in values {
        let a = v.abs();
        let i = edges[1..].iter().position(|&e| a < e).unwrap_or(bins - 1);
        counts[i] += 1;
    }
    counts
}

/// Histograms of `|z|` over the off-diagonal parts of `est` and of the
/// Monte Carlo reference, both normalized by `sigma`.
pub fn offdiagonal_histogram(
    est: &DensityMatrixEstimate,
    reference: &DensityMatrixEstimate,
    sigma: &SigmaTable,
) -> Result<OffDiagonalHistogram> {
    let edges = default_edges();
    let exp = offdiagonal_z_scores(&est.rho, sigma)?;
    let mc = offdiagonal_z_scores(&reference.rho, sigma)?;
    Ok(OffDiagonalHistogram {
        count_exp: histogram(&exp, &edges),
        count_mc: histogram(&mc, &edges),
        edges,
    })
}

/// Coherence of the estimate and its spread when every entry is redrawn from
/// a normal distribution with its own `σ`.
pub fn coherence_with_errors(
    est: &TwoModeDensityMatrix,
    sigma: &SigmaTable,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if est.cutoff() != sigma.cutoff() {
        return Err(Error::invalid(
            "sigma table cutoff does not match the estimate",
        ));
    }
    if resamples < 2 {
        return Err(Error::invalid("at least two resamples are required"));
    }
    let c = coherence_measure(est);
    let dim = est.matrix().nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut m = est.matrix().clone();
        for i in 0..dim {
            for j in i..dim {
                let dr: f64 = StandardNormal.sample(&mut rng);
                let di: f64 = StandardNormal.sample(&mut rng);
                let z = m[(i, j)]
                    + Complex64::new(
                        dr * sigma.re_matrix()[(i, j)],
                        di * sigma.im_matrix()[(i, j)],
                    );
                m[(i, j)] = if i == j { Complex64::new(z.re, 0.0) } else { z };
                m[(j, i)] = m[(i, j)].conj();
            }
        }
        values.push(coherence_measure(&TwoModeDensityMatrix::from_matrix(
            est.cutoff(),
            m,
            0.0,
        )?));
    }
    Ok((c, mean_std(&values).1))
}

/// Nearest positive semidefinite unit-trace matrix in Frobenius norm, obtained
/// by clipping negative eigenvalues of the Hermitian part and renormalizing.
pub fn project_psd(rho: &TwoModeDensityMatrix) -> Result<TwoModeDensityMatrix> {
    let h = (rho.matrix() + rho.matrix().adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid(
            "matrix has no positive spectrum to project onto",
        ));
    }
    let v = &eig.eigenvectors;
    let diag = DMatrix::from_diagonal(&clipped.map(|x| Complex64::new(x / total, 0.0)));
    TwoModeDensityMatrix::from_matrix(rho.cutoff(), v * diag * v.adjoint(), rho.trunc_deficit())
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Cumulative distribution function of `|Z|` for standard normal `Z`.
pub fn half_normal_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::erf(x / SQRT_2)
    }
}

/// Result of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test of `values` against `cdf`, with the
/// Stephens small-sample correction of the asymptotic p-value.
pub fn ks_test<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<KsResult> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "KS test needs a non-empty sample of finite values",
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut stat: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let f = cdf(v);
        stat = stat.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    Ok(KsResult {
        n: sorted.len(),
        statistic: stat,
        p_value: kolmogorov_q((sn + 0.12 + 0.11 / sn) * stat),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn ks_accepts_normal_and_rejects_shifted() {
        let z = normal_sample(2000, 3);
        assert!(ks_test(&z, normal_cdf).unwrap().p_value > 0.01);
        let shifted: Vec<f64> = z.iter().map(|v| v + 0.3).collect();
        assert!(ks_test(&shifted, normal_cdf).unwrap().p_value < 1e-6);
        let mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
        assert!(ks_test(&mags, half_normal_cdf).unwrap().p_value > 0.01);
        assert!(ks_test(&[], normal_cdf).is_err());
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Tabulated critical values: Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098.
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 5e-4);
    }

    #[test]
    fn noiseless_entries_fill_first_bin() {
        let d = 2;
        let rho = TwoModeDensityMatrix::zeros(d);
        let sigma = SigmaTable::new(
            d,
            DMatrix::from_element(4, 4, 0.1),
            DMatrix::from_element(4, 4, 0.1),
        )
        .unwrap();
        let est = DensityMatrixEstimate {
            rho,
            sigma: None,
            records: 0,
            n_bins: 1,
            truncated: 0,
            condition: 0.0,
            warnings: Vec::new(),
        };
        let h = offdiagonal_histogram(&est, &est, &sigma).unwrap();
        assert_eq!(h.count_exp[0], 12);
        assert_eq!(h.count_exp.iter().sum::<usize>(), 12);
        assert_eq!(h.count_mc, h.count_exp);
        let mut csv = Vec::new();
        h.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("bin_lo,bin_hi,count_exp,count_mc\n0,0.25,12,12\n"));
    }

    #[test]
    fn coherence_resampling() {
        let d = 2;
        let mut rho = TwoModeDensityMatrix::zeros(d);
        rho.set(0, 0, 0, 0, Complex64::new(1.0, 0.0));
        let zero = SigmaTable::new(d, DMatrix::zeros(4, 4), DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(
            coherence_with_errors(&rho, &zero, 10, 1).unwrap(),
            (0.0, 0.0)
        );
        let some = SigmaTable::new(
            d,
            DMatrix::from_element(4, 4, 0.01),
            DMatrix::from_element(4, 4, 0.01),
        )
        .unwrap();
        let (c, s) = coherence_with_errors(&rho, &some, 200, 1).unwrap();
        assert_eq!(c, 0.0);
        assert!(s > 0.0 && s < 0.05);
    }

    #[test]
    fn psd_projection() {
        let d = 2;
        let mut rho = TwoModeDensityMatrix::zeros(d);
        rho.set(0, 0, 0, 0, Complex64::new(1.1, 0.0));
        rho.set(1, 1, 1, 1, Complex64::new(-0.1, 0.0));
        let p = project_psd(&rho).unwrap();
        assert!((p.get(0, 0, 0, 0).re - 1.0).abs() < 1e-12);
        assert!(p.min_eigenvalue() > -1e-12);
        assert!((p.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn replica_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..100).map(|r| replica_seed(7, r)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
