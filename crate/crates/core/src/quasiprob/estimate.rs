use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GridSpec, PhaseSpaceGrid};
use crate::error::{Error, Result};
use crate::filter::{FilterTable, PatternColumn, PatternTable};
use crate::gaussian::QuadratureDataset;

/// Records per work item of the sampled sums.
pub const BLOCK_RECORDS: usize = 8192;

/// Default number of contiguous ensembles behind `σ_N`.
pub const DEFAULT_ENSEMBLES: usize = 50;

/// Boundary magnitude of `P_Ω` above which the normalization sum is flagged.
pub const BOUNDARY_TOLERANCE: f64 = 1e-5;

fn check_inputs(ds: &QuadratureDataset, grid: &GridSpec, table: &PatternTable) -> Result<()> {
    grid.validate()?;
    if ds.convention() != table.convention() {
        return Err(Error::ConventionMismatch {
            dataset: ds.convention().to_string(),
            table: table.convention().to_string(),
        });
    }
    let limit = table.spec().a_max;
    if grid.a_max > limit || grid.b_max > limit {
        return Err(Error::invalid(format!(
            "grid extends beyond the pattern table range |α| <= {limit}"
        )));
    }
    Ok(())
}

fn columns<'t>(table: &'t PatternTable, axis: &[f64]) -> Result<Vec<PatternColumn<'t>>> {
    axis.iter().map(|&a| table.column(a)).collect()
}

/// `Σ_j f̄(x_A^j, a_i) f̄(x_B^j, b_k)` over one contiguous range of records.
fn block_sum(
    ds: &QuadratureDataset,
    range: std::ops::Range<usize>,
    cols_a: &[PatternColumn<'_>],
    cols_b: &[PatternColumn<'_>],
) -> DMatrix<f64> {
    let recs = &ds.records()[range];
    let fa = DMatrix::from_fn(recs.len(), cols_a.len(), |r, i| cols_a[i].eval(recs[r].x_a));
    let fb = DMatrix::from_fn(recs.len(), cols_b.len(), |r, k| cols_b[k].eval(recs[r].x_b));
    fa.tr_mul(&fb)
}

/// Per-ensemble means of the sampled `P_Ω` over `n_ens` equal contiguous
/// ensembles. Work is split into fixed blocks and reduced in block order.
fn ensemble_means(
    ds: &QuadratureDataset,
    grid: &GridSpec,
    table: &PatternTable,
    n_ens: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<DMatrix<f64>>, usize)> {
    check_inputs(ds, grid, table)?;
    let size = ds.len() / n_ens;
    if size == 0 {
        return Err(Error::invalid(format!(
            "{} records cannot fill {n_ens} ensembles",
            ds.len()
        )));
    }
    let (a, b) = (grid.a_axis(), grid.b_axis());
    let cols_a = columns(table, &a)?;
    let cols_b = columns(table, &b)?;
    let tasks: Vec<(usize, std::ops::Range<usize>)> = (0..n_ens)
        .flat_map(|e| {
            let start = e * size;
            (0..size.div_ceil(BLOCK_RECORDS)).map(move |k| {
                let lo = start + k * BLOCK_RECORDS;
                (e, lo..(lo + BLOCK_RECORDS).min(start + size))
            })
        })
        .collect();
    let partial: Vec<DMatrix<f64>> = tasks
        .par_iter()
        .map(|(_, r)| block_sum(ds, r.clone(), &cols_a, &cols_b))
        .collect();
    let mut means = vec![DMatrix::zeros(a.len(), b.len()); n_ens];
    for ((e, _), m) in tasks.iter().zip(&partial) {
        means[*e] += m;
    }
    for m in &mut means {
        *m /= size as f64;
    }
    Ok((a, b, means, ds.len() - size * n_ens))
}

/// `P_Ω(a, b) = (1/N) Σ_j f̄(x_A^j, a) f̄(x_B^j, b)` at the width of `table`.
/// The recorded phases are not used.
pub fn estimate_pomega(
    ds: &QuadratureDataset,
    grid: &GridSpec,
    table: &PatternTable,
) -> Result<PhaseSpaceGrid> {
    let (a, b, mut means, _) = ensemble_means(ds, grid, table, 1)?;
    Ok(PhaseSpaceGrid {
        a,
        b,
        p: means.remove(0),
        sigma: None,
        w: table.w(),
        n_total: ds.len(),
        n_ensembles: 1,
        dropped: 0,
    })
}

/// Mean over `n_ensembles` contiguous ensembles and `σ_N = σ / √n_ensembles`
/// with `σ` the across-ensemble standard deviation. Trailing records that do
/// not fill an ensemble are dropped and reported.
pub fn ensemble_stats(
    ds: &QuadratureDataset,
    grid: &GridSpec,
    table: &PatternTable,
    n_ensembles: usize,
) -> Result<PhaseSpaceGrid> {
    if n_ensembles < 2 {
        return Err(Error::invalid(
            "ensemble statistics need at least two ensembles",
        ));
    }
    let (a, b, means, dropped) = ensemble_means(ds, grid, table, n_ensembles)?;
    let n = n_ensembles as f64;
    let mut mean = DMatrix::zeros(a.len(), b.len());
    for m in &means {
        mean += m;
    }
    mean /= n;
    let mut var = DMatrix::zeros(a.len(), b.len());
    for m in &means {
        var += (m - &mean).map(|v| v * v);
    }
    let sigma = var.map(|v: f64| (v / (n - 1.0) / n).sqrt());
    Ok(PhaseSpaceGrid {
        a,
        b,
        p: mean,
        sigma: Some(sigma),
        w: table.w(),
        n_total: ds.len() - dropped,
        n_ensembles,
        dropped,
    })
}

/// Most significant negativity of a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    /// `Σ = max(-P/σ_N)` over the grid.
    pub sigma: f64,
    pub a_star: f64,
    pub b_star: f64,
    pub p_star: f64,
    pub sigma_n_star: f64,
    pub w: f64,
    /// `z = P/σ_N` in row-major `(a, b)` order.
    pub z: Vec<Vec<f64>>,
}

/// `Σ = max(-P/σ_N)`, ties going to the lexicographically smallest `(a, b)`.
pub fn significance(stats: &PhaseSpaceGrid) -> Result<SignificanceReport> {
    let sigma = stats
        .sigma
        .as_ref()
        .ok_or_else(|| Error::invalid("significance needs per-point standard errors"))?;
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid(
            "standard errors must be positive everywhere",
        ));
    }
    let mut best = (f64::NEG_INFINITY, 0, 0);
    let mut z = Vec::with_capacity(stats.a.len());
    for i in 0..stats.a.len() {
        let mut row = Vec::with_capacity(stats.b.len());
        for j in 0..stats.b.len() {
            let zij = stats.p[(i, j)] / sigma[(i, j)];
            if -zij > best.0 {
                best = (-zij, i, j);
            }
            row.push(zij);
        }
        z.push(row);
    }
    let (s, i, j) = best;
    Ok(SignificanceReport {
        sigma: s,
        a_star: stats.a[i],
        b_star: stats.b[j],
        p_star: stats.p[(i, j)],
        sigma_n_star: sigma[(i, j)],
        w: stats.w,
        z,
    })
}

/// Outcome at one width of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthScanEntry {
    pub w: f64,
    pub sigma: Option<f64>,
    pub min_p: Option<f64>,
    pub a_star: Option<f64>,
    pub b_star: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthScanResult {
    pub entries: Vec<WidthScanEntry>,
    pub n_ensembles: usize,
    /// Every width is evaluated on the same records, so the `Σ(w)` values are
    /// statistically correlated.
    pub shared_dataset: bool,
}

impl WidthScanResult {
    /// CSV with columns `w, Sigma, minP, a_star, b_star` (empty on failure).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "w,Sigma,minP,a_star,b_star")?;
        let cell = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.w,
                cell(e.sigma),
                cell(e.min_p),
                cell(e.a_star),
                cell(e.b_star)
            )?;
        }
        Ok(())
    }
}

/// `Σ(w)` and `min P(w)` for each width, on one shared dataset.
pub fn width_scan(
    ds: &QuadratureDataset,
    grid: &GridSpec,
    w_list: &[f64],
    filter: &FilterTable,
    n_ensembles: usize,
) -> WidthScanResult {
    let entries = w_list
        .iter()
        .map(|&w| {
            let run = || -> Result<(SignificanceReport, f64)> {
                let table = PatternTable::for_width(w, filter)?;
                let stats = ensemble_stats(ds, grid, &table, n_ensembles)?;
                Ok((significance(&stats)?, stats.min()))
            };
            match run() {
                Ok((rep, min_p)) => WidthScanEntry {
                    w,
                    sigma: Some(rep.sigma),
                    min_p: Some(min_p),
                    a_star: Some(rep.a_star),
                    b_star: Some(rep.b_star),
                    error: None,
                },
                Err(e) => WidthScanEntry {
                    w,
                    sigma: None,
                    min_p: None,
                    a_star: None,
                    b_star: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    WidthScanResult {
        entries,
        n_ensembles,
        shared_dataset: true,
    }
}

/// Phase-space integral of a radial surface with its boundary diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub integral: f64,
    /// Largest `|P|` on the outer edges `a = a_max` or `b = b_max`.
    pub boundary_max: f64,
    pub warning: Option<String>,
}

/// `Σ P(a, b) (2π a Δa)(2π b Δb)`.
pub fn normalization_check(grid: &PhaseSpaceGrid) -> Result<NormalizationReport> {
    let (na, nb) = (grid.a.len(), grid.b.len());
    if na < 2 || nb < 2 {
        return Err(Error::invalid(
            "normalization needs at least two points per axis",
        ));
    }
    let da = grid.a[1] - grid.a[0];
    let db = grid.b[1] - grid.b[0];
    let mut integral = 0.0;
    for i in 0..na {
        for j in 0..nb {
            integral += grid.p[(i, j)] * (TAU * grid.a[i] * da) * (TAU * grid.b[j] * db);
        }
    }
    let mut boundary_max: f64 = 0.0;
    for i in 0..na {
        boundary_max = boundary_max.max(grid.p[(i, nb - 1)].abs());
    }
    for j in 0..nb {
        boundary_max = boundary_max.max(grid.p[(na - 1, j)].abs());
    }
    let warning = (boundary_max >= BOUNDARY_TOLERANCE).then(|| {
        format!(
            "boundary values up to {boundary_max:.2e} exceed {BOUNDARY_TOLERANCE:e}; the grid misses part of the mass"
        )
    });
    Ok(NormalizationReport {
        integral,
        boundary_max,
        warning,
    })
}
