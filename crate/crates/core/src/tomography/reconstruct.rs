//! Density-matrix reconstruction from phase-binned homodyne records.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::NumberPatternTable;
use crate::error::{Error, Result};
use crate::fock::{DensityMatrixDocument, TwoModeDensityMatrix};
use crate::gaussian::BinnedDataset;

/// Version tag of serialized estimates.
pub const ESTIMATE_SCHEMA: u32 = 1;

/// Default cutoff per mode for reconstructions.
pub const DEFAULT_TOMOGRAPHY_CUTOFF: usize = 5;

/// Naive standard error of a diagonal entry above which a warning is issued.
pub const CONDITION_WARNING: f64 = 0.1;

/// Per-entry standard deviations of the real and imaginary parts of an
/// estimated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaTable {
    cutoff: usize,
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl SigmaTable {
    pub fn new(cutoff: usize, re: DMatrix<f64>, im: DMatrix<f64>) -> Result<Self> {
        let dim = cutoff * cutoff;
        if cutoff == 0 || re.shape() != (dim, dim) || im.shape() != (dim, dim) {
            return Err(Error::invalid("sigma table shape does not match cutoff"));
        }
        Ok(SigmaTable { cutoff, re, im })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `σ` of the real part of `ρ_{(k,m),(l,n)}`.
    pub fn re(&self, k: usize, m: usize, l: usize, n: usize) -> f64 {
        let d = self.cutoff;
        self.re[(k * d + m, l * d + n)]
    }

    /// `σ` of the imaginary part of `ρ_{(k,m),(l,n)}`.
    pub fn im(&self, k: usize, m: usize, l: usize, n: usize) -> f64 {
        let d = self.cutoff;
        self.im[(k * d + m, l * d + n)]
    }

    pub fn re_matrix(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im_matrix(&self) -> &DMatrix<f64> {
        &self.im
    }

    /// Entries as `[k, m, l, n, σ_re, σ_im]`.
    pub fn rows(&self) -> Vec<(usize, usize, usize, usize, f64, f64)> {
        let d = self.cutoff;
        let mut out = Vec::with_capacity(d.pow(4));
        for k in 0..d {
            for m in 0..d {
                for l in 0..d {
                    for n in 0..d {
                        out.push((k, m, l, n, self.re(k, m, l, n), self.im(k, m, l, n)));
                    }
                }
            }
        }
        out
    }

    pub fn from_rows(
        cutoff: usize,
        rows: &[(usize, usize, usize, usize, f64, f64)],
    ) -> Result<Self> {
        let dim = cutoff * cutoff;
        let mut re = DMatrix::zeros(dim, dim);
        let mut im = DMatrix::zeros(dim, dim);
        for &(k, m, l, n, sr, si) in rows {
            if k.max(m).max(l).max(n) >= cutoff {
                return Err(Error::invalid("sigma row index beyond cutoff"));
            }
            re[(k * cutoff + m, l * cutoff + n)] = sr;
            im[(k * cutoff + m, l * cutoff + n)] = si;
        }
        Self::new(cutoff, re, im)
    }
}

/// Pattern-function estimate of a two-mode density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixEstimate {
    pub rho: TwoModeDensityMatrix,
    pub sigma: Option<SigmaTable>,
    pub records: usize,
    pub n_bins: usize,
    /// Records with a quadrature outside the pattern table, which contribute zero.
    pub truncated: usize,
    /// Largest naive standard error of a diagonal entry, estimated from the
    /// within-bin spread of the data.
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Serialized estimate: the density matrix document plus the optional
/// parallel σ table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDocument {
    pub schema_version: u32,
    pub records: usize,
    pub n_bins: usize,
    pub truncated: usize,
    pub condition: f64,
    pub warnings: Vec<String>,
    pub density_matrix: DensityMatrixDocument,
    pub sigma: Option<Vec<(usize, usize, usize, usize, f64, f64)>>,
}

impl DensityMatrixEstimate {
    pub fn cutoff(&self) -> usize {
        self.rho.cutoff()
    }

    pub fn with_sigma(mut self, sigma: SigmaTable) -> Result<Self> {
        if sigma.cutoff() != self.cutoff() {
            return Err(Error::invalid(
                "sigma table cutoff does not match the estimate",
            ));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn to_document(&self) -> EstimateDocument {
        EstimateDocument {
            schema_version: ESTIMATE_SCHEMA,
            records: self.records,
            n_bins: self.n_bins,
            truncated: self.truncated,
            condition: self.condition,
            warnings: self.warnings.clone(),
            density_matrix: self.rho.to_document(),
            sigma: self.sigma.as_ref().map(SigmaTable::rows),
        }
    }

    pub fn from_document(doc: &EstimateDocument) -> Result<Self> {
        let rho = TwoModeDensityMatrix::from_document(&doc.density_matrix)?;
        let sigma = match &doc.sigma {
            Some(rows) => Some(SigmaTable::from_rows(rho.cutoff(), rows)?),
            None => None,
        };
        Ok(DensityMatrixEstimate {
            rho,
            sigma,
            records: doc.records,
            n_bins: doc.n_bins,
            truncated: doc.truncated,
            condition: doc.condition,
            warnings: doc.warnings.clone(),
        })
    }
}

struct BinSums {
    products: Vec<f64>,
    diag_sq: Vec<f64>,
    count: usize,
    truncated: usize,
}

fn accumulate(
    binned: &BinnedDataset<'_>,
    a: usize,
    b: usize,
    table: &NumberPatternTable,
) -> BinSums {
    let d = table.cutoff();
    let pairs = table.pair_count();
    let mut products = vec![0.0; pairs * pairs];
    let mut diag_sq = vec![0.0; d * d];
    let mut fa = vec![0.0; pairs];
    let mut fb = vec![0.0; pairs];
    let mut truncated = 0;
    let diag: Vec<usize> = (0..d).map(|k| table.pair_index(k, k)).collect();
    for r in binned.records(a, b) {
        let ok_a = table.eval_all(r.x_a, &mut fa);
        let ok_b = table.eval_all(r.x_b, &mut fb);
        if !(ok_a && ok_b) {
            truncated += 1;
            continue;
        }
        for (p, &va) in fa.iter().enumerate() {
            let row = &mut products[p * pairs..(p + 1) * pairs];
            for (acc, &vb) in row.iter_mut().zip(&fb) {
                *acc += va * vb;
            }
        }
        for k in 0..d {
            for m in 0..d {
                let v = fa[diag[k]] * fb[diag[m]];
                diag_sq[k * d + m] += v * v;
            }
        }
    }
    BinSums {
        products,
        diag_sq,
        count: binned.count(a, b),
        truncated,
    }
}

/// Reconstructs `ρ_{(k,m),(l,n)}` with the default pattern table at cutoff `d`.
pub fn reconstruct_dm(binned: &BinnedDataset<'_>, d: usize) -> Result<DensityMatrixEstimate> {
    let table = NumberPatternTable::new(d)?;
    reconstruct_with_table(binned, &table)
}

/// Average over records of `f_kl(x_A) e^{i(k-l)φ_A} f_mn(x_B) e^{i(m-n)φ_B}`,
/// with `φ` the bin centers and each bin pair weighted by the inverse of its
/// record count. The result is conjugate-symmetrized.
pub fn reconstruct_with_table(
    binned: &BinnedDataset<'_>,
    table: &NumberPatternTable,
) -> Result<DensityMatrixEstimate> {
    if let Some((a, b)) = binned.first_empty() {
        return Err(Error::EmptyBinPair { a, b });
    }
    let ds = binned.dataset();
    if ds.convention() != table.convention() {
        return Err(Error::ConventionMismatch {
            dataset: ds.convention().to_string(),
            table: table.convention().to_string(),
        });
    }
    let d = table.cutoff();
    let nb = binned.n_bins();
    let pairs = table.pair_count();
    let sums: Vec<BinSums> = (0..binned.n_pairs())
        .into_par_iter()
        .map(|k| accumulate(binned, k / nb, k % nb, table))
        .collect();

    let dim = d * d;
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    let mut var_diag = vec![0.0; dim];
    let mut truncated = 0;
    let norm = 1.0 / binned.n_pairs() as f64;
    for (k, s) in sums.iter().enumerate() {
        let (phi_a, phi_b) = (binned.bin_center(k / nb), binned.bin_center(k % nb));
        let w = norm / s.count as f64;
        truncated += s.truncated;
        let phase_a: Vec<Complex64> = (0..2 * d - 1)
            .map(|j| Complex64::from_polar(1.0, (j as f64 - (d - 1) as f64) * phi_a))
            .collect();
        let phase_b: Vec<Complex64> = (0..2 * d - 1)
            .map(|j| Complex64::from_polar(1.0, (j as f64 - (d - 1) as f64) * phi_b))
            .collect();
        for ka in 0..d {
            for la in 0..d {
                let pa = table.pair_index(ka, la);
                let ea = phase_a[ka + d - 1 - la];
                for mb in 0..d {
                    for nb_ in 0..d {
                        let pb = table.pair_index(mb, nb_);
                        let v = s.products[pa * pairs + pb] * w;
                        rho[(ka * d + mb, la * d + nb_)] += ea * phase_b[mb + d - 1 - nb_] * v;
                    }
                }
            }
        }
        let c = s.count as f64;
        for ka in 0..d {
            for mb in 0..d {
                let mean =
                    s.products[table.pair_index(ka, ka) * pairs + table.pair_index(mb, mb)] / c;
                let spread = (s.diag_sq[ka * d + mb] - c * mean * mean).max(0.0);
                var_diag[ka * d + mb] += w * w * spread;
            }
        }
    }
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let condition = var_diag.iter().copied().fold(0.0, f64::max).sqrt();

    let mut warnings = Vec::new();
    if truncated > 0 {
        warnings.push(format!(
            "{truncated} records fell outside |x| <= {} and were dropped",
            table.x_max()
        ));
    }
    if condition > CONDITION_WARNING {
        warnings.push(format!(
            "cutoff {d} is large for {} records: diagonal standard error up to {condition:.3}",
            ds.len()
        ));
    }
    Ok(DensityMatrixEstimate {
        rho: TwoModeDensityMatrix::from_matrix(d, rho, 0.0)?,
        sigma: None,
        records: ds.len(),
        n_bins: nb,
        truncated,
        condition,
        warnings,
    })
}
