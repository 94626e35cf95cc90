use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::noise::PhaseNoiseModel;
use super::sample::{PhaseSchedule, Source};
use super::QUADRATURE_CONVENTION;
use crate::error::{Error, Result};
use crate::fock::Subsystem;

pub const PQDS_MAGIC: &[u8; 4] = b"PQDS";
pub const PQDS_VERSION: u32 = 1;
pub const DATASET_SCHEMA: u32 = 1;

/// One balanced-homodyne event: quadrature values and nominal LO phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub x_a: f64,
    pub x_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
}

/// Provenance carried in the JSON sidecar of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub convention: String,
    pub record_count: u64,
    pub seed: Option<u64>,
    pub source: Option<Source>,
    pub noise: Option<PhaseNoiseModel>,
    pub schedule: Option<PhaseSchedule>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl DatasetMeta {
    /// Metadata for records of unknown origin.
    pub fn external(record_count: usize) -> Self {
        DatasetMeta {
            schema_version: DATASET_SCHEMA,
            convention: QUADRATURE_CONVENTION.to_string(),
            record_count: record_count as u64,
            seed: None,
            source: None,
            noise: None,
            schedule: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    records: Vec<Record>,
    meta: DatasetMeta,
}

impl QuadratureDataset {
    pub fn new(records: Vec<Record>, mut meta: DatasetMeta) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("a dataset needs at least one record"));
        }
        for (i, r) in records.iter().enumerate() {
            let finite = r.x_a.is_finite() && r.x_b.is_finite();
            let in_range = (0.0..TAU).contains(&r.phi_a) && (0.0..TAU).contains(&r.phi_b);
            if !finite || !in_range {
                return Err(Error::invalid(format!(
                    "record {i} has non-finite quadratures or phases outside [0, 2π)"
                )));
            }
        }
        meta.record_count = records.len() as u64;
        Ok(QuadratureDataset { records, meta })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn convention(&self) -> &str {
        &self.meta.convention
    }

    /// Records `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let records = self
            .records
            .get(range.clone())
            .ok_or_else(|| Error::invalid(format!("range {range:?} exceeds {}", self.len())))?
            .to_vec();
        let mut meta = self.meta.clone();
        meta.notes
            .push(format!("records {}..{} of parent", range.start, range.end));
        Self::new(records, meta)
    }

    /// Records of `self` followed by those of `other`.
    pub fn concat(&self, other: &QuadratureDataset) -> Result<Self> {
        if self.convention() != other.convention() {
            return Err(Error::ConventionMismatch {
                dataset: other.convention().to_string(),
                table: self.convention().to_string(),
            });
        }
        let mut records = self.records.clone();
        records.extend_from_slice(&other.records);
        let mut meta = DatasetMeta::external(records.len());
        meta.convention = self.meta.convention.clone();
        meta.notes.push("concatenation of two datasets".to_string());
        Self::new(records, meta)
    }

    /// Raw PQDS bytes: header then four little-endian doubles per record.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 32 * self.len());
        out.extend_from_slice(PQDS_MAGIC);
        out.extend_from_slice(&PQDS_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for r in &self.records {
            for v in [r.x_a, r.x_b, r.phi_a, r.phi_b] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Writes the PQDS file at `path` and its JSON sidecar next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        let sidecar = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(Self::sidecar_path(path), sidecar + "\n")?;
        Ok(())
    }

    /// Reads a PQDS file. The sidecar is used when present.
    pub fn read(path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() < 16 || &bytes[0..4] != PQDS_MAGIC {
            return Err(bad("missing PQDS header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != PQDS_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let payload = &bytes[16..];
        if payload.len()
            != count
                .checked_mul(32)
                .ok_or_else(|| bad("record count overflow"))?
        {
            return Err(bad("payload length does not match the record count"));
        }
        let val = |chunk: &[u8]| f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        let records = payload
            .chunks_exact(32)
            .map(|c| Record {
                x_a: val(&c[0..8]),
                x_b: val(&c[8..16]),
                phi_a: val(&c[16..24]),
                phi_b: val(&c[24..32]),
            })
            .collect();
        let sidecar = Self::sidecar_path(path);
        let meta = if sidecar.exists() {
            let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?;
            if meta.record_count != count as u64 {
                return Err(bad("sidecar record count disagrees with the payload"));
            }
            meta
        } else {
            DatasetMeta::external(count)
        };
        Self::new(records, meta).map_err(|e| bad(&e.to_string()))
    }
}

fn bin_of(phi: f64, n_bins: usize) -> usize {
    ((phi / TAU * n_bins as f64) as usize).min(n_bins - 1)
}

/// Records grouped by their pair of LO phase bins.
#[derive(Debug, Clone)]
pub struct BinnedDataset<'a> {
    dataset: &'a QuadratureDataset,
    n_bins: usize,
    offsets: Vec<usize>,
    members: Vec<u32>,
}

impl<'a> BinnedDataset<'a> {
    pub fn dataset(&self) -> &'a QuadratureDataset {
        self.dataset
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_pairs(&self) -> usize {
        self.n_bins * self.n_bins
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.n_bins as f64
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width()
    }

    pub fn count(&self, a: usize, b: usize) -> usize {
        let k = a * self.n_bins + b;
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Indices of the records in bin pair `(a, b)`, in dataset order.
    pub fn indices(&self, a: usize, b: usize) -> &[u32] {
        let k = a * self.n_bins + b;
        &self.members[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn records(&self, a: usize, b: usize) -> impl Iterator<Item = &'a Record> + '_ {
        let all = self.dataset.records();
        self.indices(a, b).iter().map(move |&i| &all[i as usize])
    }

    /// First empty bin pair, if any.
    pub fn first_empty(&self) -> Option<(usize, usize)> {
        (0..self.n_pairs())
            .find(|&k| self.offsets[k + 1] == self.offsets[k])
            .map(|k| (k / self.n_bins, k % self.n_bins))
    }
}

/// Assigns record `j` to bin pair `(⌊φ_A/Δ⌋, ⌊φ_B/Δ⌋)` with `Δ = 2π / n_bins`.
pub fn bin_phases(ds: &QuadratureDataset, n_bins: usize) -> Result<BinnedDataset<'_>> {
    if n_bins < 1 {
        return Err(Error::invalid("at least one phase bin is required"));
    }
    if ds.len() > u32::MAX as usize {
        return Err(Error::invalid(
            "datasets beyond 2^32 records cannot be binned",
        ));
    }
    let n_pairs = n_bins * n_bins;
    let pair: Vec<usize> = ds
        .records()
        .iter()
        .map(|r| bin_of(r.phi_a, n_bins) * n_bins + bin_of(r.phi_b, n_bins))
        .collect();
    let mut offsets = vec![0usize; n_pairs + 1];
    for &k in &pair {
        offsets[k + 1] += 1;
    }
    for k in 0..n_pairs {
        offsets[k + 1] += offsets[k];
    }
    let mut cursor = offsets.clone();
    let mut members = vec![0u32; ds.len()];
    for (i, &k) in pair.iter().enumerate() {
        members[cursor[k]] = i as u32;
        cursor[k] += 1;
    }
    Ok(BinnedDataset {
        dataset: ds,
        n_bins,
        offsets,
        members,
    })
}

/// Sample variance of one mode's quadrature in each of `n_bins` phase bins,
/// in units of the vacuum variance.
pub fn variance_profile(
    ds: &QuadratureDataset,
    mode: Subsystem,
    n_bins: usize,
) -> Result<Vec<f64>> {
    if n_bins < 1 {
        return Err(Error::invalid("at least one phase bin is required"));
    }
    let mut n = vec![0usize; n_bins];
    let mut mean = vec![0.0; n_bins];
    let mut m2 = vec![0.0; n_bins];
    for r in ds.records() {
        let (x, phi) = match mode {
            Subsystem::A => (r.x_a, r.phi_a),
            Subsystem::B => (r.x_b, r.phi_b),
        };
        let b = bin_of(phi, n_bins);
        n[b] += 1;
        let delta = x - mean[b];
        mean[b] += delta / n[b] as f64;
        m2[b] += delta * (x - mean[b]);
    }
    let label = match mode {
        Subsystem::A => 'A',
        Subsystem::B => 'B',
    };
    (0..n_bins)
        .map(|b| {
            if n[b] < 2 {
                Err(Error::EmptyBin {
                    mode: label,
                    bin: b,
                })
            } else {
                Ok(m2[b] / (n[b] - 1) as f64)
            }
        })
        .collect()
}
