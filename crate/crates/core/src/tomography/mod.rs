//! Photon-number tomography of two-mode homodyne data.

mod pattern;
mod reconstruct;
mod stats;

pub use pattern::{
    number_pattern, number_pattern_direct, NumberPatternTable, MAX_NUMBER_CUTOFF,
    NUMBER_TABLE_STEP, NUMBER_TABLE_X_MAX,
};
pub use reconstruct::{
    reconstruct_dm, reconstruct_with_table, DensityMatrixEstimate, EstimateDocument, SigmaTable,
    CONDITION_WARNING, DEFAULT_TOMOGRAPHY_CUTOFF, ESTIMATE_SCHEMA,
};
pub use stats::{
    coherence_with_errors, default_edges, half_normal_cdf, ks_test, monte_carlo_errors, normal_cdf,
    offdiagonal_histogram, offdiagonal_z_scores, project_psd, replica_seed, KsResult,
    MonteCarloSummary, OffDiagonalHistogram, DEFAULT_PHASE_BINS, MIN_MC_REPS,
};
