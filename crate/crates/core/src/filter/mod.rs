//! The non-Gaussian filter `Ω̃` and the pattern functions built from it.

mod omega;
mod pattern;

pub use omega::{omega_tilde, omega_tilde_estimate, FilterSettings, FilterTable};
pub use pattern::{
    kernel_k, pattern_f, pattern_fbar, z_cut, KernelQuadrature, KernelTable, PatternColumn,
    PatternTable, PatternTableSpec, MAX_REFINEMENTS, PATTERN_TABLE_TOLERANCE, W_MAX,
    Z_CUT_THRESHOLD,
};
