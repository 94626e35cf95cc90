use nalgebra::DMatrix;

use super::{GridSpec, PhaseSpaceGrid};
use crate::error::{Error, Result};
use crate::filter::{FilterTable, KernelQuadrature};
use crate::gaussian::{PhaseNoiseModel, SqueezingSpec};
use crate::special::{i0e, j0};

/// Expected value of the sampled `P_Ω` for the lossy TMSV whose relative
/// phase is uniformly randomized.
pub fn pomega_oracle(
    spec: &SqueezingSpec,
    noise: &PhaseNoiseModel,
    grid: &GridSpec,
    w: f64,
    filter: &FilterTable,
) -> Result<PhaseSpaceGrid> {
    if !matches!(noise, PhaseNoiseModel::Uniform) {
        return Err(Error::invalid(
            "the P_Ω oracle requires uniformly randomized phases",
        ));
    }
    let v = spec.marginal_variance();
    pomega_oracle_gaussian(v, v, spec.correlation_amplitude(), grid, w, filter)
}

/// Expected `P_Ω` for zero-mean Gaussian quadratures with variances `v_a`,
/// `v_b` and cross covariance `c cos ψ`, averaged over a uniform phase `ψ`.
///
/// With `E[cos(z₁x_A) cos(z₂x_B)] = e^{-(v_a z₁² + v_b z₂²)/2} I₀(c z₁ z₂)` after
/// the phase average, the surface is `Jₐ M J_bᵀ` with `M` the weighted kernel
/// on the `z` nodes and `J` the Bessel factors `J₀(2 z a)`.
pub fn pomega_oracle_gaussian(
    v_a: f64,
    v_b: f64,
    c: f64,
    grid: &GridSpec,
    w: f64,
    filter: &FilterTable,
) -> Result<PhaseSpaceGrid> {
    grid.validate()?;
    if !(v_a > 0.0 && v_b > 0.0 && c.is_finite()) || c.abs() >= (v_a * v_b).sqrt() {
        return Err(Error::invalid("covariance must be positive definite"));
    }
    let quad = KernelQuadrature::new(w, filter)?;
    let z = &quad.nodes().nodes;
    let q = &quad.nodes().weights;
    let nz = z.len();
    let ln_a: Vec<f64> = (0..nz)
        .map(|i| q[i].ln() - 0.5 * v_a * z[i] * z[i])
        .collect();
    let ln_b: Vec<f64> = (0..nz)
        .map(|i| q[i].ln() - 0.5 * v_b * z[i] * z[i])
        .collect();
    let c = c.abs();
    let kernel = DMatrix::from_fn(nz, nz, |i, j| {
        let s = c * z[i] * z[j];
        (ln_a[i] + ln_b[j] + s).exp() * i0e(s)
    });
    let (a, b) = (grid.a_axis(), grid.b_axis());
    let ja = DMatrix::from_fn(a.len(), nz, |i, k| j0(2.0 * z[k] * a[i]));
    let jb = DMatrix::from_fn(nz, b.len(), |k, j| j0(2.0 * z[k] * b[j]));
    let p = ja * kernel * jb;
    Ok(PhaseSpaceGrid {
        a,
        b,
        p,
        sigma: None,
        w,
        n_total: 0,
        n_ensembles: 0,
        dropped: 0,
    })
}
