//! Pattern functions of the regularized P function.
//!
//! With `g_w(z) = (2/π) z e^{z²/2} Ω̃(z/w)` on `z ≥ 0`:
//! * `K_w(y) = ∫ g_w(z) cos(z y) dz`,
//! * `f(x, φ, α) = K_w(x - 2|α| cos(arg α - φ))`,
//! * `f̄(x, a) = ∫ g_w(z) cos(z x) J0(2 z a) dz`, the average of `f` over `φ`.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::omega::FilterTable;
use crate::error::{Error, Result};
use crate::gaussian::QUADRATURE_CONVENTION;
use crate::quad::{adaptive, NodeSet, Rule};
use crate::special::{j0, j1};

/// Largest accepted width parameter.
pub const W_MAX: f64 = 2.5;

/// Integrand magnitude below which the `z` integral is truncated.
pub const Z_CUT_THRESHOLD: f64 = 1e-16;

const SCAN_STEP: f64 = 1e-2;
const PANEL_WIDTH: f64 = 0.125;
const PANEL_ORDER: usize = 16;

fn check_width(w: f64) -> Result<()> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::invalid(format!("width w must be positive, got {w}")));
    }
    if w > W_MAX {
        return Err(Error::invalid(format!(
            "width w = {w} exceeds the safety bound {W_MAX}"
        )));
    }
    Ok(())
}

fn ln_weight(z: f64, w: f64, filter: &FilterTable) -> f64 {
    z.ln() + 0.5 * z * z + filter.eval(z / w).ln()
}

/// Truncation point of the `z` integral: the first `z` past the maximum of
/// `z e^{z²/2} Ω̃(z/w)` where it falls below [`Z_CUT_THRESHOLD`].
pub fn z_cut(w: f64, filter: &FilterTable) -> Result<f64> {
    check_width(w)?;
    let limit = w * filter.t_max();
    let threshold = Z_CUT_THRESHOLD.ln();
    let mut z = SCAN_STEP;
    let mut prev = ln_weight(z, w, filter);
    let mut past_peak = false;
    while z < limit {
        z += SCAN_STEP;
        let cur = ln_weight(z, w, filter);
        past_peak |= cur < prev;
        if past_peak && cur < threshold {
            return Ok(z);
        }
        prev = cur;
    }
    Err(Error::invalid(format!(
        "width w = {w} needs the filter beyond its tabulated range t_max = {}",
        filter.t_max()
    )))
}

/// Fixed composite Gauss–Legendre rule for the `z` integral at one width,
/// with the weight `g_w` folded into the quadrature weights.
#[derive(Debug, Clone)]
pub struct KernelQuadrature {
    w: f64,
    z_cut: f64,
    nodes: NodeSet,
}

impl KernelQuadrature {
    pub fn new(w: f64, filter: &FilterTable) -> Result<Self> {
        let z_cut = z_cut(w, filter)?;
        let panels = (z_cut / PANEL_WIDTH).ceil() as usize;
        let mut nodes = Rule::gauss_legendre(PANEL_ORDER).composite(0.0, z_cut, panels);
        for (z, wt) in nodes.nodes.iter().zip(nodes.weights.iter_mut()) {
            *wt *= FRAC_2_PI * z * (0.5 * z * z).exp() * filter.eval(z / w);
        }
        Ok(KernelQuadrature { w, z_cut, nodes })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn z_cut(&self) -> f64 {
        self.z_cut
    }

    /// Nodes `z_k` and weights `ω_k g_w(z_k)`.
    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn kernel(&self, y: f64) -> f64 {
        self.nodes.integrate(|z| (z * y).cos())
    }

    pub fn fbar(&self, x: f64, a: f64) -> f64 {
        self.nodes.integrate(|z| (z * x).cos() * j0(2.0 * z * a))
    }

    /// `∂f̄/∂x`.
    pub fn fbar_dx(&self, x: f64, a: f64) -> f64 {
        -self
            .nodes
            .integrate(|z| z * (z * x).sin() * j0(2.0 * z * a))
    }
}

fn adaptive_z<F: FnMut(f64) -> f64>(w: f64, filter: &FilterTable, mut h: F) -> Result<f64> {
    let cut = z_cut(w, filter)?;
    let panels = (cut / PANEL_WIDTH).ceil() as usize;
    let width = cut / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = p as f64 * width;
        let est = adaptive(
            |z| FRAC_2_PI * z * (0.5 * z * z).exp() * filter.eval(z / w) * h(z),
            lo,
            lo + width,
            1e-14,
            1e-13,
        )?;
        total += est.value;
    }
    Ok(total)
}

/// `K_w(y)` by adaptive quadrature.
pub fn kernel_k(y: f64, w: f64, filter: &FilterTable) -> Result<f64> {
    adaptive_z(w, filter, |z| (z * y).cos())
}

/// `f(x, φ, α; w) = K_w(x + 2|α| sin(arg α - φ - π/2))`.
pub fn pattern_f(x: f64, phi: f64, alpha: Complex64, w: f64, filter: &FilterTable) -> Result<f64> {
    let shift = 2.0 * alpha.norm() * (alpha.arg() - phi - 0.5 * PI).sin();
    kernel_k(x + shift, w, filter)
}

/// Phase-averaged pattern function `f̄(x, a; w)` by adaptive quadrature.
pub fn pattern_fbar(x: f64, a: f64, w: f64, filter: &FilterTable) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!(
            "|α| must be finite and >= 0, got {a}"
        )));
    }
    adaptive_z(w, filter, |z| (z * x).cos() * j0(2.0 * z * a))
}

fn uniform_axis(lo: f64, hi: f64, step: f64) -> Result<(usize, f64)> {
    if !(step > 0.0 && hi > lo && step.is_finite() && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(format!(
            "invalid table axis [{lo}, {hi}] with step {step}"
        )));
    }
    let n = ((hi - lo) / step).round() as usize;
    Ok((n.max(1) + 1, (hi - lo) / n.max(1) as f64))
}

fn hermite(t: f64, h: f64, f0: f64, d0: f64, f1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (3.0 * t2 - 2.0 * t3) * f1
        + (t3 - t2) * h * d1
}

fn locate(x: f64, lo: f64, h: f64, n: usize) -> (usize, f64) {
    let s = (x - lo) / h;
    let i = (s.floor().max(0.0) as usize).min(n - 2);
    (i, s - i as f64)
}

/// `K_w` tabulated on `[-y_max, y_max]` with cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct KernelTable {
    quad: KernelQuadrature,
    y_max: f64,
    h: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl KernelTable {
    pub fn build(w: f64, y_max: f64, step: f64, filter: &FilterTable) -> Result<Self> {
        let quad = KernelQuadrature::new(w, filter)?;
        let (n, h) = uniform_axis(-y_max, y_max, step)?;
        let ys: Vec<f64> = (0..n).map(|i| -y_max + i as f64 * h).collect();
        let values = ys.iter().map(|&y| quad.kernel(y)).collect();
        let derivs = ys
            .iter()
            .map(|&y| -quad.nodes.integrate(|z| z * (z * y).sin()))
            .collect();
        Ok(KernelTable {
            quad,
            y_max,
            h,
            values,
            derivs,
        })
    }

    pub fn w(&self) -> f64 {
        self.quad.w
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| -self.y_max + i as f64 * self.h)
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interpolated `K_w(y)`; direct quadrature outside the grid.
    pub fn eval(&self, y: f64) -> f64 {
        if y.abs() > self.y_max {
            return self.quad.kernel(y);
        }
        let (i, t) = locate(y, -self.y_max, self.h, self.values.len());
        hermite(
            t,
            self.h,
            self.values[i],
            self.derivs[i],
            self.values[i + 1],
            self.derivs[i + 1],
        )
    }
}

/// Grid of a [`PatternTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternTableSpec {
    pub w: f64,
    pub x_max: f64,
    pub a_max: f64,
    pub x_step: f64,
    pub a_step: f64,
}

impl PatternTableSpec {
    pub fn new(w: f64) -> Self {
        PatternTableSpec {
            w,
            x_max: 10.0,
            a_max: 3.5,
            x_step: 0.02,
            a_step: 0.01,
        }
    }
}

/// Interpolation tolerance enforced when a [`PatternTable`] is built.
pub const PATTERN_TABLE_TOLERANCE: f64 = 1e-6;
const VERIFY_PROBES: usize = 256;
/// Step halvings tried by [`PatternTable::for_width`].
pub const MAX_REFINEMENTS: usize = 3;

/// `f̄(x, a; w)` on `[-x_max, x_max] × [0, a_max]` with bicubic Hermite
/// interpolation from analytic partial derivatives.
#[derive(Debug, Clone)]
pub struct PatternTable {
    spec: PatternTableSpec,
    quad: KernelQuadrature,
    nx: usize,
    na: usize,
    hx: f64,
    ha: f64,
    f: Vec<f64>,
    fx: Vec<f64>,
    fa: Vec<f64>,
    fxa: Vec<f64>,
    max_probe_error: f64,
}

impl PatternTable {
    pub fn build(spec: PatternTableSpec, filter: &FilterTable) -> Result<Self> {
        let quad = KernelQuadrature::new(spec.w, filter)?;
        let (nx, hx) = uniform_axis(-spec.x_max, spec.x_max, spec.x_step)?;
        let (na, ha) = uniform_axis(0.0, spec.a_max, spec.a_step)?;
        let z = &quad.nodes.nodes;
        let g = &quad.nodes.weights;
        let nz = z.len();
        let xs: Vec<f64> = (0..nx).map(|i| -spec.x_max + i as f64 * hx).collect();
        let cos = DMatrix::from_fn(nx, nz, |i, k| (z[k] * xs[i]).cos());
        let sin = DMatrix::from_fn(nx, nz, |i, k| (z[k] * xs[i]).sin());
        let bessel0 = DMatrix::from_fn(nz, na, |k, j| g[k] * j0(2.0 * z[k] * j as f64 * ha));
        let bessel1 = DMatrix::from_fn(nz, na, |k, j| g[k] * j1(2.0 * z[k] * j as f64 * ha));
        let z_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(z));
        let f = &cos * &bessel0;
        let fx = -(&sin * &z_diag * &bessel0);
        let fa = -2.0 * (&cos * &z_diag * &bessel1);
        let fxa = 2.0 * (&sin * &z_diag * &z_diag * &bessel1);
        let flat = |m: DMatrix<f64>| -> Vec<f64> {
            let mut v = Vec::with_capacity(nx * na);
            for i in 0..nx {
                for j in 0..na {
                    v.push(m[(i, j)]);
                }
            }
            v
        };
        let mut table = PatternTable {
            spec,
            quad,
            nx,
            na,
            hx,
            ha,
            f: flat(f),
            fx: flat(fx),
            fa: flat(fa),
            fxa: flat(fxa),
            max_probe_error: 0.0,
        };
        table.max_probe_error = table.verify()?;
        Ok(table)
    }

    /// Table on the default grid for `w`, with both steps halved until the
    /// interpolation tolerance is met or [`MAX_REFINEMENTS`] halvings are spent.
    pub fn for_width(w: f64, filter: &FilterTable) -> Result<Self> {
        let mut spec = PatternTableSpec::new(w);
        let mut attempt = 0;
        loop {
            match Self::build(spec, filter) {
                Err(Error::Tolerance(_)) if attempt < MAX_REFINEMENTS => {
                    spec.x_step *= 0.5;
                    spec.a_step *= 0.5;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn verify(&self) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut worst = 0.0f64;
        for _ in 0..VERIFY_PROBES {
            let x = (rng.random::<f64>() * 2.0 - 1.0) * self.spec.x_max;
            let a = rng.random::<f64>() * self.spec.a_max;
            let err = (self.eval(x, a) - self.quad.fbar(x, a)).abs();
            worst = worst.max(err);
        }
        if worst > PATTERN_TABLE_TOLERANCE {
            return Err(Error::Tolerance(format!(
                "pattern table interpolation error {worst:e} exceeds {PATTERN_TABLE_TOLERANCE:e} at w = {}",
                self.spec.w
            )));
        }
        Ok(worst)
    }

    pub fn spec(&self) -> &PatternTableSpec {
        &self.spec
    }

    pub fn w(&self) -> f64 {
        self.spec.w
    }

    pub fn convention(&self) -> &str {
        QUADRATURE_CONVENTION
    }

    pub fn quadrature(&self) -> &KernelQuadrature {
        &self.quad
    }

    /// Largest interpolation error seen at the random verification probes.
    pub fn max_probe_error(&self) -> f64 {
        self.max_probe_error
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|i| -self.spec.x_max + i as f64 * self.hx)
            .collect()
    }

    pub fn a_nodes(&self) -> Vec<f64> {
        (0..self.na).map(|j| j as f64 * self.ha).collect()
    }

    fn in_range(&self, x: f64, a: f64) -> bool {
        x.abs() <= self.spec.x_max && (0.0..=self.spec.a_max).contains(&a)
    }

    /// Interpolated `f̄(x, a)`; direct quadrature outside the grid.
    pub fn eval(&self, x: f64, a: f64) -> f64 {
        if !self.in_range(x, a) {
            return self.quad.fbar(x, a);
        }
        let (i, tx) = locate(x, -self.spec.x_max, self.hx, self.nx);
        let (j, ta) = locate(a, 0.0, self.ha, self.na);
        let at = |v: &[f64], di: usize, dj: usize| v[(i + di) * self.na + j + dj];
        let along_a = |v: &[f64], dv: &[f64], di: usize| {
            hermite(
                ta,
                self.ha,
                at(v, di, 0),
                at(dv, di, 0),
                at(v, di, 1),
                at(dv, di, 1),
            )
        };
        let f0 = along_a(&self.f, &self.fa, 0);
        let f1 = along_a(&self.f, &self.fa, 1);
        let d0 = along_a(&self.fx, &self.fxa, 0);
        let d1 = along_a(&self.fx, &self.fxa, 1);
        hermite(tx, self.hx, f0, d0, f1, d1)
    }

    /// The one-dimensional slice `x ↦ f̄(x, a)` for fixed `a`.
    pub fn column(&self, a: f64) -> Result<PatternColumn<'_>> {
        if !(0.0..=self.spec.a_max).contains(&a) {
            return Err(Error::invalid(format!(
                "|α| = {a} lies outside the pattern table range [0, {}]",
                self.spec.a_max
            )));
        }
        let (j, ta) = locate(a, 0.0, self.ha, self.na);
        let mut values = Vec::with_capacity(self.nx);
        let mut derivs = Vec::with_capacity(self.nx);
        for i in 0..self.nx {
            let k = i * self.na + j;
            values.push(hermite(
                ta,
                self.ha,
                self.f[k],
                self.fa[k],
                self.f[k + 1],
                self.fa[k + 1],
            ));
            derivs.push(hermite(
                ta,
                self.ha,
                self.fx[k],
                self.fxa[k],
                self.fx[k + 1],
                self.fxa[k + 1],
            ));
        }
        Ok(PatternColumn {
            table: self,
            a,
            values,
            derivs,
        })
    }
}

/// `f̄(·, a)` at fixed `a`, interpolated in `x` only.
#[derive(Debug, Clone)]
pub struct PatternColumn<'a> {
    table: &'a PatternTable,
    a: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl PatternColumn<'_> {
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.table;
        if x.abs() > t.spec.x_max {
            return t.quad.fbar(x, self.a);
        }
        let (i, tx) = locate(x, -t.spec.x_max, t.hx, t.nx);
        hermite(
            tx,
            t.hx,
            self.values[i],
            self.derivs[i],
            self.values[i + 1],
            self.derivs[i + 1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::omega::omega_tilde;

    fn filter() -> &'static FilterTable {
        FilterTable::shared()
    }

    #[test]
    fn width_validation() {
        assert!(z_cut(0.0, filter()).is_err());
        assert!(z_cut(2.6, filter()).is_err());
        let c = z_cut(1.8, filter()).unwrap();
        assert!((8.0..10.0).contains(&c), "z_cut(1.8) = {c}");
        assert!(z_cut(2.5, filter()).is_ok());
    }

    #[test]
    fn kernel_even_and_table_consistent() {
        let q = KernelQuadrature::new(1.3, filter()).unwrap();
        for y in [0.0, 0.4, 1.7, 3.3, 8.0] {
            let direct = kernel_k(y, 1.3, filter()).unwrap();
            assert!((direct - kernel_k(-y, 1.3, filter()).unwrap()).abs() < 1e-12);
            assert!((direct - q.kernel(y)).abs() < 1e-10);
        }
        let table = KernelTable::build(1.3, 12.0, 0.01, filter()).unwrap();
        for y in [-11.3, -2.01, 0.005, 4.4444] {
            assert!((table.eval(y) - q.kernel(y)).abs() < 1e-8);
        }
    }

    #[test]
    fn kernel_tail_is_inverse_square() {
        // The kink of |z| at the origin gives K_w(y) → -(2/π)/y².
        let q = KernelQuadrature::new(1.3, filter()).unwrap();
        for y in [20.0, 30.0] {
            let lead = -FRAC_2_PI / (y * y);
            assert!((q.kernel(y) / lead - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn vacuum_expectation_of_kernel() {
        // E_vac[K_w(x)] = (2/π) ∫ z Ω̃(z/w) dz.
        let w = 1.3;
        let q = KernelQuadrature::new(w, filter()).unwrap();
        let gh = Rule::gauss_legendre(40).composite(-10.0, 10.0, 40);
        let expect = gh.integrate(|x| q.kernel(x) * (-0.5 * x * x).exp()) / (2.0 * PI).sqrt();
        let closed = adaptive(
            |z| FRAC_2_PI * z * omega_tilde(z / w),
            0.0,
            6.0 * w,
            1e-14,
            1e-12,
        )
        .unwrap()
        .value;
        assert!(expect > 0.0);
        assert!((expect - closed).abs() < 1e-8);
    }

    #[test]
    fn kernel_peak_grows_with_width() {
        let peaks: Vec<f64> = [1.0, 1.3, 1.6]
            .iter()
            .map(|&w| kernel_k(0.0, w, filter()).unwrap())
            .collect();
        assert!(peaks[0] < peaks[1] && peaks[1] < peaks[2]);
    }

    #[test]
    fn pattern_f_special_cases() {
        let f = filter();
        let alpha = Complex64::new(1.0, 0.5);
        let v = pattern_f(0.7, 0.3, alpha, 1.3, f).unwrap();
        assert!((v - pattern_f(0.7, 0.3 + 2.0 * PI, alpha, 1.3, f).unwrap()).abs() < 1e-12);
        let zero = Complex64::new(0.0, 0.0);
        assert!(
            (pattern_f(0.7, 1.1, zero, 1.3, f).unwrap() - kernel_k(0.7, 1.3, f).unwrap()).abs()
                < 1e-15
        );
    }

    #[test]
    fn fbar_is_phase_average_of_f() {
        let f = filter();
        let (x, a, w) = (1.2, 1.5, 1.3);
        let n = 256;
        let avg: f64 = (0..n)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n as f64;
                pattern_f(x, phi, Complex64::new(a, 0.0), w, f).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!((avg - pattern_fbar(x, a, w, f).unwrap()).abs() < 1e-7);
        assert!(
            (pattern_fbar(0.4, 0.0, w, f).unwrap() - kernel_k(0.4, w, f).unwrap()).abs() < 1e-13
        );
    }

    #[test]
    fn pattern_table_accuracy() {
        let spec = PatternTableSpec {
            w: 1.3,
            x_max: 8.0,
            a_max: 3.5,
            x_step: 0.02,
            a_step: 0.01,
        };
        let table = PatternTable::build(spec, filter()).unwrap();
        assert!(table.max_probe_error() < PATTERN_TABLE_TOLERANCE);
        let q = table.quadrature();
        for x in [-7.93, -1.001, 0.0, 2.345, 7.999] {
            assert!((table.eval(x, 0.0) - q.kernel(x)).abs() < 1e-6);
            let col = table.column(1.234).unwrap();
            assert!((col.eval(x) - table.eval(x, 1.234)).abs() < 1e-12);
            assert!((col.eval(x) - pattern_fbar(x, 1.234, 1.3, filter()).unwrap()).abs() < 1e-6);
        }
        assert!((table.eval(9.5, 0.5) - q.fbar(9.5, 0.5)).abs() < 1e-15);
        assert!(table.column(3.6).is_err());
        for x in [-10.0, 0.0, 10.0] {
            for a in [0.0, 2.0, 4.0] {
                assert!(pattern_fbar(x, a, 1.3, filter()).unwrap().is_finite());
            }
        }
    }
}
