//! Photon-number pattern functions `f_mn(x)`.
//!
//! With `u = x/√2`, `ψ_n(u) = e^{-u²/2} ψ̃_n(u)` are the oscillator
//! eigenfunctions and `φ_m(u) = e^{u²/2} g_m(u)` the irregular solutions of the
//! same equation generated from `φ_0 = 2π^{1/4} e^{-u²/2} ∫₀ᵘ e^{t²} dt` by the
//! raising operator. For `m ≥ n` the pattern function is
//! `f_mn(x) = d/du [ψ̃_n(u) g_m(u)]`, and `f_nm = f_mn`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::gaussian::QUADRATURE_CONVENTION;
use crate::special::dawson;

/// Largest supported photon-number cutoff per mode.
pub const MAX_NUMBER_CUTOFF: usize = 16;

/// Default half-width of the tabulated quadrature range.
pub const NUMBER_TABLE_X_MAX: f64 = 12.0;

/// Default node spacing of the tabulated range.
pub const NUMBER_TABLE_STEP: f64 = 1.0 / 512.0;

/// Below this `|u|` the irregular functions come from the three-term
/// recurrence; beyond it they are continued by integrating their ODE outward.
const RECURRENCE_LIMIT: f64 = 3.0;

fn pair_index(m: usize, n: usize) -> usize {
    let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
    hi * (hi + 1) / 2 + lo
}

/// Regular functions `ψ̃_0..ψ̃_{len-1}` at `u`.
fn regular(u: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len.max(2));
    out.push(PI.powf(-0.25));
    out.push(SQRT_2 * u * out[0]);
    for n in 1..len.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * u * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out.truncate(len);
    out
}

/// Irregular functions `g_0..g_{len-1}` at `u` by forward recurrence.
fn irregular(u: f64, len: usize) -> Vec<f64> {
    let c = PI.powf(0.25);
    let mut out = Vec::with_capacity(len.max(2));
    out.push(2.0 * c * dawson(u));
    out.push(SQRT_2 * (u * out[0] - c));
    for m in 1..len.saturating_sub(1) {
        let mf = m as f64;
        let next = (2.0 / (mf + 1.0)).sqrt() * u * out[m] - (mf / (mf + 1.0)).sqrt() * out[m - 1];
        out.push(next);
    }
    out.truncate(len);
    out
}

/// `g_m'` from `g_m` and `g_{m-1}`.
fn irregular_slope(u: f64, g: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    out.push(2.0 * PI.powf(0.25) - 2.0 * u * g[0]);
    for m in 1..g.len() {
        out.push((2.0 * m as f64).sqrt() * g[m - 1] - 2.0 * u * g[m]);
    }
    out
}

/// Right-hand side of `g'' = -2u g' - (2m + 2) g`.
fn ode_rhs(u: f64, m: usize, y: [f64; 2]) -> [f64; 2] {
    [y[1], -2.0 * u * y[1] - (2.0 * m as f64 + 2.0) * y[0]]
}

fn rk4_step(u: f64, h: f64, m: usize, y: [f64; 2]) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = ode_rhs(u, m, y);
    let k2 = ode_rhs(u + 0.5 * h, m, add(y, k1, 0.5 * h));
    let k3 = ode_rhs(u + 0.5 * h, m, add(y, k2, 0.5 * h));
    let k4 = ode_rhs(u + h, m, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Values and `x` derivatives of every `f_mn` (`n ≤ m < d`) at one `u ≥ 0`,
/// given the irregular functions and their slopes there.
fn node_values(u: f64, d: usize, g: &[f64], gp: &[f64], vals: &mut [f64], ders: &mut [f64]) {
    let psi = regular(u, d);
    let psi_p: Vec<f64> = (0..d)
        .map(|n| {
            if n == 0 {
                0.0
            } else {
                (2.0 * n as f64).sqrt() * psi[n - 1]
            }
        })
        .collect();
    for m in 0..d {
        let gpp = -2.0 * u * gp[m] - (2.0 * m as f64 + 2.0) * g[m];
        for n in 0..=m {
            let psi_pp = 2.0 * u * psi_p[n] - 2.0 * n as f64 * psi[n];
            let p = pair_index(m, n);
            vals[p] = psi_p[n] * g[m] + psi[n] * gp[m];
            ders[p] = (psi_pp * g[m] + 2.0 * psi_p[n] * gp[m] + psi[n] * gpp) / SQRT_2;
        }
    }
}

/// Tabulated `f_mn(x)` and `f_mn'(x)` on `0 ≤ x ≤ x_max` for all `m, n < d`,
/// evaluated by cubic Hermite interpolation and extended to `x < 0` by parity.
#[derive(Debug)]
pub struct NumberPatternTable {
    cutoff: usize,
    x_max: f64,
    step: f64,
    nodes: usize,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    truncated: AtomicU64,
}

impl Clone for NumberPatternTable {
    fn clone(&self) -> Self {
        NumberPatternTable {
            cutoff: self.cutoff,
            x_max: self.x_max,
            step: self.step,
            nodes: self.nodes,
            values: self.values.clone(),
            slopes: self.slopes.clone(),
            truncated: AtomicU64::new(self.truncated()),
        }
    }
}

impl NumberPatternTable {
    /// Table on the default range `|x| ≤ 12` with step `2⁻⁹`.
    pub fn new(cutoff: usize) -> Result<Self> {
        Self::build(cutoff, NUMBER_TABLE_X_MAX, NUMBER_TABLE_STEP)
    }

    pub fn build(cutoff: usize, x_max: f64, step: f64) -> Result<Self> {
        if cutoff == 0 || cutoff > MAX_NUMBER_CUTOFF {
            return Err(Error::invalid(format!(
                "number-basis cutoff must lie in 1..={MAX_NUMBER_CUTOFF}, got {cutoff}"
            )));
        }
        if !(x_max > 0.0 && x_max.is_finite() && step > 0.0 && step <= x_max) {
            return Err(Error::invalid("pattern table needs 0 < step <= x_max"));
        }
        let intervals = (x_max / step).round() as usize;
        let step = x_max / intervals as f64;
        let pairs = cutoff * (cutoff + 1) / 2;
        let mut values = vec![vec![0.0; intervals + 1]; pairs];
        let mut slopes = vec![vec![0.0; intervals + 1]; pairs];
        let h = step / SQRT_2;
        let mut vals = vec![0.0; pairs];
        let mut ders = vec![0.0; pairs];
        let mut state: Vec<[f64; 2]> = Vec::new();
        for i in 0..=intervals {
            let u = i as f64 * h;
            let (g, gp) = if u <= RECURRENCE_LIMIT {
                let g = irregular(u, cutoff);
                let gp = irregular_slope(u, &g);
                state = g.iter().zip(&gp).map(|(&a, &b)| [a, b]).collect();
                (g, gp)
            } else {
                let u_prev = (i - 1) as f64 * h;
                for (m, y) in state.iter_mut().enumerate() {
                    *y = rk4_step(u_prev, h, m, *y);
                }
                (
                    state.iter().map(|y| y[0]).collect(),
                    state.iter().map(|y| y[1]).collect(),
                )
            };
            node_values(u, cutoff, &g, &gp, &mut vals, &mut ders);
            for p in 0..pairs {
                values[p][i] = vals[p];
                slopes[p][i] = ders[p];
            }
        }
        Ok(NumberPatternTable {
            cutoff,
            x_max,
            step,
            nodes: intervals + 1,
            values,
            slopes,
            truncated: AtomicU64::new(0),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn convention(&self) -> &str {
        QUADRATURE_CONVENTION
    }

    /// Number of evaluations that fell outside `|x| ≤ x_max` and returned 0.
    pub fn truncated(&self) -> u64 {
        self.truncated.load(Ordering::Relaxed)
    }

    pub fn reset_truncated(&self) {
        self.truncated.store(0, Ordering::Relaxed);
    }

    /// `f_mn(x)`; zero outside the tabulated range, counted in [`Self::truncated`].
    pub fn eval(&self, m: usize, n: usize, x: f64) -> f64 {
        assert!(
            m < self.cutoff && n < self.cutoff,
            "photon number beyond table cutoff"
        );
        let ax = x.abs();
        if !(ax <= self.x_max) {
            self.truncated.fetch_add(1, Ordering::Relaxed);
            return 0.0;
        }
        let p = pair_index(m, n);
        let v = self.interpolate(p, ax);
        if x < 0.0 && (m + n) % 2 == 1 {
            -v
        } else {
            v
        }
    }

    /// All `f_mn(x)` with `n ≤ m`, written to `out` in pair order
    /// `(0,0), (1,0), (1,1), (2,0), ...`. Returns `false` and writes zeros when
    /// `x` lies outside the table.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) -> bool {
        let ax = x.abs();
        if !(ax <= self.x_max) {
            self.truncated.fetch_add(1, Ordering::Relaxed);
            out.iter_mut().for_each(|v| *v = 0.0);
            return false;
        }
        let (i, t) = self.locate(ax);
        let flip = x < 0.0;
        for m in 0..self.cutoff {
            for n in 0..=m {
                let p = pair_index(m, n);
                let v = self.hermite(p, i, t);
                out[p] = if flip && (m + n) % 2 == 1 { -v } else { v };
            }
        }
        true
    }

    /// Number of distinct `(m, n)` pairs with `n ≤ m`.
    pub fn pair_count(&self) -> usize {
        self.cutoff * (self.cutoff + 1) / 2
    }

    /// Position of `(m, n)` in the pair order used by [`Self::eval_all`].
    pub fn pair_index(&self, m: usize, n: usize) -> usize {
        pair_index(m, n)
    }

    fn locate(&self, ax: f64) -> (usize, f64) {
        let s = ax / self.step;
        let i = (s.floor() as usize).min(self.nodes - 2);
        (i, s - i as f64)
    }

    fn interpolate(&self, p: usize, ax: f64) -> f64 {
        let (i, t) = self.locate(ax);
        self.hermite(p, i, t)
    }

    fn hermite(&self, p: usize, i: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[p][i], self.values[p][i + 1]);
        let (d0, d1) = (
            self.slopes[p][i] * self.step,
            self.slopes[p][i + 1] * self.step,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1
    }
}

/// `f_mn(x)` evaluated directly by recurrence, without a table. Accurate for
/// `|x| ≤ 3√2`; larger arguments lose precision for high photon numbers.
pub fn number_pattern_direct(m: usize, n: usize, x: f64) -> f64 {
    let (hi, lo) = if m >= n { (m, n) } else { (n, m) };
    let u = x.abs() / SQRT_2;
    let g = irregular(u, hi + 1);
    let gp = irregular_slope(u, &g);
    let psi = regular(u, lo + 1);
    let psi_p = if lo == 0 {
        0.0
    } else {
        (2.0 * lo as f64).sqrt() * psi[lo - 1]
    };
    let v = psi_p * g[hi] + psi[lo] * gp[hi];
    if x < 0.0 && (m + n) % 2 == 1 {
        -v
    } else {
        v
    }
}

/// `f_mn(x)` from the table; see [`NumberPatternTable::eval`].
pub fn number_pattern(table: &NumberPatternTable, m: usize, n: usize, x: f64) -> f64 {
    table.eval(m, n, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Rule;
    use crate::special::ln_factorial;

    /// Independent Fourier form
    /// `f_mn(x) = 2 √(n!/m!) ∫₀^∞ k^{δ+1} e^{-k²/2} L_n^δ(k²) cos(kx - δπ/2) dk`
    /// with `δ = m - n ≥ 0`.
    fn fourier_pattern(m: usize, n: usize, x: f64) -> f64 {
        let (m, n) = if m >= n { (m, n) } else { (n, m) };
        let delta = m - n;
        let scale = 2.0 * (0.5 * (ln_factorial(n) - ln_factorial(m))).exp();
        let rule = Rule::gauss_legendre(24);
        let nodes = rule.composite(0.0, 18.0, 144);
        nodes.integrate(|k| {
            let t = k * k;
            let a = delta as f64;
            let (mut l0, mut l1) = (1.0, 1.0 + a - t);
            let lag = if n == 0 {
                l0
            } else {
                for j in 1..n {
                    let jf = j as f64;
                    let l2 = ((2.0 * jf + 1.0 + a - t) * l1 - (jf + a) * l0) / (jf + 1.0);
                    l0 = l1;
                    l1 = l2;
                }
                l1
            };
            k.powi(delta as i32 + 1) * (-0.5 * t).exp() * lag * (k * x - a * PI / 2.0).cos()
        }) * scale
    }

    fn density(n: usize, x: f64) -> f64 {
        let u = x / SQRT_2;
        let psi = regular(u, n + 1)[n] * (-0.5 * u * u).exp();
        psi * psi / SQRT_2
    }

    #[test]
    fn vacuum_closed_form() {
        for x in [-3.0, -0.4, 0.0, 0.7, 2.5] {
            let u = x / SQRT_2;
            let expected = 2.0 - 4.0 * u * dawson(u);
            assert!((number_pattern_direct(0, 0, x) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn table_matches_fourier_form() {
        let table = NumberPatternTable::new(MAX_NUMBER_CUTOFF).unwrap();
        let mut worst: f64 = 0.0;
        for (i, x) in [
            -11.7, -7.31, -4.4, -2.05, 0.0, 0.37, 1.9, 3.3, 4.26, 6.1, 8.77, 11.95,
        ]
        .into_iter()
        .enumerate()
        {
            for m in 0..MAX_NUMBER_CUTOFF {
                for n in [0, m / 2, m] {
                    if (i + m + n) % 3 != 0 && m > 3 {
                        continue;
                    }
                    let err = (table.eval(m, n, x) - fourier_pattern(m, n, x)).abs();
                    worst = worst.max(err);
                }
            }
        }
        assert!(worst < 1e-9, "worst deviation {worst:e}");
    }

    #[test]
    fn direct_recurrence_matches_table_near_origin() {
        let table = NumberPatternTable::new(8).unwrap();
        for x in [-4.1, -1.3, 0.05, 2.2, 4.2] {
            for m in 0..8 {
                for n in 0..8 {
                    let a = number_pattern_direct(m, n, x);
                    assert!((a - number_pattern(&table, m, n, x)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn symmetric_in_indices() {
        let table = NumberPatternTable::new(6).unwrap();
        for x in [-5.3, -0.2, 1.1, 7.7] {
            for m in 0..6 {
                for n in 0..6 {
                    assert_eq!(table.eval(m, n, x), table.eval(n, m, x));
                }
            }
        }
    }

    #[test]
    fn number_state_expectations_are_kronecker() {
        let table = NumberPatternTable::new(5).unwrap();
        let nodes = Rule::gauss_legendre(20).composite(-12.0, 12.0, 480);
        for n in 0..5 {
            for m in 0..5 {
                let e = nodes.integrate(|x| table.eval(m, m, x) * density(n, x));
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((e - expected).abs() < 1e-6, "E_{n}[f_{m}{m}] = {e}");
            }
        }
    }

    #[test]
    fn off_diagonal_expectations() {
        // For |ψ⟩ with amplitudes c_a, the phase-averaged estimator of ρ_kl picks
        // out c_k c_l* ∫ f_kl ψ_k ψ_l dx / √2, which must equal c_k c_l*; other
        // pairs (a, b) with a - b = k - l must give zero.
        let table = NumberPatternTable::new(5).unwrap();
        let nodes = Rule::gauss_legendre(20).composite(-12.0, 12.0, 480);
        let wave = |n: usize, x: f64| {
            let u = x / SQRT_2;
            regular(u, n + 1)[n] * (-0.5 * u * u).exp()
        };
        for k in 0..5 {
            for l in 0..k {
                for a in (k - l)..5 {
                    let b = a - (k - l);
                    let e =
                        nodes.integrate(|x| table.eval(k, l, x) * wave(a, x) * wave(b, x)) / SQRT_2;
                    let expected = if a == k { 1.0 } else { 0.0 };
                    assert!((e - expected).abs() < 1e-6, "({k},{l}) on ({a},{b}): {e}");
                }
            }
        }
    }

    #[test]
    fn out_of_range_is_counted() {
        let table = NumberPatternTable::new(3).unwrap();
        assert_eq!(table.eval(1, 0, 12.5), 0.0);
        assert_eq!(table.eval(2, 2, -13.0), 0.0);
        let mut out = vec![1.0; table.pair_count()];
        assert!(!table.eval_all(f64::NAN, &mut out));
        assert!(out.iter().all(|&v| v == 0.0));
        assert_eq!(table.truncated(), 3);
        table.reset_truncated();
        assert_eq!(table.truncated(), 0);
        assert!(NumberPatternTable::new(0).is_err());
        assert!(NumberPatternTable::new(MAX_NUMBER_CUTOFF + 1).is_err());
    }

    #[test]
    fn eval_all_matches_eval() {
        let table = NumberPatternTable::new(5).unwrap();
        let mut out = vec![0.0; table.pair_count()];
        for x in [-6.2, -0.01, 3.9] {
            assert!(table.eval_all(x, &mut out));
            for m in 0..5 {
                for n in 0..=m {
                    assert_eq!(out[table.pair_index(m, n)], table.eval(m, n, x));
                }
            }
        }
    }
}
