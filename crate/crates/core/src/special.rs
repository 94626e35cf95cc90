//! Special functions used by the filter, kernel and pattern-function code.

use std::f64::consts::PI;

/// Bessel function of the first kind, order zero.
#[inline]
pub fn j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order one.
#[inline]
pub fn j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Exponentially scaled modified Bessel function `exp(-|x|) I0(x)`.
pub fn i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 700.0 {
        puruspe::In(0, ax) * (-ax).exp()
    } else {
        i0e_asymptotic(ax)
    }
}

/// Hankel expansion of `exp(-x) I0(x)`; the next term is below 1e-11 for x ≥ 500.
fn i0e_asymptotic(ax: f64) -> f64 {
    let inv = 1.0 / (8.0 * ax);
    (1.0 + inv * (1.0 + 4.5 * inv * (1.0 + 25.0 / 3.0 * inv))) / (2.0 * PI * ax).sqrt()
}

/// Dawson's integral `D(x) = exp(-x^2) ∫_0^x exp(t^2) dt`.
///
/// Rybicki's sampling-theorem sum with step `h = 0.2`; the discretization
/// error scales as `exp(-(π/2h)^2)` and is far below double precision.
pub fn dawson(x: f64) -> f64 {
    const H: f64 = 0.2;
    const REACH: f64 = 9.0;
    if x.abs() < 0.05 {
        let x2 = x * x;
        // Maclaurin series, exact to rounding for |x| < 0.05.
        return x
            * (1.0
                - x2 * (2.0 / 3.0 - x2 * (4.0 / 15.0 - x2 * (8.0 / 105.0 - x2 * (16.0 / 945.0)))));
    }
    let lo = ((x - REACH) / H).floor() as i64;
    let hi = ((x + REACH) / H).ceil() as i64;
    let mut n = if lo % 2 == 0 { lo + 1 } else { lo };
    let mut sum = 0.0;
    while n <= hi {
        let d = x - n as f64 * H;
        sum += (-d * d).exp() / n as f64;
        n += 2;
    }
    sum / PI.sqrt()
}

/// `ln(n!)` for small integers, exact summation.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Binomial probability mass `C(n,k) q^k (1-q)^(n-k)`.
pub(crate) fn binomial_pmf(n: usize, k: usize, q: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if q == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_c = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    (ln_c + k as f64 * q.ln() + (n - k) as f64 * (1.0 - q).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dawson_series(x: f64) -> f64 {
        // D(x) = Σ (-1)^k 2^k x^(2k+1) / (2k+1)!!
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= -2.0 * x * x / (2.0 * k as f64 + 1.0);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn dawson_matches_series_for_moderate_arguments() {
        for &x in &[0.01, 0.049, 0.051, 0.3, 0.9, 1.5, 2.0] {
            let d = dawson(x);
            assert!((d - dawson_series(x)).abs() < 1e-13, "x={x}: {d}");
            assert!((dawson(-x) + d).abs() < 1e-15);
        }
    }

    #[test]
    fn dawson_satisfies_its_ode() {
        // D'(x) = 1 - 2 x D(x)
        let h = 1e-4;
        for &x in &[0.5, 1.7, 3.2, 5.0, 8.4] {
            let deriv = (dawson(x + h) - dawson(x - h)) / (2.0 * h);
            assert!((deriv - (1.0 - 2.0 * x * dawson(x))).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn dawson_asymptotics() {
        let x: f64 = 12.0;
        let inv = 1.0 / (2.0 * x * x);
        let approx = (1.0 + inv * (1.0 + 3.0 * inv * (1.0 + 5.0 * inv))) / (2.0 * x);
        assert!((dawson(x) - approx).abs() / approx < 1e-7);
    }

    #[test]
    fn i0e_known_values() {
        assert!((i0e(0.0) - 1.0).abs() < 1e-15);
        // I0(1) = 1.2660658777520082
        assert!((i0e(1.0) - 1.2660658777520082 * (-1.0f64).exp()).abs() < 1e-14);
        for x in [500.0, 650.0, 699.0] {
            assert!((i0e(x) - i0e_asymptotic(x)).abs() / i0e(x) < 1e-10);
        }
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let s: f64 = (0..=7).map(|k| binomial_pmf(7, k, 0.6)).sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert_eq!(binomial_pmf(3, 4, 0.5), 0.0);
    }
}
