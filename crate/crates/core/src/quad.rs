//! Gauss–Legendre quadrature: fixed composite rules and a simple adaptive
//! bisection driver.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// A quadrature rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn gauss_legendre(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).unwrap();
        let gl = GaussLegendre::new(order);
        let (nodes, weights) = gl.as_node_weight_pairs().iter().copied().unzip();
        Rule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights of the composite rule with `panels` equal panels on `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> NodeSet {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * self.order());
        let mut weights = Vec::with_capacity(panels * self.order());
        for p in 0..panels {
            let lo = a + p as f64 * width;
            let mid = lo + 0.5 * width;
            for (&x, &w) in self.nodes.iter().zip(&self.weights) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        NodeSet { nodes, weights }
    }
}

/// Flattened nodes and weights of a composite rule.
#[derive(Debug, Clone, Default)]
pub struct NodeSet {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Gauss–Legendre integration by panel bisection.
///
/// A panel is accepted once its order-10 estimate agrees with the sum over
/// its two halves to within `max(abs_tol * width / (b - a), rel_tol * |I|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    const MAX_DEPTH: u32 = 40;
    let rule = gl10();
    let total = b - a;
    let mut stack = vec![(a, b, rule.integrate(a, b, &mut f), 0u32)];
    let mut value = 0.0;
    let mut error = 0.0;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let halves = left + right;
        let diff = (whole - halves).abs();
        let allowed = (abs_tol * (hi - lo) / total).max(rel_tol * halves.abs());
        if diff <= allowed || diff == 0.0 {
            value += halves;
            error += diff;
        } else if depth >= MAX_DEPTH {
            return Err(Error::Tolerance(format!(
                "adaptive quadrature did not converge on [{lo}, {hi}] (difference {diff:e})"
            )));
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(Estimate { value, error })
}

fn gl10() -> &'static Rule {
    use std::sync::OnceLock;
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| Rule::gauss_legendre(10))
}
