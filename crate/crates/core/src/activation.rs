//! Entanglement activation of the phase-randomized TMSV.
//!
//! Each mode is mixed with vacuum on a balanced beam splitter, giving the
//! four-mode state `Σ (1-p) pⁿ |Ψ_n⟩⟨Ψ_n| ⊗ |Ψ_n⟩⟨Ψ_n|` in mode order
//! `A, A', B, B'`. The state is stored sparsely: it has `Σ_n (n+1)^4`
//! nonzero entries against a dense `d^8`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{check_squeezing, PureTwoModeState, TwoModeDensityMatrix};
use crate::special::ln_factorial;

/// Modes of the activated state, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    A,
    APrime,
    B,
    BPrime,
}

impl Mode {
    fn position(self) -> usize {
        match self {
            Mode::A => 0,
            Mode::APrime => 1,
            Mode::B => 2,
            Mode::BPrime => 3,
        }
    }
}

/// Sparse operator on the four-mode truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    cutoff: usize,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl SparseOperator {
    pub fn new(cutoff: usize) -> Self {
        SparseOperator {
            cutoff,
            entries: BTreeMap::new(),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(4)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Flat index of `|j_A, j_A', j_B, j_B'⟩`.
    pub fn index(&self, digits: [usize; 4]) -> usize {
        let d = self.cutoff;
        ((digits[0] * d + digits[1]) * d + digits[2]) * d + digits[3]
    }

    pub fn digits(&self, mut idx: usize) -> [usize; 4] {
        let d = self.cutoff;
        let mut out = [0; 4];
        for slot in out.iter_mut().rev() {
            *slot = idx % d;
            idx /= d;
        }
        out
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries
            .get(&(row, col))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        if value.re == 0.0 && value.im == 0.0 {
            return;
        }
        *self
            .entries
            .entry((row, col))
            .or_insert(Complex64::new(0.0, 0.0)) += value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn trace(&self) -> Complex64 {
        self.iter()
            .filter(|(r, c, _)| r == c)
            .map(|(_, _, v)| v)
            .sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.iter()
            .all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn from_dense(cutoff: usize, m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = cutoff.pow(4);
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::invalid(format!(
                "matrix shape {:?} does not match four-mode cutoff {cutoff}",
                m.shape()
            )));
        }
        let mut op = SparseOperator::new(cutoff);
        for r in 0..dim {
            for c in 0..dim {
                op.add(r, c, m[(r, c)]);
            }
        }
        Ok(op)
    }

    /// Spectrum of the Hermitian part, computed block by block over the
    /// connected components of the sparsity graph. Basis states untouched by
    /// any entry contribute zero eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut uf = UnionFind::default();
        for (r, c, _) in self.iter() {
            uf.union(r, c);
        }
        let touched: Vec<usize> = uf.parent.keys().copied().collect();
        let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in &touched {
            let root = uf.find(i);
            blocks.entry(root).or_default().push(i);
        }
        let mut spectrum = Vec::with_capacity(self.dim());
        for members in blocks.values() {
            let n = members.len();
            let local: BTreeMap<usize, usize> =
                members.iter().enumerate().map(|(k, &g)| (g, k)).collect();
            let mut m = DMatrix::<Complex64>::zeros(n, n);
            for &g in members {
                let r = local[&g];
                for (&(_, c), &v) in self.entries.range((g, 0)..=(g, usize::MAX)) {
                    m[(r, local[&c])] = v;
                }
            }
            let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            spectrum.extend(h.symmetric_eigen().eigenvalues.iter().copied());
        }
        spectrum.extend(std::iter::repeat(0.0).take(self.dim() - touched.len()));
        spectrum
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Default)]
struct UnionFind {
    parent: BTreeMap<usize, usize>,
}

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = *self.parent.entry(x).or_insert(x);
        while self.parent[&root] != root {
            root = self.parent[&root];
        }
        let mut cur = x;
        while cur != root {
            let next = self.parent[&cur];
            self.parent.insert(cur, root);
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent.insert(ra.max(rb), ra.min(rb));
        }
    }
}

/// Density operator on modes `A, A', B, B'`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourModeDensityMatrix {
    op: SparseOperator,
    trunc_deficit: f64,
}

impl FourModeDensityMatrix {
    pub fn from_operator(op: SparseOperator, trunc_deficit: f64) -> Self {
        FourModeDensityMatrix { op, trunc_deficit }
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn cutoff(&self) -> usize {
        self.op.cutoff
    }

    pub fn trunc_deficit(&self) -> f64 {
        self.trunc_deficit
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    /// `σ_{AB} ⊗ τ_{A'B'}` rearranged into mode order `A, A', B, B'`.
    pub fn from_bipartite_product(
        sigma_ab: &TwoModeDensityMatrix,
        tau_primed: &TwoModeDensityMatrix,
    ) -> Result<Self> {
        let d = sigma_ab.cutoff();
        if tau_primed.cutoff() != d {
            return Err(Error::invalid("factor cutoffs differ"));
        }
        let tau: Vec<_> = nonzero(tau_primed).collect();
        let mut op = SparseOperator::new(d);
        for (ja, jb, la, lb, s) in nonzero(sigma_ab) {
            for &(jap, jbp, lap, lbp, t) in &tau {
                let r = op.index([ja, jap, jb, jbp]);
                let c = op.index([la, lap, lb, lbp]);
                op.add(r, c, s * t);
            }
        }
        Ok(FourModeDensityMatrix {
            op,
            trunc_deficit: sigma_ab.trunc_deficit() + tau_primed.trunc_deficit(),
        })
    }

    /// Convex combination `Σ w_i ρ_i`.
    pub fn mixture(parts: &[(f64, FourModeDensityMatrix)]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::invalid("empty mixture"));
        };
        let mut op = SparseOperator::new(first.1.cutoff());
        let mut deficit = 0.0;
        for (w, rho) in parts {
            if rho.cutoff() != op.cutoff {
                return Err(Error::invalid("mixture components differ in cutoff"));
            }
            for (r, c, v) in rho.op.iter() {
                op.add(r, c, v * *w);
            }
            deficit += w * rho.trunc_deficit;
        }
        Ok(FourModeDensityMatrix {
            op,
            trunc_deficit: deficit,
        })
    }

    /// Reduced state on `A, B` after tracing out the primed modes.
    pub fn trace_primed(&self) -> TwoModeDensityMatrix {
        let d = self.cutoff();
        let mut out = DMatrix::<Complex64>::zeros(d * d, d * d);
        for (r, c, v) in self.op.iter() {
            let [ja, jap, jb, jbp] = self.op.digits(r);
            let [la, lap, lb, lbp] = self.op.digits(c);
            if jap == lap && jbp == lbp {
                out[(ja * d + jb, la * d + lb)] += v;
            }
        }
        TwoModeDensityMatrix::from_matrix(d, out, self.trunc_deficit)
            .expect("shape matches the cutoff")
    }
}

fn nonzero(
    rho: &TwoModeDensityMatrix,
) -> impl Iterator<Item = (usize, usize, usize, usize, Complex64)> + '_ {
    let d = rho.cutoff();
    (0..d * d).flat_map(move |r| {
        (0..d * d).filter_map(move |c| {
            let v = rho.matrix()[(r, c)];
            (v.re != 0.0 || v.im != 0.0).then_some((r / d, r % d, c / d, c % d, v))
        })
    })
}

/// Output of a balanced beam splitter fed with `|n⟩ ⊗ |0⟩'`:
/// `2^{-n/2} Σ_j C(n,j)^{1/2} (-1)^{n-j} |j⟩ ⊗ |n-j⟩'`.
pub fn splitter_image(n: usize, d: usize) -> Result<PureTwoModeState> {
    if n >= d {
        return Err(Error::invalid(format!(
            "photon number {n} not representable at cutoff {d}"
        )));
    }
    let mut coefficients = vec![Complex64::new(0.0, 0.0); d * d];
    for j in 0..=n {
        let ln_amp = 0.5 * (ln_factorial(n) - ln_factorial(j) - ln_factorial(n - j))
            - 0.5 * n as f64 * std::f64::consts::LN_2;
        let sign = if (n - j) % 2 == 0 { 1.0 } else { -1.0 };
        coefficients[j * d + (n - j)] = Complex64::new(sign * ln_amp.exp(), 0.0);
    }
    PureTwoModeState::new(d, coefficients, 0.0)
}

/// The activated four-mode state, truncated at `n < d`.
pub fn build_four_mode(p: f64, d: usize) -> Result<FourModeDensityMatrix> {
    check_squeezing(p, d)?;
    let mut op = SparseOperator::new(d);
    let mut weight = 1.0 - p;
    for n in 0..d {
        let psi = splitter_image(n, d)?;
        let amps: Vec<(usize, usize, f64)> = (0..=n)
            .map(|j| (j, n - j, psi.amplitude(j, n - j).re))
            .collect();
        let mut vector = Vec::with_capacity(amps.len() * amps.len());
        for &(ja, jap, ca) in &amps {
            for &(jb, jbp, cb) in &amps {
                vector.push((op.index([ja, jap, jb, jbp]), ca * cb));
            }
        }
        for &(r, ar) in &vector {
            for &(c, ac) in &vector {
                op.add(r, c, Complex64::new(weight * (ar * ac), 0.0));
            }
        }
        weight *= p;
    }
    Ok(FourModeDensityMatrix {
        op,
        trunc_deficit: p.powi(d as i32),
    })
}

/// Partial transpose over the listed modes.
pub fn partial_transpose(rho: &SparseOperator, modes: &[Mode]) -> SparseOperator {
    let mut mask = [false; 4];
    for m in modes {
        mask[m.position()] = true;
    }
    let mut out = SparseOperator::new(rho.cutoff);
    for (r, c, v) in rho.iter() {
        let mut rd = rho.digits(r);
        let mut cd = rho.digits(c);
        for slot in 0..4 {
            if mask[slot] {
                std::mem::swap(&mut rd[slot], &mut cd[slot]);
            }
        }
        out.add(out.index(rd), out.index(cd), v);
    }
    out
}

/// `(|Φ⟩⟨Φ|)^{PT'}` with the unnormalized `|Φ⟩ = |0,0,1,1⟩ - |1,1,0,0⟩`.
pub fn witness_operator(d: usize) -> Result<SparseOperator> {
    if d < 2 {
        return Err(Error::invalid("the witness needs a cutoff of at least 2"));
    }
    let mut phi = SparseOperator::new(d);
    let terms = [
        (phi.index([0, 0, 1, 1]), 1.0),
        (phi.index([1, 1, 0, 0]), -1.0),
    ];
    for &(r, cr) in &terms {
        for &(c, cc) in &terms {
            phi.add(r, c, Complex64::new(cr * cc, 0.0));
        }
    }
    Ok(partial_transpose(&phi, &[Mode::APrime, Mode::BPrime]))
}

/// `tr(W ρ)`, contracting only the nonzero entries of the witness.
pub fn witness_expectation(rho: &FourModeDensityMatrix) -> Result<f64> {
    let w = witness_operator(rho.cutoff())?;
    let value: Complex64 = w.iter().map(|(r, c, wv)| wv * rho.op.get(c, r)).sum();
    Ok(value.re)
}

pub fn analytic_witness(p: f64) -> f64 {
    -(1.0 - p) * p / 2.0
}

/// Summary emitted by the `witness` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub p: f64,
    pub cutoff: usize,
    pub witness_numeric: f64,
    pub witness_analytic: f64,
    /// Minimum eigenvalue of the partial transpose over the primed modes.
    pub pt_min_eigenvalue: f64,
}

pub fn witness_report(p: f64, d: usize) -> Result<WitnessReport> {
    let rho = build_four_mode(p, d)?;
    let pt = partial_transpose(rho.operator(), &[Mode::APrime, Mode::BPrime]);
    Ok(WitnessReport {
        p,
        cutoff: d,
        witness_numeric: witness_expectation(&rho)?,
        witness_analytic: analytic_witness(p),
        pt_min_eigenvalue: pt.min_eigenvalue(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{loss_degraded_distribution, CoherenceRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> TwoModeDensityMatrix {
        let n = d * d;
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let mut rho = &g * g.adjoint();
        let tr = rho.trace();
        rho /= tr;
        TwoModeDensityMatrix::from_matrix(d, rho, 0.0).unwrap()
    }

    #[test]
    fn splitter_images() {
        let psi0 = splitter_image(0, 3).unwrap();
        assert_eq!(psi0.amplitude(0, 0).re, 1.0);
        let psi1 = splitter_image(1, 3).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi1.amplitude(0, 1).re + s).abs() < 1e-15);
        assert!((psi1.amplitude(1, 0).re - s).abs() < 1e-15);
        for n in 0..12 {
            assert!((splitter_image(n, 12).unwrap().norm_sqr() - 1.0).abs() < 1e-13);
        }
        assert!(splitter_image(3, 3).is_err());
    }

    #[test]
    fn four_mode_trace_and_vacuum() {
        let vac = build_four_mode(0.0, 3).unwrap();
        assert_eq!(vac.operator().nnz(), 1);
        assert_eq!(vac.operator().get(0, 0).re, 1.0);
        for p in [0.2, 0.5, 0.8] {
            let rho = build_four_mode(p, 8).unwrap();
            assert!((rho.trace() - (1.0 - p.powi(8))).abs() < 1e-12);
            assert!(rho.operator().is_hermitian(0.0));
            assert!(rho.operator().min_eigenvalue() > -1e-10);
        }
        assert!(build_four_mode(1.0, 3).is_err());
    }

    #[test]
    fn witness_value_and_cutoff_rejection() {
        assert!(witness_operator(1).is_err());
        let rho = build_four_mode(0.5, 6).unwrap();
        assert!((witness_expectation(&rho).unwrap() + 0.125).abs() < 1e-13);
        let vac = build_four_mode(0.0, 4).unwrap();
        assert_eq!(witness_expectation(&vac).unwrap(), 0.0);
        assert!(witness_operator(3).unwrap().nnz() <= 8);
    }

    #[test]
    fn analytic_witness_peaks_at_half() {
        let best = (1..20)
            .map(|i| i as f64 * 0.05)
            .min_by(|a, b| analytic_witness(*a).total_cmp(&analytic_witness(*b)))
            .unwrap();
        assert!((best - 0.5).abs() < 1e-12);
    }

    #[test]
    fn partial_transpose_is_an_involution() {
        let rho = build_four_mode(0.4, 4).unwrap();
        let modes = [Mode::A, Mode::BPrime];
        let twice = partial_transpose(&partial_transpose(rho.operator(), &modes), &modes);
        assert_eq!(&twice, rho.operator());
    }

    #[test]
    fn block_spectrum_matches_dense() {
        let rho = build_four_mode(0.5, 3).unwrap();
        let pt = partial_transpose(rho.operator(), &[Mode::APrime, Mode::BPrime]);
        let mut blocks = pt.eigenvalues();
        let mut dense: Vec<f64> = pt
            .to_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        blocks.sort_by(f64::total_cmp);
        dense.sort_by(f64::total_cmp);
        assert_eq!(blocks.len(), dense.len());
        for (a, b) in blocks.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn npt_across_primed_cut() {
        let rho = build_four_mode(0.5, 6).unwrap();
        let pt = partial_transpose(rho.operator(), &[Mode::APrime, Mode::BPrime]);
        assert!(pt.is_hermitian(1e-15));
        assert!(pt.min_eigenvalue() < -1e-3);
    }

    #[test]
    fn ppt_across_joint_subsystems() {
        let rho = build_four_mode(0.5, 6).unwrap();
        let pt = partial_transpose(rho.operator(), &[Mode::B, Mode::BPrime]);
        assert!(pt.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn product_state_spectrum_survives_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = FourModeDensityMatrix::from_bipartite_product(
            &random_state(2, &mut rng),
            &random_state(2, &mut rng),
        )
        .unwrap();
        let pt = partial_transpose(rho.operator(), &[Mode::APrime, Mode::BPrime]);
        let mut before = rho.operator().eigenvalues();
        let mut after = pt.eigenvalues();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_states_never_violate_the_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3] {
            for _ in 0..20 {
                let parts: Vec<_> = (0..3)
                    .map(|_| {
                        let state = FourModeDensityMatrix::from_bipartite_product(
                            &random_state(d, &mut rng),
                            &random_state(d, &mut rng),
                        )
                        .unwrap();
                        (rng.random::<f64>(), state)
                    })
                    .collect();
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                let parts: Vec<_> = parts.into_iter().map(|(w, s)| (w / total, s)).collect();
                let mix = FourModeDensityMatrix::mixture(&parts).unwrap();
                assert!((mix.trace() - 1.0).abs() < 1e-12);
                assert!(witness_expectation(&mix).unwrap() >= -1e-14);
            }
        }
    }

    #[test]
    fn primed_trace_is_half_loss_distribution() {
        let p = 0.3;
        let d = 10;
        let red = build_four_mode(p, d).unwrap().trace_primed();
        let expected = loss_degraded_distribution(p, 0.5, d).unwrap();
        for k in 0..d {
            for m in 0..d {
                let got = red.get(k, m, k, m).re;
                assert!((got - expected[(k, m)]).abs() < p.powi(d as i32) + 1e-14);
            }
        }
        assert_eq!(red.coherence(CoherenceRule::Either), 0.0);
    }
}
