//! Two-mode fixed-photon-number states and the channels acting on them.
//!
//! States live in the N-photon subspace of two optical modes `a` and `b`;
//! the basis is `|k>_a |N-k>_b` with `k` the photon count in arm `a`. Photon
//! loss maps a pure N-photon state onto a block-diagonal mixed state with one
//! Hermitian block per surviving total photon number. The block structure is
//! preserved by every operation here and is never flattened into a full
//! direct-sum matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::tolerances::Tolerances;
use crate::{Error, Result};

/// Phase imprint convention. The differential phase acts on arm `b` only,
/// as `exp(-i n_b phi)`; all analytic bounds in this crate are stated for
/// this convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseConvention {
    /// `exp(-i n_b phi)` on arm `b`.
    SingleArm,
}

impl PhaseConvention {
    /// Human-readable form, used when annotating outputs.
    pub fn describe(self) -> &'static str {
        "phase convention: exp(-i*n_b*phi) on arm b"
    }
}

/// The convention used throughout the crate.
pub const PHASE_CONVENTION: PhaseConvention = PhaseConvention::SingleArm;

const MAX_PHOTONS: u32 = 170;

/// `ln(n!)`-free factorial table; exact to f64 rounding for n <= 170.
fn factorials(n_max: usize) -> Vec<f64> {
    let mut f = vec![1.0; n_max + 1];
    for i in 1..=n_max {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Pascal-triangle binomial table, `binom[n][k]` for n <= n_max.
fn binomials(n_max: usize) -> Vec<Vec<f64>> {
    let mut b = Vec::with_capacity(n_max + 1);
    b.push(vec![1.0]);
    for n in 1..=n_max {
        let prev: &Vec<f64> = &b[n - 1];
        let mut row = vec![1.0; n + 1];
        for k in 1..n {
            row[k] = prev[k - 1] + prev[k];
        }
        b.push(row);
    }
    b
}

fn check_photon_cap(n: u32) -> Result<()> {
    if n > MAX_PHOTONS {
        return Err(Error::OutOfRange {
            name: "n_total",
            value: n as f64,
            range: "0..=170 (f64 factorial range)",
        });
    }
    Ok(())
}

/// A pure two-mode state with a definite total photon number.
///
/// `coeffs()[k]` is the amplitude of `|k>_a |n_total - k>_b`. The vector is
/// normalized on construction and stays normalized under the unitary
/// operations of this module.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModePureState {
    n_total: u32,
    coeffs: Vec<Complex64>,
}

impl TwoModePureState {
    /// Builds a state from raw amplitudes, normalizing them.
    ///
    /// Fails on a length mismatch (`coeffs.len() != n_total + 1`) or a zero
    /// vector.
    pub fn new(n_total: u32, coeffs: Vec<Complex64>) -> Result<Self> {
        check_photon_cap(n_total)?;
        let expected = n_total as usize + 1;
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / norm_sq.sqrt();
        let coeffs = coeffs.into_iter().map(|c| c * inv).collect();
        Ok(Self { n_total, coeffs })
    }

    /// Builds a state from real amplitudes.
    pub fn from_real(n_total: u32, coeffs: &[f64]) -> Result<Self> {
        Self::new(
            n_total,
            coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// The basis state `|k>_a |n_total - k>_b`.
    pub fn basis(n_total: u32, k: u32) -> Result<Self> {
        check_photon_cap(n_total)?;
        if k > n_total {
            return Err(Error::OutOfRange {
                name: "k",
                value: k as f64,
                range: "0..=n_total",
            });
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n_total as usize + 1];
        coeffs[k as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n_total, coeffs })
    }

    /// The N00N state `(|N,0> + |0,N>)/sqrt(2)`.
    pub fn noon(n_total: u32) -> Result<Self> {
        let mut coeffs = vec![0.0; n_total as usize + 1];
        coeffs[0] = 1.0;
        coeffs[n_total as usize] = 1.0;
        Self::from_real(n_total, &coeffs)
    }

    pub fn n_total(&self) -> u32 {
        self.n_total
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Mean photon number of arm `b`.
    pub fn mean_n_b(&self) -> f64 {
        let n = self.n_total as f64;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (n - k as f64) * c.norm_sqr())
            .sum()
    }

    /// Variance of the photon number of arm `b`.
    pub fn var_n_b(&self) -> f64 {
        let n = self.n_total as f64;
        let mean = self.mean_n_b();
        let second: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let nb = n - k as f64;
                nb * nb * c.norm_sqr()
            })
            .sum();
        (second - mean * mean).max(0.0)
    }

    /// The pure state as a rank-1 block-diagonal density matrix (a single
    /// block at `k = n_total`, zero blocks below).
    pub fn density(&self) -> BlockDiagonalState {
        let n = self.n_total as usize;
        let mut blocks: Vec<DMatrix<Complex64>> = (0..n)
            .map(|k| DMatrix::zeros(k + 1, k + 1))
            .collect();
        let v = DVector::from_column_slice(&self.coeffs);
        let mut top = DMatrix::zeros(n + 1, n + 1);
        top.gerc(Complex64::new(1.0, 0.0), &v, &v, Complex64::new(0.0, 0.0));
        blocks.push(top);
        BlockDiagonalState {
            n_max: self.n_total,
            blocks,
        }
    }
}

/// Independent single-mode power transmissions for the two arms.
/// `1 - eta` is the photon loss probability of the arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossChannel {
    eta_a: f64,
    eta_b: f64,
}

impl LossChannel {
    pub fn new(eta_a: f64, eta_b: f64) -> Result<Self> {
        for (name, v) in [("eta_a", eta_a), ("eta_b", eta_b)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "[0, 1]",
                });
            }
        }
        Ok(Self { eta_a, eta_b })
    }

    /// Equal transmission for both arms.
    pub fn symmetric(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    pub fn eta_a(&self) -> f64 {
        self.eta_a
    }

    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }
}

/// A phase-parametrized mixed state, block-diagonal in the total photon
/// number. `blocks()[k]` is the (k+1)x(k+1) Hermitian block on the
/// k-total-photon subspace, indexed by the photon count in arm `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonalState {
    n_max: u32,
    blocks: Vec<DMatrix<Complex64>>,
}

impl BlockDiagonalState {
    /// Assembles a block state from raw blocks; block `k` must be
    /// (k+1)x(k+1).
    pub fn from_blocks(blocks: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::StructureMismatch("no blocks".into()));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.nrows() != k + 1 || b.ncols() != k + 1 {
                return Err(Error::StructureMismatch(format!(
                    "block {k} is {}x{}, expected {}x{}",
                    b.nrows(),
                    b.ncols(),
                    k + 1,
                    k + 1
                )));
            }
        }
        Ok(Self {
            n_max: blocks.len() as u32 - 1,
            blocks,
        })
    }

    /// All-zero blocks up to `n_max`; used as an accumulator.
    pub fn zeros(n_max: u32) -> Self {
        Self {
            n_max,
            blocks: (0..=n_max as usize)
                .map(|k| DMatrix::zeros(k + 1, k + 1))
                .collect(),
        }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    pub fn block(&self, k: u32) -> &DMatrix<Complex64> {
        &self.blocks[k as usize]
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [DMatrix<Complex64>] {
        &mut self.blocks
    }

    /// Sum of all block traces (real part).
    pub fn total_trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// Trace of each block: the probability of finding k photons in total.
    pub fn block_weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    /// Largest entrywise deviation from Hermiticity over all blocks.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            for i in 0..b.nrows() {
                for j in i..b.ncols() {
                    let d = (b[(i, j)] - b[(j, i)].conj()).norm();
                    worst = worst.max(d);
                }
            }
        }
        worst
    }

    /// Checks the density-matrix invariants: Hermitian blocks, positive
    /// semidefinite spectrum, unit total trace.
    pub fn validate_state(&self, tol: &Tolerances) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > tol.hermiticity {
            return Err(Error::InvalidState(format!(
                "hermiticity defect {herm:.3e} exceeds {:.3e}",
                tol.hermiticity
            )));
        }
        let trace = self.total_trace();
        if (trace - 1.0).abs() > tol.trace {
            return Err(Error::InvalidState(format!(
                "total trace {trace} deviates from 1 by more than {:.3e}",
                tol.trace
            )));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            let eig = b.clone().symmetric_eigen();
            if let Some(min) = eig
                .eigenvalues
                .iter()
                .cloned()
                .reduce(f64::min)
            {
                if min < -tol.psd_floor {
                    return Err(Error::InvalidState(format!(
                        "block {k} has eigenvalue {min:.3e} below -{:.3e}",
                        tol.psd_floor
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks the derivative-object invariants: Hermitian blocks, each block
    /// traceless.
    pub fn validate_derivative(&self, tol: &Tolerances) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > tol.hermiticity {
            return Err(Error::InvalidState(format!(
                "derivative hermiticity defect {herm:.3e} exceeds {:.3e}",
                tol.hermiticity
            )));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            let t = b.trace().norm();
            if t > tol.hermiticity.max(1e-12) {
                return Err(Error::InvalidState(format!(
                    "derivative block {k} has trace {t:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// Largest entrywise difference against another block state.
    pub fn max_block_difference(&self, other: &Self) -> Result<f64> {
        if self.n_max != other.n_max {
            return Err(Error::StructureMismatch(format!(
                "n_max {} vs {}",
                self.n_max, other.n_max
            )));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            let d = a - b;
            for e in d.iter() {
                worst = worst.max(e.norm());
            }
        }
        Ok(worst)
    }
}

/// Per-Kraus-operator amplitude table of the two-arm loss channel on the
/// N-photon subspace. A Kraus operator is labeled by the photons lost in each
/// arm `(l_a, l_b)`; it maps input index `j` (photons in arm a) to output
/// index `m = j - l_a` inside the block with `k = n - l_a - l_b` surviving
/// photons, scaled by `amps[m]`.
#[derive(Debug, Clone)]
pub(crate) struct KrausTable {
    pub n: u32,
    pub terms: Vec<KrausTerm>,
}

#[derive(Debug, Clone)]
pub(crate) struct KrausTerm {
    pub l_a: usize,
    pub k: usize,
    pub amps: Vec<f64>,
}

impl KrausTable {
    pub fn new(n: u32, eta_a: f64, eta_b: f64) -> Self {
        let n_us = n as usize;
        let binom = binomials(n_us);
        let mut terms = Vec::new();
        for l_a in 0..=n_us {
            for l_b in 0..=(n_us - l_a) {
                let k = n_us - l_a - l_b;
                let mut amps = Vec::with_capacity(k + 1);
                for m in 0..=k {
                    // photons entering arm a: m + l_a; arm b: k - m + l_b
                    let wa = binom[m + l_a][l_a]
                        * eta_a.powi(m as i32)
                        * (1.0 - eta_a).powi(l_a as i32);
                    let wb = binom[k - m + l_b][l_b]
                        * eta_b.powi((k - m) as i32)
                        * (1.0 - eta_b).powi(l_b as i32);
                    amps.push((wa * wb).sqrt());
                }
                terms.push(KrausTerm { l_a, k, amps });
            }
        }
        Self { n, terms }
    }
}

/// Applies a two-mode beam splitter of given power transmissivity within the
/// N-photon subspace. Convention: reflected amplitudes pick up a factor `i`.
/// The output is renormalized (the map is unitary, so this only removes
/// rounding noise).
pub fn beam_splitter_apply(
    state: &TwoModePureState,
    power_transmissivity: f64,
) -> Result<TwoModePureState> {
    if !(0.0..=1.0).contains(&power_transmissivity) {
        return Err(Error::OutOfRange {
            name: "power_transmissivity",
            value: power_transmissivity,
            range: "[0, 1]",
        });
    }
    let n = state.n_total as usize;
    let theta = power_transmissivity.sqrt().clamp(0.0, 1.0).acos();
    let u = beam_splitter_matrix(n, theta);
    let input = DVector::from_column_slice(&state.coeffs);
    let out = &u * input;
    TwoModePureState::new(state.n_total, out.iter().cloned().collect())
}

/// Matrix of `exp(i theta (a^dag b + a b^dag))` on the N-photon subspace,
/// expanded combinatorially: `B a^dag B^dag = cos(theta) a^dag + i sin(theta)
/// b^dag` and likewise with the roles swapped.
fn beam_splitter_matrix(n: usize, theta: f64) -> DMatrix<Complex64> {
    let fact = factorials(n);
    let binom = binomials(n);
    let c = theta.cos();
    let s = theta.sin();
    // powers of (i s) up to n
    let is = Complex64::new(0.0, s);
    let mut is_pow = vec![Complex64::new(1.0, 0.0); n + 1];
    for p in 1..=n {
        is_pow[p] = is_pow[p - 1] * is;
    }
    let mut u = DMatrix::zeros(n + 1, n + 1);
    for j in 0..=n {
        // |j>_a |n-j>_b -> sum over photons routed into output mode a
        for m in 0..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            let p_lo = m.saturating_sub(n - j);
            let p_hi = j.min(m);
            for p in p_lo..=p_hi {
                let q = m - p;
                let c_pow = c.powi((p + (n - j - q)) as i32);
                acc += binom[j][p] * binom[n - j][q] * c_pow * is_pow[j - p + q];
            }
            let scale = (fact[m] * fact[n - m] / (fact[j] * fact[n - j])).sqrt();
            u[(m, j)] = acc * scale;
        }
    }
    u
}

/// Sends a pure N-photon state through independent arm losses, producing the
/// block-diagonal mixed state over surviving photon numbers. Trace is
/// preserved exactly up to rounding.
pub fn loss_channel_apply(state: &TwoModePureState, channel: &LossChannel) -> BlockDiagonalState {
    let table = KrausTable::new(state.n_total, channel.eta_a, channel.eta_b);
    loss_apply_with_table(state, &table)
}

pub(crate) fn loss_apply_with_table(
    state: &TwoModePureState,
    table: &KrausTable,
) -> BlockDiagonalState {
    debug_assert_eq!(state.n_total, table.n);
    let mut out = BlockDiagonalState::zeros(state.n_total);
    let one = Complex64::new(1.0, 0.0);
    for term in &table.terms {
        let v = DVector::from_iterator(
            term.k + 1,
            (0..=term.k).map(|m| state.coeffs[m + term.l_a] * term.amps[m]),
        );
        out.blocks[term.k].gerc(one, &v, &v, one);
    }
    out
}

/// Conjugates every block by `diag(exp(-i n_b phi))`; block weights are
/// unchanged. Entrywise this multiplies `rho[m, m']` by `exp(i phi (m - m'))`.
pub fn phase_shift_apply(state: &BlockDiagonalState, phi: f64) -> BlockDiagonalState {
    let mut out = state.clone();
    for block in out.blocks.iter_mut() {
        let dim = block.nrows();
        for m in 0..dim {
            for mp in 0..dim {
                if m != mp {
                    let rot = Complex64::from_polar(1.0, phi * (m as f64 - mp as f64));
                    block[(m, mp)] *= rot;
                }
            }
        }
    }
    out
}

/// Exact derivative of the phase-shifted state with respect to the phase:
/// `d rho / d phi = -i [G, rho]` blockwise with `G = n_b`. Entrywise the
/// derivative block is `i (m - m') rho[m, m']`, so every block is traceless.
pub fn phase_derivative(state: &BlockDiagonalState) -> BlockDiagonalState {
    let mut out = state.clone();
    for block in out.blocks.iter_mut() {
        let dim = block.nrows();
        for m in 0..dim {
            for mp in 0..dim {
                let f = Complex64::new(0.0, m as f64 - mp as f64);
                block[(m, mp)] *= f;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn make_pure_state_normalizes() {
        let s = TwoModePureState::new(1, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let r = 1.0 / 2.0_f64.sqrt();
        assert!((s.coeffs()[0].re - r).abs() < 1e-15);
        assert!((s.coeffs()[1].re - r).abs() < 1e-15);

        let s = TwoModePureState::new(2, vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((s.coeffs()[0].re - r).abs() < 1e-15);
        assert!(s.coeffs()[1].norm() < 1e-15);
        assert!((s.coeffs()[2].re - r).abs() < 1e-15);

        let s = TwoModePureState::new(0, vec![c(5.0, 0.0)]).unwrap();
        assert!((s.coeffs()[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn make_pure_state_rejects_bad_input() {
        assert!(matches!(
            TwoModePureState::new(2, vec![c(1.0, 0.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            TwoModePureState::new(1, vec![c(0.0, 0.0), c(0.0, 0.0)]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn beam_splitter_splits_single_photon() {
        let s = TwoModePureState::basis(1, 1).unwrap(); // |1,0>
        let out = beam_splitter_apply(&s, 0.5).unwrap();
        let r = 1.0 / 2.0_f64.sqrt();
        assert!((out.coeffs()[0].norm() - r).abs() < 1e-12);
        assert!((out.coeffs()[1].norm() - r).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_identity_at_full_transmission() {
        let s = TwoModePureState::from_real(3, &[0.5, 0.1, -0.3, 0.8]).unwrap();
        let out = beam_splitter_apply(&s, 1.0).unwrap();
        for (a, b) in s.coeffs().iter().zip(out.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn beam_splitter_two_photon_magnitudes() {
        // |2,0> through a 50/50 splitter: |c|^2 = [1/4, 1/2, 1/4]
        let s = TwoModePureState::basis(2, 2).unwrap();
        let out = beam_splitter_apply(&s, 0.5).unwrap();
        let probs: Vec<f64> = out.coeffs().iter().map(|c| c.norm_sqr()).collect();
        assert!((probs[2] - 0.25).abs() < 1e-12);
        assert!((probs[1] - 0.50).abs() < 1e-12);
        assert!((probs[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_applied_twice_is_a_swap() {
        let s = TwoModePureState::basis(1, 1).unwrap();
        let once = beam_splitter_apply(&s, 0.5).unwrap();
        let twice = beam_splitter_apply(&once, 0.5).unwrap();
        assert!((twice.norm_sqr() - 1.0).abs() < 1e-12);
        // all weight on |0,1> up to phase
        assert!((twice.coeffs()[0].norm() - 1.0).abs() < 1e-12);
        assert!(twice.coeffs()[1].norm() < 1e-12);
    }

    #[test]
    fn lossless_channel_keeps_a_single_pure_block() {
        let s = TwoModePureState::from_real(3, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let rho = loss_channel_apply(&s, &LossChannel::symmetric(1.0).unwrap());
        let w = rho.block_weights();
        for k in 0..3 {
            assert!(w[k].abs() < 1e-14);
        }
        assert!((w[3] - 1.0).abs() < 1e-14);
        let expected = s.density();
        assert!(rho.max_block_difference(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn single_photon_loss_blocks_match_hand_enumeration() {
        let eta = 0.62;
        let s = TwoModePureState::from_real(1, &[1.0, 1.0]).unwrap();
        let rho = loss_channel_apply(&s, &LossChannel::symmetric(eta).unwrap());
        // k=1 block: eta * |psi><psi|
        let b1 = rho.block(1);
        for i in 0..2 {
            for j in 0..2 {
                assert!((b1[(i, j)].re - eta * 0.5).abs() < 1e-14);
                assert!(b1[(i, j)].im.abs() < 1e-15);
            }
        }
        // k=0 block: (1-eta) |vac><vac|
        assert!((rho.block(0)[(0, 0)].re - (1.0 - eta)).abs() < 1e-14);
    }

    #[test]
    fn total_loss_in_one_arm_drains_the_state() {
        let s = TwoModePureState::basis(1, 1).unwrap(); // |1,0>
        let rho = loss_channel_apply(&s, &LossChannel::new(0.0, 1.0).unwrap());
        let w = rho.block_weights();
        assert!((w[0] - 1.0).abs() < 1e-14);
        assert!(w[1].abs() < 1e-14);
    }

    #[test]
    fn phase_shift_identity_and_coherence_rotation() {
        let s = TwoModePureState::from_real(1, &[1.0, 1.0]).unwrap();
        let rho = loss_channel_apply(&s, &LossChannel::symmetric(0.8).unwrap());
        let same = phase_shift_apply(&rho, 0.0);
        assert!(rho.max_block_difference(&same).unwrap() < 1e-15);

        let phi = 0.37;
        let rot = phase_shift_apply(&rho, phi);
        // |1,0><0,1| coherence sits at (m=1, m'=0): multiplied by exp(+i phi)
        let before = rho.block(1)[(1, 0)];
        let after = rot.block(1)[(1, 0)];
        let expected = before * Complex64::from_polar(1.0, phi);
        assert!((after - expected).norm() < 1e-15);
        // block traces invariant
        for (a, b) in rho.block_weights().iter().zip(rot.block_weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_of_diagonal_state_vanishes() {
        let mut rho = BlockDiagonalState::zeros(2);
        rho.blocks_mut()[2][(0, 0)] = c(0.3, 0.0);
        rho.blocks_mut()[2][(1, 1)] = c(0.2, 0.0);
        rho.blocks_mut()[2][(2, 2)] = c(0.1, 0.0);
        rho.blocks_mut()[1][(0, 0)] = c(0.25, 0.0);
        rho.blocks_mut()[1][(1, 1)] = c(0.15, 0.0);
        let d = phase_derivative(&rho);
        for b in d.blocks() {
            for e in b.iter() {
                assert!(e.norm() < 1e-16);
            }
        }
    }

    #[test]
    fn derivative_of_balanced_single_photon_block() {
        let s = TwoModePureState::from_real(1, &[1.0, 1.0]).unwrap();
        let rho = s.density();
        let d = phase_derivative(&rho);
        let b = d.block(1);
        // entries +- i/2 on the off-diagonal
        assert!((b[(1, 0)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((b[(0, 1)] - c(0.0, -0.5)).norm() < 1e-15);
        assert!(b[(0, 0)].norm() < 1e-16);
        assert!(b[(1, 1)].norm() < 1e-16);
        d.validate_derivative(&Tolerances::default()).unwrap();
    }

    #[test]
    fn loss_preserves_trace_and_positivity() {
        let s = TwoModePureState::from_real(4, &[0.1, -0.4, 0.7, 0.2, 0.55]).unwrap();
        let rho = loss_channel_apply(&s, &LossChannel::new(0.62, 0.45).unwrap());
        assert!((rho.total_trace() - 1.0).abs() < 1e-12);
        rho.validate_state(&Tolerances::default()).unwrap();
    }
}
