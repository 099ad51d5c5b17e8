//! Numerical search for optimal fixed-photon-number probe states under loss,
//! the large-N extrapolation of the optimal precision, and the comparison
//! against the coherent-plus-squeezed-vacuum (CSV) strategy.
//!
//! The optimizer maximizes the lossy-interferometer QFI over real nonnegative
//! coefficient vectors on the unit sphere (the channel is phase covariant, so
//! an optimal state can be chosen that way). The ascent is a spectral
//! projected gradient with Barzilai-Borwein steps; the gradient is exact: at
//! the current state the symmetric logarithmic derivative L is known
//! blockwise, and `F(psi) = <psi| M |psi>` with
//! `M = Lambda^dag(2 i [G, L] - L^2)` is stationary in L, so
//! `dF/dpsi = 2 M psi`. One iteration therefore costs the same O(N^4) as one
//! QFI evaluation.
//!
//! The hot path works in real arithmetic: at phase 0 with real coefficients
//! every block is real symmetric, the derivative is `i S` with `S` real
//! antisymmetric, and `L = i V Ltilde V^T` with `Ltilde` real antisymmetric.
//! The reported QFI of a finished optimization is re-evaluated through the
//! complex contract path in [`crate::qfi`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::fock::{KrausTable, LossChannel, TwoModePureState};
use crate::qfi::{cramer_rao, lossy_interferometer_qfi};
use crate::tolerances::Tolerances;
use crate::{Error, Result};

/// Default cap on direct optimization; larger photon numbers use the fitted
/// extrapolation formula.
pub const DEFAULT_DIRECT_CAP: u32 = 60;

/// Multi-start settings of the probe-state optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    /// Number of independent starts (the first one is deterministic).
    pub restarts: u32,
    /// Convergence: relative QFI change below this for three consecutive
    /// accepted steps.
    pub rel_tolerance: f64,
    /// Iteration cap per restart.
    pub max_iterations: u32,
    /// Objective-evaluation budget across all restarts.
    pub max_evals: u64,
    /// Seed of the restart generator; results are bit-deterministic given
    /// identical options.
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            rel_tolerance: 1e-9,
            max_iterations: 2000,
            max_evals: 100_000,
            seed: 20_600,
        }
    }
}

impl OptimizerOptions {
    /// Canonical text form of the settings; the fingerprint hashes this.
    pub fn canonical_text(&self) -> String {
        format!(
            "algo=spg-bb;restarts={};rel_tol={:e};max_iters={};max_evals={};seed={}",
            self.restarts, self.rel_tolerance, self.max_iterations, self.max_evals, self.seed
        )
    }

    /// Stable short hash of the settings, used as the cache key component.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Outcome of one optimize_state call.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub n: u32,
    pub eta: f64,
    /// Optimal probe amplitudes over `|k>_a |n-k>_b`, real nonnegative,
    /// unit norm.
    pub coeffs: Vec<f64>,
    /// QFI of the optimal probe, evaluated through the complex SLD path.
    pub qfi: f64,
    /// `1/sqrt(qfi)`.
    pub delta_phi: f64,
    /// Iterations used by the winning restart.
    pub iterations: u32,
    pub restarts_used: u32,
    pub converged: bool,
}

struct RestartOutcome {
    psi: DVector<f64>,
    qfi: f64,
    iterations: u32,
    converged: bool,
}

/// Real-arithmetic QFI and gradient engine for a fixed (n, eta).
struct RealEngine {
    dim: usize,
    table: KrausTable,
    floor: f64,
}

impl RealEngine {
    fn new(n: u32, eta: f64) -> Self {
        Self {
            dim: n as usize + 1,
            table: KrausTable::new(n, eta, eta),
            floor: Tolerances::default().sld_pair_floor,
        }
    }

    fn blocks(&self, psi: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim - 1;
        let mut blocks: Vec<DMatrix<f64>> =
            (0..=n).map(|k| DMatrix::zeros(k + 1, k + 1)).collect();
        for term in &self.table.terms {
            let v = DVector::from_iterator(
                term.k + 1,
                (0..=term.k).map(|m| term.amps[m] * psi[m + term.l_a]),
            );
            blocks[term.k].ger(1.0, &v, &v, 1.0);
        }
        blocks
    }

    /// QFI and its exact gradient `2 M psi` at the current point.
    fn qfi_and_grad(&self, psi: &DVector<f64>) -> (f64, DVector<f64>) {
        let blocks = self.blocks(psi);
        let mut value = 0.0;
        let mut x_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(blocks.len());
        for (k, rho) in blocks.iter().enumerate() {
            let dim = k + 1;
            if dim == 1 {
                x_blocks.push(DMatrix::zeros(1, 1));
                continue;
            }
            // derivative is i*S with S_{m m'} = (m - m') rho_{m m'}
            let mut s = DMatrix::zeros(dim, dim);
            for m in 0..dim {
                for mp in 0..dim {
                    s[(m, mp)] = (m as f64 - mp as f64) * rho[(m, mp)];
                }
            }
            let eig = rho.clone().symmetric_eigen();
            let lambda = eig.eigenvalues;
            let v = eig.eigenvectors;
            let w = v.transpose() * &s * &v;
            let mut ltilde = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let den = lambda[i] + lambda[j];
                    if den >= self.floor {
                        let lij = 2.0 * w[(i, j)] / den;
                        ltilde[(i, j)] = lij;
                        value += w[(i, j)] * lij;
                    }
                }
            }
            // L = i * Lr with Lr = V Ltilde V^T; the adjoint-map input is
            // X = Lr^2 - 2 [G, Lr] with [G, Lr]_{m m'} = (m' - m) Lr_{m m'}
            let lr = &v * ltilde * v.transpose();
            let mut x = &lr * &lr;
            for m in 0..dim {
                for mp in 0..dim {
                    x[(m, mp)] -= 2.0 * (mp as f64 - m as f64) * lr[(m, mp)];
                }
            }
            x_blocks.push(x);
        }
        // grad = 2 * sum_terms K^T X_k K psi
        let mut grad = DVector::zeros(self.dim);
        for term in &self.table.terms {
            let x = &x_blocks[term.k];
            let vin = DVector::from_iterator(
                term.k + 1,
                (0..=term.k).map(|m| term.amps[m] * psi[m + term.l_a]),
            );
            let out = x * vin;
            for m in 0..=term.k {
                grad[m + term.l_a] += 2.0 * term.amps[m] * out[m];
            }
        }
        (value, grad)
    }
}

/// Clamp to the nonnegative orthant and renormalize.
fn project(v: &DVector<f64>) -> DVector<f64> {
    let mut w = v.map(|x| x.max(0.0));
    let norm = w.norm();
    if norm > 1e-300 {
        w /= norm;
        return w;
    }
    // degenerate direction: keep the largest original component
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    let mut w = DVector::zeros(v.len());
    w[best] = 1.0;
    w
}

fn spg_ascend(
    engine: &RealEngine,
    start: DVector<f64>,
    opts: &OptimizerOptions,
    eval_budget: u64,
) -> RestartOutcome {
    const HISTORY: usize = 10;
    const CHECK_EVERY: u32 = 15;

    let mut psi = project(&start);
    let (mut f, mut g) = engine.qfi_and_grad(&psi);
    let mut evals: u64 = 1;
    let mut alpha = 1.0 / g.amax().max(1e-12);
    let mut converged = false;
    let mut iterations = 0u32;

    let mut best_f = f;
    let mut best_psi = psi.clone();
    // nonmonotone (GLL) reference: worst of the last few accepted values
    let mut history = std::collections::VecDeque::from(vec![f; 1]);
    let mut checkpoint = f;
    let mut stalled_checks = 0u32;

    'outer: for iter in 1..=opts.max_iterations {
        iterations = iter;
        let f_ref = history.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut step = alpha;
        let mut accepted: Option<(DVector<f64>, f64, DVector<f64>)> = None;
        for _ in 0..40 {
            if evals >= eval_budget {
                break 'outer;
            }
            let cand = project(&(&psi + &g * step));
            let (fc, gc) = engine.qfi_and_grad(&cand);
            evals += 1;
            if fc >= f_ref - 1e-12 * f_ref.abs().max(1e-300) {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.25;
        }
        let Some((cand, fc, gc)) = accepted else {
            // no acceptable step at any scale: stationary
            converged = true;
            break;
        };
        // Barzilai-Borwein step for the next iteration
        let s = &cand - &psi;
        let y = &g - &gc;
        let sty = s.dot(&y);
        alpha = if sty > 1e-300 {
            (s.dot(&s) / sty).clamp(1e-10, 1e10)
        } else {
            step * 2.0
        };
        psi = cand;
        g = gc;
        f = fc;
        if f > best_f {
            best_f = f;
            best_psi = psi.clone();
        }
        history.push_back(f);
        if history.len() > HISTORY {
            history.pop_front();
        }
        // convergence: the best value stopped improving across a window
        if iter % CHECK_EVERY == 0 {
            let gain = (best_f - checkpoint) / best_f.abs().max(1e-300);
            if gain <= opts.rel_tolerance {
                stalled_checks += 1;
                if stalled_checks >= 2 {
                    converged = true;
                    break;
                }
            } else {
                stalled_checks = 0;
            }
            checkpoint = best_f;
        }
    }
    RestartOutcome {
        psi: best_psi,
        qfi: best_f,
        iterations,
        converged,
    }
}

fn half_sine_start(dim: usize) -> DVector<f64> {
    DVector::from_iterator(
        dim,
        (0..dim).map(|k| (std::f64::consts::PI * (k + 1) as f64 / (dim + 1) as f64).sin()),
    )
}

fn random_start(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(dim, (0..dim).map(|_| rng.gen::<f64>() + 0.05))
}

/// Maximizes the lossy-interferometer QFI over N-photon probe states with
/// real nonnegative coefficients. Deterministic for fixed options.
pub fn optimize_state(n: u32, eta: f64, options: &OptimizerOptions) -> Result<OptimizationResult> {
    if n < 1 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "[1, 170]",
        });
    }
    if n > 170 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "[1, 170]",
        });
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "(0, 1]",
        });
    }
    if options.restarts < 1 {
        return Err(Error::OutOfRange {
            name: "restarts",
            value: options.restarts as f64,
            range: "[1, inf)",
        });
    }

    let dim = n as usize + 1;
    let engine = RealEngine::new(n, eta);
    let budget_per_restart = (options.max_evals / options.restarts as u64).max(100);

    let outcomes: Vec<RestartOutcome> = (0..options.restarts)
        .into_par_iter()
        .map(|idx| {
            let start = if idx == 0 {
                half_sine_start(dim)
            } else {
                random_start(
                    dim,
                    options
                        .seed
                        .wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                )
            };
            spg_ascend(&engine, start, options, budget_per_restart)
        })
        .collect();

    // highest QFI wins; ties resolved by restart order
    let mut best = &outcomes[0];
    for o in &outcomes[1..] {
        if o.qfi > best.qfi {
            best = o;
        }
    }

    let coeffs: Vec<f64> = best.psi.iter().cloned().collect();
    let probe = TwoModePureState::from_real(n, &coeffs)?;
    let channel = LossChannel::symmetric(eta)?;
    let qfi = lossy_interferometer_qfi(&probe, &channel, 0.0)?.value;
    debug_assert!(
        (qfi - best.qfi).abs() <= 1e-8 * qfi.abs().max(1.0),
        "real/complex QFI paths disagree: {qfi} vs {}",
        best.qfi
    );
    let delta_phi = cramer_rao(qfi)?;
    // re-extract the normalized amplitudes used for the reported QFI
    let coeffs = probe.coeffs().iter().map(|c| c.re).collect();
    Ok(OptimizationResult {
        n,
        eta,
        coeffs,
        qfi,
        delta_phi,
        iterations: best.iterations,
        restarts_used: options.restarts,
        converged: best.converged,
    })
}

/// Fitted coefficients of the large-N optimal-precision model
/// `delta_phi = sqrt((1-eta)/(eta N) [1 + (a + b/N + c/N^2)/sqrt(N)])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Loss parameter the fit was made for.
    pub eta: f64,
    /// Photon-number interval covered by the fit points.
    pub fit_n_range: (u32, u32),
    /// Worst relative deviation of the model from the fit points, on
    /// delta_phi.
    pub max_relative_residual: f64,
}

impl ExtrapolationFit {
    /// Model value at (possibly huge) photon number `n`.
    pub fn delta_phi(&self, n: f64) -> Result<f64> {
        let eta = self.eta;
        let sqrt_n = n.sqrt();
        let correction = (self.a + self.b / n + self.c / (n * n)) / sqrt_n;
        let radicand = (1.0 - eta) / (eta * n) * (1.0 + correction);
        if !(radicand > 0.0) {
            return Err(Error::OutOfRange {
                name: "extrapolation radicand",
                value: radicand,
                range: "(0, inf)",
            });
        }
        Ok(radicand.sqrt())
    }
}

/// Least-squares fit of the extrapolation model on `(n, delta_phi)` points.
///
/// The model is linearized exactly:
/// `y(N) = (delta_phi^2 eta N / (1 - eta) - 1) sqrt(N) = a + b/N + c/N^2`,
/// and solved by SVD. Every point must satisfy
/// `delta_phi^2 eta N / (1-eta) >= 1` (the mean-photon bound guarantees this
/// for physical data).
pub fn fit_extrapolation(points: &[(u32, f64)], eta: f64) -> Result<ExtrapolationFit> {
    if points.len() < 3 {
        return Err(Error::TooFewFitPoints(points.len()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "(0, 1)",
        });
    }
    let rows = points.len();
    let mut design = DMatrix::zeros(rows, 3);
    let mut rhs = DVector::zeros(rows);
    for (i, &(n, delta_phi)) in points.iter().enumerate() {
        let nf = n as f64;
        let scaled = delta_phi * delta_phi * eta * nf / (1.0 - eta);
        if scaled < 1.0 - 1e-9 {
            return Err(Error::FitPointBelowBound { n, delta_phi });
        }
        design[(i, 0)] = 1.0;
        design[(i, 1)] = 1.0 / nf;
        design[(i, 2)] = 1.0 / (nf * nf);
        rhs[i] = (scaled - 1.0).max(0.0) * nf.sqrt();
    }
    let svd = design.svd(true, true);
    if svd.rank(1e-12) < 3 {
        return Err(Error::DegenerateFit);
    }
    let sol = svd.solve(&rhs, 1e-12).map_err(|_| Error::DegenerateFit)?;
    let mut fit = ExtrapolationFit {
        a: sol[0],
        b: sol[1],
        c: sol[2],
        eta,
        fit_n_range: (
            points.iter().map(|p| p.0).min().unwrap_or(0),
            points.iter().map(|p| p.0).max().unwrap_or(0),
        ),
        max_relative_residual: 0.0,
    };
    let mut worst: f64 = 0.0;
    for &(n, delta_phi) in points {
        let model = fit.delta_phi(n as f64)?;
        worst = worst.max((model - delta_phi).abs() / delta_phi);
    }
    fit.max_relative_residual = worst;
    Ok(fit)
}

/// Which route produced an optimal-precision value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    /// Direct numerical optimization at integer photon number.
    Direct,
    /// Fitted large-N extrapolation formula.
    Extrapolated,
}

impl std::fmt::Display for EvalPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalPath::Direct => write!(f, "direct"),
            EvalPath::Extrapolated => write!(f, "extrapolated"),
        }
    }
}

/// Optimal-probe phase uncertainty and the route that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseUncertainty {
    pub delta_phi: f64,
    pub path: EvalPath,
}

/// Best achievable phase uncertainty with an n-photon probe: direct
/// optimization for `n <= direct_cap` (integers only), the fitted
/// extrapolation beyond.
///
/// `provider` resolves a direct optimization request, typically
/// [`optimize_state`] behind a cache.
pub fn optimal_phase_uncertainty<F>(
    n: f64,
    eta: f64,
    fit: &ExtrapolationFit,
    direct_cap: u32,
    provider: &mut F,
) -> Result<PhaseUncertainty>
where
    F: FnMut(u32, f64) -> Result<OptimizationResult>,
{
    if !(n >= 1.0) {
        return Err(Error::OutOfRange {
            name: "n",
            value: n,
            range: "[1, inf)",
        });
    }
    if n <= direct_cap as f64 + 1e-9 {
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 {
            return Err(Error::NonIntegerPhotonNumber(n));
        }
        let result = provider(rounded as u32, eta)?;
        Ok(PhaseUncertainty {
            delta_phi: cramer_rao(result.qfi)?,
            path: EvalPath::Direct,
        })
    } else {
        if (fit.eta - eta).abs() > 1e-12 {
            return Err(Error::FitEtaMismatch {
                fit_eta: fit.eta,
                requested: eta,
            });
        }
        Ok(PhaseUncertainty {
            delta_phi: fit.delta_phi(n)?,
            path: EvalPath::Extrapolated,
        })
    }
}

/// CSV strategy at fixed mean photon number with the squeezing strength
/// chosen optimally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvOptimum {
    pub n_mean: f64,
    pub eta: f64,
    /// Optimal squeezing parameter.
    pub r_opt: f64,
    /// Coherent photons left after squeezing: `n_mean - sinh^2(r_opt)`.
    pub alpha_sq: f64,
    /// CSV phase uncertainty at the optimum.
    pub delta_phi: f64,
}

impl CsvOptimum {
    /// True when the optimum sits inside the validity regime of the CSV
    /// closed form (`|alpha|^2 > 10 sinh^2 r`).
    pub fn closed_form_valid(&self) -> bool {
        crate::geo::csv_validity_ok(self.alpha_sq, self.r_opt)
    }
}

fn csv_objective(r: f64, n_mean: f64, eta: f64) -> f64 {
    let coherent = n_mean - r.sinh().powi(2);
    if coherent <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 - eta + eta * (-2.0 * r).exp()) / (eta * coherent)).sqrt()
}

/// Minimizes the CSV phase uncertainty
/// `sqrt((1 - eta + eta e^{-2r}) / (eta (n_mean - sinh^2 r)))`
/// over the squeezing parameter by a coarse scan plus golden-section
/// refinement. Deterministic.
pub fn csv_optimal_squeezing(n_mean: f64, eta: f64) -> Result<CsvOptimum> {
    if !(n_mean > 0.0) {
        return Err(Error::OutOfRange {
            name: "n_mean",
            value: n_mean,
            range: "(0, inf)",
        });
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "(0, 1)",
        });
    }
    let r_hi = (n_mean * (1.0 - 1e-12)).sqrt().asinh();
    const SCAN: usize = 512;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..=SCAN {
        let r = r_hi * i as f64 / SCAN as f64;
        let v = csv_objective(r, n_mean, eta);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut lo = r_hi * best_i.saturating_sub(1) as f64 / SCAN as f64;
    let mut hi = (r_hi * (best_i + 1) as f64 / SCAN as f64).min(r_hi);
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..120 {
        let d = inv_phi * (hi - lo);
        let x1 = hi - d;
        let x2 = lo + d;
        if csv_objective(x1, n_mean, eta) < csv_objective(x2, n_mean, eta) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mut r_opt = 0.5 * (lo + hi);
    let mut delta_phi = csv_objective(r_opt, n_mean, eta);
    // r = 0 is in the feasible set; never return anything worse
    let at_zero = csv_objective(0.0, n_mean, eta);
    if at_zero < delta_phi {
        r_opt = 0.0;
        delta_phi = at_zero;
    }
    Ok(CsvOptimum {
        n_mean,
        eta,
        r_opt,
        alpha_sq: n_mean - r_opt.sinh().powi(2),
        delta_phi,
    })
}

/// One cell of the optimal-vs-CSV precision comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioGridPoint {
    pub n_mean: f64,
    /// Loss level `1 - eta`.
    pub loss: f64,
    /// `delta_phi(optimal) / delta_phi(CSV)`; at most 1 up to numerical
    /// slack, approaching 1 as the CSV strategy becomes optimal.
    pub ratio: f64,
}

/// Ratio of the optimal-probe precision to the optimally squeezed CSV
/// precision at the same mean photon number.
pub fn precision_ratio<F>(
    n_mean: f64,
    eta: f64,
    fit: &ExtrapolationFit,
    direct_cap: u32,
    provider: &mut F,
) -> Result<RatioGridPoint>
where
    F: FnMut(u32, f64) -> Result<OptimizationResult>,
{
    let optimal = optimal_phase_uncertainty(n_mean, eta, fit, direct_cap, provider)?;
    let csv = csv_optimal_squeezing(n_mean, eta)?;
    Ok(RatioGridPoint {
        n_mean,
        loss: 1.0 - eta,
        ratio: optimal.delta_phi / csv.delta_phi,
    })
}

/// Grid geometry of [`ratio_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioGridSpec {
    pub direct_cap: u32,
    /// Photon-number interval used to fit the extrapolation; defaults to
    /// `[direct_cap / 2, direct_cap]`.
    pub fit_range: Option<(u32, u32)>,
}

impl Default for RatioGridSpec {
    fn default() -> Self {
        Self {
            direct_cap: DEFAULT_DIRECT_CAP,
            fit_range: None,
        }
    }
}

impl RatioGridSpec {
    pub fn resolved_fit_range(&self) -> (u32, u32) {
        self.fit_range
            .unwrap_or((self.direct_cap / 2, self.direct_cap))
    }
}

/// Builds an extrapolation fit from direct optimizations over an integer
/// photon-number range, via the given provider.
pub fn fit_from_direct<F>(
    eta: f64,
    n_lo: u32,
    n_hi: u32,
    provider: &mut F,
) -> Result<ExtrapolationFit>
where
    F: FnMut(u32, f64) -> Result<OptimizationResult>,
{
    if n_lo < 1 || n_hi < n_lo {
        return Err(Error::OutOfRange {
            name: "fit range",
            value: n_lo as f64,
            range: "1 <= n_lo <= n_hi",
        });
    }
    let mut points = Vec::with_capacity((n_hi - n_lo + 1) as usize);
    for n in n_lo..=n_hi {
        let result = provider(n, eta)?;
        points.push((n, result.delta_phi));
    }
    fit_extrapolation(&points, eta)
}

/// Evaluates [`precision_ratio`] over the Cartesian product of photon numbers
/// and loss levels. One extrapolation fit is built per loss level; rows come
/// out loss-major in the given order.
pub fn ratio_grid<F>(
    n_values: &[f64],
    loss_values: &[f64],
    spec: &RatioGridSpec,
    provider: &mut F,
) -> Result<Vec<RatioGridPoint>>
where
    F: FnMut(u32, f64) -> Result<OptimizationResult>,
{
    if n_values.is_empty() || loss_values.is_empty() {
        return Err(Error::OutOfRange {
            name: "grid",
            value: 0.0,
            range: "non-empty",
        });
    }
    for &loss in loss_values {
        if !(loss > 0.0 && loss < 1.0) {
            return Err(Error::OutOfRange {
                name: "loss",
                value: loss,
                range: "(0, 1)",
            });
        }
    }
    let (fit_lo, fit_hi) = spec.resolved_fit_range();
    let mut rows = Vec::with_capacity(n_values.len() * loss_values.len());
    for &loss in loss_values {
        let eta = 1.0 - loss;
        let fit = fit_from_direct(eta, fit_lo, fit_hi, provider)?;
        for &n in n_values {
            rows.push(precision_ratio(n, eta, &fit, spec.direct_cap, provider)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfi::{phase_bound_mean_n, qfi_bound_fixed_n};

    fn quick_opts() -> OptimizerOptions {
        OptimizerOptions {
            restarts: 4,
            ..OptimizerOptions::default()
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (n, eta, seed) in [(2u32, 0.62, 1u64), (4, 0.8, 2), (5, 0.35, 3)] {
            let engine = RealEngine::new(n, eta);
            let dim = n as usize + 1;
            let psi = project(&random_start(dim, seed));
            let (_, grad) = engine.qfi_and_grad(&psi);
            let h = 1e-6;
            for i in 0..dim {
                let mut up = psi.clone();
                up[i] += h;
                let mut dn = psi.clone();
                dn[i] -= h;
                let (fu, _) = engine.qfi_and_grad(&up);
                let (fd, _) = engine.qfi_and_grad(&dn);
                let fd_grad = (fu - fd) / (2.0 * h);
                assert!(
                    (fd_grad - grad[i]).abs() <= 1e-4 * (1.0 + grad[i].abs()),
                    "n={n} eta={eta} i={i}: fd {fd_grad} vs analytic {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn single_photon_optimum_is_balanced() {
        let result = optimize_state(1, 0.62, &quick_opts()).unwrap();
        assert!((result.qfi - 0.62).abs() < 1e-6, "qfi = {}", result.qfi);
        let r = 1.0 / 2.0_f64.sqrt();
        assert!((result.coeffs[0] - r).abs() < 1e-4);
        assert!((result.coeffs[1] - r).abs() < 1e-4);
        assert!((result.delta_phi * result.qfi.sqrt() - 1.0).abs() < 1e-12);
        assert!(result.converged);

        // 1-D brute-force oracle over the mixing angle
        let mut best = 0.0_f64;
        for i in 0..=2000 {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / 2000.0;
            let probe = TwoModePureState::from_real(1, &[theta.cos(), theta.sin()]).unwrap();
            let f = lossy_interferometer_qfi(
                &probe,
                &LossChannel::symmetric(0.62).unwrap(),
                0.0,
            )
            .unwrap()
            .value;
            best = best.max(f);
        }
        assert!((result.qfi - best).abs() < 1e-6);
    }

    #[test]
    fn lossless_two_photon_optimum_is_noon() {
        let result = optimize_state(2, 1.0, &quick_opts()).unwrap();
        assert!((result.qfi - 4.0).abs() < 1e-6, "qfi = {}", result.qfi);
        let r = 1.0 / 2.0_f64.sqrt();
        assert!((result.coeffs[0] - r).abs() < 1e-3);
        assert!((result.coeffs[2] - r).abs() < 1e-3);
        assert!(result.coeffs[1].abs() < 1e-3);
    }

    #[test]
    fn optimizer_respects_bound_and_beats_noon() {
        let result = optimize_state(10, 0.9, &quick_opts()).unwrap();
        let bound = qfi_bound_fixed_n(10, 0.9).unwrap();
        assert!(result.qfi <= bound + 1e-8);
        let noon_value = 100.0 * 0.9_f64.powi(10);
        assert!(
            result.qfi > noon_value,
            "optimizer {} should beat N00N {noon_value}",
            result.qfi
        );
    }

    #[test]
    fn optimizer_is_deterministic() {
        let opts = quick_opts();
        let a = optimize_state(6, 0.62, &opts).unwrap();
        let b = optimize_state(6, 0.62, &opts).unwrap();
        assert_eq!(a.qfi.to_bits(), b.qfi.to_bits());
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn optimizer_rejects_bad_parameters() {
        let opts = OptimizerOptions::default();
        assert!(optimize_state(0, 0.5, &opts).is_err());
        assert!(optimize_state(3, 0.0, &opts).is_err());
        assert!(optimize_state(3, 1.5, &opts).is_err());
    }

    #[test]
    fn fit_recovers_synthetic_coefficients() {
        let (a, b, c) = (1.3, -4.0, 22.0);
        let eta = 0.62;
        let points: Vec<(u32, f64)> = (20..=40)
            .map(|n| {
                let nf = n as f64;
                let dphi = ((1.0 - eta) / (eta * nf)
                    * (1.0 + (a + b / nf + c / (nf * nf)) / nf.sqrt()))
                .sqrt();
                (n, dphi)
            })
            .collect();
        let fit = fit_extrapolation(&points, eta).unwrap();
        assert!((fit.a - a).abs() < 1e-9, "a = {}", fit.a);
        assert!((fit.b - b).abs() < 1e-7, "b = {}", fit.b);
        assert!((fit.c - c).abs() < 1e-5, "c = {}", fit.c);
        assert!(fit.max_relative_residual < 1e-12);
        assert_eq!(fit.fit_n_range, (20, 40));
    }

    #[test]
    fn three_points_interpolate_exactly() {
        let eta = 0.7;
        let (a, b, c) = (0.9, 2.0, -5.0);
        let points: Vec<(u32, f64)> = [10u32, 17, 31]
            .iter()
            .map(|&n| {
                let nf = n as f64;
                let dphi = ((1.0 - eta) / (eta * nf)
                    * (1.0 + (a + b / nf + c / (nf * nf)) / nf.sqrt()))
                .sqrt();
                (n, dphi)
            })
            .collect();
        let fit = fit_extrapolation(&points, eta).unwrap();
        assert!(fit.max_relative_residual < 1e-10);
    }

    #[test]
    fn fit_error_paths() {
        let eta = 0.62;
        assert!(matches!(
            fit_extrapolation(&[(10, 0.3), (20, 0.2)], eta),
            Err(Error::TooFewFitPoints(2))
        ));
        // three identical abscissas: singular design
        let dphi = (0.62_f64 / 0.38 * 10.0).powf(-0.5) * 1.2;
        assert!(matches!(
            fit_extrapolation(&[(10, dphi), (10, dphi), (10, dphi)], eta),
            Err(Error::DegenerateFit)
        ));
        // a point below the bound transform is rejected
        assert!(matches!(
            fit_extrapolation(&[(10, 1e-6), (20, 0.3), (30, 0.3)], eta),
            Err(Error::FitPointBelowBound { .. })
        ));
    }

    #[test]
    fn extrapolation_limit_is_the_mean_n_bound() {
        let fit = ExtrapolationFit {
            a: 1.1,
            b: -3.0,
            c: 10.0,
            eta: 0.62,
            fit_n_range: (30, 60),
            max_relative_residual: 0.0,
        };
        let n = 1e30;
        let v = fit.delta_phi(n).unwrap();
        let bound = phase_bound_mean_n(n, 0.62).unwrap();
        assert!((v / bound - 1.0).abs() < 1e-10);
    }

    #[test]
    fn csv_optimum_reference_point() {
        // frozen dense-scan oracle values at n_mean = 100, eta = 0.62
        let opt = csv_optimal_squeezing(100.0, 0.62).unwrap();
        assert!((opt.r_opt - 1.5900729).abs() < 1e-5, "r_opt = {}", opt.r_opt);
        assert!(
            (opt.delta_phi - 0.083231167).abs() < 1e-8,
            "delta_phi = {}",
            opt.delta_phi
        );
        assert!(opt.alpha_sq > 0.0);
        // first-order stationarity via central differences
        let h = 1e-5;
        let d = (csv_objective(opt.r_opt + h, 100.0, 0.62)
            - csv_objective(opt.r_opt - h, 100.0, 0.62))
            / (2.0 * h);
        assert!(d.abs() <= 1e-6, "derivative at r_opt: {d}");
    }

    #[test]
    fn csv_optimum_beats_unsqueezed_endpoint() {
        for (n_mean, eta) in [(0.5, 0.3), (3.0, 0.62), (1e4, 0.9)] {
            let opt = csv_optimal_squeezing(n_mean, eta).unwrap();
            let unsqueezed = 1.0 / (eta * n_mean).sqrt();
            assert!(opt.delta_phi <= unsqueezed + 1e-15);
            let bound = phase_bound_mean_n(n_mean, eta).unwrap();
            assert!(opt.delta_phi >= bound - 1e-12);
        }
    }

    #[test]
    fn csv_optimum_asymptotics() {
        let opt = csv_optimal_squeezing(1e10, 0.62).unwrap();
        let normalized = opt.delta_phi * (0.62_f64 * 1e10 / 0.38).sqrt();
        assert!((1.0..1.0001).contains(&normalized), "normalized = {normalized}");
    }

    #[test]
    fn csv_rejects_bad_parameters() {
        assert!(csv_optimal_squeezing(0.0, 0.5).is_err());
        assert!(csv_optimal_squeezing(10.0, 1.0).is_err());
    }

    #[test]
    fn options_fingerprint_is_stable_and_sensitive() {
        let a = OptimizerOptions::default();
        let b = OptimizerOptions::default();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = OptimizerOptions {
            seed: 1,
            ..OptimizerOptions::default()
        };
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }
}
