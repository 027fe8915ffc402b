//! Collocation discretization of the weighted transfer operators
//! `H_{s,iτ} u(x) = Σ_h e^{iτc(h)} |h'(x)|^s u(h(x))` and the spectral
//! quantities derived from them.
//!
//! Functions are represented by their values at Chebyshev–Lobatto nodes on the
//! algorithm's interval, and `u(h(x))` is evaluated through the barycentric
//! interpolant. Branches are handled in three ranges:
//!
//! 1. `m ≤ 2n²`: the interpolant is evaluated directly at `h(x_i)`;
//! 2. `2n² < m ≤ M_max`: `h(x_i)` lies well inside the first node gap, so the
//!    interpolant is replaced by its Taylor polynomial at 0;
//! 3. `m > M_max`: the same Taylor polynomial with the branch sums replaced by
//!    an Euler–Maclaurin evaluation built on the cost's large-`m` shape.

use crate::cf_core::{is_admissible, AlgorithmKind};
use crate::costs::{CostFunction, TailModel};
use crate::error::{invalid, Error, Result};
use crate::numerics::{linear_fit, unit_phase, ChebGrid};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    Drop,
    IntegralCorrection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub n: usize,
    pub m_max: u64,
    pub tail_mode: TailMode,
    pub algorithm: AlgorithmKind,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig { n: 48, m_max: 10_000, tail_mode: TailMode::IntegralCorrection, algorithm: AlgorithmKind::Ordinary }
    }
}

impl OperatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return invalid("grid size n must be at least 8");
        }
        if self.m_max < 16 {
            return invalid("branch truncation M_max must be at least 16");
        }
        Ok(())
    }

    /// Grid size and branch truncation both doubled.
    pub fn refined(&self) -> Self {
        OperatorConfig { n: 2 * self.n, m_max: 2 * self.m_max, ..*self }
    }
}

/// Taylor order used for branches beyond the direct range.
const TAYLOR_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailStatus {
    Corrected,
    Dropped,
    /// Correction requested but the cost has no usable large-digit model at this τ.
    UnsupportedDropped,
}

#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub s: C64,
    pub tau: f64,
    pub matrix: DMatrix<C64>,
    pub grid: ChebGrid,
    pub config: OperatorConfig,
    pub tail_status: TailStatus,
    /// True for the operator without the branch `m = 1` (used for `F_{s,iτ}`).
    pub omits_first_branch: bool,
}

impl DiscretizedOperator {
    pub fn size(&self) -> usize {
        self.grid.size()
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let v = &self.matrix * DVector::from_column_slice(u);
        v.iter().copied().collect()
    }

    /// `‖u‖` integrated against Lebesgue measure via Clenshaw–Curtis weights.
    pub fn integrate(&self, u: &[C64]) -> C64 {
        self.grid.quadrature_weights().iter().zip(u).map(|(w, v)| v * *w).sum()
    }
}

/// Signs admissible for large digits.
fn tail_signs(alg: AlgorithmKind) -> &'static [i8] {
    match alg {
        AlgorithmKind::Ordinary => &[1],
        _ => &[1, -1],
    }
}

fn digit_step(alg: AlgorithmKind) -> u64 {
    if alg == AlgorithmKind::Odd {
        2
    } else {
        1
    }
}

/// Smallest digit `> m` of the algorithm's digit set.
fn next_digit(alg: AlgorithmKind, m: u64) -> u64 {
    let n = m + 1;
    if alg == AlgorithmKind::Odd && n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

pub fn build(s: C64, tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<DiscretizedOperator> {
    assemble(s, tau, cost, config, false)
}

/// `F_{s,iτ}`: the operator with the branch `y ↦ 1/(1 + y)` removed (ordinary only).
pub fn build_final(s: C64, tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<DiscretizedOperator> {
    if config.algorithm != AlgorithmKind::Ordinary {
        return invalid("F_{s,iτ} is defined for the ordinary algorithm only");
    }
    assemble(s, tau, cost, config, true)
}

fn assemble(s: C64, tau: f64, cost: &CostFunction, config: &OperatorConfig, omit_first: bool) -> Result<DiscretizedOperator> {
    config.validate()?;
    if s.re <= 0.5 {
        return invalid(format!("Re s = {} must exceed 1/2", s.re));
    }
    let alg = config.algorithm;
    let n = config.n;
    let grid = ChebGrid::new(n, alg.domain_end());
    let m_explicit = config.m_max.max(cost.explicit_range());
    let m_direct = m_explicit.min(2 * (n as u64) * (n as u64));
    let phases: Vec<C64> = if tau == 0.0 {
        vec![C64::new(1.0, 0.0); m_explicit as usize + 1]
    } else {
        let mut v = vec![C64::new(1.0, 0.0)];
        for m in 1..=m_explicit {
            v.push(unit_phase(tau * cost.eval(m)?));
        }
        v
    };
    let model = if tau == 0.0 { TailModel::LogAffine { a0: 0.0, b: 0.0 } } else { cost.tail_model() };
    let tail_status = match (config.tail_mode, model) {
        (TailMode::Drop, _) => TailStatus::Dropped,
        (TailMode::IntegralCorrection, TailModel::Unsupported) => TailStatus::UnsupportedDropped,
        (TailMode::IntegralCorrection, _) => TailStatus::Corrected,
    };
    let taylor = grid.taylor_at_zero(TAYLOR_ORDER);
    let two_s = 2.0 * s;
    let mut matrix = DMatrix::<C64>::zeros(n, n);
    let mut basis = vec![0.0; n];
    let mut row = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let x = grid.nodes[i];
        row.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let mut moments = [C64::new(0.0, 0.0); TAYLOR_ORDER + 1];
        for m in 1..=m_explicit {
            for &eps in &[1i8, -1] {
                if !is_admissible(alg, m, eps) || (omit_first && m == 1) {
                    continue;
                }
                let d = m as f64 + eps as f64 * x;
                let w = phases[m as usize] * (-two_s * d.ln()).exp();
                let y = 1.0 / d;
                if m <= m_direct {
                    grid.basis_at(y, &mut basis);
                    for (r, b) in row.iter_mut().zip(&basis) {
                        *r += w * *b;
                    }
                } else {
                    let mut p = w;
                    for mk in moments.iter_mut() {
                        *mk += p;
                        p *= y;
                    }
                }
            }
        }
        if tail_status == TailStatus::Corrected {
            let m0 = next_digit(alg, m_explicit);
            for &eps in tail_signs(alg) {
                let t = tail_moments(model, x, eps as f64, m0, digit_step(alg), s, tau);
                for (mk, tk) in moments.iter_mut().zip(t) {
                    *mk += tk;
                }
            }
        }
        for (k, mk) in moments.iter().enumerate() {
            if mk.norm() == 0.0 {
                continue;
            }
            for (r, d) in row.iter_mut().zip(&taylor[k]) {
                *r += mk * *d;
            }
        }
        for (j, r) in row.iter().enumerate() {
            matrix[(i, j)] = *r;
        }
    }
    if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonConvergence("operator matrix has non-finite entries".into()));
    }
    Ok(DiscretizedOperator { s, tau, matrix, grid, config: *config, tail_status, omits_first_branch: omit_first })
}

/// `T_k(x) = Σ_{m ≥ m0, step h} e^{iτc(m)} (m + εx)^{−2s−k}` for `k = 0..=K`.
fn tail_moments(model: TailModel, x: f64, eps: f64, m0: u64, h: u64, s: C64, tau: f64) -> [C64; TAYLOR_ORDER + 1] {
    let mut out = [C64::new(0.0, 0.0); TAYLOR_ORDER + 1];
    let hf = h as f64;
    let ex = eps * x;
    for (k, o) in out.iter_mut().enumerate() {
        let a = 2.0 * s + k as f64;
        *o = match model {
            TailModel::LogAffine { a0, b } => {
                let m0f = m0 as f64;
                let ib = C64::new(0.0, tau * b);
                let phase0 = unit_phase(tau * a0);
                let integral = if b == 0.0 {
                    (-(a - 1.0) * (m0f + ex).ln()).exp() / (a - 1.0)
                } else {
                    // (t + εx)^{−a} = Σ_j binom(−a, j) (εx)^j t^{−a−j}
                    let mut sum = C64::new(0.0, 0.0);
                    let mut binom = C64::new(1.0, 0.0);
                    let mut xp = 1.0;
                    for j in 0..40 {
                        let expo = ib - a - j as f64 + 1.0;
                        let term = binom * xp * (expo * m0f.ln()).exp() / (a + j as f64 - 1.0 - ib);
                        sum += term;
                        if term.norm() < 1e-20 * sum.norm() {
                            break;
                        }
                        binom *= (-a - j as f64) / (j as f64 + 1.0);
                        xp *= ex;
                    }
                    sum
                };
                let g = (ib * m0f.ln() - a * (m0f + ex).ln()).exp();
                let dg = g * (ib / m0f - a / (m0f + ex));
                phase0 * (integral / hf + g / 2.0 - dg * hf / 12.0)
            }
            TailModel::DyadicSteps => dyadic_tail(x, eps, m0, h, a, tau),
            TailModel::Unsupported => C64::new(0.0, 0.0),
        };
    }
    out
}

/// Euler–Maclaurin over blocks `[2^j, 2^{j+1})` on which the bit-length cost is constant.
fn dyadic_tail(x: f64, eps: f64, m0: u64, h: u64, a: C64, tau: f64) -> C64 {
    let ex = eps * x;
    let f = |t: f64| (-a * (t + ex).ln()).exp();
    let big_f = |t: f64| (-(a - 1.0) * (t + ex).ln()).exp() / (a - 1.0);
    let mut total = C64::new(0.0, 0.0);
    let mut lo = m0;
    let hf = h as f64;
    while lo < (1u64 << 62) {
        let j = 63 - lo.leading_zeros() as u64;
        let mut hi = (1u64 << (j + 1)) - 1;
        if !(hi - lo).is_multiple_of(h) {
            hi -= (hi - lo) % h;
        }
        let (l, r) = (lo as f64, hi as f64);
        let block = if hi == lo {
            f(l)
        } else {
            let dl = -a * f(l) / (l + ex);
            let dr = -a * f(r) / (r + ex);
            (big_f(l) - big_f(r)) / hf + (f(l) + f(r)) / 2.0 + (dr - dl) * hf / 12.0
        };
        let contribution = unit_phase(tau * (j + 1) as f64) * block;
        total += contribution;
        if contribution.norm() < 1e-19 * total.norm() {
            break;
        }
        lo = hi + h;
    }
    total
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambda: C64,
    pub second: C64,
    /// `|λ₂| / |λ₁|`.
    pub gap_ratio: f64,
    /// Right eigenvector at the nodes, normalized to unit integral when possible.
    pub right: Vec<C64>,
    /// Left eigenvector, scaled so that `wᵀv = 1`.
    pub left: Vec<C64>,
    /// `‖Hv − λv‖_∞ / ‖v‖_∞`.
    pub residual: f64,
}

impl SpectralData {
    /// Rank-one projector `v wᵀ`.
    pub fn projector(&self) -> DMatrix<C64> {
        let v = DVector::from_column_slice(&self.right);
        let w = DVector::from_column_slice(&self.left);
        &v * w.transpose()
    }

    pub fn project(&self, u: &[C64]) -> Vec<C64> {
        let c: C64 = self.left.iter().zip(u).map(|(a, b)| a * b).sum();
        self.right.iter().map(|v| v * c).collect()
    }
}

fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-15, 20_000)
        .ok_or_else(|| Error::NonConvergence("Schur decomposition did not converge".into()))?;
    let mut ev: Vec<C64> = schur
        .eigenvalues()
        .ok_or_else(|| Error::NonConvergence("no eigenvalues from Schur form".into()))?
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(ev)
}

fn inverse_iteration(m: &DMatrix<C64>, shift: C64) -> Result<DVector<C64>> {
    let n = m.nrows();
    let mut shifted = m.clone();
    let bump = shift * 1e-13 + C64::new(1e-300, 0.0);
    for i in 0..n {
        shifted[(i, i)] -= shift + bump;
    }
    let lu = shifted.lu();
    let mut v = DVector::from_element(n, C64::new(1.0, 0.0));
    for _ in 0..4 {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::Singular("inverse iteration hit an exactly singular matrix".into()))?;
        let scale = v.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        v /= C64::new(scale, 0.0);
    }
    Ok(v)
}

pub fn dominant_eig(op: &DiscretizedOperator) -> Result<SpectralData> {
    let a = &op.matrix;
    let ev = eigenvalues(a)?;
    let (l1, l2) = (ev[0], ev.get(1).copied().unwrap_or(C64::new(0.0, 0.0)));
    let gap_ratio = l2.norm() / l1.norm();
    if !(gap_ratio < 1.0 - 1e-9) {
        return Err(Error::NoGap(gap_ratio));
    }
    let mut v = inverse_iteration(a, l1)?;
    let mut w = inverse_iteration(&a.transpose(), l1)?;
    let weights = op.grid.quadrature_weights();
    let integral: C64 = v.iter().zip(&weights).map(|(z, q)| z * *q).sum();
    if integral.norm() > 1e-8 * v.iter().fold(0.0f64, |m, z| m.max(z.norm())) {
        v /= integral;
    }
    let av = a * &v;
    let wv = (w.transpose() * &v)[(0, 0)];
    let lambda = (w.transpose() * &av)[(0, 0)] / wv;
    w /= wv;
    let vnorm = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let residual = (&av - &v * lambda).iter().fold(0.0f64, |m, z| m.max(z.norm())) / vnorm;
    Ok(SpectralData {
        lambda,
        second: l2,
        gap_ratio,
        right: v.iter().copied().collect(),
        left: w.iter().copied().collect(),
        residual,
    })
}

pub fn lambda(s: C64, tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<C64> {
    Ok(dominant_eig(&build(s, tau, cost, config)?)?.lambda)
}

/// Step for the centered `s`-difference of `λ(s, iτ)`.
pub const S_STEP: f64 = 1e-5;

/// `∂_s λ(s, iτ)` by a Richardson-extrapolated centered difference.
pub fn dlambda_ds(s: C64, tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<C64> {
    let diff = |h: f64| -> Result<C64> {
        Ok((lambda(s + h, tau, cost, config)? - lambda(s - h, tau, cost, config)?) / (2.0 * h))
    };
    let d1 = diff(S_STEP)?;
    let d2 = diff(S_STEP / 2.0)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSolution {
    pub sigma: C64,
    pub residual: f64,
    pub iterations: usize,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;

/// `σ(iτ)` with `λ(σ, iτ) = 1`, Newton from `start`.
pub fn solve_sigma_from(tau: f64, start: C64, cost: &CostFunction, config: &OperatorConfig) -> Result<SigmaSolution> {
    let mut s = start;
    for it in 0..NEWTON_MAX_ITER {
        let f = lambda(s, tau, cost, config)? - 1.0;
        if f.norm() < 1e-14 {
            return Ok(SigmaSolution { sigma: s, residual: f.norm(), iterations: it });
        }
        let d = (lambda(s + S_STEP, tau, cost, config)? - lambda(s - S_STEP, tau, cost, config)?) / (2.0 * S_STEP);
        let step = f / d;
        s -= step;
        if step.norm() < 1e-15 && f.norm() < NEWTON_TOL {
            let residual = (lambda(s, tau, cost, config)? - 1.0).norm();
            return Ok(SigmaSolution { sigma: s, residual, iterations: it + 1 });
        }
    }
    let residual = (lambda(s, tau, cost, config)? - 1.0).norm();
    if residual < NEWTON_TOL {
        return Ok(SigmaSolution { sigma: s, residual, iterations: NEWTON_MAX_ITER });
    }
    Err(Error::NonConvergence(format!("Newton for sigma(i*{tau}) stalled at residual {residual:e}")))
}

/// Default small-τ bound for σ(iτ).
pub const NU0: f64 = 0.6;

pub fn solve_sigma(tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<SigmaSolution> {
    if tau.abs() >= NU0 {
        return invalid(format!("|tau| = {} outside the small-tau regime |tau| < {NU0}", tau.abs()));
    }
    solve_sigma_from(tau, C64::new(1.0, 0.0), cost, config)
}

/// σ along a τ-grid, continuing each Newton solve from the previous point.
pub fn sigma_path(taus: &[f64], cost: &CostFunction, config: &OperatorConfig) -> Result<Vec<SigmaSolution>> {
    let mut out = Vec::with_capacity(taus.len());
    let mut start = C64::new(1.0, 0.0);
    for &t in taus {
        if t.abs() >= NU0 {
            return invalid(format!("|tau| = {} outside the small-tau regime", t.abs()));
        }
        let sol = solve_sigma_from(t, start, cost, config).or_else(|_| solve_sigma_from(t, C64::new(1.0, 0.0), cost, config))?;
        start = sol.sigma;
        out.push(sol);
    }
    Ok(out)
}

/// τ-step of the difference stencil used for σ'(0) and σ''(0).
pub const TAU_STEP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDispersion {
    pub mu: f64,
    pub delta2: f64,
    pub sigma0: C64,
    /// `dσ/dτ(0)` (purely imaginary in theory) and `d²σ/dτ²(0)` (real in theory).
    pub dsigma: C64,
    pub d2sigma: C64,
    /// Centered first differences with steps `h` and `h/2`, before extrapolation.
    pub dsigma_h: C64,
    pub dsigma_h2: C64,
}

/// `μ = 2σ'(0)` and `δ² = 2σ''(0)`, derivatives taken in the variable `iτ`.
pub fn drift_dispersion(cost: &CostFunction, config: &OperatorConfig) -> Result<DriftDispersion> {
    let h = TAU_STEP;
    let pos = sigma_path(&[0.0, h / 2.0, h], cost, config)?;
    let neg = sigma_path(&[-h / 2.0, -h], cost, config)?;
    let (s0, sp1, sp2, sm1, sm2) = (pos[0].sigma, pos[1].sigma, pos[2].sigma, neg[0].sigma, neg[1].sigma);
    let d_h = (sp2 - sm2) / (2.0 * h);
    let d_h2 = (sp1 - sm1) / h;
    let dsigma = (4.0 * d_h2 - d_h) / 3.0;
    let dd_h = (sp2 - 2.0 * s0 + sm2) / (h * h);
    let dd_h2 = (sp1 - 2.0 * s0 + sm1) / (h * h / 4.0);
    let d2sigma = (4.0 * dd_h2 - dd_h) / 3.0;
    // σ(iτ) = 1 + iτμ/2 − τ²δ²/4 + …
    Ok(DriftDispersion {
        mu: 2.0 * dsigma.im,
        delta2: -2.0 * d2sigma.re,
        sigma0: s0,
        dsigma,
        d2sigma,
        dsigma_h: d_h,
        dsigma_h2: d_h2,
    })
}

fn min_distance_to_one(m: &DMatrix<C64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|l| (l - 1.0).norm()).fold(f64::INFINITY, f64::min))
}

/// Threshold on `min_k |1 − λ_k|` below which `Id − H` is declared singular.
pub const SINGULAR_TOL: f64 = 1e-8;

/// `F_{s,iτ}(Id − H_{s,iτ})^{−1}(1)(0) + e^{iτc(1)}`, i.e. the full `S(2s, iτ)`
/// including the pair `(1, 1)` whose only digit is the omitted branch.
pub fn dirichlet_via_resolvent(s: C64, tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<C64> {
    if s.re <= 1.0 {
        return invalid("the resolvent identity needs Re s > 1");
    }
    let h = build(s, tau, cost, config)?;
    let dist = min_distance_to_one(&h.matrix)?;
    if dist < SINGULAR_TOL {
        return Err(Error::Singular(format!("Id - H is singular (min |1 - lambda| = {dist:e})")));
    }
    let f = build_final(s, tau, cost, config)?;
    let n = h.size();
    let system = DMatrix::<C64>::identity(n, n) - &h.matrix;
    let ones = DVector::from_element(n, C64::new(1.0, 0.0));
    let v = system.lu().solve(&ones).ok_or_else(|| Error::Singular("Id - H".into()))?;
    let fv = &f.matrix * v;
    Ok(fv[0] + unit_phase(tau * cost.eval(1)?))
}

/// `E(iτ) = −(∂_sλ)^{−1} F_{σ,iτ} P_{σ,iτ}(1)(0)` at `σ = σ(iτ)`.
pub fn e_factor(tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<C64> {
    let sigma = solve_sigma(tau, cost, config)?.sigma;
    e_factor_at(sigma, tau, cost, config)
}

pub fn e_factor_at(sigma: C64, tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<C64> {
    let h = build(sigma, tau, cost, config)?;
    let spec = dominant_eig(&h)?;
    let ones = vec![C64::new(1.0, 0.0); h.size()];
    let p1 = spec.project(&ones);
    let f = build_final(sigma, tau, cost, config)?;
    let fp1 = f.apply(&p1);
    let dl = dlambda_ds(sigma, tau, cost, config)?;
    Ok(-fp1[0] / dl)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub sigma: f64,
    pub t: f64,
    pub tau: f64,
    pub lambda: C64,
    /// `min_k |1 − λ_k(H)|`.
    pub distance_to_spectrum: f64,
    pub singular: bool,
    /// Largest weighted gain `‖R f‖_w / ‖f‖_w` over the probe family, with
    /// `R = (Id − H)^{−1}`, `w` the dominant eigenfunction of `H_{σ,0}` and
    /// sup norms taken on a fine grid through the interpolant.
    pub norm: Option<f64>,
    /// Entrywise bound `max_i Σ_j |R_ij| w_j / w_i`. It also counts the
    /// oscillation of the Lagrange basis, so it overstates the function norm.
    pub matrix_norm: Option<f64>,
}

const PROBE_EIGVECS: usize = 6;
const PROBE_FINE: usize = 400;

/// Heuristic size of `(Id − H_{σ+it,iτ})^{−1}` on the collocation space.
///
/// Test functions are the weight itself and the eigenvectors of `H` whose
/// eigenvalues lie closest to 1, each also multiplied by the weight.
pub fn resolvent_norm_probe(sigma: f64, t: f64, tau: f64, cost: &CostFunction, config: &OperatorConfig) -> Result<ResolventProbe> {
    let weight_op = build(C64::new(sigma, 0.0), 0.0, cost, config)?;
    let weight = dominant_eig(&weight_op)?;
    resolvent_probe_with_weight(sigma, t, tau, cost, config, &weight.right)
}

fn resolvent_probe_with_weight(
    sigma: f64,
    t: f64,
    tau: f64,
    cost: &CostFunction,
    config: &OperatorConfig,
    weight: &[C64],
) -> Result<ResolventProbe> {
    let h = build(C64::new(sigma, t), tau, cost, config)?;
    let ev = eigenvalues(&h.matrix)?;
    let distance = ev.iter().map(|l| (l - 1.0).norm()).fold(f64::INFINITY, f64::min);
    let lambda = ev[0];
    if distance < SINGULAR_TOL {
        return Ok(ResolventProbe {
            sigma,
            t,
            tau,
            lambda,
            distance_to_spectrum: distance,
            singular: true,
            norm: None,
            matrix_norm: None,
        });
    }
    let n = h.size();
    let system = DMatrix::<C64>::identity(n, n) - &h.matrix;
    let inv = system.try_inverse().ok_or_else(|| Error::Singular("Id - H".into()))?;
    let d: Vec<f64> = weight.iter().map(|z| z.norm()).collect();
    let mut matrix_norm = 0.0f64;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| inv[(i, j)].norm() * d[j]).sum::<f64>() / d[i];
        matrix_norm = matrix_norm.max(row);
    }

    let fine: Vec<f64> = (0..=PROBE_FINE).map(|k| h.grid.len * k as f64 / PROBE_FINE as f64).collect();
    let basis: Vec<Vec<f64>> = fine
        .iter()
        .map(|&y| {
            let mut b = vec![0.0; n];
            h.grid.basis_at(y, &mut b);
            b
        })
        .collect();
    let w_fine: Vec<f64> = basis.iter().map(|b| b.iter().zip(&d).map(|(a, v)| a * v).sum()).collect();
    let weighted_sup = |f: &DVector<C64>| -> f64 {
        basis
            .iter()
            .zip(&w_fine)
            .map(|(b, w)| b.iter().zip(f.iter()).map(|(a, v)| v * *a).sum::<C64>().norm() / w)
            .fold(0.0, f64::max)
    };

    let mut family = vec![DVector::from_iterator(n, d.iter().map(|&v| C64::new(v, 0.0)))];
    let mut near: Vec<C64> = ev.clone();
    near.sort_by(|a, b| (a - 1.0).norm().partial_cmp(&(b - 1.0).norm()).unwrap_or(std::cmp::Ordering::Equal));
    for &mu in near.iter().take(PROBE_EIGVECS) {
        if let Ok(v) = inverse_iteration(&h.matrix, mu) {
            let weighted = DVector::from_iterator(n, v.iter().zip(&d).map(|(z, w)| z * *w));
            family.push(v);
            family.push(weighted);
        }
    }
    let mut norm = 0.0f64;
    for f in &family {
        let denom = weighted_sup(f);
        if denom > 0.0 {
            norm = norm.max(weighted_sup(&(&inv * f)) / denom);
        }
    }
    Ok(ResolventProbe {
        sigma,
        t,
        tau,
        lambda,
        distance_to_spectrum: distance,
        singular: false,
        norm: Some(norm),
        matrix_norm: Some(matrix_norm),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSweep {
    pub rows: Vec<ResolventProbe>,
    /// Least-squares slope of `log norm` against `log |τ|` over nonsingular rows.
    pub fitted_alpha: Option<f64>,
}

pub fn resolvent_sweep(sigma: f64, t: f64, taus: &[f64], cost: &CostFunction, config: &OperatorConfig) -> Result<ResolventSweep> {
    let weight = dominant_eig(&build(C64::new(sigma, 0.0), 0.0, cost, config)?)?.right;
    let rows = taus
        .iter()
        .map(|&tau| resolvent_probe_with_weight(sigma, t, tau, cost, config, &weight))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.norm.map(|nm| (r.tau.abs().ln(), nm.ln())))
        .collect();
    let fitted_alpha = if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(linear_fit(&x, &y).0)
    } else {
        None
    };
    Ok(ResolventSweep { rows, fitted_alpha })
}

/// One row of a spectral sweep export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub s_re: f64,
    pub s_im: f64,
    pub tau: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub gap: f64,
    pub resolvent_norm: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, m_max: u64) -> OperatorConfig {
        OperatorConfig { n, m_max, ..Default::default() }
    }

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn gauss_operator_fixes_invariant_density() {
        let op = build(one(), 0.0, &CostFunction::one(), &cfg(32, 2000)).unwrap();
        let sd = dominant_eig(&op).unwrap();
        assert!((sd.lambda - 1.0).norm() < 1e-10, "{}", sd.lambda);
        for (x, v) in op.grid.nodes.iter().zip(&sd.right) {
            let f1 = 1.0 / ((1.0 + x) * std::f64::consts::LN_2);
            assert!((v - f1).norm() < 1e-9);
        }
        // the first subdominant eigenvalue of the Gauss map operator
        assert!((sd.second.re + 0.303_663_002_898_732_6).abs() < 1e-8, "{}", sd.second);
    }

    #[test]
    fn all_algorithms_have_unit_eigenvalue_at_one() {
        for alg in AlgorithmKind::ALL {
            let c = OperatorConfig { algorithm: alg, ..cfg(32, 4000) };
            let l = lambda(one(), 0.0, &CostFunction::one(), &c).unwrap();
            assert!((l - 1.0).norm() < 1e-9, "{alg}: {l}");
        }
    }

    #[test]
    fn final_operator_at_two() {
        let op = build_final(C64::new(2.0, 0.0), 0.0, &CostFunction::one(), &cfg(24, 1000)).unwrap();
        let ones = vec![one(); op.size()];
        let v = op.apply(&ones)[0];
        let zeta4 = std::f64::consts::PI.powi(4) / 90.0;
        assert!((v.re - (zeta4 - 1.0)).abs() < 1e-13, "{v}");
    }

    #[test]
    fn final_equals_full_minus_first_branch() {
        let c = cfg(16, 500);
        let s = C64::new(1.5, 0.0);
        let cost = CostFunction::log();
        let h = build(s, 0.2, &cost, &c).unwrap();
        let f = build_final(s, 0.2, &cost, &c).unwrap();
        let diff = &h.matrix - &f.matrix;
        let mut basis = vec![0.0; c.n];
        for i in 0..c.n {
            let x = h.grid.nodes[i];
            h.grid.basis_at(1.0 / (1.0 + x), &mut basis);
            let w = (-2.0 * s * (1.0 + x).ln()).exp() * unit_phase(0.2 * 0.0);
            for j in 0..c.n {
                assert!((diff[(i, j)] - w * basis[j]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_small_real_part() {
        assert!(build(C64::new(0.5, 0.0), 0.0, &CostFunction::one(), &cfg(16, 100)).is_err());
        assert!(build_final(one(), 0.0, &CostFunction::one(), &OperatorConfig { algorithm: AlgorithmKind::Odd, ..cfg(16, 100) }).is_err());
    }
}
