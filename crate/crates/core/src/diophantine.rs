//! Periodic points of the Gauss map and the diophantine conditions built on
//! them.
//!
//! A primitive digit tuple `(m_1, …, m_p)` repeated forever is the ordinary
//! continued fraction of a quadratic irrational `x ∈ (0, 1)`, fixed by the
//! branch word `h = h_{m_1} ∘ … ∘ h_{m_p}`. For four such orbits and a cost
//! `c`, [`strongly_dio_report`] computes
//!
//! * `L_{1j} = p_j c_1 − p_1 c_j` and `L̂_{1j} = p_j a_1 − p_1 a_j` for `j = 2, 3, 4`,
//! * `L̃_{jk} = L_{1j} L̂_{1k} − L̂_{1j} L_{1k}`,
//!
//! where `c_j` is the cost of the word and `a_j = log |h'(x_j)|`, and then
//! estimates the diophantine exponents of `L_{12}/L_{13}` and of the pair
//! `(L̃_{43}/L̃_{23}, L̃_{42}/L̃_{23})` by brute force. Everything here is a
//! finite probe of conditions that quantify over infinitely many integers.

use crate::cf_core::{expand, BranchWord, Rational};
use crate::costs::{total_cost, CostFunction};
use crate::error::{invalid, Error, Result};
use crate::surd::Surd;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tolerance below which an L-quantity without an exact zero certificate is
/// treated as zero.
pub const NONZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DigitTuple {
    pub digits: Vec<u64>,
}

impl DigitTuple {
    pub fn new(digits: Vec<u64>) -> Result<Self> {
        if digits.is_empty() {
            return invalid("empty digit tuple");
        }
        if digits.contains(&0) {
            return invalid("digits must be positive");
        }
        Ok(DigitTuple { digits })
    }

    pub fn period(&self) -> usize {
        self.digits.len()
    }

    /// Length of the shortest block whose repetition gives the tuple.
    pub fn minimal_period(&self) -> usize {
        let p = self.digits.len();
        (1..=p)
            .find(|&k| p.is_multiple_of(k) && (k..p).all(|i| self.digits[i] == self.digits[i - k]))
            .unwrap_or(p)
    }

    pub fn is_primitive(&self) -> bool {
        self.minimal_period() == self.period()
    }

    /// Whether `other` is a cyclic rotation of this tuple, which is exactly when
    /// the two periodic points lie on the same Gauss-map orbit.
    pub fn same_orbit(&self, other: &DigitTuple) -> bool {
        let p = self.period();
        p == other.period() && (0..p).any(|r| (0..p).all(|i| self.digits[(i + r) % p] == other.digits[i]))
    }

    fn rotated(&self, r: usize) -> Vec<u64> {
        let p = self.period();
        (0..p).map(|i| self.digits[(i + r) % p]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub tuple: DigitTuple,
    pub surd: Surd,
    pub x: f64,
    pub period: usize,
    /// `log |h'(x)|` from the product `Π_ℓ (m_ℓ + x_ℓ)^{−2}` over the orbit.
    pub a: f64,
    /// The same quantity from the chain rule on the branch word.
    pub a_word: f64,
    /// The same quantity from the Möbius coefficients, `−2 log |cx + d|`.
    pub a_mobius: f64,
    /// `T^ℓ(x)` for `ℓ = 0..p`, exact.
    pub orbit: Vec<Surd>,
}

impl PeriodicOrbit {
    pub fn cost(&self, c: &CostFunction) -> Result<f64> {
        let mut s = 0.0;
        for &m in &self.tuple.digits {
            s += c.eval(m)?;
        }
        Ok(s)
    }

    /// Checks `T^p(x) = x` in exact arithmetic.
    pub fn verify_fixed(&self) -> Result<bool> {
        let mut y = self.surd;
        for _ in 0..self.period {
            y = y.gauss()?;
        }
        Ok(y == self.surd)
    }
}

/// The attracting fixed point of the word `h_{m_1} ∘ … ∘ h_{m_p}`.
pub fn periodic_point(t: &DigitTuple) -> Result<PeriodicOrbit> {
    if !t.is_primitive() {
        return Err(Error::NonPrimitive(t.digits.clone()));
    }
    let word = BranchWord::ordinary(&t.digits)?;
    let [[a, b], [c, d]] = word.matrix();
    // x = (ax + b)/(cx + d)  ⇔  c x² + (d − a) x − b = 0, and c ≥ 1 for ordinary words
    let disc = (d - a)
        .checked_mul(d - a)
        .and_then(|s| b.checked_mul(c).and_then(|t| t.checked_mul(4)).and_then(|t| s.checked_add(t)))
        .ok_or_else(|| Error::Overflow("fixed-point discriminant".into()))?;
    let surd = Surd::new(a - d, 1, disc, 2 * c)?;
    let x = surd.to_f64();

    let mut orbit = vec![surd];
    for _ in 1..t.period() {
        let next = orbit.last().expect("nonempty").gauss()?;
        orbit.push(next);
    }
    // x_ℓ = 1/(m_{ℓ+1} + x_{ℓ+1}) with indices taken cyclically
    let p = t.period();
    let a_product: f64 = (0..p)
        .map(|l| {
            let next = orbit[(l + 1) % p].to_f64();
            -2.0 * (t.digits[l] as f64 + next).ln()
        })
        .sum();
    Ok(PeriodicOrbit {
        tuple: t.clone(),
        surd,
        x,
        period: p,
        a: a_product,
        a_word: word.derivative(x).ln(),
        a_mobius: -2.0 * (c as f64 * x + d as f64).abs().ln(),
        orbit,
    })
}

/// `log(1 + (m² − m√(m² + 4))/2)`, the log-derivative at the fixed point of
/// the single branch `h_m`.
pub fn remark7_alpha(m: u64) -> Result<f64> {
    if m == 0 {
        return invalid("m must be positive");
    }
    let m = m as f64;
    let r = (m * m + 4.0).sqrt();
    // 1 + (m² − m r)/2 = (r − m)/(r + m), written without the cancellation
    Ok((2.0 / (r + m)).ln() * 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Result of a brute-force diophantine exponent search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    /// `max −log(dist)/log(max_k |q_k|)`; infinite when an exact relation was hit.
    pub eta_hat: f64,
    pub rational: bool,
    /// Integer vector `q` and nearest integer `p` realizing the maximum.
    pub witness_q: Vec<i64>,
    pub witness_p: i64,
    pub witness_dist: f64,
    pub q_max: u64,
}

fn dist_to_int(y: f64) -> (f64, i64) {
    let p = y.round();
    ((y - p).abs(), p as i64)
}

/// Brute-force estimate of the diophantine exponent of `x` (dimension 1 or 2)
/// over integer vectors with `√Q_max ≤ max_k |q_k| ≤ Q_max`.
pub fn exponent_estimate(x: &[f64], q_max: u64) -> Result<ExponentEstimate> {
    if q_max < 10 {
        return invalid("Q_max must be at least 10");
    }
    if x.is_empty() || x.len() > 2 {
        return invalid("dimension must be 1 or 2");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("coordinates must be finite");
    }
    let q_lo = ((q_max as f64).sqrt().ceil() as u64).max(2);
    let scale: f64 = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let zero_tol = |h: u64| 8.0 * f64::EPSILON * scale * h as f64;

    // (score, q vector, p, dist)
    type Best = (f64, Vec<i64>, i64, f64);
    let score = |q: &[i64], h: u64| -> Best {
        let y: f64 = q.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
        let (dist, p) = dist_to_int(y);
        let s = if dist <= zero_tol(h) { f64::INFINITY } else { -dist.ln() / (h as f64).ln() };
        (s, q.to_vec(), p, dist)
    };
    let better = |a: Best, b: Best| if b.0 > a.0 { b } else { a };
    let init: Best = (f64::NEG_INFINITY, vec![], 0, f64::NAN);

    let best = if x.len() == 1 {
        (q_lo..=q_max)
            .into_par_iter()
            .map(|q| score(&[q as i64], q))
            .reduce(|| init.clone(), better)
    } else {
        // q and −q give the same distance, so fix the sign of the leading nonzero entry
        let q = q_max as i64;
        (0..=q)
            .into_par_iter()
            .map(|q1| {
                let mut local = init.clone();
                let lo2 = if q1 == 0 { 1 } else { -q };
                for q2 in lo2..=q {
                    let h = q1.unsigned_abs().max(q2.unsigned_abs());
                    if h < q_lo {
                        continue;
                    }
                    local = better(local, score(&[q1, q2], h));
                }
                local
            })
            .reduce(|| init.clone(), better)
    };
    Ok(ExponentEstimate {
        eta_hat: best.0,
        rational: best.0.is_infinite(),
        witness_q: best.1,
        witness_p: best.2,
        witness_dist: best.3,
        q_max,
    })
}

/// A real L-quantity together with how its zero test was decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LValue {
    pub value: f64,
    /// True when every integer coefficient in the grouped expansion vanished.
    pub exact_zero: bool,
}

impl LValue {
    pub fn is_zero(&self) -> bool {
        self.exact_zero || self.value.abs() < NONZERO_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub digits: Vec<u64>,
    pub period: usize,
    pub x: f64,
    pub surd: Surd,
    pub a: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DioReport {
    pub cost_name: String,
    pub orbits: Vec<OrbitSummary>,
    /// `L_{1j}` at index `j − 2`.
    pub l: [LValue; 3],
    /// `L̂_{1j}` at index `j − 2`.
    pub l_hat: [f64; 3],
    /// `L̃_{jk}` at index `[j − 2][k − 2]`; the diagonal is zero.
    pub l_tilde: [[f64; 3]; 3],
    pub l13_nonzero: bool,
    pub l_hat12_nonzero: bool,
    pub l_tilde23_nonzero: bool,
    pub eta0: f64,
    pub ratio_estimate: Option<ExponentEstimate>,
    pub pair_estimate: Option<ExponentEstimate>,
    pub verdict: Verdict,
}

/// `p_j c_1 − p_1 c_j`, grouping digits by equal cost value so that integer
/// cancellations give an exact zero.
fn l_quantity(t1: &DigitTuple, tj: &DigitTuple, c: &CostFunction) -> Result<LValue> {
    let (p1, pj) = (t1.period() as i64, tj.period() as i64);
    let mut groups: Vec<(f64, i64)> = Vec::new();
    let mut push = |v: f64, k: i64| {
        match groups.iter_mut().find(|g| g.0 == v) {
            Some(g) => g.1 += k,
            None => groups.push((v, k)),
        };
    };
    for &m in &t1.digits {
        push(c.eval(m)?, pj);
    }
    for &m in &tj.digits {
        push(c.eval(m)?, -p1);
    }
    let exact_zero = groups.iter().all(|g| g.1 == 0 || g.0 == 0.0);
    let value = if exact_zero { 0.0 } else { groups.iter().map(|g| g.1 as f64 * g.0).sum() };
    Ok(LValue { value, exact_zero })
}

/// Evaluates the strongly-diophantine quantities for four periodic orbits.
pub fn strongly_dio_report(tuples: &[DigitTuple; 4], c: &CostFunction, eta0: f64, q_max: u64) -> Result<DioReport> {
    for (i, a) in tuples.iter().enumerate() {
        if !a.is_primitive() {
            return Err(Error::NonPrimitive(a.digits.clone()));
        }
        for b in &tuples[i + 1..] {
            if a.same_orbit(b) {
                return Err(Error::OrbitOverlap(a.digits.clone(), b.digits.clone()));
            }
        }
    }
    let orbits = tuples.iter().map(periodic_point).collect::<Result<Vec<_>>>()?;
    let summaries = orbits
        .iter()
        .map(|o| {
            Ok(OrbitSummary {
                digits: o.tuple.digits.clone(),
                period: o.period,
                x: o.x,
                surd: o.surd,
                a: o.a,
                c: o.cost(c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let p1 = orbits[0].period as f64;
    let mut l = [LValue { value: 0.0, exact_zero: true }; 3];
    let mut l_hat = [0.0; 3];
    for j in 0..3 {
        l[j] = l_quantity(&tuples[0], &tuples[j + 1], c)?;
        l_hat[j] = orbits[j + 1].period as f64 * orbits[0].a - p1 * orbits[j + 1].a;
    }
    let mut l_tilde = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            if j != k {
                l_tilde[j][k] = l[j].value * l_hat[k] - l_hat[j] * l[k].value;
            }
        }
    }
    let l13_nonzero = !l[1].is_zero();
    let l_hat12_nonzero = l_hat[0].abs() >= NONZERO_TOL;
    let l_tilde23_nonzero = l_tilde[0][1].abs() >= NONZERO_TOL;

    let mut verdict = Verdict::Pass;
    let (mut ratio_estimate, mut pair_estimate) = (None, None);
    if !(l13_nonzero && l_hat12_nonzero && l_tilde23_nonzero) {
        verdict = Verdict::Fail;
    } else {
        let r = exponent_estimate(&[l[0].value / l[1].value], q_max)?;
        // indices: L̃_{43} → [2][1], L̃_{42} → [2][0], L̃_{23} → [0][1]
        let pair = [l_tilde[2][1] / l_tilde[0][1], l_tilde[2][0] / l_tilde[0][1]];
        let pe = exponent_estimate(&pair, q_max)?;
        if r.rational || pe.rational {
            verdict = Verdict::Fail;
        } else if r.eta_hat > eta0 || pe.eta_hat > eta0 {
            verdict = Verdict::Inconclusive;
        }
        ratio_estimate = Some(r);
        pair_estimate = Some(pe);
    }
    Ok(DioReport {
        cost_name: c.name.clone(),
        orbits: summaries,
        l,
        l_hat,
        l_tilde,
        l13_nonzero,
        l_hat12_nonzero,
        l_tilde23_nonzero,
        eta0,
        ratio_estimate,
        pair_estimate,
        verdict,
    })
}

/// Cost of the word read as a finite continued fraction, via `expand` on the
/// rational it represents. Only meaningful when the last digit is at least 2,
/// since a final digit 1 is absorbed into its neighbour by the expansion.
pub fn rational_word_cost(t: &DigitTuple, c: &CostFunction) -> Result<Option<f64>> {
    if *t.digits.last().expect("nonempty") < 2 {
        return Ok(None);
    }
    let [[_, b], [_, d]] = BranchWord::ordinary(&t.digits)?.matrix();
    // h(0) = b/d
    let r = Rational::new(b as u64, d as u64)?;
    let e = expand(r, crate::cf_core::AlgorithmKind::Ordinary);
    if e.digits != t.digits {
        return Err(Error::Domain(format!("expansion {:?} differs from tuple {:?}", e.digits, t.digits)));
    }
    total_cost(&e, c).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub tau: f64,
    pub t: f64,
    pub theta: f64,
    pub beta: f64,
    pub eta: f64,
    pub p_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeWitness {
    pub word: Vec<u64>,
    /// `dist(phase, 2πZ)`.
    pub distance: f64,
    /// `distance · |τ|^η / p`.
    pub margin: f64,
    /// `⌊β log |τ|⌋`.
    pub n: i64,
    pub words_searched: usize,
}

fn dist_2pi(phase: f64) -> f64 {
    let r = phase.rem_euclid(2.0 * PI);
    r.min(2.0 * PI - r)
}

/// Finite probe of the diophantine-cost condition: over all primitive
/// periodic words on the digit set `h0` of period at most `p_max`, maximizes
/// `dist(τ n c(h) + t n log|h'_x| + pθ, 2πZ)·|τ|^η/p` with `n = ⌊β log |τ|⌋`.
pub fn dio_cost_probe(c: &CostFunction, h0: &[u64], params: &ProbeParams) -> Result<ProbeWitness> {
    let ProbeParams { tau, t, theta, beta, eta, p_max } = *params;
    if tau.abs() < 2.0 {
        return invalid("the probe needs |τ| ≥ 2");
    }
    if h0.is_empty() || h0.contains(&0) {
        return invalid("H_0 must be a nonempty set of positive digits");
    }
    if p_max == 0 {
        return invalid("p_max must be positive");
    }
    let n = (beta * tau.abs().ln()).floor() as i64;
    let mut best: Option<ProbeWitness> = None;
    let mut searched = 0usize;
    for p in 1..=p_max {
        let total = h0.len().pow(p as u32);
        for idx in 0..total {
            let mut k = idx;
            let digits: Vec<u64> = (0..p)
                .map(|_| {
                    let d = h0[k % h0.len()];
                    k /= h0.len();
                    d
                })
                .collect();
            let tuple = DigitTuple::new(digits)?;
            if !tuple.is_primitive() {
                continue;
            }
            searched += 1;
            let orbit = periodic_point(&tuple)?;
            let ch = orbit.cost(c)?;
            let phase = tau * n as f64 * ch + t * n as f64 * orbit.a + p as f64 * theta;
            let distance = dist_2pi(phase);
            let margin = distance * tau.abs().powf(eta) / p as f64;
            if best.as_ref().is_none_or(|b| margin > b.margin) {
                best = Some(ProbeWitness { word: tuple.digits, distance, margin, n, words_searched: 0 });
            }
        }
    }
    let mut w = best.expect("H_0 nonempty gives at least one primitive word");
    w.words_searched = searched;
    Ok(w)
}

/// All rotations of a tuple, for listing an orbit's members.
pub fn orbit_rotations(t: &DigitTuple) -> Vec<DigitTuple> {
    (0..t.period()).map(|r| DigitTuple { digits: t.rotated(r) }).collect()
}
