//! Exact enumeration of rational ensembles and the statistics built on it.
//!
//! Pairs `(p, q)` are visited by denominator. Total costs are accumulated as
//! integer keys: every digit cost is stored as `round(c(m)·scale)` with
//! `scale = 1` for integer-valued costs and `scale = 10¹²` otherwise, so sums
//! of keys are exact and independent of summation order. A histogram therefore
//! maps a key to an exact (possibly weighted) count, and merging histograms of
//! disjoint denominator blocks is exact.
//!
//! To avoid rerunning Euclid's algorithm on every pair, the enumerator keeps a
//! table of the key and coprimality of every state `a/b` with small `b`; a pair
//! then costs one or two division steps followed by a table lookup.

use crate::cf_core::{division_step, expand, AlgorithmKind, Expansion, Rational};
use crate::costs::CostFunction;
use crate::error::{invalid, Error, Result};
use crate::numerics::{gcd, unit_phase, ComplexSum, CompensatedSum};
use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// Key scale used for costs that are not integer-valued.
pub const REAL_SCALE: f64 = 1e12;

/// Which inputs `1 ≤ p ≤ q` an ensemble draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputDomain {
    /// Every `1 ≤ p ≤ q`.
    #[default]
    Full,
    /// Only inputs inside the map's domain (`p ≤ q/2` for the centered algorithm).
    Natural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: u64,
    pub coprime_only: bool,
    pub algorithm: AlgorithmKind,
    pub cost: CostFunction,
    #[serde(default)]
    pub domain: InputDomain,
}

impl EnsembleSpec {
    /// Coprime pairs, ordinary algorithm, full domain.
    pub fn new(n: u64, cost: CostFunction) -> Self {
        EnsembleSpec { n, coprime_only: true, algorithm: AlgorithmKind::Ordinary, cost, domain: InputDomain::Full }
    }

    pub fn with_n(&self, n: u64) -> Self {
        EnsembleSpec { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return invalid("N must be at least 1");
        }
        Ok(())
    }

    fn p_max(&self, q: u64) -> u64 {
        match (self.domain, self.algorithm) {
            (InputDomain::Natural, AlgorithmKind::Centered) => q / 2,
            _ => q,
        }
    }
}

/// Slow reference enumeration: every admissible pair with its expansion.
pub fn enumerate(spec: &EnsembleSpec) -> impl Iterator<Item = (u64, u64, Expansion)> + '_ {
    (1..=spec.n).flat_map(move |q| {
        (1..=spec.p_max(q)).filter_map(move |p| {
            if spec.coprime_only && gcd(p, q) != 1 {
                return None;
            }
            let r = Rational::new(p, q).expect("1 <= p <= q");
            Some((p, q, expand(r, spec.algorithm)))
        })
    })
}

/// Digit costs as integer keys.
#[derive(Debug, Clone)]
pub struct CostKeys {
    pub scale: f64,
    keys: Vec<i64>,
}

impl CostKeys {
    pub fn new(cost: &CostFunction, max_digit: u64) -> Result<Self> {
        let vals = (1..=max_digit).map(|m| cost.eval(m)).collect::<Result<Vec<_>>>()?;
        let integral = vals.iter().all(|v| v.fract() == 0.0 && v.abs() < 9.0e15);
        let scale = if integral { 1.0 } else { REAL_SCALE };
        let mut keys = Vec::with_capacity(vals.len() + 1);
        keys.push(0);
        for v in vals {
            let k = (v * scale).round();
            if k.abs() >= 9.0e18 {
                return Err(Error::Overflow(format!("cost value {v} too large for key scale {scale}")));
            }
            keys.push(k as i64);
        }
        Ok(CostKeys { scale, keys })
    }

    #[inline]
    pub fn key(&self, m: u64) -> i64 {
        self.keys[m as usize]
    }

    pub fn value(&self, key: i64) -> f64 {
        key as f64 / self.scale
    }

    fn max_abs(&self) -> i64 {
        self.keys.iter().map(|k| k.abs()).max().unwrap_or(0)
    }
}

/// Largest denominator kept in the state table.
const MEMO_LIMIT: u64 = 4096;

/// Enumeration engine for one ensemble specification.
pub struct Enumerator {
    pub spec: EnsembleSpec,
    pub keys: CostKeys,
    limit: u64,
    memo_key: Vec<i64>,
    memo_coprime: Vec<bool>,
}

#[inline]
fn memo_index(a: u64, b: u64) -> usize {
    (b * (b - 1) / 2 + (a - 1)) as usize
}

impl Enumerator {
    pub fn new(spec: &EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let keys = CostKeys::new(&spec.cost, spec.n + 2)?;
        let depth_bound = spec.n as i128 + 2;
        if keys.max_abs() as i128 * depth_bound >= i64::MAX as i128 {
            return Err(Error::Overflow("total cost keys may overflow 64 bits".into()));
        }
        let limit = spec.n.min(MEMO_LIMIT);
        let size = (limit * (limit + 1) / 2) as usize;
        let mut memo_key = vec![0i64; size];
        let mut memo_coprime = vec![false; size];
        for b in 1..=limit {
            for a in 1..=b {
                let (m, _, r) = division_step(spec.algorithm, a, b);
                let idx = memo_index(a, b);
                if r == 0 {
                    memo_key[idx] = keys.key(m);
                    memo_coprime[idx] = a == 1;
                } else {
                    let j = memo_index(r, a);
                    memo_key[idx] = keys.key(m) + memo_key[j];
                    memo_coprime[idx] = memo_coprime[j];
                }
            }
        }
        Ok(Enumerator { spec: spec.clone(), keys, limit, memo_key, memo_coprime })
    }

    /// Total-cost key and coprimality of `p/q`.
    #[inline]
    pub fn pair(&self, mut p: u64, mut q: u64) -> (i64, bool) {
        let mut acc = 0i64;
        loop {
            if q <= self.limit {
                let idx = memo_index(p, q);
                return (acc + self.memo_key[idx], self.memo_coprime[idx]);
            }
            let (m, _, r) = division_step(self.spec.algorithm, p, q);
            acc += self.keys.key(m);
            if r == 0 {
                return (acc, p == 1);
            }
            q = p;
            p = r;
        }
    }

    /// Calls `f(key)` for every admissible pair with denominator `q`.
    #[inline]
    pub fn for_each_in_q(&self, q: u64, mut f: impl FnMut(i64)) {
        let coprime_only = self.spec.coprime_only;
        for p in 1..=self.spec.p_max(q) {
            let (k, cop) = self.pair(p, q);
            if cop || !coprime_only {
                f(k);
            }
        }
    }

    /// Splits `1..=n` into contiguous blocks of roughly equal pair counts.
    fn blocks(&self, lo: u64, hi: u64) -> Vec<(u64, u64)> {
        if lo > hi {
            return Vec::new();
        }
        let pieces = (rayon::current_num_threads() * 4).max(1) as u64;
        let (l2, h2) = ((lo - 1) as f64 * (lo - 1) as f64, hi as f64 * hi as f64);
        let mut out = Vec::new();
        let mut start = lo;
        for i in 1..=pieces {
            let end = if i == pieces {
                hi
            } else {
                ((l2 + (h2 - l2) * i as f64 / pieces as f64).sqrt() as u64).clamp(start, hi)
            };
            if end >= start {
                out.push((start, end));
                start = end + 1;
            }
            if start > hi {
                break;
            }
        }
        out
    }

    /// Histogram over denominators `lo..=hi` with per-denominator weights.
    pub fn histogram_range(&self, lo: u64, hi: u64, weight: impl Fn(u64) -> u64 + Sync) -> CostHistogram {
        let dense = self.keys.scale == 1.0 && self.keys.max_abs() <= 1 << 16;
        let parts: Vec<Vec<(i64, u64)>> = self
            .blocks(lo, hi)
            .into_par_iter()
            .map(|(a, b)| {
                let mut acc = Accumulator::new(dense);
                for q in a..=b {
                    let w = weight(q);
                    if w == 0 {
                        continue;
                    }
                    self.for_each_in_q(q, |k| acc.add(k, w));
                }
                acc.into_sorted()
            })
            .collect();
        let entries = parts.into_iter().fold(Vec::new(), |a, b| merge_sorted(&a, &b));
        CostHistogram::from_entries(entries, self.keys.scale, hi, self.spec.cost.name.clone())
    }

    pub fn histogram(&self, weighting: Weighting) -> CostHistogram {
        let n = self.spec.n;
        match weighting {
            Weighting::Plain => self.histogram_range(1, n, |_| 1),
            Weighting::Cesaro => self.histogram_range(1, n, |q| n - q + 1),
            Weighting::Window { start } => self.histogram_range(1, n, move |q| n - q.max(start) + 1),
        }
    }

    /// Count, key sum and squared-key sum for each denominator `1..=n`.
    pub fn per_q_stats(&self) -> Vec<QStats> {
        let blocks = self.blocks(1, self.spec.n);
        let parts: Vec<Vec<QStats>> = blocks
            .into_par_iter()
            .map(|(a, b)| {
                (a..=b)
                    .map(|q| {
                        let mut st = QStats::default();
                        self.for_each_in_q(q, |k| {
                            st.count += 1;
                            st.sum += k as i128;
                            st.sum_sq += (k as i128) * (k as i128);
                        });
                        st
                    })
                    .collect()
            })
            .collect();
        parts.concat()
    }

    /// `φ_τ(q) = Σ_p e^{iτC(p,q)}` for each denominator `1..=n`.
    pub fn per_q_phases(&self, tau: f64) -> Vec<Complex64> {
        let scale = self.keys.scale;
        let blocks = self.blocks(1, self.spec.n);
        let parts: Vec<Vec<Complex64>> = blocks
            .into_par_iter()
            .map(|(a, b)| {
                (a..=b)
                    .map(|q| {
                        let mut s = ComplexSum::default();
                        if tau == 0.0 {
                            let mut c = 0u64;
                            self.for_each_in_q(q, |_| c += 1);
                            return Complex64::new(c as f64, 0.0);
                        }
                        self.for_each_in_q(q, |k| s.add(unit_phase(tau * (k as f64 / scale))));
                        s.value()
                    })
                    .collect()
            })
            .collect();
        parts.concat()
    }
}

enum Accumulator {
    Dense { base: i64, counts: Vec<u64> },
    Sparse(FxHashMap<i64, u64>),
}

impl Accumulator {
    fn new(dense: bool) -> Self {
        if dense {
            Accumulator::Dense { base: 0, counts: Vec::new() }
        } else {
            Accumulator::Sparse(FxHashMap::default())
        }
    }

    #[inline]
    fn add(&mut self, key: i64, w: u64) {
        match self {
            Accumulator::Dense { base, counts } => {
                if counts.is_empty() {
                    *base = key;
                }
                if key < *base {
                    let shift = (*base - key) as usize;
                    let mut grown = vec![0u64; shift];
                    grown.extend_from_slice(counts);
                    *counts = grown;
                    *base = key;
                }
                let idx = (key - *base) as usize;
                if idx >= counts.len() {
                    counts.resize(idx + 1, 0);
                }
                counts[idx] += w;
            }
            Accumulator::Sparse(map) => *map.entry(key).or_insert(0) += w,
        }
    }

    fn into_sorted(self) -> Vec<(i64, u64)> {
        match self {
            Accumulator::Dense { base, counts } => counts
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c > 0)
                .map(|(i, c)| (base + i as i64, c))
                .collect(),
            Accumulator::Sparse(map) => {
                let mut v: Vec<(i64, u64)> = map.into_iter().collect();
                v.sort_unstable();
                v
            }
        }
    }
}

fn merge_sorted(a: &[(i64, u64)], b: &[(i64, u64)]) -> Vec<(i64, u64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QStats {
    pub count: u64,
    pub sum: i128,
    pub sum_sq: i128,
}

/// Per-denominator weights defining the plain, Cesàro and smoothed ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Weight 1: the uniform measure on `Ω_N`.
    Plain,
    /// Weight `N − q + 1`: the pairs counted by `Ψ(N) = Σ_{M≤N} Φ(M)`.
    Cesaro,
    /// Weight `N − max(q, start) + 1`: the union of `Ω_Q` over `start ≤ Q ≤ N`.
    Window { start: u64 },
}

/// Exact (weighted) distribution of total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostHistogram {
    pub scale: f64,
    /// `(key, weight)` sorted by key; the cost value is `key / scale`.
    pub entries: Vec<(i64, u64)>,
    pub total: u64,
    pub n: u64,
    pub cost_name: String,
}

impl CostHistogram {
    pub fn from_entries(entries: Vec<(i64, u64)>, scale: f64, n: u64, cost_name: String) -> Self {
        let total = entries.iter().map(|e| e.1).sum();
        CostHistogram { scale, entries, total, n, cost_name }
    }

    pub fn merge(&self, other: &CostHistogram) -> CostHistogram {
        assert_eq!(self.scale, other.scale, "histograms with different key scales");
        let entries = merge_sorted(&self.entries, &other.entries);
        CostHistogram::from_entries(entries, self.scale, self.n.max(other.n), self.cost_name.clone())
    }

    /// Exact difference `self − other`; `None` if some count would go negative.
    pub fn checked_sub(&self, other: &CostHistogram) -> Option<CostHistogram> {
        let mut map: std::collections::BTreeMap<i64, i128> = self.entries.iter().map(|&(k, c)| (k, c as i128)).collect();
        for &(k, c) in &other.entries {
            *map.entry(k).or_insert(0) -= c as i128;
        }
        if map.values().any(|&c| c < 0) {
            return None;
        }
        let entries = map.into_iter().filter(|&(_, c)| c > 0).map(|(k, c)| (k, c as u64)).collect();
        Some(CostHistogram::from_entries(entries, self.scale, self.n, self.cost_name.clone()))
    }

    pub fn value(&self, key: i64) -> f64 {
        key as f64 / self.scale
    }

    /// `(value, weight)` pairs in increasing value order.
    pub fn values(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.entries.iter().map(|&(k, c)| (self.value(k), c))
    }

    /// Normalized characteristic function `Σ w e^{iτC} / Σ w`.
    pub fn char_fn(&self, tau: f64) -> Complex64 {
        if tau == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        self.char_sum(tau) / self.total as f64
    }

    /// Unnormalized `Σ w e^{iτC}`.
    pub fn char_sum(&self, tau: f64) -> Complex64 {
        if tau == 0.0 {
            return Complex64::new(self.total as f64, 0.0);
        }
        let mut s = ComplexSum::default();
        for &(k, c) in &self.entries {
            s.add(unit_phase(tau * self.value(k)) * c as f64);
        }
        s.value()
    }

    pub fn char_fn_many(&self, taus: &[f64]) -> Vec<Complex64> {
        taus.par_iter().map(|&t| self.char_fn(t)).collect()
    }

    /// Weighted mean of `f(C)`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = CompensatedSum::default();
        for (v, c) in self.values() {
            let fv = f(v);
            if fv != 0.0 {
                s.add(fv * c as f64);
            }
        }
        s.value() / self.total as f64
    }

    /// Weighted mean and variance of `C`.
    pub fn moments(&self) -> (f64, f64) {
        let s1: i128 = self.entries.iter().map(|&(k, c)| k as i128 * c as i128).sum();
        let mean_key = s1 as f64 / self.total as f64;
        let mut var = CompensatedSum::default();
        for &(k, c) in &self.entries {
            let d = k as f64 - mean_key;
            var.add(d * d * c as f64);
        }
        let var_key = var.value() / self.total as f64;
        (mean_key / self.scale, var_key / (self.scale * self.scale))
    }

    /// Weight of `{C ≤ t}` divided by the total.
    pub fn cdf(&self, t: f64) -> f64 {
        let w: u64 = self.values().take_while(|(v, _)| *v <= t).map(|(_, c)| c).sum();
        w as f64 / self.total as f64
    }
}

/// Exact number of admissible pairs with denominator at most `n`.
pub fn count(n: u64, coprime_only: bool) -> Result<u64> {
    Ok(counts_per_q(n, coprime_only)?.iter().sum())
}

/// Number of admissible pairs for each denominator `1..=n`.
pub fn counts_per_q(n: u64, coprime_only: bool) -> Result<Vec<u64>> {
    let spec = EnsembleSpec { coprime_only, ..EnsembleSpec::new(n, CostFunction::one()) };
    Ok(Enumerator::new(&spec)?.per_q_stats().iter().map(|s| s.count).collect())
}

pub fn histogram(spec: &EnsembleSpec) -> Result<CostHistogram> {
    Ok(Enumerator::new(spec)?.histogram(Weighting::Plain))
}

pub fn moments(spec: &EnsembleSpec) -> Result<(f64, f64)> {
    Ok(histogram(spec)?.moments())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
}

/// `(N, E_N, V_N)` for every `N` in `ns`, from a single enumeration pass.
pub fn moments_table(spec: &EnsembleSpec, ns: &[u64]) -> Result<Vec<MomentRow>> {
    let n_max = *ns.iter().max().ok_or_else(|| Error::InvalidInput("empty N list".into()))?;
    let en = Enumerator::new(&spec.with_n(n_max))?;
    let stats = en.per_q_stats();
    let scale = en.keys.scale;
    let mut rows = Vec::new();
    for &n in ns {
        if n < 1 {
            return invalid("N must be at least 1");
        }
        let (mut cnt, mut s1, mut s2) = (0u64, 0i128, 0i128);
        for st in &stats[..n as usize] {
            cnt += st.count;
            s1 += st.sum;
            s2 += st.sum_sq;
        }
        let c = cnt as f64;
        let mean = s1 as f64 / c;
        // E[k²] − E[k]² evaluated as (s2·c − s1²)/c² with the subtraction done exactly where it fits
        let var = match s2.checked_mul(cnt as i128).and_then(|a| s1.checked_mul(s1).map(|b| a - b)) {
            Some(num) => num as f64 / (c * c),
            None => s2 as f64 / c - mean * mean,
        };
        rows.push(MomentRow { n, mean: mean / scale, variance: var.max(0.0) / (scale * scale) });
    }
    Ok(rows)
}

pub fn char_fn(spec: &EnsembleSpec, tau: f64) -> Result<Complex64> {
    Ok(histogram(spec)?.char_fn(tau))
}

/// `Ψ_{iτ}(N) = Σ_{M≤N} Φ_{iτ}(M)`.
pub fn cesaro(spec: &EnsembleSpec, tau: f64) -> Result<Complex64> {
    Ok(*cesaro_profile(spec, tau)?.psi.last().expect("N >= 1"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CesaroProfile {
    /// `Φ_{iτ}(M)` for `M = 1..=N` (index `M − 1`).
    pub phi: Vec<Complex64>,
    /// `Ψ_{iτ}(M)` for `M = 1..=N`.
    pub psi: Vec<Complex64>,
}

/// `Φ_{iτ}(M)` and `Ψ_{iτ}(M)` for all `M ≤ N`, by incremental accumulation.
pub fn cesaro_profile(spec: &EnsembleSpec, tau: f64) -> Result<CesaroProfile> {
    let phases = Enumerator::new(spec)?.per_q_phases(tau);
    let mut phi = Vec::with_capacity(phases.len());
    let mut psi = Vec::with_capacity(phases.len());
    let (mut a, mut b) = (ComplexSum::default(), ComplexSum::default());
    for z in phases {
        a.add(z);
        phi.push(a.value());
        b.add(a.value());
        psi.push(b.value());
    }
    Ok(CesaroProfile { phi, psi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SmoothingFamily {
    /// `ξ(N) = N^{−γ₀}`.
    Power { gamma0: f64 },
    /// `ξ(N) = N^{−|τ|^{−α′}}`.
    TauPower { alpha_prime: f64, tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpec {
    pub family: SmoothingFamily,
    /// Stand-in for the existential constant in the validity condition
    /// `ξ(N)^{−1} ≤ M̂₀·N/log N`.
    pub m0_hat: f64,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec { family: SmoothingFamily::Power { gamma0: 0.25 }, m0_hat: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub valid: bool,
    pub inv_xi: f64,
    pub limit: f64,
}

impl SmoothingSpec {
    pub fn power(gamma0: f64) -> Self {
        SmoothingSpec { family: SmoothingFamily::Power { gamma0 }, ..Default::default() }
    }

    pub fn xi(&self, n: u64) -> f64 {
        let ln = (n as f64).ln();
        match self.family {
            SmoothingFamily::Power { gamma0 } => (-gamma0 * ln).exp(),
            SmoothingFamily::TauPower { alpha_prime, tau } => (-(tau.abs().powf(-alpha_prime)) * ln).exp(),
        }
    }

    /// `N − ⌊N·ξ(N)⌋`, the smallest `Q` in the smoothing window.
    pub fn window_start(&self, n: u64) -> u64 {
        let w = (n as f64 * self.xi(n)).floor() as u64;
        n - w.min(n - 1)
    }

    pub fn validity(&self, n: u64) -> Validity {
        let xi = self.xi(n);
        let inv_xi = 1.0 / xi;
        let ln = (n as f64).ln();
        let limit = if ln > 0.0 { self.m0_hat * n as f64 / ln } else { f64::INFINITY };
        let ok_range = xi > 0.0 && xi <= 1.0 && xi.is_finite();
        Validity { valid: ok_range && inv_xi <= limit, inv_xi, limit }
    }

    fn check(&self, n: u64) -> Result<()> {
        let v = self.validity(n);
        if !v.valid {
            return Err(Error::SmoothingTooFine { inv_xi: v.inv_xi, limit: v.limit });
        }
        Ok(())
    }
}

/// Histogram of the smoothed ensemble `Ω̄_N(ξ)`.
pub fn smoothed_histogram(spec: &EnsembleSpec, smoothing: &SmoothingSpec) -> Result<CostHistogram> {
    smoothing.check(spec.n)?;
    let start = smoothing.window_start(spec.n);
    Ok(Enumerator::new(spec)?.histogram(Weighting::Window { start }))
}

/// The same histogram assembled as `⋃_{N₀ ≤ Q ≤ N} Ω_Q`, one `Q` at a time.
pub fn smoothed_histogram_direct(spec: &EnsembleSpec, smoothing: &SmoothingSpec) -> Result<CostHistogram> {
    smoothing.check(spec.n)?;
    let start = smoothing.window_start(spec.n);
    let en = Enumerator::new(spec)?;
    let mut acc: FxHashMap<i64, u64> = FxHashMap::default();
    for big_q in start..=spec.n {
        for q in 1..=big_q {
            en.for_each_in_q(q, |k| *acc.entry(k).or_insert(0) += 1);
        }
    }
    let mut entries: Vec<(i64, u64)> = acc.into_iter().collect();
    entries.sort_unstable();
    Ok(CostHistogram::from_entries(entries, en.keys.scale, spec.n, spec.cost.name.clone()))
}

/// The same histogram as the Cesàro difference `Ψ(N) − Ψ(N₀ − 1)`.
pub fn smoothed_histogram_cesaro(spec: &EnsembleSpec, smoothing: &SmoothingSpec) -> Result<CostHistogram> {
    smoothing.check(spec.n)?;
    let start = smoothing.window_start(spec.n);
    let upper = Enumerator::new(spec)?.histogram(Weighting::Cesaro);
    if start == 1 {
        return Ok(upper);
    }
    let lower = Enumerator::new(&spec.with_n(start - 1))?.histogram(Weighting::Cesaro);
    upper
        .checked_sub(&lower)
        .ok_or_else(|| Error::Overflow("Cesàro difference produced a negative count".into()))
}

/// `Ē_N(ξ, e^{iτC}) = Φ̄_{iτ}(N)/Φ̄_0(N)`.
pub fn smoothed_char_fn(spec: &EnsembleSpec, smoothing: &SmoothingSpec, tau: f64) -> Result<Complex64> {
    Ok(smoothed_histogram(spec, smoothing)?.char_fn(tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyFit {
    pub xi: f64,
    pub max_discrepancy: f64,
    /// `max_discrepancy / ξ(N)`.
    pub fitted_constant: f64,
}

/// Largest gap between smoothed and plain probabilities of `{C ≤ t}`.
pub fn discrepancy_fit(spec: &EnsembleSpec, smoothing: &SmoothingSpec, thresholds: &[f64]) -> Result<DiscrepancyFit> {
    let smooth = smoothed_histogram(spec, smoothing)?;
    let plain = histogram(spec)?;
    let max_discrepancy = thresholds.iter().map(|&t| (smooth.cdf(t) - plain.cdf(t)).abs()).fold(0.0, f64::max);
    let xi = smoothing.xi(spec.n);
    Ok(DiscrepancyFit { xi, max_discrepancy, fitted_constant: max_discrepancy / xi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletResult {
    /// `Σ_{q≤Q} q^{−2s} φ_τ(q)`.
    pub value: Complex64,
    /// `Q^{2−2σ}/(2σ−2) ≥ Σ_{q>Q} |q^{−2s} φ_τ(q)|`.
    pub tail_bound: f64,
    /// Abel-summation estimate of the omitted tail from the fitted growth of `Φ_{iτ}`.
    pub tail_estimate: Complex64,
    pub q_max: u64,
}

impl DirichletResult {
    pub fn corrected(&self) -> Complex64 {
        self.value + self.tail_estimate
    }
}

/// Truncated `S(2s, iτ) = Σ_{(p,q)∈Ω, q≤Q} q^{−2s} e^{iτC(p,q)}`.
pub fn dirichlet_series(s: Complex64, cost: &CostFunction, tau: f64, q_max: u64) -> Result<DirichletResult> {
    if s.re <= 1.0 {
        return invalid("the Dirichlet series needs Re s > 1");
    }
    if q_max < 100 {
        return invalid("Q_max must be at least 100");
    }
    let spec = EnsembleSpec::new(q_max, cost.clone());
    let phases = Enumerator::new(&spec)?.per_q_phases(tau);
    let mut acc = ComplexSum::default();
    let mut phi = ComplexSum::default();
    let mut phi_half = Complex64::new(0.0, 0.0);
    for (i, z) in phases.iter().enumerate() {
        let q = (i + 1) as f64;
        acc.add(*z * (-2.0 * s * q.ln()).exp());
        phi.add(*z);
        if (i + 1) as u64 == q_max / 2 {
            phi_half = phi.value();
        }
    }
    let sigma = s.re;
    let qf = q_max as f64;
    let tail_bound = qf.powf(2.0 - 2.0 * sigma) / (2.0 * sigma - 2.0);
    let phi_q = phi.value();
    // Φ(t) ≈ Φ(Q)(t/Q)^κ beyond Q gives ∫_Q^∞ t^{−2s} dΦ = Φ(Q)·κ/(2s − κ)·Q^{−2s}
    let kappa = (phi_q / phi_half).ln() / (qf / (q_max / 2) as f64).ln();
    let tail_estimate = phi_q * kappa / (2.0 * s - kappa) * (-2.0 * s * qf.ln()).exp();
    Ok(DirichletResult { value: acc.value(), tail_bound, tail_estimate, q_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::total_cost;

    fn totients(n: usize) -> Vec<u64> {
        let mut phi: Vec<u64> = (0..=n as u64).collect();
        for i in 2..=n {
            if phi[i] == i as u64 {
                for j in (i..=n).step_by(i) {
                    phi[j] -= phi[j] / i as u64;
                }
            }
        }
        phi
    }

    #[test]
    fn small_counts() {
        assert_eq!(count(10, true).unwrap(), 32);
        assert_eq!(count(1, true).unwrap(), 1);
        assert_eq!(count(10, false).unwrap(), 55);
        let spec = EnsembleSpec::new(10, CostFunction::one());
        assert_eq!(enumerate(&spec).count(), 32);
        assert_eq!(enumerate(&EnsembleSpec { coprime_only: false, ..spec.clone() }).count(), 55);
    }

    #[test]
    fn counts_match_sieve() {
        let phi = totients(3000);
        let per_q = counts_per_q(3000, true).unwrap();
        assert_eq!(&per_q[..], &phi[1..]);
    }

    #[test]
    fn histogram_matches_slow_path_for_every_algorithm_and_cost() {
        let costs = [CostFunction::one(), CostFunction::log(), CostFunction::bitlength(), CostFunction::identity()];
        for alg in AlgorithmKind::ALL {
            for domain in [InputDomain::Full, InputDomain::Natural] {
                for cost in &costs {
                    for coprime_only in [true, false] {
                        let spec = EnsembleSpec { n: 90, coprime_only, algorithm: alg, cost: cost.clone(), domain };
                        let en = Enumerator::new(&spec).unwrap();
                        let fast = en.histogram(Weighting::Plain);
                        let mut slow: std::collections::BTreeMap<i64, u64> = Default::default();
                        for (_, _, e) in enumerate(&spec) {
                            let key: i64 = e.digits.iter().map(|&m| en.keys.key(m)).sum();
                            *slow.entry(key).or_insert(0) += 1;
                            let direct = total_cost(&e, cost).unwrap();
                            assert!((en.keys.value(key) - direct).abs() < 1e-9);
                        }
                        let slow: Vec<(i64, u64)> = slow.into_iter().collect();
                        assert_eq!(fast.entries, slow, "{alg} {domain:?} {} {coprime_only}", cost.name);
                    }
                }
            }
        }
    }

    #[test]
    fn moments_n1_and_direct() {
        let (e, v) = moments(&EnsembleSpec::new(1, CostFunction::one())).unwrap();
        assert_eq!((e, v), (1.0, 0.0));
        let spec = EnsembleSpec::new(10, CostFunction::one());
        let depths: Vec<f64> = enumerate(&spec).map(|(_, _, e)| e.depth() as f64).collect();
        let m = depths.iter().sum::<f64>() / depths.len() as f64;
        let var = depths.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / depths.len() as f64;
        let (e, v) = moments(&spec).unwrap();
        assert!((e - m).abs() < 1e-14 && (v - var).abs() < 1e-14);
        let rows = moments_table(&spec, &[1, 5, 10]).unwrap();
        assert_eq!(rows[0].mean, 1.0);
        assert!((rows[2].mean - e).abs() < 1e-14 && (rows[2].variance - v).abs() < 1e-13);
    }

    #[test]
    fn char_fn_basic_properties() {
        let spec = EnsembleSpec::new(100, CostFunction::one());
        assert_eq!(char_fn(&spec, 0.0).unwrap(), Complex64::new(1.0, 0.0));
        let h = histogram(&spec).unwrap();
        let direct: Complex64 = enumerate(&spec).map(|(_, _, e)| Complex64::new(0.0, 0.3 * e.depth() as f64).exp()).sum::<Complex64>()
            / h.total as f64;
        assert!((h.char_fn(0.3) - direct).norm() < 1e-14);
        for t in [0.1, 1.7, 5.0] {
            assert!((h.char_fn(-t) - h.char_fn(t).conj()).norm() < 1e-15);
            assert!(h.char_fn(t).norm() <= 1.0);
        }
    }

    #[test]
    fn cesaro_checks() {
        let spec = EnsembleSpec::new(10, CostFunction::log());
        let phi = totients(10);
        let psi0 = cesaro(&spec.with_n(10), 0.0).unwrap();
        let expected: u64 = (1..=10).map(|m| phi[1..=m].iter().sum::<u64>()).sum();
        assert_eq!(psi0, Complex64::new(expected as f64, 0.0));
        let prof = cesaro_profile(&spec.with_n(60), 0.7).unwrap();
        for m in 1..60 {
            assert!((prof.psi[m] - prof.psi[m - 1] - prof.phi[m]).norm() < 1e-10);
        }
        let psi_zero = cesaro_profile(&spec.with_n(60), 0.0).unwrap();
        assert!(prof.psi[59].norm() <= psi_zero.psi[59].re);
    }

    #[test]
    fn smoothed_identity_is_exact() {
        let spec = EnsembleSpec::new(200, CostFunction::log());
        let sm = SmoothingSpec::power(0.25);
        let a = smoothed_histogram_direct(&spec, &sm).unwrap();
        let b = smoothed_histogram_cesaro(&spec, &sm).unwrap();
        let c = smoothed_histogram(&spec, &sm).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.entries, c.entries);
        assert_eq!(c.char_fn(0.0), Complex64::new(1.0, 0.0));
        for t in [0.2, 1.0, 3.0] {
            assert_eq!(a.char_fn(t), b.char_fn(t));
        }
    }

    #[test]
    fn smoothing_too_fine_is_rejected() {
        let spec = EnsembleSpec::new(1000, CostFunction::one());
        let sm = SmoothingSpec::power(0.99);
        assert!(matches!(smoothed_char_fn(&spec, &sm, 0.1), Err(Error::SmoothingTooFine { .. })));
    }

    #[test]
    fn dirichlet_at_zero_matches_sieve() {
        let phi = totients(2000);
        let r = dirichlet_series(Complex64::new(1.5, 0.0), &CostFunction::log(), 0.0, 2000).unwrap();
        let direct: f64 = (1..=2000).map(|q| phi[q] as f64 / (q as f64).powi(3)).sum();
        assert!((r.value.re - direct).abs() < 1e-12);
        assert!(dirichlet_series(Complex64::new(1.0, 0.0), &CostFunction::log(), 0.0, 2000).is_err());
        // ζ(2)/ζ(3) is the full sum; the bound covers the gap
        let exact = std::f64::consts::PI.powi(2) / 6.0 / 1.202_056_903_159_594_2;
        assert!((exact - r.value.re).abs() <= r.tail_bound);
        assert!((exact - r.corrected().re).abs() < 0.1 * (exact - r.value.re).abs());
    }
}
