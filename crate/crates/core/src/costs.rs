//! Digit costs, total costs of expansions and words, lattice detection and a
//! moment/growth advisory.

use crate::cf_core::{BranchWord, Expansion};
use crate::error::{invalid, Error, Result};
use crate::numerics::{gcd, CompensatedSum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailRule {
    Constant { value: f64 },
    /// `offset + scale·log m`.
    Log { offset: f64, scale: f64 },
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CostKind {
    Constant(f64),
    Log,
    /// `⌊log₂ m⌋ + 1`.
    BitLength,
    /// 1 when `m = a`, else 0.
    Indicator(u64),
    /// `c(m) = m`.
    Identity,
    /// `values[m − 1]` for `m ≤ values.len()`, tail rule beyond.
    Table { values: Vec<f64>, tail: TailRule },
}

/// Shape of `c(m)` for large `m`, used by the operator tail correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// `c(m) = a0 + b·log m`.
    LogAffine { a0: f64, b: f64 },
    /// `c(m) = ⌊log₂ m⌋ + 1`.
    DyadicSteps,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub name: String,
    pub kind: CostKind,
}

/// Digits sampled when rejecting identically-zero costs.
const ZERO_CHECK_PREFIX: u64 = 64;

impl CostFunction {
    pub fn new(name: impl Into<String>, kind: CostKind) -> Result<Self> {
        let c = CostFunction { name: name.into(), kind };
        if let CostKind::Table { values, tail } = &c.kind {
            if values.iter().any(|v| !v.is_finite()) {
                return invalid("cost table entries must be finite");
            }
            let tail_ok = match tail {
                TailRule::Constant { value } => value.is_finite(),
                TailRule::Log { offset, scale } => offset.is_finite() && scale.is_finite(),
                TailRule::Error => true,
            };
            if !tail_ok {
                return invalid("cost tail parameters must be finite");
            }
        }
        if let CostKind::Constant(v) = c.kind {
            if !v.is_finite() {
                return invalid("constant cost must be finite");
            }
        }
        let nonzero = (1..=ZERO_CHECK_PREFIX).any(|m| matches!(c.eval(m), Ok(v) if v != 0.0));
        if !nonzero {
            return invalid(format!("cost `{}` vanishes on 1..={ZERO_CHECK_PREFIX}", c.name));
        }
        Ok(c)
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::new(format!("constant({v})"), CostKind::Constant(v))
    }

    pub fn one() -> Self {
        Self::constant(1.0).expect("c = 1 is valid")
    }

    pub fn log() -> Self {
        Self::new("log", CostKind::Log).expect("log is valid")
    }

    pub fn bitlength() -> Self {
        Self::new("bitlength", CostKind::BitLength).expect("bitlength is valid")
    }

    pub fn identity() -> Self {
        Self::new("identity", CostKind::Identity).expect("identity is valid")
    }

    pub fn indicator(a: u64) -> Result<Self> {
        if a == 0 {
            return invalid("indicator digit must be positive");
        }
        Self::new(format!("indicator({a})"), CostKind::Indicator(a))
    }

    pub fn table(name: impl Into<String>, values: Vec<f64>, tail: TailRule) -> Result<Self> {
        Self::new(name, CostKind::Table { values, tail })
    }

    /// `c(m)` for `m ≥ 1`.
    pub fn eval(&self, m: u64) -> Result<f64> {
        if m == 0 {
            return invalid("digits are positive");
        }
        Ok(match &self.kind {
            CostKind::Constant(v) => *v,
            CostKind::Log => (m as f64).ln(),
            CostKind::BitLength => (64 - m.leading_zeros()) as f64,
            CostKind::Indicator(a) => f64::from(u8::from(m == *a)),
            CostKind::Identity => m as f64,
            CostKind::Table { values, tail } => {
                if let Some(v) = values.get(m as usize - 1) {
                    *v
                } else {
                    match tail {
                        TailRule::Constant { value } => *value,
                        TailRule::Log { offset, scale } => offset + scale * (m as f64).ln(),
                        TailRule::Error => return Err(Error::TableOverflow(m)),
                    }
                }
            }
        })
    }

    /// Largest digit whose cost is given by something other than the tail model.
    pub fn explicit_range(&self) -> u64 {
        match &self.kind {
            CostKind::Indicator(a) => *a,
            CostKind::Table { values, .. } => values.len() as u64,
            _ => 0,
        }
    }

    pub fn tail_model(&self) -> TailModel {
        match &self.kind {
            CostKind::Constant(v) => TailModel::LogAffine { a0: *v, b: 0.0 },
            CostKind::Log => TailModel::LogAffine { a0: 0.0, b: 1.0 },
            CostKind::BitLength => TailModel::DyadicSteps,
            CostKind::Indicator(_) => TailModel::LogAffine { a0: 0.0, b: 0.0 },
            CostKind::Identity => TailModel::Unsupported,
            CostKind::Table { tail, .. } => match tail {
                TailRule::Constant { value } => TailModel::LogAffine { a0: *value, b: 0.0 },
                TailRule::Log { offset, scale } => TailModel::LogAffine { a0: *offset, b: *scale },
                TailRule::Error => TailModel::Unsupported,
            },
        }
    }

    /// Parse a short command-line spec (`one`, `constant:V`, `log`, `bitlength`,
    /// `indicator:A`, `identity`) or a path to a JSON cost file.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::InvalidInput(format!("cost `{head}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad cost parameter: {e}")))
        };
        match head {
            "one" | "depth" => Ok(Self::one()),
            "constant" => Self::constant(num(arg)?),
            "log" => Ok(Self::log()),
            "bitlength" => Ok(Self::bitlength()),
            "identity" => Ok(Self::identity()),
            "indicator" => {
                let a = num(arg)?;
                if a.fract() != 0.0 || a < 1.0 {
                    return invalid("indicator digit must be a positive integer");
                }
                Self::indicator(a as u64)
            }
            path => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidInput(format!("unknown cost `{path}` ({e})")))?;
                Self::from_json(&text)
            }
        }
    }

    /// Load `{name, kind, params, table?, tail?}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: CostConfig = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("cost JSON: {e}")))?;
        raw.build()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostConfig {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub table: Option<Vec<f64>>,
    #[serde(default)]
    pub tail: Option<TailRule>,
}

impl CostConfig {
    pub fn build(&self) -> Result<CostFunction> {
        let param = |key: &str| -> Result<f64> {
            self.params
                .get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::InvalidInput(format!("cost kind `{}` needs numeric param `{key}`", self.kind)))
        };
        let kind = match self.kind.as_str() {
            "constant" => CostKind::Constant(param("value")?),
            "log" => CostKind::Log,
            "bitlength" => CostKind::BitLength,
            "identity" => CostKind::Identity,
            "indicator" => {
                let a = param("a")?;
                if a.fract() != 0.0 || a < 1.0 {
                    return invalid("indicator digit must be a positive integer");
                }
                CostKind::Indicator(a as u64)
            }
            "table" => {
                let values = self.table.clone().ok_or_else(|| Error::InvalidInput("table cost needs `table`".into()))?;
                let tail = self.tail.clone().ok_or_else(|| Error::InvalidInput("table cost needs an explicit `tail`".into()))?;
                CostKind::Table { values, tail }
            }
            other => return invalid(format!("unknown cost kind `{other}`")),
        };
        CostFunction::new(self.name.clone(), kind)
    }
}

pub fn total_cost(e: &Expansion, c: &CostFunction) -> Result<f64> {
    let mut s = 0.0;
    for &m in &e.digits {
        s += c.eval(m)?;
    }
    Ok(s)
}

pub fn word_cost(w: &BranchWord, c: &CostFunction) -> Result<f64> {
    let mut s = 0.0;
    for b in &w.branches {
        s += c.eval(b.m)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatticeKind {
    Lattice { span: f64, shift: f64 },
    NonlatticeHeuristic,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeClass {
    pub kind: LatticeKind,
    pub window: u64,
}

impl LatticeClass {
    pub fn span(&self) -> Option<f64> {
        match self.kind {
            LatticeKind::Lattice { span, .. } => Some(span),
            _ => None,
        }
    }
}

const MAX_DENOMINATOR: u64 = 10_000;
const RELATION_TOL: f64 = 1e-12;
const MAX_LCM: u64 = 1_000_000_000_000;

/// Best rational approximation `a/b` of `x` with `b ≤ max_den`, accepted when
/// within `tol` (relative to `max(1, |x|)`).
fn rational_relation(x: f64, max_den: u64, tol: f64) -> Option<(i64, u64)> {
    let target_tol = tol * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > max_den as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if (x - h1 as f64 / k1 as f64).abs() <= target_tol {
            return Some((h1 as i64, k1 as u64));
        }
        let frac = y - a;
        if frac.abs() < 1e-300 {
            break;
        }
        y = 1.0 / frac;
    }
    None
}

/// Finite-window lattice classification of `c` on digits `1..=M`.
pub fn lattice_detect(c: &CostFunction, window: u64) -> Result<LatticeClass> {
    if window < 2 {
        return invalid("lattice window must be at least 2");
    }
    let vals = (1..=window).map(|m| c.eval(m)).collect::<Result<Vec<_>>>()?;
    let base = vals[0];
    let diffs: Vec<f64> = vals.iter().map(|v| v - base).collect();
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let zero_tol = RELATION_TOL * scale.max(1.0);
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| d.abs() > zero_tol).collect();
    if nonzero.is_empty() {
        return Ok(LatticeClass { kind: LatticeKind::Lattice { span: base.abs(), shift: 0.0 }, window });
    }
    let d_min = nonzero.iter().fold(f64::INFINITY, |a, d| a.min(d.abs()));
    let mut rel = Vec::with_capacity(nonzero.len());
    let mut lcm: u64 = 1;
    for d in &nonzero {
        match rational_relation(d / d_min, MAX_DENOMINATOR, RELATION_TOL) {
            Some((a, b)) => {
                lcm = lcm / gcd(lcm, b) * b;
                if lcm > MAX_LCM {
                    return Ok(LatticeClass { kind: LatticeKind::NonlatticeHeuristic, window });
                }
                rel.push((a, b));
            }
            None => return Ok(LatticeClass { kind: LatticeKind::NonlatticeHeuristic, window }),
        }
    }
    let mut g: u64 = 0;
    for (a, b) in &rel {
        let k = (*a as i128 * (lcm / b) as i128).unsigned_abs() as u64;
        g = gcd(g, k);
    }
    let span = d_min * g as f64 / lcm as f64;
    let mut shift = base.rem_euclid(span);
    if (span - shift).abs() <= zero_tol || shift.abs() <= zero_tol {
        shift = 0.0;
    }
    Ok(LatticeClass { kind: LatticeKind::Lattice { span, shift }, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    /// `(checkpoint, partial sum)` pairs at decades and at `M`.
    pub partial_sums: Vec<(u64, f64)>,
    /// Local decay exponent of the summand estimated from the last decades.
    pub exponent: Option<f64>,
    pub trend: Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    pub nu: f64,
    /// `Σ |c(m)|^k m^{−2+ν}`.
    pub moment: SeriesReport,
    /// `Σ e^{ν c(m)} m^{−2+ν}`.
    pub growth: SeriesReport,
}

fn series_report(checkpoints: &[u64], mut term: impl FnMut(u64) -> f64) -> SeriesReport {
    let mut sum = CompensatedSum::default();
    let mut partial = Vec::new();
    let mut next = 0;
    let last = *checkpoints.last().unwrap();
    for m in 1..=last {
        sum.add(term(m));
        if m == checkpoints[next] {
            partial.push((m, sum.value()));
            next += 1;
        }
    }
    if partial.iter().any(|(_, s)| !s.is_finite()) {
        return SeriesReport { partial_sums: partial, exponent: None, trend: Trend::Diverging };
    }
    let n = partial.len();
    let (m1, s1) = partial[n - 3];
    let (m2, s2) = partial[n - 2];
    let (m3, s3) = partial[n - 1];
    let (d_prev, d_last) = (s2 - s1, s3 - s2);
    if d_last <= 0.0 || d_prev <= 0.0 {
        let trend = if d_last == 0.0 { Trend::Converging } else { Trend::Inconclusive };
        return SeriesReport { partial_sums: partial, exponent: None, trend };
    }
    // a summand ~ m^{−β} gives decade increments scaling like 10^{(1−β)}
    let ratio = d_last / d_prev;
    let span = ((m3 as f64 / m2 as f64).log10() + (m2 as f64 / m1 as f64).log10()) / 2.0;
    let beta = 1.0 - ratio.log10() / span;
    let trend = if beta > 1.05 {
        Trend::Converging
    } else if beta <= 1.01 {
        Trend::Diverging
    } else {
        Trend::Inconclusive
    };
    SeriesReport { partial_sums: partial, exponent: Some(beta), trend }
}

/// Partial sums of the strong-moment and moderate-growth series with a
/// convergence trend read from decade increments. Advisory only.
pub fn moment_tail_report(c: &CostFunction, k: u32, nu: f64, truncation: u64) -> Result<MomentReport> {
    if k < 1 {
        return invalid("moment order k must be at least 1");
    }
    if !(nu > 0.0) {
        return invalid("nu must be positive");
    }
    if truncation < 10 {
        return invalid("truncation M must be at least 10");
    }
    let mut checkpoints: Vec<u64> = std::iter::successors(Some(10u64), |v| v.checked_mul(10))
        .take_while(|&v| v < truncation)
        .collect();
    checkpoints.push(truncation);
    while checkpoints.len() < 3 {
        let first = checkpoints[0];
        checkpoints.insert(0, (first / 2).max(1));
    }
    let costs = (1..=truncation).map(|m| c.eval(m)).collect::<Result<Vec<_>>>()?;
    let moment = series_report(&checkpoints, |m| {
        costs[m as usize - 1].abs().powi(k as i32) * (m as f64).powf(nu - 2.0)
    });
    let growth = series_report(&checkpoints, |m| (nu * costs[m as usize - 1]).exp() * (m as f64).powf(nu - 2.0));
    Ok(MomentReport { k, nu, moment, growth })
}
