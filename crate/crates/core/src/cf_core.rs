//! Division algorithms, interval maps, inverse branches and branch words.
//!
//! A division step takes the pair `(p, q)` (the rational `p/q`) to `(r, p)`
//! with `q = m·p + ε·r`. The three algorithms differ only in how the digit
//! `m` is chosen:
//!
//! * ordinary: `m = ⌊q/p⌋`, `ε = +1`;
//! * centered: `m` is the nearest integer to `q/p` with `q/p − m ∈ [−1/2, 1/2)`;
//! * odd: `m` is the nearest odd integer to `q/p` with `q/p − m ∈ [−1, 1)`.
//!
//! All digit extraction is integer arithmetic.

use crate::error::{invalid, Error, Result};
use crate::numerics::gcd;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Ordinary,
    Centered,
    Odd,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 3] = [AlgorithmKind::Ordinary, AlgorithmKind::Centered, AlgorithmKind::Odd];

    /// Right endpoint of the interval the map acts on: 1, or 1/2 for centered.
    pub fn domain_end(self) -> f64 {
        match self {
            AlgorithmKind::Centered => 0.5,
            _ => 1.0,
        }
    }

    /// Digit and sign `(m, ε)` for the real quotient `y = 1/x ≥ 1`.
    pub fn real_digit(self, y: f64) -> (f64, f64) {
        let m = match self {
            AlgorithmKind::Ordinary => y.floor(),
            AlgorithmKind::Centered => (y + 0.5).floor(),
            AlgorithmKind::Odd => {
                let k = (y + 1.0).floor();
                if k % 2.0 == 0.0 {
                    k - 1.0
                } else {
                    k
                }
            }
        };
        (m, if y - m < 0.0 { -1.0 } else { 1.0 })
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AlgorithmKind::Ordinary => "ordinary",
            AlgorithmKind::Centered => "centered",
            AlgorithmKind::Odd => "odd",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rational {
    p: u64,
    q: u64,
}

impl Rational {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if p == 0 || q == 0 {
            return invalid("p and q must be positive");
        }
        if p > q {
            return invalid("p must not exceed q");
        }
        Ok(Rational { p, q })
    }

    /// Like [`Rational::new`] but additionally requires `gcd(p, q) = 1`.
    pub fn coprime(p: u64, q: u64) -> Result<Self> {
        let r = Self::new(p, q)?;
        if gcd(p, q) != 1 {
            return invalid(format!("gcd({p}, {q}) != 1"));
        }
        Ok(r)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn is_coprime(&self) -> bool {
        gcd(self.p, self.q) == 1
    }

    pub fn reduced(&self) -> Rational {
        let g = gcd(self.p, self.q);
        Rational { p: self.p / g, q: self.q / g }
    }
}

/// One division step on the pair `(p, q)` with `1 ≤ p ≤ q`: returns `(m, ε, r)`
/// with `q = m·p + ε·r` and `0 ≤ r ≤ p`.
#[inline]
pub fn division_step(alg: AlgorithmKind, p: u64, q: u64) -> (u64, i8, u64) {
    let m = match alg {
        AlgorithmKind::Ordinary => q / p,
        AlgorithmKind::Centered => (2 * q + p) / (2 * p),
        AlgorithmKind::Odd => {
            let k = (q + p) / p;
            if k.is_multiple_of(2) {
                k - 1
            } else {
                k
            }
        }
    };
    let mp = m * p;
    if q >= mp {
        (m, 1, q - mp)
    } else {
        (m, -1, mp - q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expansion {
    pub algorithm: AlgorithmKind,
    pub digits: Vec<u64>,
    /// `ε_1..ε_{P−1}`; empty for the ordinary algorithm.
    pub signs: Vec<i8>,
    /// Set when a centered expansion started outside `(0, 1/2]` and its first
    /// step normalized the input (that digit may be 1).
    pub normalized_first: bool,
}

impl Expansion {
    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    /// Sign of step `j` (0-based); `+1` for the ordinary algorithm.
    pub fn sign(&self, j: usize) -> i8 {
        self.signs.get(j).copied().unwrap_or(1)
    }

    /// Digits subject to the algorithm's constraint, i.e. all digits except
    /// a normalizing first step.
    pub fn constrained_digits(&self) -> &[u64] {
        if self.normalized_first {
            &self.digits[1..]
        } else {
            &self.digits
        }
    }

    /// Number of digits violating the per-algorithm constraint.
    pub fn constraint_violations(&self) -> usize {
        self.constrained_digits()
            .iter()
            .filter(|&&m| match self.algorithm {
                AlgorithmKind::Ordinary => m < 1,
                AlgorithmKind::Centered => m < 2,
                AlgorithmKind::Odd => m % 2 == 0,
            })
            .count()
    }
}

pub fn expand(r: Rational, alg: AlgorithmKind) -> Expansion {
    let (mut p, mut q) = (r.p, r.q);
    let normalized_first = alg == AlgorithmKind::Centered && 2 * p > q;
    let mut digits = Vec::new();
    let mut signs = Vec::new();
    loop {
        let (m, eps, rem) = division_step(alg, p, q);
        digits.push(m);
        if rem == 0 {
            break;
        }
        if alg != AlgorithmKind::Ordinary {
            signs.push(eps);
        }
        q = p;
        p = rem;
    }
    Expansion { algorithm: alg, digits, signs, normalized_first }
}

pub fn reconstruct(e: &Expansion) -> Result<Rational> {
    if e.digits.is_empty() {
        return invalid("empty expansion");
    }
    // value = num/den, built from the innermost digit outward
    let (mut num, mut den): (i128, i128) = (0, 1);
    for j in (0..e.depth()).rev() {
        let eps = if j + 1 < e.depth() { e.sign(j) as i128 } else { 1 };
        let m = e.digits[j] as i128;
        let new_den = m * den + eps * num;
        if new_den <= 0 {
            return invalid("expansion does not describe a positive rational");
        }
        num = den;
        den = new_den;
    }
    let g = crate::numerics::gcd_i128(num, den);
    Rational::new((num / g) as u64, (den / g) as u64)
}

/// One step of the algorithm's interval map on a real point.
pub fn map_apply(alg: AlgorithmKind, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    if !(x > 0.0 && x <= alg.domain_end()) {
        return Err(Error::Domain(format!("x = {x} outside (0, {}] for {alg}", alg.domain_end())));
    }
    let y = 1.0 / x;
    let (m, _) = alg.real_digit(y);
    Ok((y - m).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub algorithm: AlgorithmKind,
    pub m: u64,
    pub eps: i8,
}

impl Branch {
    pub fn new(algorithm: AlgorithmKind, m: u64, eps: i8) -> Result<Self> {
        if !is_admissible(algorithm, m, eps) {
            return invalid(format!("({m}, {eps}) is not an admissible {algorithm} branch"));
        }
        Ok(Branch { algorithm, m, eps })
    }

    /// `y ↦ 1/(m + εy)`.
    pub fn apply(&self, y: f64) -> f64 {
        1.0 / (self.m as f64 + self.eps as f64 * y)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let d = self.m as f64 + self.eps as f64 * x;
        1.0 / (d * d)
    }

    /// Möbius matrix `[[0, 1], [ε, m]]`.
    pub fn matrix(&self) -> [[i128; 2]; 2] {
        [[0, 1], [self.eps as i128, self.m as i128]]
    }
}

/// Admissibility of `(m, ε)` as an inverse branch, read off from which pairs
/// division steps on the natural domain can produce with a nonzero remainder.
pub fn is_admissible(alg: AlgorithmKind, m: u64, eps: i8) -> bool {
    if eps != 1 && eps != -1 {
        return false;
    }
    match alg {
        AlgorithmKind::Ordinary => m >= 1 && eps == 1,
        AlgorithmKind::Centered => m >= 3 || (m == 2 && eps == 1),
        AlgorithmKind::Odd => m % 2 == 1 && (m >= 3 || eps == 1),
    }
}

/// The admissible branches with `m ≤ m_max`, collected from the `(m, ε)`
/// pairs that division steps on natural-domain inputs actually produce.
pub fn derive_admissible(alg: AlgorithmKind, m_max: u64) -> Vec<Branch> {
    let mut seen = std::collections::BTreeSet::new();
    // small p already realizes every quotient pattern q/p up to m_max + 2
    for p in 1..=6u64 {
        for q in p..=(m_max + 2) * p {
            if alg == AlgorithmKind::Centered && 2 * p > q {
                continue;
            }
            let (m, eps, r) = division_step(alg, p, q);
            if r > 0 && m <= m_max {
                seen.insert((m, eps));
            }
        }
    }
    seen.into_iter().map(|(m, eps)| Branch { algorithm: alg, m, eps }).collect()
}

/// Composition `b_1 ∘ b_2 ∘ … ∘ b_p`, listed outermost first (the order of
/// digits in a continued fraction).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchWord {
    pub branches: Vec<Branch>,
    matrix: [[i128; 2]; 2],
}

fn mat_mul(a: [[i128; 2]; 2], b: [[i128; 2]; 2]) -> Result<[[i128; 2]; 2]> {
    let mut out = [[0i128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let x = a[i][0].checked_mul(b[0][j]);
            let y = a[i][1].checked_mul(b[1][j]);
            out[i][j] = match (x, y) {
                (Some(x), Some(y)) => x.checked_add(y),
                _ => None,
            }
            .ok_or_else(|| Error::Overflow("branch word matrix".into()))?;
        }
    }
    Ok(out)
}

impl BranchWord {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return invalid("empty branch word");
        }
        let mut matrix = [[1, 0], [0, 1]];
        for b in &branches {
            matrix = mat_mul(matrix, b.matrix())?;
        }
        Ok(BranchWord { branches, matrix })
    }

    /// Ordinary-algorithm word with the given digits.
    pub fn ordinary(digits: &[u64]) -> Result<Self> {
        let bs = digits
            .iter()
            .map(|&m| Branch::new(AlgorithmKind::Ordinary, m, 1))
            .collect::<Result<Vec<_>>>()?;
        Self::new(bs)
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Möbius coefficients `[[a, b], [c, d]]` of `x ↦ (ax + b)/(cx + d)`.
    pub fn matrix(&self) -> [[i128; 2]; 2] {
        self.matrix
    }

    pub fn determinant(&self) -> i128 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn concat(&self, inner: &BranchWord) -> Result<BranchWord> {
        let mut bs = self.branches.clone();
        bs.extend_from_slice(&inner.branches);
        BranchWord::new(bs)
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.branches.iter().rev().fold(x, |y, b| b.apply(y))
    }

    /// `|h'(x)|` by the chain rule along the orbit, innermost branch first.
    pub fn derivative(&self, x: f64) -> f64 {
        let mut y = x;
        let mut d = 1.0;
        for b in self.branches.iter().rev() {
            d *= b.derivative(y);
            y = b.apply(y);
        }
        d
    }

    /// `|h'(x)| = 1/(cx + d)²` from the Möbius coefficients.
    pub fn derivative_mobius(&self, x: f64) -> f64 {
        let den = self.matrix[1][0] as f64 * x + self.matrix[1][1] as f64;
        1.0 / (den * den)
    }

    /// `|h''(x)| / |h'(x)| = 2|c| / |cx + d|`.
    pub fn distortion(&self, x: f64) -> f64 {
        let c = self.matrix[1][0] as f64;
        2.0 * c.abs() / (c * x + self.matrix[1][1] as f64).abs()
    }

    /// `sup_{x ∈ [0, end]} |h'(x)|`, attained at an endpoint.
    pub fn sup_derivative(&self) -> f64 {
        let end = self.branches[0].algorithm.domain_end();
        self.derivative_mobius(0.0).max(self.derivative_mobius(end))
    }
}

/// `|h'(x)|` for a word (a single branch is a word of length one).
pub fn branch_derivative(h: &BranchWord, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    Ok(h.derivative(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord(p: u64, q: u64) -> Expansion {
        expand(Rational::new(p, q).unwrap(), AlgorithmKind::Ordinary)
    }

    #[test]
    fn five_sevenths() {
        let e = ord(5, 7);
        assert_eq!(e.digits, vec![1, 2, 2]);
        assert_eq!(e.depth(), 3);
        assert!(e.signs.is_empty());
    }

    #[test]
    fn one_over_one() {
        assert_eq!(ord(1, 1).digits, vec![1]);
    }

    #[test]
    fn last_digit_is_one_only_for_p_equal_q() {
        for q in 1..60u64 {
            for p in 1..=q {
                let e = ord(p, q);
                let last_one = *e.digits.last().unwrap() == 1;
                assert_eq!(last_one, p == q, "p={p} q={q}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Rational::new(7, 5).is_err());
        assert!(Rational::new(0, 5).is_err());
        assert!(Rational::new(1, 0).is_err());
        assert!(Rational::coprime(2, 4).is_err());
    }

    #[test]
    fn reconstruct_hand_example() {
        let e = Expansion { algorithm: AlgorithmKind::Ordinary, digits: vec![1, 2, 2], signs: vec![], normalized_first: false };
        assert_eq!(reconstruct(&e).unwrap(), Rational::new(5, 7).unwrap());
        for alg in AlgorithmKind::ALL {
            for m in 1..20 {
                let e = Expansion { algorithm: alg, digits: vec![m], signs: vec![], normalized_first: false };
                assert_eq!(reconstruct(&e).unwrap(), Rational::new(1, m).unwrap());
            }
        }
    }

    #[test]
    fn real_digits() {
        assert_eq!(AlgorithmKind::Centered.real_digit(2.6).0, 3.0);
        assert_eq!(AlgorithmKind::Odd.real_digit(2.6).0, 3.0);
        // half-open tie conventions
        assert_eq!(AlgorithmKind::Centered.real_digit(2.5).0, 3.0);
        assert_eq!(AlgorithmKind::Odd.real_digit(2.0).0, 3.0);
    }

    #[test]
    fn gauss_map_values() {
        let t = map_apply(AlgorithmKind::Ordinary, 0.7).unwrap();
        assert!((t - (1.0 / 0.7 - 1.0)).abs() < 1e-15);
        assert_eq!(map_apply(AlgorithmKind::Ordinary, 0.5).unwrap(), 0.0);
        assert_eq!(map_apply(AlgorithmKind::Ordinary, 0.0).unwrap(), 0.0);
        assert!(map_apply(AlgorithmKind::Centered, 0.7).is_err());
        assert!(map_apply(AlgorithmKind::Ordinary, 1.5).is_err());
    }

    #[test]
    fn integer_and_real_steps_agree() {
        for alg in AlgorithmKind::ALL {
            for q in 2..80u64 {
                for p in 1..=q {
                    if alg == AlgorithmKind::Centered && 2 * p > q {
                        continue;
                    }
                    let (m, eps, r) = division_step(alg, p, q);
                    let (mr, er) = alg.real_digit(q as f64 / p as f64);
                    assert_eq!(m as f64, mr);
                    if r > 0 {
                        assert_eq!(eps as f64, er);
                    }
                    let img = map_apply(alg, p as f64 / q as f64).unwrap();
                    assert!((img - r as f64 / p as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn derived_branch_sets_match_predicate() {
        for alg in AlgorithmKind::ALL {
            let derived = derive_admissible(alg, 40);
            let mut expected = Vec::new();
            for m in 1..=40 {
                for eps in [-1i8, 1] {
                    if is_admissible(alg, m, eps) {
                        expected.push(Branch { algorithm: alg, m, eps });
                    }
                }
            }
            assert_eq!(derived, expected, "{alg}");
        }
    }

    #[test]
    fn branches_map_domain_into_itself() {
        for alg in AlgorithmKind::ALL {
            let end = alg.domain_end();
            for b in derive_admissible(alg, 30) {
                for k in 0..=20 {
                    let y = b.apply(end * k as f64 / 20.0);
                    assert!((0.0..=end + 1e-15).contains(&y), "{b:?} {y}");
                }
            }
        }
    }

    #[test]
    fn single_branch_derivatives() {
        let w = BranchWord::ordinary(&[1]).unwrap();
        assert_eq!(branch_derivative(&w, 0.0).unwrap(), 1.0);
        let w = BranchWord::ordinary(&[2]).unwrap();
        assert!((branch_derivative(&w, 1.0).unwrap() - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn word_derivative_two_routes() {
        let h1 = Branch::new(AlgorithmKind::Ordinary, 1, 1).unwrap();
        let w = BranchWord::ordinary(&[1, 1]).unwrap();
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            let chain = h1.derivative(h1.apply(x)) * h1.derivative(x);
            assert!((w.derivative(x) - chain).abs() < 1e-15);
            assert!((w.derivative_mobius(x) - chain).abs() < 1e-15);
        }
    }
}
