//! Exact real quadratic numbers `(u + v√d)/w`.

use crate::error::{Error, Result};
use crate::numerics::{gcd_u128, isqrt};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// A real number `(u + v√d)/w` kept in canonical form: `d ≥ 1` squarefree,
/// `w > 0`, `gcd(u, v, w) = 1`, and `v = 0` whenever `d = 1` (the number is
/// then rational with `d` stored as 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Surd {
    pub u: i128,
    pub v: i128,
    pub d: i128,
    pub w: i128,
}

fn overflow() -> Error {
    Error::Overflow("surd arithmetic".into())
}

fn mul(a: i128, b: i128) -> Result<i128> {
    a.checked_mul(b).ok_or_else(overflow)
}

fn add(a: i128, b: i128) -> Result<i128> {
    a.checked_add(b).ok_or_else(overflow)
}

/// Splits `n ≥ 1` as `k²·r` with `r` squarefree, returning `(k, r)`.
pub fn squarefree_split(n: u128) -> (u128, u128) {
    let (mut k, mut r, mut rest) = (1u128, 1u128, n);
    let mut p = 2u128;
    while p * p <= rest {
        while rest % (p * p) == 0 {
            rest /= p * p;
            k *= p;
        }
        if rest % p == 0 {
            rest /= p;
            r *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    (k, r * rest)
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

impl Surd {
    pub fn integer(n: i128) -> Self {
        Surd { u: n, v: 0, d: 1, w: 1 }
    }

    /// Builds and canonicalizes `(u + v√d)/w` for any `d ≥ 0`, `w ≠ 0`.
    pub fn new(u: i128, v: i128, d: i128, w: i128) -> Result<Self> {
        if w == 0 {
            return Err(Error::InvalidInput("surd with zero denominator".into()));
        }
        if d < 0 {
            return Err(Error::InvalidInput("surd with negative radicand".into()));
        }
        let (mut u, mut v, mut d, mut w) = (u, v, d, w);
        if d == 0 || v == 0 {
            v = 0;
            d = 1;
        } else {
            let (k, r) = squarefree_split(d as u128);
            v = mul(v, k as i128)?;
            d = r as i128;
            if d == 1 {
                u = add(u, v)?;
                v = 0;
            }
        }
        if w < 0 {
            u = u.checked_neg().ok_or_else(overflow)?;
            v = v.checked_neg().ok_or_else(overflow)?;
            w = w.checked_neg().ok_or_else(overflow)?;
        }
        let g = gcd_u128(gcd_u128(u.unsigned_abs(), v.unsigned_abs()), w.unsigned_abs()) as i128;
        Ok(Surd { u: u / g, v: v / g, d, w: w / g })
    }

    pub fn is_rational(&self) -> bool {
        self.v == 0
    }

    /// Exact `⌊x⌋`.
    pub fn floor(&self) -> Result<i128> {
        if self.v == 0 {
            return Ok(floor_div(self.u, self.w));
        }
        let sq = mul(mul(self.v, self.v)?, self.d)?;
        let k = isqrt(sq as u128) as i128;
        // d is squarefree and > 1, so v√d is irrational and lies strictly between k and k + 1 in magnitude
        let lower = if self.v > 0 { add(self.u, k)? } else { self.u - k - 1 };
        Ok(floor_div(lower, self.w))
    }

    pub fn sub_int(&self, n: i128) -> Result<Self> {
        Surd::new(self.u - mul(n, self.w)?, self.v, self.d, self.w)
    }

    /// `1/x`, for `x ≠ 0`.
    pub fn recip(&self) -> Result<Self> {
        let norm = mul(self.u, self.u)? - mul(mul(self.v, self.v)?, self.d)?;
        if norm == 0 {
            return Err(Error::Domain("reciprocal of zero".into()));
        }
        Surd::new(mul(self.w, self.u)?, mul(-self.w, self.v)?, self.d, norm)
    }

    /// `m + ε·x` for a branch denominator.
    pub fn affine(&self, m: i128, eps: i128) -> Result<Self> {
        Surd::new(add(mul(eps, self.u)?, mul(m, self.w)?)?, mul(eps, self.v)?, self.d, self.w)
    }

    /// Ordinary Gauss map `1/x − ⌊1/x⌋`, for `0 < x`.
    pub fn gauss(&self) -> Result<Self> {
        let y = self.recip()?;
        let f = y.floor()?;
        y.sub_int(f)
    }

    /// Sign of `x`, exact.
    pub fn signum(&self) -> i32 {
        let su = self.u.signum();
        let sv = self.v.signum();
        if sv == 0 || su == sv || su == 0 {
            return if su != 0 { su as i32 } else { sv as i32 };
        }
        // opposite signs: compare u² with v²d
        let lhs = (self.u as f64).powi(2);
        let rhs = (self.v as f64).powi(2) * self.d as f64;
        let cmp = match (self.u.checked_mul(self.u), self.v.checked_mul(self.v).and_then(|t| t.checked_mul(self.d))) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => lhs.partial_cmp(&rhs).unwrap_or(Ordering::Equal),
        };
        match cmp {
            Ordering::Greater => su as i32,
            Ordering::Less => sv as i32,
            Ordering::Equal => 0,
        }
    }

    /// Nearest double, avoiding cancellation when `u` and `v√d` nearly cancel.
    pub fn to_f64(&self) -> f64 {
        let (u, v, d, w) = (self.u as f64, self.v as f64, self.d as f64, self.w as f64);
        let root = v * d.sqrt();
        if self.v == 0 || (u >= 0.0) == (root >= 0.0) || u == 0.0 {
            return (u + root) / w;
        }
        match (self.u.checked_mul(self.u), self.v.checked_mul(self.v).and_then(|t| t.checked_mul(self.d))) {
            (Some(a), Some(b)) => (a - b) as f64 / (w * (u - root)),
            _ => (u + root) / w,
        }
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.v == 0 {
            write!(f, "{}/{}", self.u, self.w)
        } else {
            write!(f, "({} + {}·√{})/{}", self.u, self.v, self.d, self.w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_pulls_squares_out() {
        let s = Surd::new(2, 2, 8, 4).unwrap();
        assert_eq!(s, Surd { u: 1, v: 2, d: 2, w: 2 });
        assert_eq!(Surd::new(1, 3, 9, -2).unwrap(), Surd::integer(-5));
    }

    #[test]
    fn floor_is_exact_on_both_sides_of_the_root() {
        let golden = Surd::new(-1, 1, 5, 2).unwrap();
        assert_eq!(golden.floor().unwrap(), 0);
        assert_eq!(golden.recip().unwrap().floor().unwrap(), 1);
        let neg = Surd::new(1, -1, 2, 1).unwrap();
        assert_eq!(neg.floor().unwrap(), -1);
        assert_eq!(Surd::new(-7, 0, 1, 2).unwrap().floor().unwrap(), -4);
    }

    #[test]
    fn golden_ratio_is_fixed_by_gauss_map() {
        let x = Surd::new(-1, 1, 5, 2).unwrap();
        assert_eq!(x.gauss().unwrap(), x);
        assert!((x.to_f64() - 0.6180339887498949).abs() < 1e-15);
    }

    #[test]
    fn signum_handles_cancellation() {
        assert_eq!(Surd::new(-3, 1, 8, 1).unwrap().signum(), -1);
        assert_eq!(Surd::new(3, -1, 8, 1).unwrap().signum(), 1);
        assert_eq!(Surd::new(-1, 1, 2, 1).unwrap().signum(), 1);
    }
}
