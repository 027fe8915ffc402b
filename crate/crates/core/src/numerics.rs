//! Small numerical building blocks shared by the other modules.

use num_complex::Complex64;
use std::f64::consts::PI;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i128(a: i128, b: i128) -> i128 {
    gcd_u128(a.unsigned_abs(), b.unsigned_abs()) as i128
}

/// Floor of the square root of `n`, exact for every `u128`.
pub fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x.checked_mul(x).is_none_or(|v| v > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|v| v <= n) {
        x += 1;
    }
    x
}

/// Neumaier-compensated accumulator for real sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex sums (componentwise Neumaier).
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// `e^{i·angle}` after reducing the angle into `[0, 2π)`.
pub fn unit_phase(angle: f64) -> Complex64 {
    let (s, c) = angle.rem_euclid(2.0 * PI).sin_cos();
    Complex64::new(c, s)
}

/// Ordinary least squares fit `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Chebyshev–Lobatto collocation grid on `[0, len]`, ordered from 0 upward.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    pub len: f64,
    pub nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl ChebGrid {
    pub fn new(n: usize, len: f64) -> Self {
        assert!(n >= 2);
        let last = (n - 1) as f64;
        let nodes = (0..n)
            .map(|j| {
                if j == 0 {
                    0.0
                } else if j == n - 1 {
                    len
                } else {
                    0.5 * len * (1.0 - (PI * j as f64 / last).cos())
                }
            })
            .collect();
        let bary = (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        ChebGrid { len, nodes, bary }
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Values of all Lagrange basis polynomials at `y`, written into `out`.
    pub fn basis_at(&self, y: f64, out: &mut [f64]) {
        let mut total = 0.0;
        for (j, (&xj, &wj)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let d = y - xj;
            if d == 0.0 {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[j] = 1.0;
                return;
            }
            let t = wj / d;
            out[j] = t;
            total += t;
        }
        out.iter_mut().for_each(|v| *v /= total);
    }

    /// Evaluate the interpolant through `values` at `y`.
    pub fn interpolate<T>(&self, values: &[T], y: f64) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        let mut basis = vec![0.0; self.size()];
        self.basis_at(y, &mut basis);
        values.iter().zip(&basis).map(|(&v, &b)| v * b).sum()
    }

    /// Row `k` holds the coefficients mapping node values to `p^{(k)}(0)/k!`
    /// of the interpolant `p`, for `k = 0..=order`.
    pub fn taylor_at_zero(&self, order: usize) -> Vec<Vec<f64>> {
        let n = self.size();
        let last = n - 1;
        // cheb[k][j]: coefficient of node value j in the k-th Chebyshev coefficient
        let mut cheb = vec![vec![0.0; n]; n];
        for (k, row) in cheb.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                let theta = PI * j as f64 / last as f64;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let mut v = sign * (k as f64 * theta).cos() * 2.0 / last as f64;
                if j == 0 || j == last {
                    v *= 0.5;
                }
                if k == 0 || k == last {
                    v *= 0.5;
                }
                *c = v;
            }
        }
        let scale = 2.0 / self.len;
        let mut out = Vec::with_capacity(order + 1);
        let mut factorial = 1.0;
        for r in 0..=order {
            if r > 0 {
                factorial *= r as f64;
            }
            let mut row = vec![0.0; n];
            for (k, coeffs) in cheb.iter().enumerate() {
                let dk = cheb_derivative_at_minus_one(k, r) * scale.powi(r as i32) / factorial;
                if dk == 0.0 {
                    continue;
                }
                for (acc, c) in row.iter_mut().zip(coeffs) {
                    *acc += dk * c;
                }
            }
            out.push(row);
        }
        out
    }

    /// Clenshaw–Curtis quadrature weights on the grid.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.size();
        let big_n = n - 1;
        let nf = big_n as f64;
        let mut w = vec![0.0; n];
        let mut interior = vec![1.0; n];
        if big_n.is_multiple_of(2) {
            w[0] = 1.0 / (nf * nf - 1.0);
            for k in 1..big_n / 2 {
                for (j, v) in interior.iter_mut().enumerate() {
                    let theta = PI * j as f64 / nf;
                    *v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
                }
            }
            for (j, v) in interior.iter_mut().enumerate() {
                let theta = PI * j as f64 / nf;
                *v -= (nf * theta).cos() / (nf * nf - 1.0);
            }
        } else {
            w[0] = 1.0 / (nf * nf);
            for k in 1..=(big_n - 1) / 2 {
                for (j, v) in interior.iter_mut().enumerate() {
                    let theta = PI * j as f64 / nf;
                    *v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
                }
            }
        }
        w[big_n] = w[0];
        for j in 1..big_n {
            w[j] = 2.0 * interior[j] / nf;
        }
        w.iter().map(|v| v * 0.5 * self.len).collect()
    }
}

/// `T_k^{(r)}(-1)`.
fn cheb_derivative_at_minus_one(k: usize, r: usize) -> f64 {
    if r > k {
        return 0.0;
    }
    let sign = if (k + r).is_multiple_of(2) { 1.0 } else { -1.0 };
    let kk = (k * k) as f64;
    let mut v = 1.0;
    for j in 0..r {
        v *= (kk - (j * j) as f64) / (2 * j + 1) as f64;
    }
    sign * v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isqrt_is_exact_near_squares() {
        for v in [0u128, 1, 2, 3, 4, 15, 16, 17, 1 << 100, (1 << 100) - 1] {
            let r = isqrt(v);
            assert!(r * r <= v && (r + 1) * (r + 1) > v);
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = ChebGrid::new(12, 1.0);
        let vals: Vec<f64> = g.nodes.iter().map(|x| 3.0 * x * x * x - x + 0.5).collect();
        for y in [0.013, 0.37, 0.99] {
            let p = g.interpolate(&vals, y);
            assert!((p - (3.0 * y * y * y - y + 0.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn taylor_rows_match_known_derivatives() {
        let g = ChebGrid::new(40, 1.0);
        let vals: Vec<f64> = g.nodes.iter().map(|x| 1.0 / (1.0 + x)).collect();
        let rows = g.taylor_at_zero(6);
        for (k, row) in rows.iter().enumerate() {
            let c: f64 = row.iter().zip(&vals).map(|(a, b)| a * b).sum();
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 };
            // coefficient k only ever multiplies y^k with y below 1/(2n²)
            let y_max: f64 = 1.0 / (2.0 * 40.0 * 40.0);
            assert!(((c - expected) * y_max.powi(k as i32)).abs() < 1e-14, "k={k} c={c}");
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_smooth_functions() {
        for n in [9, 16, 33] {
            let g = ChebGrid::new(n, 0.5);
            let w = g.quadrature_weights();
            let integral: f64 = g.nodes.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
            assert!((integral - (0.5f64.exp() - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, b) = linear_fit(&x, &y);
        assert!((s - 2.5).abs() < 1e-12 && (b + 1.0).abs() < 1e-12);
    }
}
