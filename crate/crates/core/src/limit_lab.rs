//! Empirical checks of the central and local limit laws for the total cost.
//!
//! All checks read an exact [`CostHistogram`], either of the plain ensemble
//! `Ω_N` or of a smoothed ensemble `Ω̄_N(ξ)`. Probabilities are then exact
//! rational weights, and the only floating-point steps are the test function
//! evaluations and, for the Fourier route, the inversion quadrature.
//!
//! Fourier transforms use `ψ̂(τ) = ∫ e^{−iτy} ψ(y) dy`, so that
//! `E ψ(C − Q) = (1/2π) ∫ ψ̂(τ) e^{−iτQ} E e^{iτC} dτ`.

use crate::costs::CostFunction;
use crate::ensemble::{histogram, smoothed_histogram, CostHistogram, EnsembleSpec, SmoothingSpec};
use crate::error::{invalid, Result};
use crate::numerics::{linear_fit, unit_phase};
use crate::transfer_op::{e_factor_at, sigma_path, OperatorConfig};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// `Q(x, N) = μ log N + δ x √(log N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteringSpec {
    pub x: f64,
    pub n: u64,
    pub mu: f64,
    pub delta: f64,
}

impl CenteringSpec {
    pub fn new(x: f64, n: u64, mu: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return invalid("δ must be positive");
        }
        if n < 2 {
            return invalid("N must be at least 2");
        }
        Ok(CenteringSpec { x, n, mu, delta })
    }

    pub fn log_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    pub fn q(&self) -> f64 {
        let l = self.log_n();
        self.mu * l + self.delta * self.x * l.sqrt()
    }

    /// `e^{−x²/2}/(δ√(2π))`, the limiting density factor.
    pub fn gaussian_factor(&self) -> f64 {
        (-0.5 * self.x * self.x).exp() / (self.delta * (2.0 * PI).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlateauSide {
    /// `ψ⁺ ≥ χ_J`.
    Upper,
    /// `ψ⁻ ≤ χ_J`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero,
    /// Indicator of `(a, b]`.
    Interval { a: f64, b: f64 },
    /// Trapezoid around `J = (a, b]` with ramps of width `√smooth` and slope `±smooth^{−1/2}`.
    Plateau { a: f64, b: f64, smooth: f64, side: PlateauSide },
    /// `exp(−(y − center)²/(2 width²))`.
    Gaussian { center: f64, width: f64 },
    /// Continuous piecewise-linear function through `knots`, zero outside them.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// `base * Δ_δ` with `Δ_δ(y) = e^{−y²/δ²}/(δ√π)`.
    Mollified { base: Box<TestFunction>, delta: f64 },
}

impl TestFunction {
    pub fn plateau(a: f64, b: f64, smooth: f64, side: PlateauSide) -> Result<Self> {
        if !(b > a) || !(smooth > 0.0) {
            return invalid("plateau needs a < b and a positive smoothing width");
        }
        Ok(TestFunction::Plateau { a, b, smooth, side })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return invalid("need at least two knots");
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return invalid("knots must be strictly increasing");
        }
        if knots[0].1 != 0.0 || knots[knots.len() - 1].1 != 0.0 {
            return invalid("the function must vanish at the outer knots");
        }
        Ok(TestFunction::PiecewiseLinear { knots })
    }

    pub fn mollify(self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return invalid("mollifier width must be positive");
        }
        Ok(match self {
            TestFunction::Mollified { base, delta: d } => TestFunction::Mollified { base, delta: d.hypot(delta) },
            other => TestFunction::Mollified { base: Box::new(other), delta },
        })
    }

    /// Knots of the piecewise-linear representation, when there is one.
    fn knots(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            TestFunction::Plateau { a, b, smooth, side } => {
                let r = smooth.sqrt();
                Some(match side {
                    PlateauSide::Upper => vec![(a - 2.0 * r, 0.0), (a - r, 1.0), (b + r, 1.0), (b + 2.0 * r, 0.0)],
                    PlateauSide::Lower => {
                        let (lo, hi) = (a + r, b - r);
                        if hi <= lo {
                            return Some(vec![]);
                        }
                        if hi - lo >= 2.0 * r {
                            vec![(lo, 0.0), (lo + r, 1.0), (hi - r, 1.0), (hi, 0.0)]
                        } else {
                            let mid = 0.5 * (lo + hi);
                            vec![(lo, 0.0), (mid, (mid - lo) / r), (hi, 0.0)]
                        }
                    }
                })
            }
            TestFunction::PiecewiseLinear { ref knots } => Some(knots.clone()),
            _ => None,
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            TestFunction::Zero => 0.0,
            TestFunction::Interval { a, b } => {
                if *a < y && y <= *b {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Plateau { a, b, smooth, side } => {
                let r = smooth.sqrt();
                let v = match side {
                    PlateauSide::Upper => ((y - a + 2.0 * r) / r).min((b + 2.0 * r - y) / r),
                    PlateauSide::Lower => ((y - a - r) / r).min((b - r - y) / r),
                };
                v.clamp(0.0, 1.0)
            }
            TestFunction::Gaussian { center, width } => (-(y - center).powi(2) / (2.0 * width * width)).exp(),
            TestFunction::PiecewiseLinear { knots } => {
                if y <= knots[0].0 || y >= knots[knots.len() - 1].0 {
                    return 0.0;
                }
                let k = knots.partition_point(|kn| kn.0 <= y);
                let (x0, y0) = knots[k - 1];
                let (x1, y1) = knots[k];
                y0 + (y1 - y0) * (y - x0) / (x1 - x0)
            }
            TestFunction::Mollified { base, delta } => mollified_eval(base, *delta, y),
        }
    }

    /// `ψ̂(τ) = ∫ e^{−iτy} ψ(y) dy`.
    pub fn fourier(&self, tau: f64) -> C64 {
        match self {
            TestFunction::Zero => C64::new(0.0, 0.0),
            TestFunction::Interval { a, b } => {
                let half = 0.5 * (b - a);
                let sinc = if (tau * half).abs() < 1e-8 { 1.0 } else { (tau * half).sin() / (tau * half) };
                unit_phase(-tau * 0.5 * (a + b)) * ((b - a) * sinc)
            }
            TestFunction::Gaussian { center, width } => {
                unit_phase(-tau * center) * (width * (2.0 * PI).sqrt() * (-0.5 * (width * tau).powi(2)).exp())
            }
            TestFunction::Mollified { base, delta } => base.fourier(tau) * kernel_hat(*delta, tau),
            _ => piecewise_fourier(&self.knots().expect("piecewise variant"), tau),
        }
    }

    /// Lipschitz constant, or `None` for the discontinuous indicator.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            TestFunction::Zero => Some(0.0),
            TestFunction::Interval { .. } => None,
            TestFunction::Gaussian { width, .. } => Some(1.0 / (width * 1f64.exp().sqrt())),
            TestFunction::Mollified { base, .. } => base.lipschitz(),
            _ => Some(
                self.knots()
                    .expect("piecewise variant")
                    .windows(2)
                    .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                    .fold(0.0, f64::max),
            ),
        }
    }

    /// Points that split the real line into pieces on which `ψ` is smooth,
    /// with the outer two bounding the effective support.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TestFunction::Zero => vec![],
            TestFunction::Interval { a, b } => vec![*a, *b],
            TestFunction::Gaussian { center, width } => (-8..=8).map(|k| center + 5.0 * width * k as f64).collect(),
            TestFunction::Mollified { base, delta } => {
                let mut pts = Vec::new();
                for p in base.breakpoints() {
                    for k in -8..=8 {
                        pts.push(p + delta * k as f64);
                    }
                }
                pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                pts.dedup();
                pts
            }
            _ => self.knots().expect("piecewise variant").iter().map(|k| k.0).collect(),
        }
    }

    /// `∫ψ` by adaptive double-exponential quadrature between breakpoints.
    pub fn integral(&self) -> f64 {
        let pts = self.breakpoints();
        pts.windows(2)
            .map(|w| quadrature::double_exponential::integrate(|y| self.eval(y), w[0], w[1], 1e-12).integral)
            .sum()
    }
}

fn piecewise_fourier(knots: &[(f64, f64)], tau: f64) -> C64 {
    if knots.len() < 2 {
        return C64::new(0.0, 0.0);
    }
    let c = 0.5 * (knots[0].0 + knots[knots.len() - 1].0);
    let radius = 0.5 * (knots[knots.len() - 1].0 - knots[0].0);
    if (tau * radius).abs() < 0.5 {
        // Taylor series from the exact moments of the centred function
        let mut total = C64::new(0.0, 0.0);
        let mut factor = C64::new(1.0, 0.0);
        for n in 0..40 {
            let mut moment = 0.0;
            for w in knots.windows(2) {
                let (u0, u1) = (w[0].0 - c, w[1].0 - c);
                let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let alpha = w[0].1 - s * u0;
                let nf = n as f64;
                moment += alpha * (u1.powi(n + 1) - u0.powi(n + 1)) / (nf + 1.0)
                    + s * (u1.powi(n + 2) - u0.powi(n + 2)) / (nf + 2.0);
            }
            total += factor * moment;
            factor *= C64::new(0.0, -tau) / (n as f64 + 1.0);
        }
        return unit_phase(-tau * c) * total;
    }
    // ψ'' is a sum of point masses Δs_k at the knots, and (iτ)²ψ̂ = Σ Δs_k e^{−iτx_k}
    let mut sum = C64::new(0.0, 0.0);
    let mut prev = 0.0;
    for (k, &(x, _)) in knots.iter().enumerate() {
        let next = if k + 1 < knots.len() { (knots[k + 1].1 - knots[k].1) / (knots[k + 1].0 - x) } else { 0.0 };
        sum += unit_phase(-tau * x) * (next - prev);
        prev = next;
    }
    -sum / (tau * tau)
}

fn mollified_eval(base: &TestFunction, delta: f64, y: f64) -> f64 {
    // integral of (α + βz)·Δ_δ(y − z) over [z0, z1], in the variable u = (y − z)/δ
    let segment = |z0: f64, z1: f64, alpha: f64, beta: f64| {
        let (u0, u1) = ((y - z1) / delta, (y - z0) / delta);
        (alpha + beta * y) * 0.5 * (erf(u1) - erf(u0)) - beta * delta * ((-u0 * u0).exp() - (-u1 * u1).exp()) / (2.0 * SQRT_PI)
    };
    match base {
        TestFunction::Zero => 0.0,
        TestFunction::Interval { a, b } => segment(*a, *b, 1.0, 0.0),
        TestFunction::Gaussian { center, width } => {
            let v = width * width + 0.5 * delta * delta;
            width / v.sqrt() * (-(y - center).powi(2) / (2.0 * v)).exp()
        }
        TestFunction::Mollified { base, delta: d } => mollified_eval(base, d.hypot(delta), y),
        other => other
            .knots()
            .expect("piecewise variant")
            .windows(2)
            .map(|w| {
                let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                segment(w[0].0, w[1].0, w[0].1 - s * w[0].0, s)
            })
            .sum(),
    }
}

/// `Δ̂_δ(τ) = e^{−δ²τ²/4}`, the transform of `Δ_δ(y) = e^{−y²/δ²}/(δ√π)`.
pub fn kernel_hat(delta: f64, tau: f64) -> f64 {
    (-0.25 * (delta * tau).powi(2)).exp()
}

/// `∫ Δ_δ(y) cos(τy) dy` by quadrature.
pub fn kernel_hat_quadrature(delta: f64, tau: f64) -> f64 {
    let f = |y: f64| (-(y / delta).powi(2)).exp() / (delta * SQRT_PI) * (tau * y).cos();
    let pieces = 16;
    let span = 8.0 * delta;
    (0..pieces)
        .map(|k| {
            let a = -span + 2.0 * span * k as f64 / pieces as f64;
            let b = a + 2.0 * span / pieces as f64;
            quadrature::double_exponential::integrate(f, a, b, 1e-15).integral
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierError {
    pub delta: f64,
    pub sup_error: f64,
    pub lipschitz: f64,
    /// `sup|ψ − ψ_δ| / (Lip(ψ)·δ)`.
    pub d_hat: f64,
}

/// `sup|ψ − ψ_δ|` on a grid refined around the breakpoints of `ψ`.
pub fn mollifier_error(psi: &TestFunction, delta: f64) -> Result<MollifierError> {
    let lip = psi.lipschitz().ok_or_else(|| crate::Error::InvalidInput("ψ must be Lipschitz".into()))?;
    let smooth = psi.clone().mollify(delta)?;
    let bps = psi.breakpoints();
    let (lo, hi) = (bps[0] - 10.0 * delta, bps[bps.len() - 1] + 10.0 * delta);
    let mut pts: Vec<f64> = (0..=2000).map(|k| lo + (hi - lo) * k as f64 / 2000.0).collect();
    for &b in &bps {
        pts.extend((-64..=64).map(|k| b + delta * k as f64 / 16.0));
    }
    let sup_error = pts.iter().map(|&y| (psi.eval(y) - smooth.eval(y)).abs()).fold(0.0, f64::max);
    Ok(MollifierError { delta, sup_error, lipschitz: lip, d_hat: sup_error / (lip * delta) })
}

/// Histogram of `Ω_N`, or of `Ω̄_N(ξ)` when a smoothing is given.
pub fn ensemble_histogram(spec: &EnsembleSpec, smoothing: Option<&SmoothingSpec>) -> Result<CostHistogram> {
    match smoothing {
        Some(s) => smoothed_histogram(spec, s),
        None => histogram(spec),
    }
}

/// Kolmogorov distance between a discrete law, given as sorted
/// `(value, probability)` atoms, and a continuous CDF. Returns the distance
/// and the atom where it is attained.
pub fn kolmogorov_distance(atoms: &[(f64, f64)], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut before = 0.0;
    let mut best = (0.0, f64::NAN);
    for &(v, p) in atoms {
        let after = before + p;
        let f = cdf(v);
        let d = (after - f).abs().max((before - f).abs());
        if d > best.0 {
            best = (d, v);
        }
        before = after;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub n: u64,
    pub distance: f64,
    /// Standardized value where the distance is attained.
    pub at: f64,
    /// `distance·√(log N)`.
    pub scaled: f64,
}

/// Kolmogorov distance between the law of `(C − μ log N)/(δ√(log N))` and `N(0, 1)`.
pub fn clt_check(hist: &CostHistogram, mu: f64, delta: f64) -> Result<CltRow> {
    if !(delta > 0.0) {
        return invalid("δ must be positive");
    }
    let l = (hist.n as f64).ln();
    let total = hist.total as f64;
    let atoms: Vec<(f64, f64)> = hist.values().map(|(v, c)| ((v - mu * l) / (delta * l.sqrt()), c as f64 / total)).collect();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let (distance, at) = kolmogorov_distance(&atoms, |z| normal.cdf(z));
    Ok(CltRow { n: hist.n, distance, at, scaled: distance * l.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSweep {
    pub rows: Vec<CltRow>,
    /// `max_N distance·√(log N)`.
    pub c_hat: f64,
    /// Number of consecutive pairs where the distance increased.
    pub inversions: usize,
}

pub fn clt_sweep(spec: &EnsembleSpec, ns: &[u64], mu: f64, delta: f64) -> Result<CltSweep> {
    let rows = ns
        .iter()
        .map(|&n| clt_check(&histogram(&spec.with_n(n))?, mu, delta))
        .collect::<Result<Vec<_>>>()?;
    let c_hat = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let inversions = rows.windows(2).filter(|w| w[1].distance > w[0].distance).count();
    Ok(CltSweep { rows, c_hat, inversions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LltRow {
    pub n: u64,
    pub x: f64,
    pub lhs: f64,
    pub target: f64,
    pub ratio: f64,
}

impl LltRow {
    pub fn csv_header() -> &'static str {
        "N,x,lhs,target,ratio"
    }

    pub fn csv(&self) -> String {
        format!("{},{},{},{},{}", self.n, self.x, self.lhs, self.target, self.ratio)
    }
}

/// `√(log N)·P(C − Q(x, N) ∈ (a, b])` against `(b − a)e^{−x²/2}/(δ√(2π))`.
pub fn llt_interval(hist: &CostHistogram, centering: &CenteringSpec, a: f64, b: f64) -> Result<LltRow> {
    if !(b > a) {
        return invalid("interval needs a < b");
    }
    llt_smooth(hist, centering, &TestFunction::Interval { a, b })
}

/// `√(log N)·E ψ(C − Q(x, N))` against `e^{−x²/2}/(δ√(2π))·∫ψ`.
pub fn llt_smooth(hist: &CostHistogram, centering: &CenteringSpec, psi: &TestFunction) -> Result<LltRow> {
    let q = centering.q();
    let lhs = centering.log_n().sqrt() * hist.expectation(|v| psi.eval(v - q));
    let integral = match psi {
        TestFunction::Interval { a, b } => b - a,
        other => other.integral(),
    };
    let target = centering.gaussian_factor() * integral;
    let ratio = if target != 0.0 { lhs / target } else { f64::NAN };
    Ok(LltRow { n: hist.n, x: centering.x, lhs, target, ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionCheck {
    /// `√(log N)·E ψ(C − Q)` by direct summation.
    pub route_a: f64,
    /// The same through the Fourier inversion integral.
    pub route_b: f64,
    pub difference: f64,
    pub step: f64,
    pub nodes: usize,
    /// `√(log N)/π ∫_{τ_cut}^∞ |ψ̂|`, a bound on the neglected part of route B.
    pub tail_bound: f64,
    pub cutoff_warning: bool,
}

fn fourier_abs_tail(psi: &TestFunction, cutoff: f64) -> f64 {
    let mut total = 0.0;
    let mut a = cutoff;
    let mut width = 1.0f64.max(cutoff / 4.0);
    loop {
        let piece = quadrature::double_exponential::integrate(|t| psi.fourier(t).norm(), a, a + width, 1e-14).integral;
        total += piece;
        a += width;
        if piece < 1e-16 * width.max(1.0) || a > 1e6 {
            break;
        }
        width *= 1.5;
    }
    total
}

/// Two evaluations of `√(log N)·Ē_N(ψ(C − Q(x, N)))`: direct summation over the
/// histogram, and the trapezoid rule on `(1/π) Re ∫_0^{τ_cut} ψ̂(τ)e^{−iτQ}Ē_N(e^{iτC}) dτ`
/// with the step halved until successive values agree to `tol`.
pub fn fourier_inversion_check(
    hist: &CostHistogram,
    centering: &CenteringSpec,
    psi: &TestFunction,
    tau_cutoff: f64,
    tol: f64,
) -> Result<InversionCheck> {
    if !(tau_cutoff > 0.0) || !(tol > 0.0) {
        return invalid("cutoff and tolerance must be positive");
    }
    let scale = centering.log_n().sqrt();
    let q = centering.q();
    let route_a = scale * hist.expectation(|v| psi.eval(v - q));

    let integrand = |taus: &[f64]| -> Vec<f64> {
        hist.char_fn_many(taus)
            .into_iter()
            .zip(taus)
            .map(|(e, &t)| (psi.fourier(t) * unit_phase(-t * q) * e).re)
            .collect()
    };
    let mut step = (tau_cutoff / 8.0).min(0.5);
    let mut count = (tau_cutoff / step).ceil() as usize;
    step = tau_cutoff / count as f64;
    let nodes: Vec<f64> = (0..=count).map(|k| k as f64 * step).collect();
    let vals = integrand(&nodes);
    let mut sum = vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[count]);
    let mut estimate = scale * step * sum / PI;
    let mut evaluated = count + 1;
    loop {
        let mids: Vec<f64> = (0..count).map(|k| (k as f64 + 0.5) * step).collect();
        sum += integrand(&mids).iter().sum::<f64>();
        evaluated += count;
        count *= 2;
        step *= 0.5;
        let next = scale * step * sum / PI;
        let change = (next - estimate).abs();
        estimate = next;
        if change < 0.1 * tol || count > (1 << 22) {
            break;
        }
    }
    let tail_bound = scale * fourier_abs_tail(psi, tau_cutoff) / PI;
    Ok(InversionCheck {
        route_a,
        route_b: estimate,
        difference: (route_a - estimate).abs(),
        step,
        nodes: evaluated,
        tail_bound,
        cutoff_warning: tail_bound > tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub nu0: f64,
    pub delta0: f64,
    /// `α''` in `L_N = (log N)^{1/α''}`.
    pub alpha2: f64,
    pub points_per_region: usize,
    pub smoothing: SmoothingSpec,
    /// Extends region 3 to `[2, max(L_N, value)]` so that resonances such as
    /// `τ = 2π` can be inspected at desk-scale `N`.
    pub extend_region3_to: Option<f64>,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            nu0: crate::transfer_op::NU0,
            delta0: 1.0,
            alpha2: 3.0,
            points_per_region: 16,
            smoothing: SmoothingSpec::default(),
            extend_region3_to: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub region: u8,
    pub tau: f64,
    pub modulus: f64,
    pub envelope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region3Fit {
    /// Smallest `α'` with `|Ē_N| ≤ N^{−|τ|^{−α'}}` at every region-3 node
    /// (envelope constant fixed to 1); infinite when some node has modulus 1.
    pub alpha_prime_min: f64,
    /// Least-squares fit of `log|Ē_N| ≈ log K' − |τ|^{−α'} log N`.
    pub k_hat: f64,
    pub alpha_hat: f64,
    pub max_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProfile {
    pub n: u64,
    pub nu0: f64,
    pub tau_n: f64,
    pub l_n: f64,
    pub region3_end: f64,
    /// `0 < τ_N < ν_0 < 2 < L_N`.
    pub scales_ordered: bool,
    pub rows: Vec<RegionRow>,
    /// `−log(max_{region 2}|Ē_N|)/log N`.
    pub gamma2_hat: f64,
    pub region3: Region3Fit,
}

impl RegionProfile {
    pub fn csv_header() -> &'static str {
        "region,tau,modulus,envelope"
    }
}

fn grid(lo: f64, hi: f64, k: usize, include_hi: bool) -> Vec<f64> {
    let denom = if include_hi { (k - 1).max(1) } else { k };
    (0..k).map(|i| lo + (hi - lo) * i as f64 / denom as f64).collect()
}

fn fit_region3(points: &[(f64, f64)], log_n: f64) -> Region3Fit {
    let max_modulus = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut alpha_prime_min: f64 = 0.0;
    for &(tau, m) in points {
        let r = -m.ln() / log_n;
        let need = if r <= 0.0 {
            f64::INFINITY
        } else if r >= 1.0 {
            0.0
        } else {
            -r.ln() / tau.abs().ln()
        };
        alpha_prime_min = alpha_prime_min.max(need);
    }
    let mut best = (f64::INFINITY, f64::NAN, f64::NAN);
    if points.iter().all(|p| p.1 > 0.0) {
        for i in 0..=400 {
            let alpha = 10f64.powf(-2.0 + 4.0 * i as f64 / 400.0);
            let xs: Vec<f64> = points.iter().map(|p| p.1.ln() + p.0.abs().powf(-alpha) * log_n).collect();
            let log_k = xs.iter().sum::<f64>() / xs.len() as f64;
            let sse: f64 = xs.iter().map(|x| (x - log_k).powi(2)).sum();
            if sse < best.0 {
                best = (sse, log_k.exp(), alpha);
            }
        }
    }
    Region3Fit { alpha_prime_min, k_hat: best.1, alpha_hat: best.2, max_modulus }
}

/// Tabulates `|Ē_N(ξ_1, e^{iτC})|` over the four frequency regions, with the
/// small-τ prediction from the spectral data when `spectral` is given.
pub fn region_profile(spec: &EnsembleSpec, config: &RegionConfig, spectral: Option<&OperatorConfig>) -> Result<RegionProfile> {
    let n = spec.n;
    if n < 3 {
        return invalid("N must be at least 3");
    }
    if config.points_per_region < 2 {
        return invalid("need at least two points per region");
    }
    let log_n = (n as f64).ln();
    let tau_n = (log_n.ln() / (config.delta0 * log_n)).max(0.0).sqrt();
    let l_n = log_n.powf(1.0 / config.alpha2);
    let region3_end = config.extend_region3_to.map_or(l_n, |e| e.max(l_n)).max(2.0);
    let k = config.points_per_region;

    let mut taus: Vec<(u8, f64)> = Vec::new();
    taus.extend(grid(0.0, config.nu0, k, false).into_iter().map(|t| (1, t)));
    taus.extend(grid(config.nu0, 2.0, k, false).into_iter().map(|t| (2, t)));
    let mut r3 = grid(2.0, region3_end, k, true);
    let mut res = 2.0 * PI;
    while res <= region3_end {
        r3.push(res);
        res += 2.0 * PI;
    }
    r3.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    r3.dedup();
    taus.extend(r3.into_iter().map(|t| (3, t)));
    taus.extend(grid(region3_end, 2.0 * region3_end, k, true).into_iter().skip(1).map(|t| (4, t)));

    let hist = smoothed_histogram(spec, &config.smoothing)?;
    let nodes: Vec<f64> = taus.iter().map(|t| t.1).collect();
    let moduli: Vec<f64> = hist.char_fn_many(&nodes).into_iter().map(|z| z.norm()).collect();

    let mut envelopes = vec![None; taus.len()];
    if let Some(op) = spectral {
        let small: Vec<(usize, f64)> = taus.iter().enumerate().filter(|(_, t)| t.0 == 1).map(|(i, t)| (i, t.1)).collect();
        let grid_taus: Vec<f64> = small.iter().map(|s| s.1).collect();
        let path = sigma_path(&grid_taus, &spec.cost, op)?;
        let e0 = e_factor_at(C64::new(1.0, 0.0), 0.0, &spec.cost, op)?;
        for ((i, tau), sol) in small.iter().zip(&path) {
            let e = e_factor_at(sol.sigma, *tau, &spec.cost, op)?;
            envelopes[*i] = Some((e / (e0 * sol.sigma)).norm() * (n as f64).powf(2.0 * (sol.sigma.re - 1.0)));
        }
    }

    let max2 = taus.iter().zip(&moduli).filter(|(t, _)| t.0 == 2).map(|(_, m)| *m).fold(0.0, f64::max);
    let gamma2_hat = -max2.ln() / log_n;
    let r3_points: Vec<(f64, f64)> = taus.iter().zip(&moduli).filter(|(t, _)| t.0 == 3).map(|(t, m)| (t.1, *m)).collect();
    let region3 = fit_region3(&r3_points, log_n);
    for (i, t) in taus.iter().enumerate() {
        match t.0 {
            2 => envelopes[i] = Some(max2),
            3 if region3.alpha_prime_min.is_finite() => {
                envelopes[i] = Some((-(t.1.abs().powf(-region3.alpha_prime_min)) * log_n).exp())
            }
            _ => {}
        }
    }
    let rows = taus
        .iter()
        .zip(&moduli)
        .zip(envelopes)
        .map(|((t, m), e)| RegionRow { region: t.0, tau: t.1, modulus: *m, envelope: e })
        .collect();
    Ok(RegionProfile {
        n,
        nu0: config.nu0,
        tau_n,
        l_n,
        region3_end,
        scales_ordered: 0.0 < tau_n && tau_n < config.nu0 && config.nu0 < 2.0 && 2.0 < l_n,
        rows,
        gamma2_hat,
        region3,
    })
}

/// Least-squares slopes of `E_N` and `V_N` against `log N`.
pub fn moment_slopes(spec: &EnsembleSpec, ns: &[u64]) -> Result<(f64, f64)> {
    let rows = crate::ensemble::moments_table(spec, ns)?;
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let m: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.variance).collect();
    Ok((linear_fit(&x, &m).0, linear_fit(&x, &v).0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBounds {
    pub eta: f64,
    pub rho_hat: f64,
    pub sup_inv_deriv: f64,
    /// `log sup|h'|^{−1} / log(1/ρ̂)`.
    pub g: f64,
    pub alpha_min: f64,
    pub eps_max: f64,
    pub r_min: f64,
}

/// `α > η(2 + g)(1 + g)`, `ε < 1/(2α)`, `r > α + 1`.
pub fn alpha_calc(eta: f64, rho_hat: f64, sup_inv_deriv: f64) -> Result<AlphaBounds> {
    if !(eta > 2.0) {
        return invalid("η must exceed 2");
    }
    if !(rho_hat > 0.0 && rho_hat < 1.0) {
        return invalid("ρ̂ must lie in (0, 1)");
    }
    if !(sup_inv_deriv > 1.0) {
        return invalid("sup |h'|^{-1} must exceed 1");
    }
    let g = sup_inv_deriv.ln() / (1.0 / rho_hat).ln();
    let alpha_min = eta * (2.0 + g) * (1.0 + g);
    Ok(AlphaBounds { eta, rho_hat, sup_inv_deriv, g, alpha_min, eps_max: 1.0 / (2.0 * alpha_min), r_min: alpha_min + 1.0 })
}

/// Builds the standard sandwich pair `(ψ⁻, ψ⁺)` around `(a, b]`.
pub fn sandwich(a: f64, b: f64, smooth: f64) -> Result<(TestFunction, TestFunction)> {
    Ok((
        TestFunction::plateau(a, b, smooth, PlateauSide::Lower)?,
        TestFunction::plateau(a, b, smooth, PlateauSide::Upper)?,
    ))
}

/// Convenience wrapper building the cost histogram from `(N, cost)`.
pub fn llt_interval_for(n: u64, cost: &CostFunction, x: f64, a: f64, b: f64, mu: f64, delta: f64) -> Result<LltRow> {
    let hist = histogram(&EnsembleSpec::new(n, cost.clone()))?;
    llt_interval(&hist, &CenteringSpec::new(x, n, mu, delta)?, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_sandwich_and_mass() {
        for &(a, b, d) in &[(-1.0, 1.0, 0.01), (0.0, 0.5, 0.04), (-0.5, 0.5, 0.2)] {
            let (lo, hi) = sandwich(a, b, d).unwrap();
            let j = TestFunction::Interval { a, b };
            for k in 0..=4000 {
                let y = a - 3.0 + (b - a + 6.0) * k as f64 / 4000.0;
                assert!(lo.eval(y) <= j.eval(y) && j.eval(y) <= hi.eval(y));
            }
            for f in [&lo, &hi] {
                assert!((f.integral() - (b - a)).abs() <= 4.0 * d.sqrt());
            }
        }
    }

    #[test]
    fn piecewise_fourier_matches_quadrature() {
        let psi = TestFunction::plateau(-0.3, 0.7, 0.04, PlateauSide::Upper).unwrap();
        for &tau in &[0.0, 0.1, 0.9, 3.0, 17.0] {
            let knots = [-0.7, -0.5, 0.9, 1.1];
            let piece = |f: &dyn Fn(f64) -> f64| -> f64 {
                knots.windows(2).map(|w| quadrature::double_exponential::integrate(f, w[0], w[1], 1e-14).integral).sum()
            };
            let re = piece(&|y| psi.eval(y) * (tau * y).cos());
            let im = piece(&|y| -psi.eval(y) * (tau * y).sin());
            let f = psi.fourier(tau);
            assert!((f.re - re).abs() < 1e-9 && (f.im - im).abs() < 1e-9, "tau={tau} {f} {re} {im}");
        }
    }

    #[test]
    fn mollified_gaussian_closed_form() {
        let g = TestFunction::Gaussian { center: 0.3, width: 0.8 };
        let m = g.clone().mollify(0.4).unwrap();
        let y = 0.9;
        let direct = quadrature::double_exponential::integrate(
            |z| g.eval(y - z) * (-(z / 0.4f64).powi(2)).exp() / (0.4 * SQRT_PI),
            -4.0,
            4.0,
            1e-14,
        )
        .integral;
        assert!((m.eval(y) - direct).abs() < 1e-12);
    }

    #[test]
    fn alpha_calc_example() {
        let r = alpha_calc(2.5, 0.5, 4.0).unwrap();
        assert!((r.g - 2.0).abs() < 1e-14);
        assert!((r.alpha_min - 30.0).abs() < 1e-12);
        assert!((r.eps_max - 1.0 / 60.0).abs() < 1e-15);
        assert!((r.r_min - 31.0).abs() < 1e-12);
        assert!(alpha_calc(2.0, 0.5, 4.0).is_err());
    }

    #[test]
    fn kolmogorov_of_exact_quantiles() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 1000;
        let atoms: Vec<(f64, f64)> =
            (0..n).map(|k| (normal.inverse_cdf((k as f64 + 0.5) / n as f64), 1.0 / n as f64)).collect();
        let (d, _) = kolmogorov_distance(&atoms, |z| normal.cdf(z));
        assert!(d <= 1.0 / n as f64, "d = {d}");
    }
}
