//! Period-1 phase-resetting curves in a truncated Fourier basis.
//!
//! A curve is stored as
//!
//! ```text
//! Δ(θ) = α₀ + Σₖ αₖ cos(2πkθ) + βₖ sin(2πkθ),   k = 1..N
//! ```
//!
//! Derivatives of any order are exact term-by-term, and every quadratic
//! functional that appears in the optimization problem is evaluated from the
//! coefficients by Parseval's identity.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Default truncation order for curves produced by projection.
pub const DEFAULT_ORDER: usize = 64;

/// Default number of grid points for sampled quadrature.
pub const DEFAULT_GRID: usize = 512;

/// Angular frequency of harmonic `k` on the unit circle.
#[inline]
pub fn omega(k: usize) -> f64 {
    TWO_PI * k as f64
}

/// A smooth period-1 phase-resetting curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PrcJson", into = "PrcJson")]
pub struct Prc {
    // cos[k] multiplies cos(2πkθ), k = 0..=N
    cos: Vec<f64>,
    // sin[k-1] multiplies sin(2πkθ), k = 1..=N
    sin: Vec<f64>,
}

/// Wire form: `{"cos": [α₀, α₁, ...], "sin": [β₁, β₂, ...]}`.
#[derive(Serialize, Deserialize)]
struct PrcJson {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TryFrom<PrcJson> for Prc {
    type Error = Error;
    fn try_from(j: PrcJson) -> Result<Self> {
        Prc::from_fourier(&j.cos, &j.sin)
    }
}

impl From<Prc> for PrcJson {
    fn from(p: Prc) -> Self {
        PrcJson { cos: p.cos, sin: p.sin }
    }
}

impl Prc {
    /// Builds a curve from cosine coefficients `α₀, α₁, …` and sine
    /// coefficients `β₁, β₂, …`. Shorter lists are zero-padded to a common
    /// truncation order `N = max(len(cos) - 1, len(sin), 1)`.
    pub fn from_fourier(cos: &[f64], sin: &[f64]) -> Result<Self> {
        if cos.iter().chain(sin).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Fourier coefficients"));
        }
        let order = cos.len().saturating_sub(1).max(sin.len()).max(1);
        let mut c = vec![0.0; order + 1];
        let mut s = vec![0.0; order];
        c[..cos.len()].copy_from_slice(cos);
        s[..sin.len()].copy_from_slice(sin);
        Ok(Prc { cos: c, sin: s })
    }

    pub fn zero(order: usize) -> Self {
        let order = order.max(1);
        Prc {
            cos: vec![0.0; order + 1],
            sin: vec![0.0; order],
        }
    }

    /// `amplitude · sin(2πθ)`.
    pub fn sine(amplitude: f64) -> Self {
        Prc {
            cos: vec![0.0, 0.0],
            sin: vec![amplitude],
        }
    }

    /// `amplitude · (1 - cos(2πθ))`.
    pub fn one_minus_cos(amplitude: f64) -> Self {
        Prc {
            cos: vec![amplitude, -amplitude],
            sin: vec![0.0],
        }
    }

    /// Canonical Type II curve with unit L2 norm: `-√2 sin(2πθ)`.
    pub fn type2() -> Self {
        Self::sine(-std::f64::consts::SQRT_2)
    }

    /// Canonical Type I curve with unit L2 norm: `√(2/3) (1 - cos(2πθ))`.
    pub fn type1() -> Self {
        Self::one_minus_cos((2.0f64 / 3.0).sqrt())
    }

    /// Truncation order N.
    pub fn order(&self) -> usize {
        self.sin.len()
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// Cosine and sine coefficient of harmonic `k` (`β₀ = 0`).
    pub fn harmonic(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            return (self.cos[0], 0.0);
        }
        if k > self.order() {
            return (0.0, 0.0);
        }
        (self.cos[k], self.sin[k - 1])
    }

    /// Euclidean amplitude `√(αₖ² + βₖ²)` of harmonic `k`.
    pub fn harmonic_amplitude(&self, k: usize) -> f64 {
        let (a, b) = self.harmonic(k);
        a.hypot(b)
    }

    /// Highest harmonic with a nonzero coefficient (0 for constants).
    pub fn effective_order(&self) -> usize {
        (1..=self.order())
            .rev()
            .find(|&k| self.cos[k] != 0.0 || self.sin[k - 1] != 0.0)
            .unwrap_or(0)
    }

    /// Evaluates the `order`-th derivative at `theta`.
    pub fn eval(&self, theta: f64, order: usize) -> f64 {
        let n = self.effective_order();
        let x = TWO_PI * (theta - theta.floor());
        let (s1, c1) = x.sin_cos();
        let mut acc = if order == 0 { self.cos[0] } else { 0.0 };
        let (mut ck, mut sk) = (c1, s1);
        for k in 1..=n {
            let w = omega(k).powi(order as i32);
            let (a, b) = (self.cos[k], self.sin[k - 1]);
            // d^m/dθ^m of a cos + b sin rotates (a, b) by m quarter turns
            let term = match order % 4 {
                0 => a * ck + b * sk,
                1 => b * ck - a * sk,
                2 => -a * ck - b * sk,
                _ => -b * ck + a * sk,
            };
            acc += w * term;
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        acc
    }

    /// `(Δ, Δ′, Δ″)` at `theta` in one pass over the harmonics.
    #[inline]
    pub fn eval3(&self, theta: f64) -> [f64; 3] {
        let n = self.effective_order();
        let x = TWO_PI * (theta - theta.floor());
        let (s1, c1) = x.sin_cos();
        let mut d0 = self.cos[0];
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        let (mut ck, mut sk) = (c1, s1);
        for k in 1..=n {
            let w = omega(k);
            let (a, b) = (self.cos[k], self.sin[k - 1]);
            let even = a * ck + b * sk;
            d0 += even;
            d1 += w * (b * ck - a * sk);
            d2 -= w * w * even;
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        [d0, d1, d2]
    }

    /// The exact `order`-th derivative as a new curve.
    pub fn derivative(&self, order: usize) -> Prc {
        let mut out = Prc::zero(self.order());
        if order == 0 {
            return self.clone();
        }
        for k in 1..=self.order() {
            let w = omega(k).powi(order as i32);
            let (a, b) = (self.cos[k], self.sin[k - 1]);
            let (na, nb) = match order % 4 {
                0 => (a, b),
                1 => (b, -a),
                2 => (-a, -b),
                _ => (-b, a),
            };
            out.cos[k] = w * na;
            out.sin[k - 1] = w * nb;
        }
        out
    }

    /// Samples the `order`-th derivative on the uniform grid `θᵢ = i/n`.
    pub fn sample(&self, n: usize, order: usize) -> Vec<f64> {
        (0..n).map(|i| self.eval(i as f64 / n as f64, order)).collect()
    }

    /// Projects uniform-grid samples `f(i/n)` onto harmonics `0..=max_order`.
    ///
    /// Harmonics at or above the Nyquist index are discarded.
    pub fn from_samples(samples: &[f64], max_order: usize) -> Result<Prc> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::Empty("samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("samples"));
        }
        let spectrum = forward_dft(samples);
        let order = max_order.max(1);
        let mut out = Prc::zero(order);
        let inv = 1.0 / n as f64;
        out.cos[0] = spectrum[0].re * inv;
        for k in 1..=order {
            if 2 * k >= n {
                break;
            }
            out.cos[k] = 2.0 * spectrum[k].re * inv;
            out.sin[k - 1] = -2.0 * spectrum[k].im * inv;
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Prc {
        Prc {
            cos: self.cos.iter().map(|v| v * factor).collect(),
            sin: self.sin.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise sum; the result has the larger of the two orders.
    pub fn add(&self, other: &Prc) -> Prc {
        let order = self.order().max(other.order());
        let mut out = Prc::zero(order);
        for k in 0..=order {
            let (a1, b1) = self.harmonic(k);
            let (a2, b2) = other.harmonic(k);
            out.cos[k] = a1 + a2;
            if k > 0 {
                out.sin[k - 1] = b1 + b2;
            }
        }
        out
    }

    /// The translated curve `θ ↦ Δ(θ + shift)`.
    pub fn shifted(&self, shift: f64) -> Prc {
        let mut out = self.clone();
        for k in 1..=self.order() {
            let (s, c) = (omega(k) * shift).sin_cos();
            let (a, b) = (self.cos[k], self.sin[k - 1]);
            out.cos[k] = a * c + b * s;
            out.sin[k - 1] = b * c - a * s;
        }
        out
    }

    /// Same curve with the truncation order changed (zero-padded or cut).
    pub fn with_order(&self, order: usize) -> Prc {
        let order = order.max(1);
        let mut out = Prc::zero(order);
        for k in 0..=order.min(self.order()) {
            out.cos[k] = self.cos[k];
            if k > 0 {
                out.sin[k - 1] = self.sin[k - 1];
            }
        }
        out
    }

    /// `∫₀¹ Δ⁽ᵐ⁾ Γ⁽ᵐ⁾ dθ` by Parseval.
    pub fn inner(&self, other: &Prc, derivative: usize) -> f64 {
        let n = self.order().min(other.order());
        let mut acc = if derivative == 0 {
            self.cos[0] * other.cos[0]
        } else {
            0.0
        };
        for k in 1..=n {
            let w = omega(k).powi(2 * derivative as i32);
            acc += 0.5 * w * (self.cos[k] * other.cos[k] + self.sin[k - 1] * other.sin[k - 1]);
        }
        acc
    }

    /// `∫₀¹ (Δ⁽ᵐ⁾)² dθ` by Parseval.
    pub fn mean_square(&self, derivative: usize) -> f64 {
        self.inner(self, derivative)
    }

    /// Energy outside the fundamental relative to the fundamental,
    /// `‖Δ - α₀ - (first harmonic)‖₂ / ‖first harmonic‖₂`.
    pub fn overtone_ratio(&self) -> f64 {
        let fundamental = self.harmonic_amplitude(1);
        let rest: f64 = (2..=self.order())
            .map(|k| self.harmonic_amplitude(k).powi(2))
            .sum();
        rest.sqrt() / fundamental
    }
}

/// Forward DFT `F_k = Σ f_j e^{-2πijk/n}` of real samples.
pub(crate) fn forward_dft(samples: &[f64]) -> Vec<Complex<f64>> {
    let n = samples.len();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf
}

/// Spectral derivative of uniform-grid samples of a periodic function.
pub fn spectral_derivative(samples: &[f64]) -> Result<Vec<f64>> {
    let n = samples.len();
    let p = Prc::from_samples(samples, n.saturating_sub(1) / 2)?;
    Ok(p.sample(n, 1))
}

/// Weights of the quadratic constraint `∫ aΔ² + b(Δ′)² + c(Δ″)² dθ = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ConstraintParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c)] {
            if !v.is_finite() {
                return Err(Error::NonFinite("constraint weights"));
            }
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "constraint weight {name} = {v} is negative"
                )));
            }
        }
        if a == 0.0 && b == 0.0 && c == 0.0 {
            return Err(Error::InvalidParameter(
                "constraint weights are all zero".into(),
            ));
        }
        Ok(ConstraintParams { a, b, c })
    }

    /// Symbol of the quadratic form on harmonic `k`: `a + bω² + cω⁴`.
    pub fn weight(&self, k: usize) -> f64 {
        let w2 = omega(k).powi(2);
        self.a + self.b * w2 + self.c * w2 * w2
    }

    /// `S = a + 4π²b + 16π⁴c`, the weight of the fundamental.
    pub fn fundamental_weight(&self) -> f64 {
        self.weight(1)
    }

    /// Whether the Euler–Lagrange equations admit a nontrivial periodic
    /// solution for these weights.
    pub fn admits_periodic_solution(&self) -> bool {
        self.a > 0.0 || self.c > 0.0
    }
}

/// Noise amplitude σ ≥ 0. Zero is the deterministic limit.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseAmplitude(f64);

impl NoiseAmplitude {
    /// Above this the perturbative routines are outside their range.
    pub const PERTURBATIVE_LIMIT: f64 = 0.3;

    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::NonFinite("sigma"));
        }
        if sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} is negative")));
        }
        Ok(NoiseAmplitude(sigma))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn squared(self) -> f64 {
        self.0 * self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// `∫₀¹ aΔ² + b(Δ′)² + c(Δ″)² dθ`, exact from the coefficients.
pub fn constraint_norm(prc: &Prc, cp: &ConstraintParams) -> f64 {
    let mut acc = cp.a * prc.cos[0] * prc.cos[0];
    for k in 1..=prc.order() {
        let (a, b) = prc.harmonic(k);
        acc += 0.5 * cp.weight(k) * (a * a + b * b);
    }
    acc
}

/// Rectangle rule on the uniform periodic grid `θᵢ = i/n`.
pub fn periodic_quadrature(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("quadrature samples"));
    }
    Ok(neumaier_sum(samples.iter().copied()) / samples.len() as f64)
}

/// Compensated summation.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Uniform grid `i/n`, `i = 0..n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn from_fourier_examples() {
        let p = Prc::from_fourier(&[0.0], &[-1.0]).unwrap();
        assert_eq!(p.order(), 1);
        assert_abs_diff_eq!(p.eval(0.25, 0), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.eval(0.0, 1), -TWO_PI, epsilon = 1e-12);

        let p = Prc::from_fourier(&[1.0, -1.0], &[]).unwrap();
        assert_abs_diff_eq!(p.eval(0.5, 0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.eval(0.0, 2), 4.0 * PI * PI, epsilon = 1e-12);

        let p = Prc::from_fourier(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(p.order(), 2);
        assert_abs_diff_eq!(p.eval(0.0, 2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(0.0, 1), 4.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(0.1, 0), (0.4 * PI).sin(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Prc::from_fourier(&[f64::NAN], &[1.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(Prc::from_fourier(&[0.0], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn eval_matches_eval3_and_derivative() {
        let p = Prc::from_fourier(&[0.3, -0.2, 0.1], &[0.5, -0.25, 0.05]).unwrap();
        for &t in &[0.0, 0.123, 0.5, 0.87, -3.2] {
            let d = p.eval3(t);
            for m in 0..3 {
                assert_abs_diff_eq!(d[m], p.eval(t, m), epsilon = 1e-10);
                assert_abs_diff_eq!(p.derivative(m).eval(t, 0), p.eval(t, m), epsilon = 1e-9);
            }
            assert_abs_diff_eq!(
                p.derivative(1).derivative(3).eval(t, 0),
                p.eval(t, 4),
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn constraint_norm_examples() {
        let s2 = std::f64::consts::SQRT_2;
        let l2 = ConstraintParams::new(1.0, 0.0, 0.0).unwrap();
        let h1 = ConstraintParams::new(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(constraint_norm(&Prc::sine(-s2), &l2), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(constraint_norm(&Prc::sine(-1.0), &l2), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            constraint_norm(&Prc::sine(-1.0), &h1),
            2.0 * PI * PI,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(constraint_norm(&Prc::type1(), &l2), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn quadrature_examples() {
        assert_eq!(periodic_quadrature(&[1.0; 16]).unwrap(), 1.0);
        let s: Vec<f64> = uniform_grid(16).iter().map(|t| (TWO_PI * t).sin()).collect();
        assert_abs_diff_eq!(periodic_quadrature(&s).unwrap(), 0.0, epsilon = 1e-15);
        let s: Vec<f64> = uniform_grid(64)
            .iter()
            .map(|t| (TWO_PI * t).sin().powi(2))
            .collect();
        assert_abs_diff_eq!(periodic_quadrature(&s).unwrap(), 0.5, epsilon = 1e-12);
        assert!(matches!(periodic_quadrature(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn samples_round_trip() {
        let p = Prc::from_fourier(&[0.3, -0.2, 0.1], &[0.5, -0.25, 0.05]).unwrap();
        let q = Prc::from_samples(&p.sample(32, 0), 3).unwrap();
        for k in 0..=3 {
            let (a1, b1) = p.harmonic(k);
            let (a2, b2) = q.harmonic(k);
            assert_abs_diff_eq!(a1, a2, epsilon = 1e-14);
            assert_abs_diff_eq!(b1, b2, epsilon = 1e-14);
        }
    }

    #[test]
    fn shift_translates() {
        let p = Prc::from_fourier(&[0.3, -0.2, 0.1], &[0.5, -0.25, 0.05]).unwrap();
        let q = p.shifted(0.17);
        for &t in &[0.0, 0.3, 0.71] {
            assert_abs_diff_eq!(q.eval(t, 0), p.eval(t + 0.17, 0), epsilon = 1e-13);
        }
    }

    #[test]
    fn json_wire_format() {
        let p: Prc = serde_json::from_str(r#"{"cos":[0],"sin":[-1]}"#).unwrap();
        assert_eq!(p, Prc::sine(-1.0));
        let s = serde_json::to_string(&Prc::type2()).unwrap();
        assert!(s.starts_with(r#"{"cos":[0.0,0.0],"sin":[-1.414"#));
        assert!(serde_json::from_str::<Prc>(r#"{"cos":[1e999],"sin":[]}"#).is_err());
    }

    #[test]
    fn constraint_params_validation() {
        assert!(ConstraintParams::new(0.0, 0.0, 0.0).is_err());
        assert!(ConstraintParams::new(-1.0, 0.0, 1.0).is_err());
        assert!(!ConstraintParams::new(0.0, 1.0, 0.0).unwrap().admits_periodic_solution());
        assert!(ConstraintParams::new(0.0, 1.0, 1.0).unwrap().admits_periodic_solution());
        assert!(NoiseAmplitude::new(-0.1).is_err());
        assert!(NoiseAmplitude::new(f64::NAN).is_err());
    }
}
