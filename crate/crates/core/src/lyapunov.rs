//! Lyapunov exponent of the synchronous state of two oscillators driven by
//! the same noise,
//!
//! ```text
//! λ = (σ²/2) ∫₀¹ Δ″(θ) Δ(θ) P(θ) dθ.
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::density::{flux_integral, StationaryDensity};
use crate::error::{Error, Result};
use crate::prc::{periodic_quadrature, NoiseAmplitude, Prc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovMethod {
    Analytic,
    UniformApprox,
    FamilyClosedForm,
    MonteCarlo,
}

impl std::fmt::Display for LyapunovMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LyapunovMethod::Analytic => "analytic",
            LyapunovMethod::UniformApprox => "uniform-approx",
            LyapunovMethod::FamilyClosedForm => "family-closed-form",
            LyapunovMethod::MonteCarlo => "monte-carlo",
        })
    }
}

/// A value of λ tagged with how it was obtained. Only Monte Carlo
/// estimates carry a standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    value: f64,
    method: LyapunovMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error: Option<f64>,
}

impl LyapunovEstimate {
    pub(crate) fn deterministic(value: f64, method: LyapunovMethod) -> Result<Self> {
        debug_assert_ne!(method, LyapunovMethod::MonteCarlo);
        if !value.is_finite() {
            return Err(Error::NonFinite("Lyapunov exponent"));
        }
        Ok(LyapunovEstimate {
            value,
            method,
            std_error: None,
        })
    }

    pub(crate) fn monte_carlo(value: f64, std_error: f64) -> Result<Self> {
        if !value.is_finite() || !std_error.is_finite() {
            return Err(Error::NonFinite("Monte Carlo Lyapunov estimate"));
        }
        Ok(LyapunovEstimate {
            value,
            method: LyapunovMethod::MonteCarlo,
            std_error: Some(std_error.max(0.0)),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn method(&self) -> LyapunovMethod {
        self.method
    }

    pub fn std_error(&self) -> Option<f64> {
        self.std_error
    }

    /// Whether `target` lies within `k` standard errors (Monte Carlo only).
    pub fn within(&self, target: f64, k: f64) -> bool {
        match self.std_error {
            Some(se) => (self.value - target).abs() <= k * se,
            None => self.value == target,
        }
    }
}

/// λ from a stationary density by periodic quadrature on the density grid.
pub fn lyapunov_analytic(
    prc: &Prc,
    sigma: NoiseAmplitude,
    d: &StationaryDensity,
) -> Result<LyapunovEstimate> {
    let n = d.len();
    // Δ″Δ has degree 2N; a coarser grid aliases it
    let needed = 4 * prc.effective_order() + 1;
    if n < needed {
        return Err(Error::GridMismatch(format!(
            "density grid of {n} points cannot resolve a PRC of order {} (need {needed})",
            prc.effective_order()
        )));
    }
    let integrand: Vec<f64> = d
        .values()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let [d0, _, d2] = prc.eval3(i as f64 / n as f64);
            d2 * d0 * p
        })
        .collect();
    let value = 0.5 * sigma.squared() * periodic_quadrature(&integrand)?;
    LyapunovEstimate::deterministic(value, LyapunovMethod::Analytic)
}

/// The `P ≡ 1` approximation `-(σ²/2)∫(Δ′)²`, exact from the coefficients.
pub fn lyapunov_uniform_approx(prc: &Prc, sigma: NoiseAmplitude) -> LyapunovEstimate {
    let value = -0.5 * sigma.squared() * prc.mean_square(1);
    LyapunovEstimate::deterministic(value, LyapunovMethod::UniformApprox)
        .expect("finite coefficients give a finite exponent")
}

/// Coefficients of λ in powers of σ² for the fourth-order density:
///
/// ```text
/// λ = (σ²/2)[c₀ + (σ²/2)c₂ + (σ⁴/4)c₄]
/// c₀ = ∫Δ″Δ = −∫(Δ′)²,  c₂ = ∫Δ″Δ·ΔΔ′,  c₄ = ∫Δ″Δ[2Δ²Δ′² + Δ³Δ″ + ∫(ΔΔ′)²]
/// ```
///
/// Comparing curves order by order avoids the cancellation of
/// subtracting two nearly equal exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovSeries {
    pub c0: f64,
    pub c2: f64,
    pub c4: f64,
}

impl LyapunovSeries {
    pub fn of(prc: &Prc) -> Self {
        // the c₄ integrand has degree 6N
        let n = 8 * prc.effective_order().max(1) + 8;
        let flux = flux_integral(prc);
        let mut c2 = Vec::with_capacity(n);
        let mut c4 = Vec::with_capacity(n);
        for i in 0..n {
            let [d0, d1, d2] = prc.eval3(i as f64 / n as f64);
            let base = d2 * d0;
            c2.push(base * d0 * d1);
            c4.push(base * (2.0 * (d0 * d1).powi(2) + d0.powi(3) * d2 + flux));
        }
        let q = |v: &[f64]| periodic_quadrature(v).expect("nonempty grid");
        LyapunovSeries {
            c0: -prc.mean_square(1),
            c2: q(&c2),
            c4: q(&c4),
        }
    }

    pub fn value(&self, sigma: NoiseAmplitude) -> f64 {
        let s2 = sigma.squared();
        0.5 * s2 * (self.c0 + 0.5 * s2 * self.c2 + 0.25 * s2 * s2 * self.c4)
    }

    /// `self − other` at `sigma`, summed from the per-order differences.
    pub fn difference(&self, other: &LyapunovSeries, sigma: NoiseAmplitude) -> f64 {
        let s2 = sigma.squared();
        0.5 * s2
            * ((self.c0 - other.c0)
                + 0.5 * s2 * (self.c2 - other.c2)
                + 0.25 * s2 * s2 * (self.c4 - other.c4))
    }
}

fn check_family_parameter(k: f64) -> Result<()> {
    if !k.is_finite() || k.abs() > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "family parameter K = {k} must lie in [-1, 1]"
        )));
    }
    Ok(())
}

/// λ of the `(a, c) = (0, 1)` family in units of σ²/2:
///
/// ```text
/// -1/(b + 4π²) + (σ⁴/4)(4K⁴ + 10K² + 1) / (4π²(b + 4π²)³)
/// ```
///
/// The physical exponent is `(σ²/2)` times this; see [`lyapunov_family`].
pub fn family_rate(k: f64, b: f64, sigma: NoiseAmplitude) -> Result<f64> {
    check_family_parameter(k)?;
    let s = b + 4.0 * PI * PI;
    let k2 = k * k;
    let poly = 4.0 * k2 * k2 + 10.0 * k2 + 1.0;
    Ok(-1.0 / s + 0.25 * sigma.squared().powi(2) * poly / (4.0 * PI * PI * s.powi(3)))
}

/// `∂/∂K` of [`family_rate`].
pub fn family_rate_slope(k: f64, b: f64, sigma: NoiseAmplitude) -> Result<f64> {
    check_family_parameter(k)?;
    let s = b + 4.0 * PI * PI;
    let dpoly = 16.0 * k.powi(3) + 20.0 * k;
    Ok(0.25 * sigma.squared().powi(2) * dpoly / (4.0 * PI * PI * s.powi(3)))
}

/// Closed-form λ for the `(0, b, 1)` family member with parameter `K`,
/// through order σ⁶.
pub fn lyapunov_family(k: f64, b: f64, sigma: NoiseAmplitude) -> Result<LyapunovEstimate> {
    let value = 0.5 * sigma.squared() * family_rate(k, b, sigma)?;
    LyapunovEstimate::deterministic(value, LyapunovMethod::FamilyClosedForm)
}
