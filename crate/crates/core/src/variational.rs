//! Small-noise solution of the constrained optimization
//!
//! ```text
//! minimize λ subject to ∫ aΔ² + b(Δ′)² + c(Δ″)² = 1,
//! ```
//!
//! the classification of constraint weights by the characteristic
//! polynomial `aν + (1 − bν)y² + cνy⁴` at `y = 2πi`, and the one-parameter
//! family that appears when `a = 0`.
//!
//! Writing `Δ = Δ₀ + σ²Δ₁`, `ν = ν₁₀ + σ²ν₁₁` and
//! `𝒥 = aν₁₀ + (1 − bν₁₀)∂² + cν₁₀∂⁴`, the Euler–Lagrange equation
//! splits into
//!
//! ```text
//! 𝒥Δ₀ = 0
//! 𝒥Δ₁ = −½[(Δ₀′)³ + 3Δ₀Δ₀′Δ₀″] − ν₁₁(aΔ₀ − bΔ₀″ + cΔ₀⁗)
//! ```
//!
//! with `Δ₁` fixed by `∫ aΔ₀Δ₁ + bΔ₀′Δ₁′ + cΔ₀″Δ₁″ = 0` and `Δ₁(0) = 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{family_rate, family_rate_slope};
use crate::prc::{omega, ConstraintParams, NoiseAmplitude, Prc};
use crate::roots::{bisect, periodic_roots};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    NoPeriodicSolution,
    UniqueOptimum,
    SolutionFamily,
}

impl std::fmt::Display for CaseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CaseKind::NoPeriodicSolution => "no-periodic-solution",
            CaseKind::UniqueOptimum => "unique-optimum",
            CaseKind::SolutionFamily => "solution-family",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstraintCase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kind: CaseKind,
}

/// Root structure of `aν + (1 − bν)y² + cνy⁴`:
///
/// * `a > 0`: `y = ±2πi` fixes ν uniquely, one optimum;
/// * `a = 0, c > 0`: a double root at `y = 0` adds constants to the
///   sinusoid, leaving a family;
/// * `a = c = 0`: `(1 − bν)y² = 0` has no nonzero root.
pub fn classify_constraint_case(cp: &ConstraintParams) -> ConstraintCase {
    let kind = if cp.a > 0.0 {
        CaseKind::UniqueOptimum
    } else if cp.c > 0.0 {
        CaseKind::SolutionFamily
    } else {
        CaseKind::NoPeriodicSolution
    };
    ConstraintCase {
        a: cp.a,
        b: cp.b,
        c: cp.c,
        kind,
    }
}

/// [`classify_constraint_case`] on raw weights.
pub fn classify_weights(a: f64, b: f64, c: f64) -> Result<ConstraintCase> {
    Ok(classify_constraint_case(&ConstraintParams::new(a, b, c)?))
}

fn require_unique(cp: &ConstraintParams) -> Result<()> {
    let case = classify_constraint_case(cp);
    if case.kind != CaseKind::UniqueOptimum {
        return Err(Error::Inadmissible {
            a: cp.a,
            b: cp.b,
            c: cp.c,
            kind: case.kind,
        });
    }
    Ok(())
}

/// Leading-order multiplier `4π²/(a + 4bπ² + 16cπ⁴)`.
pub fn nu10(cp: &ConstraintParams) -> Result<f64> {
    require_unique(cp)?;
    Ok(omega(1).powi(2) / cp.fundamental_weight())
}

/// Which sign of the leading amplitude to report. Both give the same λ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    #[default]
    Negative,
    Positive,
}

/// Symbol of `𝒥` on harmonic `k`.
fn operator_symbol(cp: &ConstraintParams, nu: f64, k: usize) -> f64 {
    let w2 = omega(k).powi(2);
    cp.a * nu - (1.0 - cp.b * nu) * w2 + cp.c * nu * w2 * w2
}

/// `𝒥Δ` for the multiplier `nu`.
pub fn homogeneous_operator(prc: &Prc, cp: &ConstraintParams, nu: f64) -> Prc {
    let cos = (0..=prc.order())
        .map(|k| operator_symbol(cp, nu, k) * prc.harmonic(k).0)
        .collect::<Vec<_>>();
    let sin = (1..=prc.order())
        .map(|k| operator_symbol(cp, nu, k) * prc.harmonic(k).1)
        .collect::<Vec<_>>();
    Prc::from_fourier(&cos, &sin).expect("finite coefficients")
}

/// `aΔ − bΔ″ + cΔ⁗`, the ν-derivative of `𝒥` up to sign conventions.
fn multiplier_operator(prc: &Prc, cp: &ConstraintParams) -> Prc {
    let cos = (0..=prc.order())
        .map(|k| cp.weight(k) * prc.harmonic(k).0)
        .collect::<Vec<_>>();
    let sin = (1..=prc.order())
        .map(|k| cp.weight(k) * prc.harmonic(k).1)
        .collect::<Vec<_>>();
    Prc::from_fourier(&cos, &sin).expect("finite coefficients")
}

/// `(Δ′)³ + 3ΔΔ′Δ″`, the noise term of the Euler–Lagrange equation.
pub fn noise_nonlinearity(prc: &Prc) -> Prc {
    // cubic in Δ: degree 3N, so 8N + 8 points avoid aliasing
    let n = 8 * prc.effective_order().max(1) + 8;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let [d0, d1, d2] = prc.eval3(i as f64 / n as f64);
            d1 * d1 * d1 + 3.0 * d0 * d1 * d2
        })
        .collect();
    Prc::from_samples(&samples, 3 * prc.effective_order().max(1)).expect("nonempty grid")
}

/// Weighted inner product `∫ aXY + bX′Y′ + cX″Y″`.
fn constraint_inner(x: &Prc, y: &Prc, cp: &ConstraintParams) -> f64 {
    cp.a * x.inner(y, 0) + cp.b * x.inner(y, 1) + cp.c * x.inner(y, 2)
}

/// Perturbation series of the optimal PRC through order σ².
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationSolution {
    pub delta0: Prc,
    /// Order-σ² correction; `Δ = Δ₀ + σ²Δ₁`.
    pub delta1: Prc,
    pub nu10: f64,
    pub nu11: f64,
    pub c0: f64,
    pub c1: f64,
    /// `ν₂,₀ = Δ₀Δ₀″` on the grid `i/n`.
    pub nu20: Vec<f64>,
    pub sigma: f64,
    pub params: ConstraintParams,
    pub branch: Branch,
}

const NU20_GRID: usize = 256;

impl PerturbationSolution {
    /// `Δ₀ + σ²Δ₁`.
    pub fn total(&self) -> Prc {
        self.delta0.add(&self.delta1.scaled(self.sigma * self.sigma))
    }

    /// Multiplier through order σ².
    pub fn nu1(&self) -> f64 {
        self.nu10 + self.sigma * self.sigma * self.nu11
    }

    /// Coefficient `B` of `sin(2πθ)sin(4πθ)` in `Δ₁`.
    pub fn product_coefficient(&self) -> f64 {
        // sin x sin 2x = (cos x − cos 3x)/2
        -2.0 * self.delta1.harmonic(3).0
    }

    /// Amplitude of the product term in the total, `σ²B`.
    pub fn product_amplitude(&self) -> f64 {
        self.sigma * self.sigma * self.product_coefficient()
    }

    /// `sup |𝒥Δ₀|`.
    pub fn homogeneous_residual(&self) -> f64 {
        sup_norm(&homogeneous_operator(&self.delta0, &self.params, self.nu10))
    }

    /// `sup |𝒥Δ₁ + ½N(Δ₀) + ν₁₁(aΔ₀ − bΔ₀″ + cΔ₀⁗)|`.
    pub fn first_order_residual(&self) -> f64 {
        let lhs = homogeneous_operator(&self.delta1, &self.params, self.nu10);
        let rhs = first_order_forcing(&self.delta0)
            .add(&multiplier_operator(&self.delta0, &self.params).scaled(-self.nu11));
        sup_norm(&lhs.add(&rhs.scaled(-1.0)))
    }

    /// `|∫ aΔ₀² + b(Δ₀′)² + c(Δ₀″)² − 1|`.
    pub fn constraint0_residual(&self) -> f64 {
        (constraint_inner(&self.delta0, &self.delta0, &self.params) - 1.0).abs()
    }

    /// `|∫ aΔ₀Δ₁ + bΔ₀′Δ₁′ + cΔ₀″Δ₁″|`.
    pub fn constraint1_residual(&self) -> f64 {
        constraint_inner(&self.delta0, &self.delta1, &self.params).abs()
    }
}

fn sup_norm(prc: &Prc) -> f64 {
    let n = 8 * prc.effective_order().max(1) + 8;
    (0..n)
        .map(|i| prc.eval(i as f64 / n as f64, 0).abs())
        .fold(0.0, f64::max)
}

/// `−½[(Δ₀′)³ + 3Δ₀Δ₀′Δ₀″]`.
pub fn first_order_forcing(delta0: &Prc) -> Prc {
    noise_nonlinearity(delta0).scaled(-0.5)
}

/// The canonical (negative-amplitude) small-noise optimum.
pub fn optimal_prc_perturbative(cp: &ConstraintParams, sigma: NoiseAmplitude) -> Result<PerturbationSolution> {
    optimal_prc_perturbative_branch(cp, sigma, Branch::Negative)
}

pub fn optimal_prc_perturbative_branch(
    cp: &ConstraintParams,
    sigma: NoiseAmplitude,
    branch: Branch,
) -> Result<PerturbationSolution> {
    require_unique(cp)?;
    let nu10 = nu10(cp)?;
    let magnitude = (2.0 / cp.fundamental_weight()).sqrt();
    let c0 = match branch {
        Branch::Negative => -magnitude,
        Branch::Positive => magnitude,
    };
    let delta0 = Prc::from_fourier(&[0.0], &[c0])?;

    // ν₁₁ from solvability against both kernel directions of 𝒥
    let forcing = first_order_forcing(&delta0);
    let m = multiplier_operator(&delta0, cp);
    let nu11 = forcing.inner(&delta0, 0) / m.inner(&delta0, 0);
    let rhs = forcing.add(&m.scaled(-nu11));
    let (cos_k1, _) = rhs.harmonic(1);
    if cos_k1.abs() > 1e-12 * magnitude.powi(3) {
        return Err(Error::InvalidParameter(
            "first-order forcing is not orthogonal to the kernel".into(),
        ));
    }

    let order = rhs.order();
    let mut cos = vec![0.0; order + 1];
    let mut sin = vec![0.0; order];
    let scale = operator_symbol(cp, nu10, 0).abs().max(omega(1).powi(2));
    for k in 0..=order {
        if k == 1 {
            continue;
        }
        let (fc, fs) = rhs.harmonic(k);
        if fc == 0.0 && fs == 0.0 {
            continue;
        }
        let symbol = operator_symbol(cp, nu10, k);
        if symbol.abs() <= 1e-12 * scale * (1 + k * k) as f64 {
            return Err(Error::Resonant { a: cp.a, c: cp.c });
        }
        cos[k] = fc / symbol;
        if k > 0 {
            sin[k - 1] = fs / symbol;
        }
    }
    // Δ₁(0) = 0 fixes the cos 2πθ kernel component
    cos[1] = -(cos[0] + cos[2..].iter().sum::<f64>());
    let particular = Prc::from_fourier(&cos, &sin)?;
    // the sin 2πθ component from the first-order constraint
    let c1 = -constraint_inner(&delta0, &particular, cp) / (constraint_inner(&delta0, &delta0, cp) / c0);
    let delta1 = particular.add(&Prc::from_fourier(&[0.0], &[c1])?);

    let nu20 = (0..NU20_GRID)
        .map(|i| {
            let [d0, _, d2] = delta0.eval3(i as f64 / NU20_GRID as f64);
            d0 * d2
        })
        .collect();

    Ok(PerturbationSolution {
        delta0,
        delta1,
        nu10,
        nu11,
        c0,
        c1,
        nu20,
        sigma: sigma.get(),
        params: *cp,
        branch,
    })
}

fn check_family_parameter(k: f64) -> Result<()> {
    if !k.is_finite() || k.abs() > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "family parameter K = {k} must lie in [-1, 1]"
        )));
    }
    Ok(())
}

/// Member `K` of the `(0, b, 1)` family,
/// `[K(1 − cos 2πθ) − √(1 − K²) sin 2πθ] / √(2π²(b + 4π²))`.
pub fn family_prc(k: f64, b: f64) -> Result<Prc> {
    check_family_parameter(k)?;
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("weight b = {b} must be nonnegative")));
    }
    let norm = (2.0 * PI * PI * (b + 4.0 * PI * PI)).sqrt();
    let l = (1.0 - k * k).max(0.0).sqrt();
    Prc::from_fourier(&[k / norm, -k / norm], &[-l / norm])
}

const K_SCAN: usize = 200;

/// Minimizer over `K ∈ [−1, 1]` of the family's closed-form λ.
///
/// Interior critical points come from sign changes of the analytic slope
/// on a 201-point grid, refined by bisection; the endpoints are compared
/// as well.
pub fn family_optimal_k(b: f64, sigma: NoiseAmplitude) -> Result<f64> {
    if sigma.is_zero() {
        return Err(Error::InvalidParameter(
            "the family is degenerate at sigma = 0; K is undetermined".into(),
        ));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("weight b = {b} must be nonnegative")));
    }
    let grid: Vec<f64> = (0..=K_SCAN)
        .map(|i| (i as f64 - (K_SCAN / 2) as f64) / (K_SCAN / 2) as f64)
        .collect();
    let slope = |k: f64| family_rate_slope(k, b, sigma).expect("k in range");
    let mut candidates = vec![-1.0, 1.0];
    for w in grid.windows(2) {
        let (s0, s1) = (slope(w[0]), slope(w[1]));
        if s0 == 0.0 {
            candidates.push(w[0]);
        } else if s1 != 0.0 && s0.signum() != s1.signum() {
            candidates.push(bisect(&slope, w[0], w[1], s0));
        }
    }
    let rate = |k: f64| family_rate(k, b, sigma).expect("k in range");
    let best = candidates
        .into_iter()
        .min_by(|x, y| rate(*x).total_cmp(&rate(*y)).then(x.abs().total_cmp(&y.abs())))
        .expect("endpoints are candidates");
    Ok(best)
}

/// Extrema of the order-σ² optimum: zeros of its derivative in [0, 1).
pub fn extrema_locations(cp: &ConstraintParams, sigma: NoiseAmplitude) -> Result<Vec<f64>> {
    let total = optimal_prc_perturbative(cp, sigma)?.total();
    let d1 = total.derivative(1);
    let d2 = total.derivative(2);
    Ok(periodic_roots(|t| d1.eval(t, 0), |t| d2.eval(t, 0), 4096))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cp(a: f64, b: f64, c: f64) -> ConstraintParams {
        ConstraintParams::new(a, b, c).unwrap()
    }

    fn sigma(s: f64) -> NoiseAmplitude {
        NoiseAmplitude::new(s).unwrap()
    }

    #[test]
    fn multiplier_values() {
        assert_abs_diff_eq!(nu10(&cp(1.0, 0.0, 0.0)).unwrap(), 39.478_417_6, epsilon = 1e-6);
        assert_abs_diff_eq!(nu10(&cp(1.0, 1.0, 1.0)).unwrap(), 0.024_689_1, epsilon = 1e-7);
        assert_abs_diff_eq!(nu10(&cp(1.0, 1.0, 0.0)).unwrap(), 0.975_295_6, epsilon = 1e-6);
        assert!(matches!(
            nu10(&cp(0.0, 1.0, 1.0)),
            Err(Error::Inadmissible { kind: CaseKind::SolutionFamily, .. })
        ));
    }

    #[test]
    fn taxonomy_of_binary_weights() {
        let mut counts = std::collections::HashMap::new();
        for bits in 1..8u8 {
            let (a, b, c) = ((bits & 4) as f64 / 4.0, (bits & 2) as f64 / 2.0, (bits & 1) as f64);
            *counts.entry(classify_weights(a, b, c).unwrap().kind).or_insert(0) += 1;
        }
        assert_eq!(counts[&CaseKind::NoPeriodicSolution], 1);
        assert_eq!(counts[&CaseKind::UniqueOptimum], 4);
        assert_eq!(counts[&CaseKind::SolutionFamily], 2);
        assert_eq!(
            classify_weights(0.0, 1.0, 0.0).unwrap().kind,
            CaseKind::NoPeriodicSolution
        );
        assert!(classify_weights(0.0, 0.0, 0.0).is_err());
        assert_eq!(CaseKind::SolutionFamily.to_string(), "solution-family");
    }

    #[test]
    fn leading_order_amplitudes() {
        let s = optimal_prc_perturbative(&cp(1.0, 0.0, 0.0), sigma(0.0)).unwrap();
        assert_abs_diff_eq!(s.c0, -2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.total().eval(0.25, 0), -2f64.sqrt(), epsilon = 1e-14);
        let s = optimal_prc_perturbative(&cp(1.0, 1.0, 1.0), sigma(0.0)).unwrap();
        assert_abs_diff_eq!(s.c0, -0.035_366, epsilon = 1e-6);
    }

    #[test]
    fn first_order_matches_product_form() {
        for &(a, b, c) in &[(1.0, 0.0, 0.0), (1.0, 1.0, 0.0), (1.0, 0.0, 1.0), (1.0, 1.0, 1.0), (2.5, 0.3, 0.7)] {
            let p = cp(a, b, c);
            let s = optimal_prc_perturbative(&p, sigma(0.1)).unwrap();
            let w = p.fundamental_weight();
            let expected = 2f64.sqrt() * PI / (2.0 * (a - 144.0 * c * PI.powi(4)) * w.sqrt());
            assert_abs_diff_eq!(s.product_coefficient(), expected, epsilon = 1e-12 * expected.abs());
            for i in 0..50 {
                let t = i as f64 / 50.0;
                let x = 2.0 * PI * t;
                let closed = expected * x.sin() * (2.0 * x).sin();
                assert_abs_diff_eq!(s.delta1.eval(t, 0), closed, epsilon = 1e-13);
            }
            assert!(s.nu11.abs() < 1e-12 * s.nu10);
            assert!(s.c1.abs() < 1e-14);
            assert!(s.homogeneous_residual() < 1e-10);
            assert!(s.first_order_residual() < 1e-8);
            assert!(s.constraint0_residual() < 1e-10);
            assert!(s.constraint1_residual() < 1e-10);
        }
    }

    #[test]
    fn product_amplitude_example() {
        let s = optimal_prc_perturbative(&cp(1.0, 1.0, 0.0), sigma(0.3)).unwrap();
        assert_abs_diff_eq!(s.product_amplitude(), 0.031_424, epsilon = 1e-6);
    }

    #[test]
    fn branches_are_mirror_images() {
        let p = cp(1.0, 1.0, 0.0);
        let neg = optimal_prc_perturbative(&p, sigma(0.2)).unwrap().total();
        let pos = optimal_prc_perturbative_branch(&p, sigma(0.2), Branch::Positive)
            .unwrap()
            .total();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            assert_abs_diff_eq!(neg.eval(t, 0), -pos.eval(t, 0), epsilon = 1e-15);
        }
    }

    #[test]
    fn resonance_is_reported() {
        let p = cp(144.0 * PI.powi(4), 0.0, 1.0);
        assert!(matches!(
            optimal_prc_perturbative(&p, sigma(0.1)),
            Err(Error::Resonant { .. })
        ));
    }

    #[test]
    fn nu20_is_pointwise_product() {
        let s = optimal_prc_perturbative(&cp(1.0, 1.0, 1.0), sigma(0.05)).unwrap();
        for (i, v) in s.nu20.iter().enumerate() {
            let [d0, _, d2] = s.delta0.eval3(i as f64 / s.nu20.len() as f64);
            assert_eq!(*v, d0 * d2);
        }
    }

    #[test]
    fn family_members_are_normalized() {
        for &k in &[-1.0, -0.5, 0.0, 0.3, 1.0] {
            for &b in &[0.0, 1.0] {
                let p = family_prc(k, b).unwrap();
                assert_abs_diff_eq!(
                    crate::prc::constraint_norm(&p, &cp(0.0, b, 1.0)),
                    1.0,
                    epsilon = 1e-10
                );
            }
        }
        let p = family_prc(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.harmonic_amplitude(1), 0.035_377, epsilon = 1e-6);
        assert!(family_prc(1.2, 1.0).is_err());
    }

    #[test]
    fn family_minimizer_is_type_two() {
        for &b in &[0.0, 1.0] {
            for &s in &[0.05, 0.1, 0.3] {
                assert_eq!(family_optimal_k(b, sigma(s)).unwrap(), 0.0);
            }
        }
        assert!(family_optimal_k(1.0, sigma(0.0)).is_err());
    }

    #[test]
    fn unperturbed_extrema() {
        let e = extrema_locations(&cp(1.0, 1.0, 1.0), sigma(0.0)).unwrap();
        assert_eq!(e.len(), 2);
        assert_abs_diff_eq!(e[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1], 0.75, epsilon = 1e-14);
        let e = extrema_locations(&cp(1.0, 1.0, 1.0), sigma(0.3)).unwrap();
        assert!((e[0] - 0.25).abs() < 1e-5);
        let e = extrema_locations(&cp(1.0, 1.0, 0.0), sigma(0.3)).unwrap();
        assert!((e[0] - 0.25).abs() > 1e-3);
    }
}
