//! Stationary phase density `P(θ)` and probability flux `J` of
//!
//! ```text
//! dθ = [1 + (σ²/2) Δ′Δ] dt + σ Δ dW
//! ```
//!
//! The stationary Fokker–Planck equation integrates once to
//!
//! ```text
//! -J = -P + (σ²/2) Δ (ΔP)′,   P(0) = P(1),   ∫₀¹ P = 1.
//! ```
//!
//! Two solvers are provided. [`density_perturbative`] is the small-σ series
//! through σ⁴. [`density_exact`] solves the singular linear equation
//! directly: on every arc between consecutive zeros of Δ the bounded
//! solution is
//!
//! ```text
//! P(x) = (2J/σ²) ∫ₓᵇ exp(z(t) - z(x)) / (Δ(x) Δ(t)) dt,
//! z(x) = -(2/σ²) ∫ ds / Δ²(s),
//! ```
//!
//! and `P = J` at the zeros themselves. `z` diverges at both ends of an
//! arc, so it is only ever exponentiated as the difference `z(t) - z(x)`,
//! which is nonpositive on the integration range. When Δ has no zeros the
//! same formula holds with `b = +∞`, following Δ around the circle.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::prc::{periodic_quadrature, spectral_derivative, uniform_grid, NoiseAmplitude, Prc, DEFAULT_GRID};
use crate::roots::{circle_distance, golden_min, periodic_roots};

/// Points in the sign-change scan used to locate zeros of Δ.
pub const ROOT_SCAN: usize = 4096;

/// Zeros closer than this are treated as a degenerate (tangent) pair.
pub const ROOT_SEPARATION: f64 = 1e-6;

/// Half-width of the interpolation buffer around each zero of Δ.
pub const ROOT_BUFFER: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMethod {
    Perturbative,
    Exact,
    Empirical,
}

impl std::fmt::Display for DensityMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DensityMethod::Perturbative => "perturbative",
            DensityMethod::Exact => "exact",
            DensityMethod::Empirical => "empirical",
        })
    }
}

/// Truncation order of the small-noise series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationOrder {
    /// `P = 1 + (σ²/2)ΔΔ′`, `J = 1`.
    Second,
    /// Full series through σ⁴.
    Fourth,
}

impl TryFrom<u32> for PerturbationOrder {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        match v {
            2 => Ok(PerturbationOrder::Second),
            4 => Ok(PerturbationOrder::Fourth),
            _ => Err(Error::InvalidParameter(format!(
                "perturbation order must be 2 or 4, got {v}"
            ))),
        }
    }
}

/// A density sampled on the uniform grid `θᵢ = i/n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryDensity {
    values: Vec<f64>,
    flux: f64,
    method: DensityMethod,
    sigma: f64,
}

impl StationaryDensity {
    pub fn new(values: Vec<f64>, flux: f64, method: DensityMethod, sigma: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("density values"));
        }
        if values.iter().any(|v| !v.is_finite()) || !flux.is_finite() {
            return Err(Error::NonFinite("density"));
        }
        Ok(StationaryDensity {
            values,
            flux,
            method,
            sigma,
        })
    }

    /// `P ≡ 1`, `J = 1`: the zero-noise density.
    pub fn uniform(n: usize) -> Self {
        StationaryDensity {
            values: vec![1.0; n.max(1)],
            flux: 1.0,
            method: DensityMethod::Perturbative,
            sigma: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn theta(&self) -> Vec<f64> {
        uniform_grid(self.values.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    pub fn method(&self) -> DensityMethod {
        self.method
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn integral(&self) -> f64 {
        periodic_quadrature(&self.values).expect("density is never empty")
    }

    /// Sup-norm distance to another density on the same grid.
    pub fn sup_distance(&self, other: &StationaryDensity) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "{} vs {} grid points",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV with header `theta,P`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "theta,P")?;
        for (t, p) in self.theta().iter().zip(&self.values) {
            writeln!(w, "{t},{p}")?;
        }
        Ok(())
    }

    /// Sidecar object `{"J": .., "method": .., "sigma": ..}`.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "J": self.flux,
            "method": self.method,
            "sigma": self.sigma,
        })
    }
}

/// `∫₀¹ (ΔΔ′)² dθ`, exact for the truncated series.
pub fn flux_integral(prc: &Prc) -> f64 {
    // (ΔΔ′)² is a trigonometric polynomial of degree 4N
    let n = 8 * prc.effective_order().max(1) + 8;
    let samples: Vec<f64> = uniform_grid(n)
        .iter()
        .map(|&t| {
            let [d0, d1, _] = prc.eval3(t);
            (d0 * d1).powi(2)
        })
        .collect();
    periodic_quadrature(&samples).expect("nonempty grid")
}

/// Flux of the small-noise series: `1` at second order,
/// `1 + (σ⁴/4)∫(ΔΔ′)²` at fourth.
pub fn perturbative_flux(prc: &Prc, sigma: NoiseAmplitude, order: PerturbationOrder) -> f64 {
    match order {
        PerturbationOrder::Second => 1.0,
        PerturbationOrder::Fourth => 1.0 + 0.25 * sigma.squared().powi(2) * flux_integral(prc),
    }
}

/// Small-noise series on the default grid.
pub fn density_perturbative(
    prc: &Prc,
    sigma: NoiseAmplitude,
    order: PerturbationOrder,
) -> StationaryDensity {
    density_perturbative_on_grid(prc, sigma, order, DEFAULT_GRID)
        .expect("default grid is nonempty")
}

/// Small-noise series on an `n`-point grid:
///
/// ```text
/// P = 1 + (σ²/2)ΔΔ′ + (σ⁴/4)[2Δ²Δ′² + Δ³Δ″ + ∫(ΔΔ′)²]
/// ```
pub fn density_perturbative_on_grid(
    prc: &Prc,
    sigma: NoiseAmplitude,
    order: PerturbationOrder,
    n: usize,
) -> Result<StationaryDensity> {
    if n == 0 {
        return Err(Error::Empty("density grid"));
    }
    if sigma.get() > NoiseAmplitude::PERTURBATIVE_LIMIT {
        warn!(
            "sigma = {} is outside the small-noise range of the perturbative density",
            sigma.get()
        );
    }
    let s2 = sigma.squared();
    let s4 = s2 * s2;
    let integral = match order {
        PerturbationOrder::Second => 0.0,
        PerturbationOrder::Fourth => flux_integral(prc),
    };
    let values = uniform_grid(n)
        .iter()
        .map(|&t| {
            let [d0, d1, d2] = prc.eval3(t);
            let first = 0.5 * s2 * d0 * d1;
            match order {
                PerturbationOrder::Second => 1.0 + first,
                PerturbationOrder::Fourth => {
                    let dd = d0 * d1;
                    1.0 + first + 0.25 * s4 * (2.0 * dd * dd + d0.powi(3) * d2 + integral)
                }
            }
        })
        .collect();
    StationaryDensity::new(
        values,
        perturbative_flux(prc, sigma, order),
        DensityMethod::Perturbative,
        sigma.get(),
    )
}

/// An arc of the circle on which Δ keeps one sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignArc {
    /// Left end; a zero of Δ, or 0 when Δ has no zeros.
    pub start: f64,
    /// Right end, `start < end ≤ start + 1`; may exceed 1 for the arc
    /// that wraps through θ = 0.
    pub end: f64,
    pub sign: f64,
}

/// Zeros of Δ on [0, 1) and the arcs between them.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalDecomposition {
    roots: Vec<f64>,
    arcs: Vec<SignArc>,
}

impl IntervalDecomposition {
    pub fn of(prc: &Prc) -> Result<Self> {
        Self::with_scan(prc, ROOT_SCAN)
    }

    pub fn with_scan(prc: &Prc, scan: usize) -> Result<Self> {
        let grid = uniform_grid(scan);
        let vals: Vec<[f64; 3]> = grid.iter().map(|&t| prc.eval3(t)).collect();
        let max_abs = vals.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
        let max_slope = vals.iter().map(|v| v[1].abs()).fold(0.0, f64::max);
        if max_abs == 0.0 {
            return Err(Error::DegenerateRoot {
                theta: 0.0,
                reason: "the PRC vanishes identically".into(),
            });
        }

        let roots = periodic_roots(|t| prc.eval(t, 0), |t| prc.eval(t, 1), scan);

        for &r in &roots {
            let slope = prc.eval(r, 1).abs();
            if slope <= 1e-6 * max_slope {
                return Err(Error::DegenerateRoot {
                    theta: r,
                    reason: format!("tangent zero (|Δ′| = {slope:e})"),
                });
            }
        }
        for (i, &r) in roots.iter().enumerate() {
            let next = roots[(i + 1) % roots.len()];
            if roots.len() > 1 && circle_distance(r, next) < ROOT_SEPARATION {
                return Err(Error::DegenerateRoot {
                    theta: r,
                    reason: format!("zeros at {r} and {next} are closer than {ROOT_SEPARATION}"),
                });
            }
        }

        // near-tangent approaches to zero that do not change sign
        let h = 1.0 / scan as f64;
        for i in 0..scan {
            let prev = vals[(i + scan - 1) % scan][0].abs();
            let here = vals[i][0].abs();
            let next = vals[(i + 1) % scan][0].abs();
            if here > prev || here > next {
                continue;
            }
            let t = grid[i];
            if roots.iter().any(|&r| circle_distance(r, t) <= 2.0 * h) {
                continue;
            }
            let (tmin, fmin) = golden_min(|x| prc.eval(x, 0).abs(), t - h, t + h, 80);
            if fmin <= 1e-6 * max_abs {
                return Err(Error::DegenerateRoot {
                    theta: tmin.rem_euclid(1.0),
                    reason: format!("near-tangent approach to zero (|Δ| = {fmin:e})"),
                });
            }
        }

        let arcs = if roots.is_empty() {
            vec![SignArc {
                start: 0.0,
                end: 1.0,
                sign: vals[0][0].signum(),
            }]
        } else {
            (0..roots.len())
                .map(|i| {
                    let start = roots[i];
                    let end = if i + 1 < roots.len() {
                        roots[i + 1]
                    } else {
                        roots[0] + 1.0
                    };
                    SignArc {
                        start,
                        end,
                        sign: prc.eval(0.5 * (start + end), 0).signum(),
                    }
                })
                .collect()
        };
        Ok(IntervalDecomposition { roots, arcs })
    }

    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    pub fn arcs(&self) -> &[SignArc] {
        &self.arcs
    }

    /// First zero strictly after `x` going forward around the circle,
    /// unwrapped so that it exceeds `x`; `None` if Δ has no zeros.
    pub fn next_root_after(&self, x: f64) -> Option<f64> {
        if self.roots.is_empty() {
            return None;
        }
        let base = x.floor();
        let frac = x - base;
        let r = self
            .roots
            .iter()
            .copied()
            .find(|&r| r > frac)
            .unwrap_or(self.roots[0] + 1.0);
        Some(base + r)
    }

    /// Nearest zero to `x` and its signed offset `x - root` in (-½, ½].
    pub fn nearest_root(&self, x: f64) -> Option<(f64, f64)> {
        self.roots
            .iter()
            .map(|&r| {
                let mut d = (x - r).rem_euclid(1.0);
                if d > 0.5 {
                    d -= 1.0;
                }
                (r, d)
            })
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
    }
}

// 10-point Gauss–Legendre rule on [-1, 1]
const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

fn gauss<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

// Panel controls: exponent growth per panel, relative change of Δ per
// panel, largest panel, and the exponent at which the tail is dropped.
const PANEL_EXPONENT: f64 = 1.0;
const PANEL_RELATIVE: f64 = 0.1;
const PANEL_MAX: f64 = 1.0 / 64.0;
const TAIL_EXPONENT: f64 = 46.0;
const MAX_PANELS: usize = 2_000_000;

/// `P(x)/J` on an arc ending at `end` (or unbounded).
fn scaled_density_at(prc: &Prc, x: f64, end: Option<f64>, inv_diffusion: f64) -> Result<f64> {
    // inv_diffusion = 2/σ²; the running exponent is z(x) - z(t) ≥ 0
    let dx = prc.eval(x, 0);
    let inv_d2 = |s: f64| {
        let d = prc.eval(s, 0);
        1.0 / (d * d)
    };
    let mut t = x;
    let mut exponent = 0.0;
    let mut acc = 0.0;
    for _ in 0..MAX_PANELS {
        let [d, dp, _] = prc.eval3(t);
        let mut h = (PANEL_EXPONENT * d * d / inv_diffusion).min(PANEL_MAX);
        if dp != 0.0 {
            h = h.min(PANEL_RELATIVE * (d / dp).abs());
        }
        if let Some(b) = end {
            h = h.min(0.5 * (b - t));
        }
        if h <= 0.0 || t + h == t {
            break;
        }
        let half = 0.5 * h;
        let mid = t + half;
        let mut panel = 0.0;
        for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let s = mid + half * node;
            let z = exponent + inv_diffusion * gauss(inv_d2, t, s);
            panel += w * (-z).exp() / prc.eval(s, 0);
        }
        acc += panel * half;
        exponent += inv_diffusion * gauss(inv_d2, t, t + h);
        t += h;
        if exponent > TAIL_EXPONENT {
            let p = inv_diffusion * acc / dx;
            return if p.is_finite() {
                Ok(p)
            } else {
                Err(Error::Overflow(format!("density integrand at theta = {x}")))
            };
        }
    }
    Err(Error::Overflow(format!(
        "density integral at theta = {x} did not decay within {MAX_PANELS} panels"
    )))
}

/// Stationary density from the exact singular-ODE solution on an `n`-point
/// grid; `J` is fixed by normalization.
pub fn density_exact(prc: &Prc, sigma: NoiseAmplitude, n: usize) -> Result<StationaryDensity> {
    if sigma.is_zero() {
        return Err(Error::InvalidParameter(
            "the exact density needs sigma > 0".into(),
        ));
    }
    if n < 8 {
        return Err(Error::InvalidParameter(format!("grid of {n} points is too coarse")));
    }
    let decomposition = IntervalDecomposition::of(prc)?;
    let inv_diffusion = 2.0 / sigma.squared();
    let at = |x: f64| scaled_density_at(prc, x, decomposition.next_root_after(x), inv_diffusion);

    let scaled: Vec<Result<f64>> = par::map_range(n, |i| {
        let x = i as f64 / n as f64;
        match decomposition.nearest_root(x) {
            Some((root, offset)) if offset.abs() <= ROOT_BUFFER => {
                if offset == 0.0 {
                    return Ok(1.0);
                }
                let edge = root + ROOT_BUFFER * offset.signum();
                let p_edge = at(edge)?;
                Ok(1.0 + (p_edge - 1.0) * offset.abs() / ROOT_BUFFER)
            }
            _ => at(x),
        }
    });
    let scaled = scaled.into_iter().collect::<Result<Vec<f64>>>()?;
    let mass = periodic_quadrature(&scaled)?;
    let flux = 1.0 / mass;
    let values = scaled.iter().map(|p| p * flux).collect();
    StationaryDensity::new(values, flux, DensityMethod::Exact, sigma.get())
}

/// `P - (σ²/2)Δ(ΔP)′` on the density grid, with the derivative taken
/// spectrally. For a stationary density this is the constant flux `J`.
pub fn flux_profile(d: &StationaryDensity, prc: &Prc, sigma: NoiseAmplitude) -> Result<Vec<f64>> {
    let n = d.len();
    let delta = prc.sample(n, 0);
    let q: Vec<f64> = delta.iter().zip(d.values()).map(|(a, p)| a * p).collect();
    let dq = spectral_derivative(&q)?;
    let half = 0.5 * sigma.squared();
    Ok(d
        .values()
        .iter()
        .zip(&delta)
        .zip(&dq)
        .map(|((p, a), dq)| p - half * a * dq)
        .collect())
}

/// `sup |−J + P − (σ²/2)Δ(ΔP)′|` over the density grid.
pub fn stationarity_residual(d: &StationaryDensity, prc: &Prc, sigma: NoiseAmplitude) -> Result<f64> {
    Ok(flux_profile(d, prc, sigma)?
        .iter()
        .map(|f| (f - d.flux()).abs())
        .fold(0.0, f64::max))
}
