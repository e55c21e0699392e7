//! Periodic boundary-value problem for the optimal PRC at finite noise.
//!
//! With the stationary density eliminated to order σ⁴, the Euler–Lagrange
//! equation of the constrained problem reads
//!
//! ```text
//! R[Δ, ν] = 2cνΔ⁗ + 2(1 − bν)Δ″ + 2aνΔ + σ²[(Δ′)³ + 3ΔΔ′Δ″] = 0
//! ∫ aΔ² + b(Δ′)² + cΔ″² = 1,   Δ(0) = 0,   Δ′(0) < 0.
//! ```
//!
//! For `c = 0` it is second order. It is solved by Fourier–Galerkin
//! projection onto `M` harmonics and Newton's method. The phase condition
//! breaks translation invariance; it is balanced by an unfolding term
//! `sΔ′` added to `R`, whose coefficient vanishes at a solution because
//! `∫ R Δ′ = 0` for every periodic Δ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::prc::{omega, ConstraintParams, NoiseAmplitude, Prc, TWO_PI};
use crate::roots::periodic_roots;
use crate::variational::{classify_constraint_case, nu10, optimal_prc_perturbative, CaseKind};

/// Noise amplitudes at or above this are rejected.
pub const SIGMA_LIMIT: f64 = 0.5;

/// Below this the second-order equation is treated as singular.
pub const SINGULAR_MARGIN: f64 = 1e-3;

/// Grid used by [`el_residual`].
pub const CHECK_GRID: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BvpOrder {
    /// Fourth order when `c > 0`, second order otherwise.
    #[default]
    Auto,
    Fourth,
    Second,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpOptions {
    pub modes: usize,
    pub grid: usize,
    /// Newton stops once the sup-norm of the discrete residual is below
    /// this.
    pub tol: f64,
    pub max_iter: usize,
    pub order: BvpOrder,
    /// The mode count is doubled up to this while the fine-grid ODE
    /// residual exceeds `check_tol`.
    pub max_modes: usize,
    pub check_tol: f64,
    /// Residual above which a solution at `max_modes` is rejected.
    pub accept_tol: f64,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions {
            modes: 32,
            grid: 256,
            tol: 1e-11,
            max_iter: 50,
            order: BvpOrder::Auto,
            max_modes: 256,
            check_tol: 1e-9,
            accept_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `sup |R|`.
    pub ode: f64,
    /// `|∫ aΔ² + b(Δ′)² + cΔ″² − 1|`.
    pub constraint: f64,
    /// Largest jump of Δ and its derivatives across θ = 1.
    pub periodicity: f64,
    /// `|Δ(0)|`.
    pub phase: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.ode.max(self.constraint).max(self.periodicity).max(self.phase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvpSolution {
    pub prc: Prc,
    pub nu1: f64,
    pub sigma: f64,
    pub params: ConstraintParams,
    /// 4 or 2.
    pub order: u8,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Coefficient of the unfolding term; zero up to solver tolerance.
    pub unfolding: f64,
}

impl BvpSolution {
    /// `{"cos", "sin", "nu1", "sigma", "residuals"}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "cos": self.prc.cos_coeffs(),
            "sin": self.prc.sin_coeffs(),
            "nu1": self.nu1,
            "sigma": self.sigma,
            "residuals": self.residuals,
        })
    }

    /// Sup-norm distance to another curve on the check grid.
    pub fn max_deviation(&self, other: &Prc) -> f64 {
        (0..CHECK_GRID)
            .map(|i| {
                let t = i as f64 / CHECK_GRID as f64;
                (self.prc.eval(t, 0) - other.eval(t, 0)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `R[Δ, ν]` at `theta`.
pub fn euler_lagrange_expression(
    prc: &Prc,
    cp: &ConstraintParams,
    sigma: NoiseAmplitude,
    nu: f64,
    theta: f64,
) -> f64 {
    let [d0, d1, d2] = prc.eval3(theta);
    let d4 = if cp.c != 0.0 { prc.eval(theta, 4) } else { 0.0 };
    2.0 * cp.c * nu * d4
        + 2.0 * (1.0 - cp.b * nu) * d2
        + 2.0 * cp.a * nu * d0
        + sigma.squared() * (d1 * d1 * d1 + 3.0 * d0 * d1 * d2)
}

fn resolve_order(cp: &ConstraintParams, order: BvpOrder) -> Result<u8> {
    match (order, cp.c > 0.0) {
        (BvpOrder::Auto, true) | (BvpOrder::Fourth, true) => Ok(4),
        (BvpOrder::Auto, false) | (BvpOrder::Second, false) => Ok(2),
        (BvpOrder::Fourth, false) => Err(Error::InvalidParameter(
            "fourth-order problem requested but c = 0; use the second-order form".into(),
        )),
        (BvpOrder::Second, true) => Err(Error::InvalidParameter(
            "second-order problem requested but c > 0".into(),
        )),
    }
}

/// Trigonometric basis on the collocation grid. Unknown `j` is `cos 2πjθ`
/// for `j ≤ M` and `sin 2π(j−M)θ` above.
struct Basis {
    m: usize,
    values: [DMatrix<f64>; 3],
    projection: DMatrix<f64>,
}

impl Basis {
    fn new(m: usize, n: usize) -> Self {
        let dim = 2 * m + 1;
        let mut values = [
            DMatrix::zeros(n, dim),
            DMatrix::zeros(n, dim),
            DMatrix::zeros(n, dim),
        ];
        let mut projection = DMatrix::zeros(dim, n);
        for i in 0..n {
            values[0][(i, 0)] = 1.0;
            projection[(0, i)] = 1.0 / n as f64;
            for k in 1..=m {
                let w = omega(k);
                let (s, c) = (TWO_PI * ((k * i) % n) as f64 / n as f64).sin_cos();
                values[0][(i, k)] = c;
                values[1][(i, k)] = -w * s;
                values[2][(i, k)] = -w * w * c;
                values[0][(i, m + k)] = s;
                values[1][(i, m + k)] = w * c;
                values[2][(i, m + k)] = -w * w * s;
                projection[(k, i)] = 2.0 * c / n as f64;
                projection[(m + k, i)] = 2.0 * s / n as f64;
            }
        }
        Basis {
            m,
            values,
            projection,
        }
    }

    fn dim(&self) -> usize {
        2 * self.m + 1
    }

    fn frequency(&self, j: usize) -> usize {
        if j <= self.m {
            j
        } else {
            j - self.m
        }
    }
}

struct Problem<'a> {
    cp: &'a ConstraintParams,
    s2: f64,
    basis: Basis,
}

impl Problem<'_> {
    fn linear_symbol(&self, k: usize, nu: f64) -> f64 {
        let w2 = omega(k).powi(2);
        2.0 * self.cp.c * nu * w2 * w2 - 2.0 * (1.0 - self.cp.b * nu) * w2 + 2.0 * self.cp.a * nu
    }

    /// Residual vector and, if asked, the Jacobian. Unknowns are the
    /// `2M + 1` coefficients, ν and s.
    fn evaluate(&self, x: &DVector<f64>, jacobian: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let b = &self.basis;
        let (m, dim) = (b.m, b.dim());
        let coeffs = x.rows(0, dim).into_owned();
        let (nu, s) = (x[dim], x[dim + 1]);
        let d0 = &b.values[0] * &coeffs;
        let d1 = &b.values[1] * &coeffs;
        let d2 = &b.values[2] * &coeffs;

        let n_samples = DVector::from_iterator(
            d0.len(),
            (0..d0.len()).map(|i| d1[i].powi(3) + 3.0 * d0[i] * d1[i] * d2[i]),
        );
        let nonlinear = &b.projection * n_samples;

        let mut f = DVector::zeros(dim + 2);
        for j in 0..dim {
            let k = b.frequency(j);
            f[j] = self.linear_symbol(k, nu) * coeffs[j] + self.s2 * nonlinear[j];
        }
        // s Δ′ couples cos k and sin k
        for k in 1..=m {
            let w = omega(k);
            f[k] += s * w * coeffs[m + k];
            f[m + k] -= s * w * coeffs[k];
        }
        let mut norm = self.cp.a * coeffs[0] * coeffs[0];
        for k in 1..=m {
            norm += 0.5 * self.cp.weight(k) * (coeffs[k].powi(2) + coeffs[m + k].powi(2));
        }
        f[dim] = norm - 1.0;
        f[dim + 1] = coeffs.rows(0, m + 1).sum();

        if !jacobian {
            return (f, None);
        }
        let mut jac = DMatrix::zeros(dim + 2, dim + 2);
        let n = d0.len();
        let mut weighted = DMatrix::zeros(n, dim);
        for i in 0..n {
            let g1 = 3.0 * (d1[i] * d1[i] + d0[i] * d2[i]);
            let g0 = 3.0 * d1[i] * d2[i];
            let g2 = 3.0 * d0[i] * d1[i];
            for j in 0..dim {
                weighted[(i, j)] =
                    g0 * b.values[0][(i, j)] + g1 * b.values[1][(i, j)] + g2 * b.values[2][(i, j)];
            }
        }
        let jn = &b.projection * weighted;
        for r in 0..dim {
            for c in 0..dim {
                jac[(r, c)] = self.s2 * jn[(r, c)];
            }
            let k = b.frequency(r);
            jac[(r, r)] += self.linear_symbol(k, nu);
            jac[(r, dim)] = 2.0 * self.cp.weight(k) * coeffs[r];
        }
        for k in 1..=m {
            let w = omega(k);
            jac[(k, m + k)] += s * w;
            jac[(m + k, k)] -= s * w;
            jac[(k, dim + 1)] = w * coeffs[m + k];
            jac[(m + k, dim + 1)] = -w * coeffs[k];
        }
        jac[(dim, 0)] = 2.0 * self.cp.a * coeffs[0];
        for k in 1..=m {
            jac[(dim, k)] = self.cp.weight(k) * coeffs[k];
            jac[(dim, m + k)] = self.cp.weight(k) * coeffs[m + k];
            jac[(dim + 1, k)] = 1.0;
        }
        jac[(dim + 1, 0)] = 1.0;
        (f, Some(jac))
    }
}

fn sup(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Rotates and rescales a starting curve so that it crosses zero
/// downward at θ = 0 and satisfies the constraint.
fn align_initial(prc: &Prc, cp: &ConstraintParams) -> Result<Prc> {
    let d1 = prc.derivative(1);
    let roots = periodic_roots(|t| prc.eval(t, 0), |t| d1.eval(t, 0), 4096);
    let root = roots
        .iter()
        .copied()
        .find(|&r| d1.eval(r, 0) < 0.0)
        .ok_or_else(|| {
            Error::InvalidParameter("initial guess has no downward zero crossing".into())
        })?;
    let shifted = prc.shifted(root);
    let norm = crate::prc::constraint_norm(&shifted, cp);
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("initial guess has zero constraint norm".into()));
    }
    Ok(shifted.scaled(norm.sqrt().recip()))
}

/// Solves the boundary-value problem by Newton's method from `init`
/// (default: the order-σ² perturbative optimum).
pub fn solve_euler_lagrange(
    cp: &ConstraintParams,
    sigma: NoiseAmplitude,
    init: Option<&Prc>,
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    solve_with_multiplier(cp, sigma, init, None, opts)
}

fn solve_with_multiplier(
    cp: &ConstraintParams,
    sigma: NoiseAmplitude,
    init: Option<&Prc>,
    nu_init: Option<f64>,
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    let case = classify_constraint_case(cp);
    if case.kind != CaseKind::UniqueOptimum {
        return Err(Error::Inadmissible {
            a: cp.a,
            b: cp.b,
            c: cp.c,
            kind: case.kind,
        });
    }
    if sigma.get() >= SIGMA_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "sigma = {} is outside the supported range [0, {SIGMA_LIMIT})",
            sigma.get()
        )));
    }
    let order = resolve_order(cp, opts.order)?;
    let mut m = opts.modes.max(1);
    if opts.grid < 4 * m + 1 {
        return Err(Error::InvalidParameter(format!(
            "collocation grid of {} points cannot dealias {m} modes (need {})",
            opts.grid,
            4 * m + 1
        )));
    }

    let mut current = match init {
        Some(p) => align_initial(p, cp)?,
        None => optimal_prc_perturbative(cp, sigma)?.total(),
    };
    let mut nu = nu_init.unwrap_or(nu10(cp)?);
    let mut grid = opts.grid;
    let mut total_iterations = 0;
    loop {
        let problem = Problem {
            cp,
            s2: sigma.squared(),
            basis: Basis::new(m, grid),
        };
        let outcome = newton(&problem, &current, nu, opts);
        let (x, iterations) = match outcome {
            Ok(v) => v,
            Err(e) => return Err(diagnose(cp, sigma, &current, nu).unwrap_or(e)),
        };
        total_iterations += iterations;
        let dim = problem.basis.dim();
        let cos: Vec<f64> = (0..=m).map(|k| x[k]).collect();
        let sin: Vec<f64> = (1..=m).map(|k| x[m + k]).collect();
        let mut prc = Prc::from_fourier(&cos, &sin)?;
        // R is odd in Δ, so −Δ solves the same problem
        if prc.eval(0.0, 1) > 0.0 {
            prc = prc.scaled(-1.0);
        }
        let mut sol = BvpSolution {
            prc,
            nu1: x[dim],
            sigma: sigma.get(),
            params: *cp,
            order,
            residuals: Residuals::default(),
            iterations: total_iterations,
            unfolding: x[dim + 1],
        };
        sol.residuals = el_residual(&sol, cp, sigma);
        if sol.residuals.ode <= opts.check_tol {
            return Ok(sol);
        }
        if 2 * m > opts.max_modes {
            if sol.residuals.ode <= opts.accept_tol {
                log::warn!(
                    "ODE residual {:e} above {:e} at the largest mode count {m}",
                    sol.residuals.ode,
                    opts.check_tol
                );
                return Ok(sol);
            }
            return Err(diagnose(cp, sigma, &sol.prc, sol.nu1).unwrap_or(Error::NoConvergence {
                iterations: total_iterations,
                residual: sol.residuals.ode,
            }));
        }
        log::debug!(
            "residual {:e} with {m} modes; refining to {}",
            sol.residuals.ode,
            2 * m
        );
        m *= 2;
        grid = grid.max(8 * m);
        current = sol.prc;
        nu = sol.nu1;
    }
}

/// Damped Newton iteration from `start`; returns the unknown vector and
/// the iteration count.
fn newton(problem: &Problem<'_>, start: &Prc, nu: f64, opts: &BvpOptions) -> Result<(DVector<f64>, usize)> {
    let m = problem.basis.m;
    let dim = problem.basis.dim();
    let start = start.with_order(m);
    let mut x = DVector::zeros(dim + 2);
    for k in 0..=m {
        let (a, b) = start.harmonic(k);
        x[k] = a;
        if k > 0 {
            x[m + k] = b;
        }
    }
    x[dim] = nu;

    let (mut f, _) = problem.evaluate(&x, false);
    let mut res = sup(&f);
    let mut iterations = 0;
    while res > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let (_, jac) = problem.evaluate(&x, true);
        let step = jac
            .expect("requested")
            .lu()
            .solve(&(-&f))
            .ok_or(Error::NoConvergence {
                iterations,
                residual: res,
            })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &x + lambda * &step;
            let (ft, _) = problem.evaluate(&trial, false);
            let rt = sup(&ft);
            if rt.is_finite() && rt < res {
                x = trial;
                f = ft;
                res = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            log::debug!("Newton stalled at residual {res:e} after {iterations} iterations");
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        log::trace!("Newton iteration {iterations}: residual {res:e}, damping {lambda}");
    }
    Ok((x, iterations))
}

/// Smallest value over θ of the coefficient of Δ″ in the second-order
/// form, `2(1 − bν) + 3σ²ΔΔ′`.
pub fn leading_coefficient_min(prc: &Prc, cp: &ConstraintParams, sigma: NoiseAmplitude, nu: f64) -> f64 {
    (0..CHECK_GRID)
        .map(|i| {
            let [d0, d1, _] = prc.eval3(i as f64 / CHECK_GRID as f64);
            2.0 * (1.0 - cp.b * nu) + 3.0 * sigma.squared() * d0 * d1
        })
        .fold(f64::INFINITY, f64::min)
}

/// A failed second-order solve whose last iterate makes the leading
/// coefficient vanish has hit the singular set of the equation.
fn diagnose(cp: &ConstraintParams, sigma: NoiseAmplitude, prc: &Prc, nu: f64) -> Option<Error> {
    if cp.c > 0.0 {
        return None;
    }
    let coefficient = leading_coefficient_min(prc, cp, sigma, nu);
    (coefficient <= SINGULAR_MARGIN).then_some(Error::Singular {
        sigma: sigma.get(),
        coefficient,
    })
}

/// Residuals of a solution recomputed on a fine grid from its Fourier
/// series: the ODE in pointwise form, the constraint by quadrature,
/// periodicity by summing each series at θ = 0 and θ = 1 directly, and the
/// phase condition.
pub fn el_residual(sol: &BvpSolution, cp: &ConstraintParams, sigma: NoiseAmplitude) -> Residuals {
    let prc = &sol.prc;
    let grid: Vec<f64> = (0..CHECK_GRID).map(|i| i as f64 / CHECK_GRID as f64).collect();
    let ode = par::map_slice(&grid, |&t| {
        euler_lagrange_expression(prc, cp, sigma, sol.nu1, t).abs()
    })
    .into_iter()
    .fold(0.0, f64::max);

    let samples: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let [d0, d1, d2] = prc.eval3(t);
            cp.a * d0 * d0 + cp.b * d1 * d1 + cp.c * d2 * d2
        })
        .collect();
    let constraint = (crate::prc::periodic_quadrature(&samples).expect("nonempty") - 1.0).abs();

    let derivs = if sol.order == 4 { 3 } else { 1 };
    let periodicity = (0..=derivs)
        .map(|d| (raw_series(prc, 1.0, d) - raw_series(prc, 0.0, d)).abs())
        .fold(0.0, f64::max);

    Residuals {
        ode,
        constraint,
        periodicity,
        phase: prc.eval(0.0, 0).abs(),
    }
}

/// The `d`-th derivative of the series summed term by term at `theta`
/// without reducing the argument mod 1.
fn raw_series(prc: &Prc, theta: f64, d: usize) -> f64 {
    let mut acc = if d == 0 { prc.harmonic(0).0 } else { 0.0 };
    for k in 1..=prc.order() {
        let (a, b) = prc.harmonic(k);
        let w = omega(k);
        let x = w * theta;
        let shift = d as f64 * std::f64::consts::FRAC_PI_2;
        acc += w.powi(d as i32) * (a * (x + shift).cos() + b * (x + shift).sin());
    }
    acc
}

/// Solves along an increasing list of noise amplitudes, warm-starting each
/// solve from the previous solution.
pub fn continuation_in_sigma(
    cp: &ConstraintParams,
    sigmas: &[f64],
    opts: &BvpOptions,
) -> Result<Vec<BvpSolution>> {
    let first = *sigmas.first().ok_or(Error::Empty("sigma list"))?;
    if first > 0.05 {
        return Err(Error::InvalidParameter(format!(
            "continuation must start at sigma <= 0.05 (got {first})"
        )));
    }
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("sigma list must be strictly increasing".into()));
    }
    let mut out: Vec<BvpSolution> = Vec::with_capacity(sigmas.len());
    for (index, &s) in sigmas.iter().enumerate() {
        let wrap = |e: Error| Error::Continuation {
            index,
            sigma: s,
            source: Box::new(e),
        };
        let sigma = NoiseAmplitude::new(s).map_err(wrap)?;
        let sol = match out.last() {
            None => solve_euler_lagrange(cp, sigma, None, opts),
            Some(prev) => solve_with_multiplier(cp, sigma, Some(&prev.prc), Some(prev.nu1), opts),
        }
        .map_err(wrap)?;
        out.push(sol);
    }
    Ok(out)
}

/// Independent solves at each σ, run in parallel and returned in input
/// order.
pub fn solve_many(
    cp: &ConstraintParams,
    sigmas: &[f64],
    opts: &BvpOptions,
) -> Vec<Result<BvpSolution>> {
    par::map_slice(sigmas, |&s| {
        let sigma = NoiseAmplitude::new(s)?;
        solve_euler_lagrange(cp, sigma, None, opts)
    })
}
