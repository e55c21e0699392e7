//! Optimal phase-resetting curves for noise-induced synchronization.
//!
//! Two identical uncoupled oscillators receiving the same white noise
//! synchronize at rate `-λ`, where λ depends on the phase-resetting curve
//! Δ and the stationary phase density. The crate provides:
//!
//! * [`prc`]: truncated Fourier PRCs, constraint weights, quadrature;
//! * [`density`]: stationary phase densities (series, exact, empirical);
//! * [`lyapunov`]: λ from a density, the uniform approximation, and the
//!   closed form for the `(0, b, 1)` family;
//! * [`sde`]: Euler–Maruyama simulation, Monte Carlo λ, ensembles;
//! * [`variational`]: the small-noise optimum and constraint taxonomy;
//! * [`bvp`]: the finite-noise Euler–Lagrange problem solved numerically.
//!
//! Monte Carlo realizations, density grid points and parameter sweeps run
//! on rayon when the `parallel` feature is on (the default).

pub mod bvp;
pub mod density;
pub mod error;
pub mod lyapunov;
pub mod par;
pub mod prc;
pub mod roots;
pub mod sde;
pub mod variational;

pub use bvp::{continuation_in_sigma, el_residual, solve_euler_lagrange, BvpOptions, BvpOrder, BvpSolution, Residuals};
pub use density::{
    density_exact, density_perturbative, DensityMethod, IntervalDecomposition, PerturbationOrder, StationaryDensity,
};
pub use error::{Error, Result};
pub use lyapunov::{lyapunov_analytic, lyapunov_family, lyapunov_uniform_approx, LyapunovEstimate, LyapunovMethod,
    LyapunovSeries};
pub use prc::{ConstraintParams, NoiseAmplitude, Prc};
pub use sde::{
    empirical_density, ensemble_sync, estimate_lyapunov_mc, estimate_lyapunov_pair, log_separation, simulate_phase,
    EnsembleRun, LogSeparation, PhaseTrajectory,
};
pub use variational::{
    classify_constraint_case, extrema_locations, family_optimal_k, family_prc, nu10, optimal_prc_perturbative, CaseKind,
    ConstraintCase, PerturbationSolution,
};
