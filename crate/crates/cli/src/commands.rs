use log::{info, warn};
use phasesync::bvp::{self, BvpOptions, BvpSolution};
use phasesync::density::{self, density_perturbative_on_grid};
use phasesync::sde::{self, EnsembleOptions};
use phasesync::variational::{classify_constraint_case, family_optimal_k, family_prc, optimal_prc_perturbative};
use phasesync::{
    density_exact, estimate_lyapunov_mc, lyapunov_analytic, lyapunov_family, lyapunov_uniform_approx, CaseKind,
    ConstraintParams, Error, LyapunovEstimate, NoiseAmplitude, PerturbationOrder, Prc, StationaryDensity,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{
    Command, DensityArgs, DensityKind, LyapunovArgs, OptimizeArgs, PrcArgs, SimulateArgs, SweepArgs, Weights,
};
use crate::error::{CliError, Result};
use crate::output::{Cell, Report, Table, Timings};

pub fn run(cmd: &Command, timings: &mut Timings) -> Result<Report> {
    match cmd {
        Command::Optimize(a) => optimize(a, timings),
        Command::Lyapunov(a) => lyapunov(a, timings),
        Command::Density(a) => density(a, timings),
        Command::Simulate(a) => simulate(a, timings),
        Command::Sweep(a) => sweep(a, timings),
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

fn weights(w: &Weights) -> Result<ConstraintParams> {
    Ok(ConstraintParams::new(w.a, w.b, w.c)?)
}

fn noise(s: f64) -> Result<NoiseAmplitude> {
    Ok(NoiseAmplitude::new(s)?)
}

fn summary(pairs: Value) -> Map<String, Value> {
    match pairs {
        Value::Object(m) => m,
        _ => unreachable!("summaries are objects"),
    }
}

pub fn load_prc(args: &PrcArgs, sigma: NoiseAmplitude) -> Result<Prc> {
    Ok(match args.prc.as_str() {
        "type1" => Prc::type1(),
        "type2" => Prc::type2(),
        "optimal" => optimal_prc_perturbative(&weights(&args.weights)?, sigma)?.total(),
        inline => serde_json::from_str(inline)?,
    })
}

/// Family member for `(0, b, c)`: the `c = 1` curve for weight `b/c`,
/// divided by `√c`.
fn scaled_family(k: f64, cp: &ConstraintParams) -> Result<Prc> {
    Ok(family_prc(k, cp.b / cp.c)?.scaled(cp.c.sqrt().recip()))
}

fn family_lambda(k: f64, cp: &ConstraintParams, sigma: NoiseAmplitude) -> Result<f64> {
    // λ[Δ/√c; σ] = λ[Δ; σ/√c]
    Ok(lyapunov_family(k, cp.b / cp.c, noise(sigma.get() / cp.c.sqrt())?)?.value())
}

fn sample_points(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(CliError::Usage("need at least one output point".into()));
    }
    Ok((0..n).map(|i| i as f64 / n as f64).collect())
}

fn optimize(args: &OptimizeArgs, timings: &mut Timings) -> Result<Report> {
    let cp = weights(&args.weights)?;
    let sigma = noise(args.sigma)?;
    let case = classify_constraint_case(&cp);
    match case.kind {
        CaseKind::NoPeriodicSolution => Err(Error::Inadmissible {
            a: cp.a,
            b: cp.b,
            c: cp.c,
            kind: case.kind,
        }
        .into()),
        CaseKind::SolutionFamily => optimize_family(args, &cp, sigma, timings),
        CaseKind::UniqueOptimum => optimize_unique(args, &cp, sigma, timings),
    }
}

fn optimize_family(
    args: &OptimizeArgs,
    cp: &ConstraintParams,
    sigma: NoiseAmplitude,
    timings: &mut Timings,
) -> Result<Report> {
    let scaled = noise(sigma.get() / cp.c.sqrt())?;
    let k_star = timings.record("family", || family_optimal_k(cp.b / cp.c, scaled))?;
    let best = scaled_family(k_star, cp)?;
    let mut table = Table::new(&["k", "lambda"]);
    let n = args.points.max(2);
    for i in 0..=n {
        let k = 2.0 * i as f64 / n as f64 - 1.0;
        table.push(vec![k.into(), family_lambda(k, cp, sigma)?.into()]);
    }
    info!("family optimum K* = {k_star}");
    Ok(Report::new(
        table,
        summary(json!({
            "case": CaseKind::SolutionFamily,
            "k_star": k_star,
            "lambda_star": family_lambda(k_star, cp, sigma)?,
            "prc": best,
        })),
    ))
}

fn optimize_unique(
    args: &OptimizeArgs,
    cp: &ConstraintParams,
    sigma: NoiseAmplitude,
    timings: &mut Timings,
) -> Result<Report> {
    let analytic = timings.record("analytic", || optimal_prc_perturbative(cp, sigma))?;
    let curve = analytic.total();
    let numeric = timings.record("bvp", || bvp::solve_euler_lagrange(cp, sigma, None, &args.solver.options()))?;
    let deviation = numeric.max_deviation(&curve);
    let amplitude = analytic.delta0.harmonic_amplitude(1);
    info!(
        "BVP converged in {} iterations, max deviation {deviation:e}",
        numeric.iterations
    );

    let mut table = Table::new(&["theta", "analytic", "numeric", "difference"]);
    for t in sample_points(args.points)? {
        let (x, y) = (curve.eval(t, 0), numeric.prc.eval(t, 0));
        table.push(vec![t.into(), x.into(), y.into(), (y - x).into()]);
    }
    Ok(Report::new(
        table,
        summary(json!({
            "case": CaseKind::UniqueOptimum,
            "analytic": {
                "cos": curve.cos_coeffs(),
                "sin": curve.sin_coeffs(),
                "nu1": analytic.nu1(),
                "nu10": analytic.nu10,
                "product_amplitude": analytic.product_amplitude(),
            },
            "numeric": numeric.to_json(),
            "iterations": numeric.iterations,
            "max_deviation": deviation,
            "relative_deviation": deviation / amplitude,
            "nu1_relative_error": (numeric.nu1 - analytic.nu10).abs() / analytic.nu10,
        })),
    ))
}

/// λ from the exact density, or `0` at zero noise.
fn lambda_exact(prc: &Prc, sigma: NoiseAmplitude, grid: usize) -> Result<LyapunovEstimate> {
    Ok(lambda_with_density(prc, sigma, grid)?.0)
}

/// λ and the density it was computed from. A PRC with a tangent zero has no
/// exact density on this grid; the σ⁴ series is used instead.
fn lambda_with_density(prc: &Prc, sigma: NoiseAmplitude, grid: usize) -> Result<(LyapunovEstimate, StationaryDensity)> {
    // Δ″Δ needs more than 4N points
    let grid = grid.max(4 * prc.effective_order() + 4);
    let d = if sigma.is_zero() {
        StationaryDensity::uniform(grid)
    } else {
        match density_exact(prc, sigma, grid) {
            Ok(d) => d,
            Err(Error::DegenerateRoot { theta, .. }) => {
                warn!("tangent zero near theta = {theta}; using the fourth-order series density");
                density_perturbative_on_grid(prc, sigma, PerturbationOrder::Fourth, grid)?
            }
            Err(e) => return Err(e.into()),
        }
    };
    Ok((lyapunov_analytic(prc, sigma, &d)?, d))
}

fn lyapunov(args: &LyapunovArgs, timings: &mut Timings) -> Result<Report> {
    let sigma = noise(args.sigma)?;
    let prc = load_prc(&args.prc, sigma)?;
    let (analytic, d) = timings.record("analytic", || lambda_with_density(&prc, sigma, args.grid))?;
    let mut rows = vec![analytic, lyapunov_uniform_approx(&prc, sigma)];
    if args.realizations > 0 {
        rows.push(timings.record("monte_carlo", || {
            estimate_lyapunov_mc(&prc, sigma, args.t_end, args.dt, args.realizations, args.seed)
        })?);
    }
    let mut table = Table::new(&["method", "lambda", "stderr"]);
    for e in &rows {
        table.push(vec![e.method().to_string().as_str().into(), e.value().into(), e.std_error().into()]);
    }
    Ok(Report::new(table, summary(json!({ "sigma": sigma.get(), "prc": prc, "density": d.method() }))))
}

fn density(args: &DensityArgs, timings: &mut Timings) -> Result<Report> {
    let sigma = noise(args.sigma)?;
    let prc = load_prc(&args.prc, sigma)?;
    let d = timings.record("density", || -> Result<StationaryDensity> {
        Ok(match args.method {
            DensityKind::Exact => density_exact(&prc, sigma, args.grid)?,
            DensityKind::Perturbative2 => {
                density_perturbative_on_grid(&prc, sigma, PerturbationOrder::Second, args.grid)?
            }
            DensityKind::Perturbative4 => {
                density_perturbative_on_grid(&prc, sigma, PerturbationOrder::Fourth, args.grid)?
            }
            DensityKind::Empirical => {
                let traj = sde::simulate_phase(&prc, sigma, args.t_end, args.dt, args.seed)?;
                sde::empirical_density(&traj, args.grid, args.burn_in)?
            }
        })
    })?;
    let mut table = Table::new(&["theta", "P"]);
    for (t, p) in d.theta().iter().zip(d.values()) {
        table.push(vec![(*t).into(), (*p).into()]);
    }
    let mut meta = summary(d.sidecar());
    if !matches!(args.method, DensityKind::Empirical) && !sigma.is_zero() {
        meta.insert(
            "stationarity_residual".into(),
            json!(density::stationarity_residual(&d, &prc, sigma)?),
        );
    }
    Ok(Report::new(table, meta))
}

fn simulate(args: &SimulateArgs, timings: &mut Timings) -> Result<Report> {
    let sigma = noise(args.sigma)?;
    let prc = load_prc(&args.prc, sigma)?;
    if let Some(n) = args.ensemble {
        let opts = EnsembleOptions {
            record_every: args.record_every,
            ..EnsembleOptions::default()
        };
        let initial = sde::uniform_phases(n, args.seed);
        let run = timings.record("simulate", || {
            sde::ensemble_sync_from(&prc, sigma, &initial, args.t_end, args.dt, args.seed, &opts)
        })?;
        let mut table = Table::new(&["t", "R"]);
        for (t, r) in run.times.iter().zip(&run.order_parameter) {
            table.push(vec![(*t).into(), (*r).into()]);
        }
        return Ok(Report::new(table, summary(json!({ "final_phases": run.final_phases }))));
    }
    let traj = timings.record("simulate", || {
        sde::simulate_phase_from(&prc, sigma, 0.0, args.t_end, args.dt, args.seed, args.record_every)
    })?;
    let mut table = Table::new(&["t", "theta"]);
    for (t, th) in traj.times().iter().zip(traj.phases()) {
        table.push(vec![(*t).into(), (*th).into()]);
    }
    Ok(Report::new(table, summary(json!({ "steps": traj.len() - 1 }))))
}

fn sweep(args: &SweepArgs, timings: &mut Timings) -> Result<Report> {
    let cp = weights(&args.weights)?;
    let mut sigmas = args.sigmas.clone();
    sigmas.sort_by(f64::total_cmp);
    for &s in &sigmas {
        noise(s)?;
    }
    match &args.ks {
        Some(ks) => sweep_family(args, &cp, &sigmas, ks, timings),
        None => sweep_sigma(args, &cp, &sigmas, timings),
    }
}

const SWEEP_HEADERS: [&str; 12] = [
    "sigma",
    "status",
    "nu1",
    "nu10",
    "product_amplitude",
    "analytic_product_amplitude",
    "overtone_ratio",
    "max_deviation",
    "lambda",
    "lambda_uniform",
    "lambda_analytic_curve",
    "iterations",
];

fn sweep_sigma(args: &SweepArgs, cp: &ConstraintParams, sigmas: &[f64], timings: &mut Timings) -> Result<Report> {
    let case = classify_constraint_case(cp);
    if case.kind != CaseKind::UniqueOptimum {
        return Err(Error::Inadmissible {
            a: cp.a,
            b: cp.b,
            c: cp.c,
            kind: case.kind,
        }
        .into());
    }
    let opts = args.solver.options();
    let rows: Vec<Result<(Vec<Cell>, Option<Error>)>> = timings.record("sweep", || {
        sigmas.par_iter().map(|&s| sweep_point(cp, s, args.density_grid, &opts)).collect()
    });
    let mut table = Table::new(&SWEEP_HEADERS);
    let mut failures = Vec::new();
    let mut first = None;
    for (row, &s) in rows.into_iter().zip(sigmas) {
        let (row, failure) = row?;
        if let Some(e) = failure {
            failures.push(json!({ "sigma": s, "error": e.to_string() }));
            first.get_or_insert(e);
        }
        table.push(row);
    }
    let mut meta = summary(json!({ "case": case.kind }));
    if !failures.is_empty() {
        meta.insert("failures".into(), json!(failures));
    }
    let mut report = Report::new(table, meta);
    report.failure = first;
    Ok(report)
}

/// One sweep row. Solver failures become a row with a status and empty
/// numeric cells; other errors abort the sweep.
fn sweep_point(cp: &ConstraintParams, s: f64, grid: usize, opts: &BvpOptions) -> Result<(Vec<Cell>, Option<Error>)> {
    let sigma = noise(s)?;
    let analytic = optimal_prc_perturbative(cp, sigma)?;
    let curve = analytic.total();
    let lambda_curve = lambda_exact(&curve, sigma, grid)?.value();
    let sol: std::result::Result<BvpSolution, Error> = bvp::solve_euler_lagrange(cp, sigma, None, opts);
    match sol {
        Ok(sol) => {
            let row = vec![
                s.into(),
                "ok".into(),
                sol.nu1.into(),
                analytic.nu10.into(),
                (-2.0 * sol.prc.harmonic(3).0).into(),
                analytic.product_amplitude().into(),
                sol.prc.overtone_ratio().into(),
                sol.max_deviation(&curve).into(),
                lambda_exact(&sol.prc, sigma, grid)?.value().into(),
                lyapunov_uniform_approx(&sol.prc, sigma).value().into(),
                lambda_curve.into(),
                sol.iterations.into(),
            ];
            Ok((row, None))
        }
        Err(e @ (Error::Singular { .. } | Error::NoConvergence { .. })) => {
            let status = match e {
                Error::Singular { .. } => "singular",
                _ => "no-convergence",
            };
            let mut row = vec![Cell::Missing; SWEEP_HEADERS.len()];
            row[0] = s.into();
            row[1] = status.into();
            row[3] = analytic.nu10.into();
            row[5] = analytic.product_amplitude().into();
            row[10] = lambda_curve.into();
            Ok((row, Some(e)))
        }
        Err(e) => Err(e.into()),
    }
}

fn sweep_family(
    args: &SweepArgs,
    cp: &ConstraintParams,
    sigmas: &[f64],
    ks: &[f64],
    timings: &mut Timings,
) -> Result<Report> {
    let case = classify_constraint_case(cp);
    if case.kind != CaseKind::SolutionFamily {
        return Err(Error::Inadmissible {
            a: cp.a,
            b: cp.b,
            c: cp.c,
            kind: case.kind,
        }
        .into());
    }
    let mut ks = ks.to_vec();
    ks.sort_by(f64::total_cmp);
    let points: Vec<(f64, f64)> = sigmas.iter().flat_map(|&s| ks.iter().map(move |&k| (s, k))).collect();
    let rows: Vec<Result<Vec<Cell>>> = timings.record("sweep", || {
        points
            .par_iter()
            .map(|&(s, k)| {
                let sigma = noise(s)?;
                let prc = scaled_family(k, cp)?;
                Ok(vec![
                    s.into(),
                    k.into(),
                    family_lambda(k, cp, sigma)?.into(),
                    lambda_exact(&prc, sigma, args.density_grid)?.value().into(),
                    lyapunov_uniform_approx(&prc, sigma).value().into(),
                ])
            })
            .collect()
    });
    let mut table = Table::new(&["sigma", "k", "lambda_family", "lambda", "lambda_uniform"]);
    for row in rows {
        table.push(row?);
    }
    let k_star: Vec<Value> = sigmas
        .iter()
        .map(|&s| -> Result<Value> {
            Ok(json!({ "sigma": s, "k_star": family_optimal_k(cp.b / cp.c, noise(s / cp.c.sqrt())?)? }))
        })
        .collect::<Result<_>>()?;
    Ok(Report::new(table, summary(json!({ "case": case.kind, "optima": k_star }))))
}
