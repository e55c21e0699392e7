//! Euler–Maruyama integration of the Itô phase equation
//!
//! ```text
//! dθ = [1 + (σ²/2) Δ′(θ)Δ(θ)] dt + σ Δ(θ) dW
//! ```
//!
//! and of the log-separation `y = log φ` of two commonly driven copies,
//!
//! ```text
//! dy = (σ²/2) Δ″Δ dt + σ Δ′ dW.
//! ```
//!
//! Every realization draws its increments from its own ChaCha stream keyed
//! by `(seed, realization)`, so results do not depend on how realizations
//! are scheduled across threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::density::{DensityMethod, StationaryDensity};
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovEstimate;
use crate::par;
use crate::prc::{NoiseAmplitude, Prc, TWO_PI};
use crate::roots::circle_distance;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T: f64 = 5000.0;
pub const DEFAULT_BURN_IN: f64 = 100.0;

/// Largest admissible phase change in one step.
pub const MAX_STEP: f64 = 0.25;

/// Initial separation and renormalization window of the two-oscillator
/// estimator.
pub const PAIR_OFFSET: f64 = 1e-6;
pub const PAIR_WINDOW: (f64, f64) = (1e-9, 1e-3);

/// Stream index reserved for drawing ensemble initial conditions.
const INITIAL_STREAM: u64 = u64::MAX;

/// Independent random stream for realization `index` of a run seeded with
/// `seed`.
pub fn noise_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[inline]
fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed circular difference in (-½, ½].
#[inline]
fn signed_gap(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

fn check_step(sigma: NoiseAmplitude, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step dt = {dt} must be positive")));
    }
    if !sigma.is_zero() && dt > 1e-3 / sigma.get() {
        return Err(Error::InvalidParameter(format!(
            "time step dt = {dt} exceeds the stability bound 1e-3/sigma = {}",
            1e-3 / sigma.get()
        )));
    }
    Ok(())
}

fn check_horizon(t_end: f64) -> Result<usize> {
    if !(t_end >= 10.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon T = {t_end} must be at least 10"
        )));
    }
    Ok(0)
}

fn step_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt).round() as usize
}

/// One Euler–Maruyama step of the phase; returns the increment.
#[inline]
fn phase_increment(d: [f64; 3], half_s2: f64, sigma: f64, dt: f64, dw: f64) -> f64 {
    (1.0 + half_s2 * d[1] * d[0]) * dt + sigma * d[0] * dw
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseTrajectory {
    dt: f64,
    sigma: f64,
    seed: u64,
    record_every: usize,
    times: Vec<f64>,
    phases: Vec<f64>,
}

impl PhaseTrajectory {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Phases in [0, 1).
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// CSV with header `t,theta`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,theta")?;
        for (t, th) in self.times.iter().zip(&self.phases) {
            writeln!(w, "{t},{th}")?;
        }
        Ok(())
    }

    fn after(&self, burn_in: f64) -> usize {
        self.times.partition_point(|&t| t < burn_in)
    }
}

/// Trajectory from θ(0) = 0, recording every step.
pub fn simulate_phase(
    prc: &Prc,
    sigma: NoiseAmplitude,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<PhaseTrajectory> {
    simulate_phase_from(prc, sigma, 0.0, t_end, dt, seed, 1)
}

/// Trajectory from `theta0`, recording every `record_every` steps.
pub fn simulate_phase_from(
    prc: &Prc,
    sigma: NoiseAmplitude,
    theta0: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
    record_every: usize,
) -> Result<PhaseTrajectory> {
    check_step(sigma, dt)?;
    check_horizon(t_end)?;
    let record_every = record_every.max(1);
    let steps = step_count(t_end, dt);
    let mut rng = noise_stream(seed, 0);
    let (s, half_s2, sqrt_dt) = (sigma.get(), 0.5 * sigma.squared(), dt.sqrt());

    let capacity = steps / record_every + 1;
    let mut times = Vec::with_capacity(capacity);
    let mut phases = Vec::with_capacity(capacity);
    let mut theta = wrap(theta0);
    times.push(0.0);
    phases.push(theta);
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        let inc = phase_increment(prc.eval3(theta), half_s2, s, dt, sqrt_dt * z);
        if inc.abs() > MAX_STEP {
            return Err(Error::UnstableStep {
                t: i as f64 * dt,
                step: inc.abs(),
            });
        }
        theta = wrap(theta + inc);
        if i % record_every == 0 {
            times.push(i as f64 * dt);
            phases.push(theta);
        }
    }
    Ok(PhaseTrajectory {
        dt,
        sigma: s,
        seed,
        record_every,
        times,
        phases,
    })
}

/// Path of `y = log φ` for one realization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogSeparation {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl LogSeparation {
    /// Least-squares slope of `y` against `t` and its ordinary standard
    /// error. Serial correlation of the path makes the error optimistic.
    pub fn slope(&self) -> (f64, f64) {
        let n = self.times.len() as f64;
        let tm = self.times.iter().sum::<f64>() / n;
        let ym = self.values.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (t, y) in self.times.iter().zip(&self.values) {
            sxx += (t - tm).powi(2);
            sxy += (t - tm) * (y - ym);
        }
        let slope = sxy / sxx;
        let sse: f64 = self
            .times
            .iter()
            .zip(&self.values)
            .map(|(t, y)| (y - ym - slope * (t - tm)).powi(2))
            .sum();
        (slope, (sse / (n - 2.0) / sxx).sqrt())
    }
}

/// Integrates the θ and y equations with shared increments from θ(0) = 0,
/// recording every `record_every` steps.
pub fn log_separation(
    prc: &Prc,
    sigma: NoiseAmplitude,
    t_end: f64,
    dt: f64,
    seed: u64,
    record_every: usize,
) -> Result<LogSeparation> {
    check_step(sigma, dt)?;
    check_horizon(t_end)?;
    let record_every = record_every.max(1);
    let steps = step_count(t_end, dt);
    let mut rng = noise_stream(seed, 0);
    let (s, half_s2, sqrt_dt) = (sigma.get(), 0.5 * sigma.squared(), dt.sqrt());
    let mut theta = 0.0;
    let mut y = 0.0;
    let mut out = LogSeparation {
        times: vec![0.0],
        values: vec![0.0],
    };
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        let dw = sqrt_dt * z;
        let d = prc.eval3(theta);
        let inc = phase_increment(d, half_s2, s, dt, dw);
        if inc.abs() > MAX_STEP {
            return Err(Error::UnstableStep {
                t: i as f64 * dt,
                step: inc.abs(),
            });
        }
        y += half_s2 * d[2] * d[0] * dt + s * d[1] * dw;
        theta = wrap(theta + inc);
        if i % record_every == 0 {
            if !y.is_finite() {
                return Err(Error::NonFinite("log separation"));
            }
            out.times.push(i as f64 * dt);
            out.values.push(y);
        }
    }
    Ok(out)
}

/// `y(T)/T` for one realization with its own noise stream, starting from a
/// uniformly drawn phase.
fn log_separation_rate(
    prc: &Prc,
    sigma: NoiseAmplitude,
    t_end: f64,
    dt: f64,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let mut rng = noise_stream(seed, index);
    let steps = step_count(t_end, dt);
    let (s, half_s2, sqrt_dt) = (sigma.get(), 0.5 * sigma.squared(), dt.sqrt());
    let mut theta: f64 = rng.random::<f64>();
    let mut y = 0.0;
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        let dw = sqrt_dt * z;
        let d = prc.eval3(theta);
        let inc = phase_increment(d, half_s2, s, dt, dw);
        if inc.abs() > MAX_STEP {
            return Err(Error::UnstableStep {
                t: i as f64 * dt,
                step: inc.abs(),
            });
        }
        y += half_s2 * d[2] * d[0] * dt + s * d[1] * dw;
        theta = wrap(theta + inc);
    }
    Ok(y / (steps as f64 * dt))
}

/// Renormalized separation of two copies sharing one noise stream.
fn pair_separation_rate(
    prc: &Prc,
    sigma: NoiseAmplitude,
    t_end: f64,
    dt: f64,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let mut rng = noise_stream(seed, index);
    let steps = step_count(t_end, dt);
    let (s, half_s2, sqrt_dt) = (sigma.get(), 0.5 * sigma.squared(), dt.sqrt());
    let mut a: f64 = rng.random::<f64>();
    let mut b = wrap(a + PAIR_OFFSET);
    let mut log_growth = 0.0;
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        let dw = sqrt_dt * z;
        let ia = phase_increment(prc.eval3(a), half_s2, s, dt, dw);
        let ib = phase_increment(prc.eval3(b), half_s2, s, dt, dw);
        if ia.abs() > MAX_STEP || ib.abs() > MAX_STEP {
            return Err(Error::UnstableStep {
                t: i as f64 * dt,
                step: ia.abs().max(ib.abs()),
            });
        }
        a = wrap(a + ia);
        b = wrap(b + ib);
        let gap = signed_gap(b, a);
        let mag = gap.abs();
        if (mag < PAIR_WINDOW.0 || mag > PAIR_WINDOW.1) && mag > 0.0 {
            log_growth += (mag / PAIR_OFFSET).ln();
            b = wrap(a + PAIR_OFFSET * gap.signum());
        }
    }
    let gap = signed_gap(b, a).abs();
    if gap > 0.0 {
        log_growth += (gap / PAIR_OFFSET).ln();
    }
    Ok(log_growth / (steps as f64 * dt))
}

fn summarize(rates: Vec<Result<f64>>) -> Result<LyapunovEstimate> {
    let rates = rates.into_iter().collect::<Result<Vec<f64>>>()?;
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    LyapunovEstimate::monte_carlo(mean, (var / n).sqrt())
}

fn check_realizations(n: usize) -> Result<()> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "{n} realizations are too few (need at least 8)"
        )));
    }
    Ok(())
}

/// λ as the mean of `y(T)/T` over independent realizations, with its
/// standard error.
pub fn estimate_lyapunov_mc(
    prc: &Prc,
    sigma: NoiseAmplitude,
    t_end: f64,
    dt: f64,
    n_realizations: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    check_step(sigma, dt)?;
    check_horizon(t_end)?;
    check_realizations(n_realizations)?;
    summarize(par::map_range(n_realizations, |r| {
        log_separation_rate(prc, sigma, t_end, dt, seed, r as u64)
    }))
}

/// λ from two commonly driven oscillators started `1e-6` apart, with the
/// separation renormalized whenever it leaves `[1e-9, 1e-3]`.
pub fn estimate_lyapunov_pair(
    prc: &Prc,
    sigma: NoiseAmplitude,
    t_end: f64,
    dt: f64,
    n_realizations: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    check_step(sigma, dt)?;
    check_horizon(t_end)?;
    check_realizations(n_realizations)?;
    summarize(par::map_range(n_realizations, |r| {
        pair_separation_rate(prc, sigma, t_end, dt, seed, r as u64)
    }))
}

/// Circular order parameter `|⟨e^{2πiθ}⟩|`.
pub fn order_parameter(phases: &[f64]) -> f64 {
    let (re, im) = phases.iter().fold((0.0, 0.0), |(re, im), &t| {
        let (s, c) = (TWO_PI * t).sin_cos();
        (re + c, im + s)
    });
    let n = phases.len() as f64;
    // rounding can push a locked ensemble just past 1
    (re / n).hypot(im / n).min(1.0)
}

/// Median circular distance over all pairs.
pub fn median_pairwise_distance(phases: &[f64]) -> f64 {
    let mut d: Vec<f64> = phases
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| phases[i + 1..].iter().map(move |&b| circle_distance(a, b)))
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let upper = *m;
    if d.len() % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(f64::MIN, f64::max);
        0.5 * (lower + upper)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub record_every: usize,
    /// Stop once the median pairwise distance falls below this.
    pub stop_below: Option<f64>,
    pub track_spread: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            record_every: 1,
            stop_below: None,
            track_spread: false,
        }
    }
}

/// Time series of an uncoupled ensemble driven by one noise stream.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleRun {
    pub times: Vec<f64>,
    pub order_parameter: Vec<f64>,
    /// Median pairwise distance per record; empty unless tracked.
    pub spread: Vec<f64>,
    pub final_phases: Vec<f64>,
    /// First recorded time the spread fell below `stop_below`.
    pub sync_time: Option<f64>,
}

impl EnsembleRun {
    /// CSV with header `t,R`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,R")?;
        for (t, r) in self.times.iter().zip(&self.order_parameter) {
            writeln!(w, "{t},{r}")?;
        }
        Ok(())
    }
}

/// `n` oscillators with phases drawn uniformly on [0, 1).
pub fn ensemble_sync(
    prc: &Prc,
    sigma: NoiseAmplitude,
    n: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<EnsembleRun> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ensemble of {n} oscillators (need at least 2)")));
    }
    ensemble_sync_from(prc, sigma, &uniform_phases(n, seed), t_end, dt, seed, &EnsembleOptions::default())
}

/// Uniform initial phases drawn from a stream separate from the noise.
pub fn uniform_phases(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = noise_stream(seed, INITIAL_STREAM);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Ensemble from explicit initial phases. All oscillators consume the same
/// increments, which are those of [`simulate_phase`] with the same seed.
pub fn ensemble_sync_from(
    prc: &Prc,
    sigma: NoiseAmplitude,
    initial: &[f64],
    t_end: f64,
    dt: f64,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleRun> {
    check_step(sigma, dt)?;
    if initial.is_empty() {
        return Err(Error::Empty("initial phases"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T = {t_end} must be positive")));
    }
    let record_every = opts.record_every.max(1);
    let track = opts.track_spread || opts.stop_below.is_some();
    let steps = step_count(t_end, dt);
    let mut rng = noise_stream(seed, 0);
    let (s, half_s2, sqrt_dt) = (sigma.get(), 0.5 * sigma.squared(), dt.sqrt());
    let mut phases: Vec<f64> = initial.iter().map(|&t| wrap(t)).collect();

    let mut run = EnsembleRun {
        times: vec![0.0],
        order_parameter: vec![order_parameter(&phases)],
        spread: Vec::new(),
        final_phases: Vec::new(),
        sync_time: None,
    };
    if track {
        run.spread.push(median_pairwise_distance(&phases));
    }
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        let dw = sqrt_dt * z;
        for (j, theta) in phases.iter_mut().enumerate() {
            let inc = phase_increment(prc.eval3(*theta), half_s2, s, dt, dw);
            if inc.abs() > MAX_STEP {
                log::debug!("oscillator {j} left the stable range");
                return Err(Error::UnstableStep {
                    t: i as f64 * dt,
                    step: inc.abs(),
                });
            }
            *theta = wrap(*theta + inc);
        }
        if i % record_every == 0 {
            let t = i as f64 * dt;
            run.times.push(t);
            run.order_parameter.push(order_parameter(&phases));
            if track {
                let spread = median_pairwise_distance(&phases);
                run.spread.push(spread);
                if let Some(limit) = opts.stop_below {
                    if spread < limit {
                        run.sync_time = Some(t);
                        break;
                    }
                }
            }
        }
    }
    run.final_phases = phases;
    Ok(run)
}

/// Normalized histogram of the recorded phases after `burn_in`. Value `i`
/// is the mean density over `[i/bins, (i+1)/bins)`.
pub fn empirical_density(traj: &PhaseTrajectory, bins: usize, burn_in: f64) -> Result<StationaryDensity> {
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if traj.duration() - burn_in < 100.0 {
        return Err(Error::InvalidParameter(format!(
            "only {} time units remain after burn-in (need 100)",
            traj.duration() - burn_in
        )));
    }
    let start = traj.after(burn_in);
    let kept = &traj.phases[start..];
    if kept.len() < 10_000 {
        return Err(Error::TooFewSamples {
            got: kept.len(),
            need: 10_000,
        });
    }
    let counts = histogram(kept, bins);
    let total = kept.len() as f64;
    let values = counts
        .iter()
        .map(|&c| c as f64 * bins as f64 / total)
        .collect();

    // mean rotation rate over the kept window estimates the flux
    let mut advance = 0.0;
    for w in kept.windows(2) {
        advance += signed_gap(w[1], w[0]);
    }
    let span = traj.times[traj.times.len() - 1] - traj.times[start];
    StationaryDensity::new(values, advance / span, DensityMethod::Empirical, traj.sigma)
}

fn histogram(phases: &[f64], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &t in phases {
        let b = ((t * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Goodness of fit of a phase histogram to a reference density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    /// Pearson statistic divided by the variance inflation.
    pub statistic: f64,
    pub raw_statistic: f64,
    /// Ratio of the batch-means variance of the bin fractions to the
    /// multinomial variance; corrects for serial correlation.
    pub inflation: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: usize,
}

/// Pearson χ² test of the recorded phases after `burn_in` against
/// `reference`, a density on [0, 1). Serial correlation is accounted for
/// with a batch-means estimate of the variance inflation over `batches`
/// contiguous blocks.
pub fn histogram_chi_square<F>(
    traj: &PhaseTrajectory,
    reference: F,
    bins: usize,
    burn_in: f64,
    batches: usize,
) -> Result<ChiSquareTest>
where
    F: Fn(f64) -> f64,
{
    if bins < 2 || batches < 2 {
        return Err(Error::InvalidParameter("need at least 2 bins and 2 batches".into()));
    }
    let kept = &traj.phases[traj.after(burn_in)..];
    let per_batch = kept.len() / batches;
    if per_batch == 0 {
        return Err(Error::TooFewSamples {
            got: kept.len(),
            need: batches,
        });
    }
    let kept = &kept[..per_batch * batches];
    let n = kept.len() as f64;

    let probs: Vec<f64> = (0..bins)
        .map(|b| {
            let lo = b as f64 / bins as f64;
            let h = 1.0 / (bins as f64 * 64.0);
            (0..64).map(|j| reference(lo + (j as f64 + 0.5) * h) * h).sum()
        })
        .collect();
    let mass: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / mass).collect();

    let counts = histogram(kept, bins);
    let raw: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&o, &p)| {
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();

    let batch_fractions: Vec<Vec<f64>> = kept
        .chunks(per_batch)
        .map(|chunk| {
            histogram(chunk, bins)
                .iter()
                .map(|&c| c as f64 / per_batch as f64)
                .collect()
        })
        .collect();
    let m = batches as f64;
    let inflation = (0..bins)
        .map(|b| {
            let mean = batch_fractions.iter().map(|f| f[b]).sum::<f64>() / m;
            let var = batch_fractions.iter().map(|f| (f[b] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            var * per_batch as f64 / (probs[b] * (1.0 - probs[b]))
        })
        .sum::<f64>()
        / bins as f64;

    let statistic = raw / inflation;
    let dof = bins - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidParameter(format!("chi-square distribution: {e}")))?;
    Ok(ChiSquareTest {
        statistic,
        raw_statistic: raw,
        inflation,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
        samples: kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sigma(s: f64) -> NoiseAmplitude {
        NoiseAmplitude::new(s).unwrap()
    }

    #[test]
    fn zero_noise_is_rigid_rotation() {
        let tr = simulate_phase(&Prc::type2(), sigma(0.0), 10.0, 1e-3, 7).unwrap();
        for (t, th) in tr.times().iter().zip(tr.phases()) {
            assert!(circle_distance(*th, t.rem_euclid(1.0)) < 1e-9);
        }
        assert_eq!(tr.len(), 10_001);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = simulate_phase(&Prc::type2(), sigma(0.1), 10.0, 1e-3, 42).unwrap();
        let b = simulate_phase(&Prc::type2(), sigma(0.1), 10.0, 1e-3, 42).unwrap();
        let c = simulate_phase(&Prc::type2(), sigma(0.1), 10.0, 1e-3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.phases(), c.phases());
    }

    #[test]
    fn preconditions() {
        let p = Prc::type2();
        assert!(simulate_phase(&p, sigma(0.1), 5.0, 1e-3, 0).is_err());
        assert!(simulate_phase(&p, sigma(0.5), 10.0, 1e-2, 0).is_err());
        assert!(estimate_lyapunov_mc(&p, sigma(0.1), 10.0, 1e-3, 4, 0).is_err());
    }

    #[test]
    fn unstable_step_is_reported() {
        let huge = Prc::sine(-500.0);
        let err = simulate_phase(&huge, sigma(1.0), 10.0, 1e-3, 1).unwrap_err();
        assert!(matches!(err, Error::UnstableStep { .. }));
    }

    #[test]
    fn zero_noise_exponent_is_exactly_zero() {
        let est = estimate_lyapunov_mc(&Prc::type2(), sigma(0.0), 10.0, 1e-3, 8, 3).unwrap();
        assert_eq!(est.value(), 0.0);
        assert_eq!(est.std_error(), Some(0.0));
    }

    #[test]
    fn pair_estimator_contracts() {
        let est = estimate_lyapunov_pair(&Prc::type2(), sigma(0.1), 200.0, 1e-3, 8, 5).unwrap();
        let target = -2.0 * std::f64::consts::PI.powi(2) * 0.01;
        assert!(est.value() < 0.0);
        assert!(est.within(target, 4.0), "{est:?} vs {target}");
    }

    #[test]
    fn log_separation_slope_is_contracting() {
        let path = log_separation(&Prc::type2(), sigma(0.2), 500.0, 1e-3, 4, 100).unwrap();
        let (slope, se) = path.slope();
        assert!(slope < 0.0 && se > 0.0);
        assert!((slope + 2.0 * std::f64::consts::PI.powi(2) * 0.04).abs() < 0.2);
        let still = log_separation(&Prc::type2(), sigma(0.0), 20.0, 1e-3, 4, 100).unwrap();
        assert!(still.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_phases_stay_synchronous() {
        let run = ensemble_sync_from(
            &Prc::type2(),
            sigma(0.1),
            &[0.3, 0.3],
            20.0,
            1e-3,
            9,
            &EnsembleOptions {
                record_every: 100,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(run.order_parameter.iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ensemble_shares_the_noise_of_a_single_trajectory() {
        let p = Prc::type2();
        let opts = EnsembleOptions::default();
        let one = ensemble_sync_from(&p, sigma(0.1), &[0.2], 10.0, 1e-3, 11, &opts).unwrap();
        let two = ensemble_sync_from(&p, sigma(0.1), &[0.2, 0.2], 10.0, 1e-3, 11, &opts).unwrap();
        let single = simulate_phase_from(&p, sigma(0.1), 0.2, 10.0, 1e-3, 11, 1).unwrap();
        assert_eq!(one.final_phases[0], two.final_phases[0]);
        assert_eq!(two.final_phases[0], two.final_phases[1]);
        assert_eq!(one.final_phases[0], *single.phases().last().unwrap());
    }

    #[test]
    fn zero_noise_order_parameter_is_constant() {
        let run = ensemble_sync(&Prc::type2(), sigma(0.0), 10, 10.0, 1e-3, 2).unwrap();
        let r0 = run.order_parameter[0];
        assert!(run.order_parameter.iter().all(|&r| (r - r0).abs() < 1e-9));
    }

    #[test]
    fn median_distance() {
        assert_abs_diff_eq!(median_pairwise_distance(&[0.0, 0.1, 0.3]), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(median_pairwise_distance(&[0.95, 0.05]), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(order_parameter(&[0.0, 0.5]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn histogram_properties() {
        let tr = simulate_phase(&Prc::type2(), sigma(0.0), 200.0, 1e-3, 0).unwrap();
        let d = empirical_density(&tr, 1, 50.0).unwrap();
        assert_eq!(d.values(), &[1.0]);
        let d = empirical_density(&tr, 16, 50.0).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-2));
        assert_abs_diff_eq!(d.integral(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.flux(), 1.0, epsilon = 1e-9);
        assert!(empirical_density(&tr, 16, 150.0).is_err());
        let short = simulate_phase_from(&Prc::type2(), sigma(0.0), 0.0, 200.0, 1e-3, 0, 100).unwrap();
        assert!(matches!(
            empirical_density(&short, 16, 50.0),
            Err(Error::TooFewSamples { .. })
        ));
    }
}
