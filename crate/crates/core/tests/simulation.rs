use phasesync::prc::{NoiseAmplitude, Prc};
use phasesync::roots::circle_distance;
use phasesync::sde::{self, EnsembleOptions};

fn sigma(s: f64) -> NoiseAmplitude {
    NoiseAmplitude::new(s).unwrap()
}

fn sync_time(prc: &Prc, seed: u64) -> f64 {
    let initial = sde::uniform_phases(50, seed);
    let opts = EnsembleOptions {
        record_every: 10,
        stop_below: Some(1e-3),
        track_spread: true,
    };
    let run = sde::ensemble_sync_from(prc, sigma(0.1), &initial, 5000.0, 1e-2, seed, &opts).unwrap();
    run.sync_time.unwrap_or(f64::INFINITY)
}

#[test]
fn type_two_synchronizes_an_ensemble_faster() {
    let (two, one) = (Prc::type2(), Prc::type1());
    let pairs: Vec<(f64, f64)> = (0..16).map(|seed| (sync_time(&two, seed), sync_time(&one, seed))).collect();
    let wins = pairs.iter().filter(|(a, b)| a < b).count();
    let mean = |f: fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / pairs.len() as f64;
    let (m2, m1) = (mean(|p| p.0), mean(|p| p.1));
    assert!(m2.is_finite() && m1.is_finite(), "{pairs:?}");
    assert!(m2 < m1, "mean sync times {m2} vs {m1}");
    assert!(wins >= 12, "type II faster in only {wins} of 16 seeds: {pairs:?}");
}

#[test]
fn order_parameter_tends_to_one() {
    let run = sde::ensemble_sync(&Prc::type2(), sigma(0.2), 20, 300.0, 1e-3, 3).unwrap();
    let last = *run.order_parameter.last().unwrap();
    assert!(last > 0.999, "R(T) = {last}");
    let mut csv = Vec::new();
    run.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("t,R\n0,"));
}

#[test]
fn histogram_follows_the_drift_correction() {
    let traj = sde::simulate_phase(&Prc::type2(), sigma(0.1), 2100.0, 1e-3, 12).unwrap();
    let d = sde::empirical_density(&traj, 4, 100.0).unwrap();
    let v = d.values();
    // ΔΔ′ = 2π sin 4πθ is positive on the first and third quarters
    assert!(v[0] > v[1] && v[2] > v[3], "{v:?}");
    assert!((d.integral() - 1.0).abs() < 1e-12);
    assert!((d.flux() - 1.0).abs() < 0.01, "J = {}", d.flux());
}

#[test]
fn trajectories_are_reproducible() {
    let run = || {
        let t = sde::simulate_phase(&Prc::type1(), sigma(0.3), 20.0, 1e-3, 99).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        out
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.starts_with(b"t,theta\n"));
}

#[test]
fn estimators_agree() {
    let p = Prc::type2();
    let s = sigma(0.1);
    let y = sde::estimate_lyapunov_mc(&p, s, 500.0, 1e-3, 16, 5).unwrap();
    let pair = sde::estimate_lyapunov_pair(&p, s, 500.0, 1e-3, 16, 6).unwrap();
    let se = y.std_error().unwrap().hypot(pair.std_error().unwrap());
    assert!((y.value() - pair.value()).abs() < 3.0 * se, "{y:?} vs {pair:?}");
}

#[test]
fn step_size_bias_is_below_noise() {
    let p = Prc::type2();
    let s = sigma(0.1);
    let coarse = sde::estimate_lyapunov_mc(&p, s, 500.0, 1e-3, 16, 21).unwrap();
    let fine = sde::estimate_lyapunov_mc(&p, s, 500.0, 5e-4, 16, 22).unwrap();
    let se = coarse.std_error().unwrap().hypot(fine.std_error().unwrap());
    assert!((coarse.value() - fine.value()).abs() < 3.0 * se, "{coarse:?} vs {fine:?}");
}

#[cfg(feature = "parallel")]
#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sde::estimate_lyapunov_mc(&Prc::type2(), sigma(0.1), 50.0, 1e-3, 12, 8).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.value().to_bits(), four.value().to_bits());
    assert_eq!(one.std_error().unwrap().to_bits(), four.std_error().unwrap().to_bits());
}

#[test]
fn single_oscillator_ensemble_is_the_trajectory() {
    let p = Prc::type2();
    let traj = sde::simulate_phase(&p, sigma(0.1), 10.0, 1e-3, 31).unwrap();
    let run = sde::ensemble_sync_from(&p, sigma(0.1), &[0.0], 10.0, 1e-3, 31, &EnsembleOptions::default()).unwrap();
    assert!(circle_distance(run.final_phases[0], *traj.phases().last().unwrap()) == 0.0);
}
