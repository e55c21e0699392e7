use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn phasesync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasesync"))
        .args(args)
        .env_remove("PHASESYNC_THREADS")
        .output()
        .expect("binary runs")
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Run {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Runs with `-o <name>` and returns the exit code.
    fn to(&self, name: &str, args: &[&str]) -> i32 {
        let out = self.path(name);
        let mut all = args.to_vec();
        all.extend(["-o", out.to_str().unwrap()]);
        let res = phasesync(&all);
        if !res.status.success() {
            eprintln!("{}", String::from_utf8_lossy(&res.stderr));
        }
        res.status.code().unwrap()
    }

    fn meta(&self, name: &str) -> Value {
        let text = std::fs::read_to_string(self.path(&format!("{name}.meta.json"))).unwrap();
        serde_json::from_str(&text).unwrap()
    }
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (headers, rows)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (headers, rows) = table(path);
    let i = headers.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

fn numbers(path: &Path, name: &str) -> Vec<f64> {
    column(path, name).iter().map(|v| v.parse().unwrap()).collect()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn optimize_matches_the_analytic_curve() {
    let run = Run::new();
    assert_eq!(run.to("opt.csv", &["optimize", "--a", "1", "--b", "1", "--c", "1", "--sigma", "0.05"]), 0);
    let (headers, rows) = table(&run.path("opt.csv"));
    assert_eq!(headers, ["theta", "analytic", "numeric", "difference"]);
    assert_eq!(rows.len(), 256);
    let meta = run.meta("opt.csv");
    assert!(meta["relative_deviation"].as_f64().unwrap() <= 1e-3);
    assert!(meta["nu1_relative_error"].as_f64().unwrap() < 0.05);
    assert_eq!(meta["case"], "unique-optimum");
    for key in ["cos", "sin", "nu1", "sigma", "residuals"] {
        assert!(meta["numeric"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(meta["config"]["subcommand"], "optimize");
    assert!(meta["timings"]["total"].as_f64().is_some());
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn family_case_reports_k_zero() {
    let run = Run::new();
    assert_eq!(run.to("fam.csv", &["optimize", "--a", "0", "--b", "1", "--c", "1"]), 0);
    let meta = run.meta("fam.csv");
    assert_eq!(meta["case"], "solution-family");
    assert!(meta["k_star"].as_f64().unwrap().abs() < 1e-8);
    let lambda = numbers(&run.path("fam.csv"), "lambda");
    let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(min, meta["lambda_star"].as_f64().unwrap());
}

#[test]
fn no_periodic_solution_exits_two() {
    let out = phasesync(&["optimize", "--a", "0", "--b", "1", "--c", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = error_json(&out);
    assert_eq!(err["error"], "inadmissible");
    assert_eq!(err["case"], "no-periodic-solution");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn invalid_parameters_exit_two() {
    let out = phasesync(&["density", "--sigma=-0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "invalid-parameter");
}

#[test]
fn sweep_tracks_the_product_term() {
    let run = Run::new();
    let args = ["sweep", "--a", "1", "--b", "1", "--c", "0", "--sigmas", "0.2,0.05,0.1"];
    assert_eq!(run.to("sweep.csv", &args), 0);
    let path = run.path("sweep.csv");
    assert_eq!(numbers(&path, "sigma"), [0.05, 0.1, 0.2]);
    let amp = numbers(&path, "product_amplitude");
    assert!(amp.windows(2).all(|w| w[1] > w[0]), "{amp:?}");
    assert!(column(&path, "status").iter().all(|s| s == "ok"));
}

#[test]
fn sweep_past_the_fold_keeps_rows_and_exits_three() {
    let run = Run::new();
    let args = ["sweep", "--a", "1", "--b", "1", "--c", "0", "--sigmas", "0.05,0.3"];
    assert_eq!(run.to("sweep.csv", &args), 3);
    let path = run.path("sweep.csv");
    assert_eq!(column(&path, "status"), ["ok", "singular"]);
    assert_eq!(column(&path, "nu1")[1], "");
    assert_eq!(run.meta("sweep.csv")["failures"][0]["sigma"], 0.3);
}

#[test]
fn family_sweep_is_symmetric_in_k() {
    let run = Run::new();
    let args = ["sweep", "--a", "0", "--b", "1", "--c", "1", "--sigmas", "0.1", "--ks", "-0.5,0,0.5"];
    assert_eq!(run.to("ks.csv", &args), 0);
    let lf = numbers(&run.path("ks.csv"), "lambda_family");
    assert_eq!(lf[0], lf[2]);
    assert!(lf[1] < lf[0]);
    let exact = numbers(&run.path("ks.csv"), "lambda");
    for (a, b) in lf.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-6 * a.abs());
    }
}

#[test]
fn lyapunov_table_agrees_across_methods() {
    let run = Run::new();
    let args = ["lyapunov", "--prc", "type2", "--sigma", "0.05", "--T", "200", "--seed", "4"];
    assert_eq!(run.to("l2.csv", &args), 0);
    let path = run.path("l2.csv");
    assert_eq!(column(&path, "method"), ["analytic", "uniform-approx", "monte-carlo"]);
    let lambda = numbers(&path, "lambda");
    assert!((lambda[0] + 0.0493480).abs() < 1e-4, "{lambda:?}");
    let se: f64 = column(&path, "stderr")[2].parse().unwrap();
    assert!((lambda[2] - lambda[0]).abs() < 3.0 * se);

    let args = ["lyapunov", "--prc", "type1", "--sigma", "0.05", "--realizations", "0"];
    assert_eq!(run.to("l1.csv", &args), 0);
    let l1 = numbers(&run.path("l1.csv"), "lambda");
    assert!((l1[0] + 0.0164493).abs() < 1e-4, "{l1:?}");
    assert!((l1[1] / lambda[1] - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn zero_noise_gives_zero_exponents() {
    let run = Run::new();
    assert_eq!(run.to("z.csv", &["lyapunov", "--sigma", "0", "--T", "10", "--realizations", "8"]), 0);
    assert!(numbers(&run.path("z.csv"), "lambda").iter().all(|&v| v == 0.0));
}

#[test]
fn density_sidecar_carries_the_flux() {
    let run = Run::new();
    assert_eq!(run.to("p.csv", &["density", "--prc", "type2", "--sigma", "0.1", "--method", "exact"]), 0);
    let meta = run.meta("p.csv");
    assert!((meta["J"].as_f64().unwrap() - 1.000494).abs() < 1e-5);
    assert_eq!(meta["method"], "exact");
    assert_eq!(meta["sigma"], 0.1);
    let (headers, rows) = table(&run.path("p.csv"));
    assert_eq!(headers, ["theta", "P"]);
    assert_eq!(rows.len(), 256);
}

#[test]
fn zero_noise_trajectory_is_rigid_rotation() {
    let run = Run::new();
    assert_eq!(run.to("t.csv", &["simulate", "--prc", "type2", "--sigma", "0", "--T", "10"]), 0);
    let path = run.path("t.csv");
    let (t, theta) = (numbers(&path, "t"), numbers(&path, "theta"));
    assert_eq!(t.len(), 10_001);
    for (t, th) in t.iter().zip(&theta) {
        let d = (th - t.rem_euclid(1.0)).abs();
        assert!(d.min(1.0 - d) < 1e-9, "t = {t}, theta = {th}");
    }
}

#[test]
fn ensemble_run_emits_order_parameter() {
    let run = Run::new();
    let args = ["simulate", "--N", "10", "--sigma", "0.2", "--T", "20", "--record-every", "100"];
    assert_eq!(run.to("r.csv", &args), 0);
    let (headers, rows) = table(&run.path("r.csv"));
    assert_eq!(headers, ["t", "R"]);
    assert_eq!(rows.len(), 201);
    assert!(numbers(&run.path("r.csv"), "R").iter().all(|r| (0.0..=1.0).contains(r)));
}

fn replays_identically(args: &[&str]) {
    let run = Run::new();
    assert_eq!(run.to("a.out", args), 0);
    let sidecar = run.path("a.out.meta.json");
    let again = run.path("b.out");
    let res = phasesync(&["replay", sidecar.to_str().unwrap(), "-o", again.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(std::fs::read(run.path("a.out")).unwrap(), std::fs::read(&again).unwrap());
    let (mut a, mut b) = (run.meta("a.out"), run.meta("b.out"));
    a["config"]["output"] = Value::Null;
    b["config"]["output"] = Value::Null;
    assert_eq!(a["config"], b["config"]);
}

#[test]
fn replay_reproduces_simulation() {
    replays_identically(&["simulate", "--prc", "type1", "--sigma", "0.3", "--T", "20", "--seed", "9"]);
}

#[test]
fn replay_reproduces_monte_carlo() {
    replays_identically(&["lyapunov", "--T", "20", "--realizations", "8", "--seed", "3", "--format", "json"]);
}

#[test]
fn replay_reproduces_optimization() {
    replays_identically(&["optimize", "--a", "1", "--b", "1", "--c", "0", "--sigma", "0.1", "--format", "json"]);
}

#[test]
fn replay_does_not_need_the_prc_file() {
    let run = Run::new();
    let file = run.path("curve.json");
    std::fs::write(&file, r#"{"cos": [0.0, 0.1], "sin": [-1.2, 0.05]}"#).unwrap();
    assert_eq!(run.to("d.csv", &["density", "--prc", file.to_str().unwrap(), "--sigma", "0.1"]), 0);
    std::fs::remove_file(&file).unwrap();
    let again = run.path("e.csv");
    let sidecar = run.path("d.csv.meta.json");
    let res = phasesync(&["replay", sidecar.to_str().unwrap(), "-o", again.to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(std::fs::read(run.path("d.csv")).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn worker_count_does_not_change_results() {
    let run = Run::new();
    let out = |threads: &str, name: &str| {
        let path = run.path(name);
        let status = Command::new(env!("CARGO_BIN_EXE_phasesync"))
            .args(["lyapunov", "--T", "20", "--realizations", "12", "-o", path.to_str().unwrap()])
            .env("PHASESYNC_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(out("1", "one.csv"), out("4", "four.csv"));
}

#[test]
fn stdout_run_writes_no_sidecar() {
    let out = phasesync(&["simulate", "--sigma", "0", "--T", "10", "--record-every", "1000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,theta\n0.0,0.0\n1.0,"));
    assert_eq!(text.lines().count(), 12);
}
