use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adam-regret"));
    c.env("RUST_LOG", "warn");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quadratic_setup(dir: &Path, extra: &str) -> PathBuf {
    write(dir, "p.toml", "kind = \"quadratic\"\nd = 3\nseed = 2\nmu = 0.5\n");
    write(
        dir,
        "c.toml",
        &format!("problem_spec = \"p.toml\"\noptimizer = \"adam\"\nT = 40\n{extra}"),
    )
}

#[test]
fn run_writes_three_files_with_t_times_d_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_setup(dir.path(), "[params]\neta = 0.1\n");
    let out = dir.path().join("out");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,i,w_before,g,e,m_hat,v_hat,w_after"));
    assert_eq!(lines.count(), 40 * 3);
    let bound = std::fs::read_to_string(out.join("bound_report.csv")).unwrap();
    // configured epsilon and the epsilon = 0 companion
    assert_eq!(bound.lines().count(), 3);
    assert!(bound.starts_with("T,d,regret,"));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("bound holds                yes"), "{report}");
    assert!(!out.join("corollary.csv").exists());
}

#[test]
fn gamma_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_setup(dir.path(), "[params]\nbeta1 = 0.99\nbeta2 = 0.5\n");
    let o = run(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma < 1"));
}

#[test]
fn malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "optimizer = \n");
    assert_eq!(run(&["run", "--config", s(&cfg)]).status.code(), Some(1));
    assert_eq!(run(&["run"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn overflowing_gradient_exits_2_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_setup(dir.path(), "w0 = [1e308, 1e308, 1e308]\n");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"));
}

#[test]
fn separable_logistic_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "p.toml",
        "kind = \"logistic\"\nd = 3\nn_samples = 2\nmu = 0.0\n",
    );
    let cfg = write(
        dir.path(),
        "c.toml",
        "problem_spec = \"p.toml\"\noptimizer = \"adam\"\nT = 5\n",
    );
    let o = run(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gd_run_leaves_moment_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "p.toml",
        "kind = \"quadratic\"\nd = 2\nseed = 2\nmu = 0.5\n",
    );
    let cfg = write(
        dir.path(),
        "c.toml",
        "problem_spec = \"p.toml\"\noptimizer = \"gd\"\nT = 5\n",
    );
    let out = dir.path().join("o");
    assert_eq!(
        run(&["run", "--config", s(&cfg), "--out", s(&out)]).status.code(),
        Some(0)
    );
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 5 * 2);
    assert!(traj.lines().nth(1).unwrap().contains(",,,"));
}

#[test]
fn schedule_writes_corollary_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_setup(dir.path(), "T_schedule = [10, 20, 40]\n[params]\neta = 0.1\n");
    let out = dir.path().join("o");
    assert_eq!(
        run(&["run", "--config", s(&cfg), "--out", s(&out)]).status.code(),
        Some(0)
    );
    let csv = std::fs::read_to_string(out.join("corollary.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("T,avg_regret,avg_bound"));
    assert_eq!(csv.lines().count(), 4);
}

fn race_member(dir: &Path, name: &str, optimizer: &str, horizon: usize, spec: &str) -> PathBuf {
    write(
        dir,
        name,
        &format!("problem_spec = \"{spec}\"\noptimizer = \"{optimizer}\"\nT = {horizon}\n[params]\neta = 0.1\n"),
    )
}

#[test]
fn race_shape_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "p.toml",
        "kind = \"logistic\"\nd = 4\nseed = 1\nn_samples = 30\n",
    );
    write(
        dir.path(),
        "q.toml",
        "kind = \"logistic\"\nd = 4\nseed = 2\nn_samples = 30\n",
    );
    let gd = race_member(dir.path(), "gd.toml", "gd", 25, "p.toml");
    let mo = race_member(dir.path(), "mo.toml", "momentum", 25, "p.toml");
    let ad = race_member(dir.path(), "ad.toml", "adam", 25, "p.toml");
    let out = dir.path().join("o");
    let o = run(&[
        "race",
        "--config",
        s(&gd),
        "--config",
        s(&mo),
        "--config",
        s(&ad),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("race.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,optimizer,objective_value"));
    assert_eq!(csv.lines().count(), 1 + 3 * 25);

    assert_eq!(
        run(&["race", "--config", s(&gd), "--out", s(&out)]).status.code(),
        Some(1)
    );
    let other = race_member(dir.path(), "other.toml", "adam", 25, "q.toml");
    assert_eq!(
        run(&["race", "--config", s(&gd), "--config", s(&other)]).status.code(),
        Some(1)
    );
    let longer = race_member(dir.path(), "longer.toml", "adam", 30, "p.toml");
    assert_eq!(
        run(&["race", "--config", s(&gd), "--config", s(&longer)]).status.code(),
        Some(1)
    );
}

#[test]
fn fuzz_is_deterministic_and_rejects_bad_grid() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["fuzz", "--trials", "10", "--seed", "3", "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0));
        assert!(out.join("counterexamples").is_dir());
    }
    assert_eq!(
        std::fs::read(a.join("fuzz_summary.txt")).unwrap(),
        std::fs::read(b.join("fuzz_summary.txt")).unwrap()
    );

    let grid = write(
        dir.path(),
        "grid.toml",
        "[[grid]]\nbeta1 = 0.99\nbeta2 = 0.5\nlambda = 0.9\n",
    );
    let o = run(&[
        "fuzz",
        "--config",
        s(&grid),
        "--trials",
        "10",
        "--out",
        s(&dir.path().join("c")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma < 1"));
}

#[test]
fn injected_violation_exits_10_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["fuzz", "--trials", "10", "--out", s(&out), "--inject-known-violation"]);
    assert_eq!(o.status.code(), Some(10));
    let record = out.join("counterexamples").join("injected_000.toml");
    assert!(record.exists());
    let r = run(&["replay", "--file", s(&record)]);
    assert_eq!(r.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("violated       true"), "{stdout}");
    assert!(stdout.contains("relative error 0.0000000000000000e0"), "{stdout}");

    // a tampered record no longer replays to its recorded slack
    let text = std::fs::read_to_string(&record).unwrap();
    let tampered = text.replace("g = [\n  [1.0000000000000000e0],", "g = [\n  [9.0000000000000000e-1],");
    assert_ne!(text, tampered);
    let bad = write(dir.path(), "bad.toml", &tampered);
    assert_eq!(run(&["replay", "--file", s(&bad)]).status.code(), Some(2));
}

#[test]
fn thread_variable_must_be_a_number() {
    let o = bin()
        .args(["fuzz", "--trials", "1"])
        .env("ADAM_REGRET_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bundled_configs_load() {
    use adam_regret_cli::fuzz::{load_fuzz_config, FuzzOverrides};
    use adam_regret_cli::RunConfig;
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["adam.toml", "gd.toml", "momentum.toml"] {
        let cfg = RunConfig::load(&root.join(name)).unwrap();
        assert_eq!(cfg.label(), name.trim_end_matches(".toml"));
    }
    let fuzz = load_fuzz_config(Some(&root.join("fuzz.toml")), &FuzzOverrides::default()).unwrap();
    assert_eq!(fuzz.grid.len(), 2);
}
