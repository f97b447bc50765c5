use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sabc::schedule::Trace;

fn sabc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sabc"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut argv = vec!["run", "--out-dir", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    sabc(&argv)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "--model",
            "toy1",
            "--n",
            "200",
            "--v-over-gamma",
            "3",
            "--max-sims",
            "3000",
            "--seed",
            "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "particles.csv",
        "weighted_particles.csv",
        "diagnostics.csv",
        "summary.json",
        "config.toml",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert_eq!(
        header(&dir.path().join("particles.csv")),
        "theta_1,rho,u,nu,weight"
    );
    assert_eq!(
        header(&dir.path().join("diagnostics.csv")),
        Trace::Flat(vec![]).header().join(",")
    );
    let rows = fs::read_to_string(dir.path().join("particles.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 201);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(summary["sims"].as_u64().unwrap() <= 3000);
    assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(summary["ess"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["final_eps"].as_array().unwrap().len(), 1);
}

#[test]
fn informative_diagnostics_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "--model",
            "toy2",
            "--algorithm",
            "adaptive-informative",
            "--n",
            "200",
            "--max-sims",
            "3000",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        header(&dir.path().join("diagnostics.csv")),
        Trace::Informative(vec![]).header().join(",")
    );
}

#[test]
fn written_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = run_in(
        &a,
        &[
            "--model",
            "toy2",
            "--y",
            "2",
            "--n",
            "150",
            "--max-sims",
            "2500",
            "--delta",
            "0.3",
            "--seed",
            "9",
        ],
    );
    assert!(out.status.success());
    let cfg = a.join("config.toml");
    let out = run_in(&b, &["--config", cfg.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "particles.csv",
        "weighted_particles.csv",
        "diagnostics.csv",
        "config.toml",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn flags_override_file_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "model = \"toy1\"\n[run]\nn = 120\nmax_sims = 2000\nseed = 4\n",
    )
    .unwrap();

    let from_file = dir.path().join("f");
    assert!(run_in(&from_file, &["--config", cfg.to_str().unwrap()])
        .status
        .success());
    let count = |d: &Path| {
        fs::read_to_string(d.join("particles.csv"))
            .unwrap()
            .lines()
            .count()
            - 1
    };
    assert_eq!(count(&from_file), 120);

    let flagged = dir.path().join("g");
    assert!(
        run_in(&flagged, &["--config", cfg.to_str().unwrap(), "--n", "80"])
            .status
            .success()
    );
    assert_eq!(count(&flagged), 80);

    let env_dir = dir.path().join("h");
    let out = Command::new(env!("CARGO_BIN_EXE_sabc"))
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env_clear()
        .env("SABC_N", "60")
        .env("SABC_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(count(&env_dir), 60);
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run_in(d, &["--model", "toy9"]).status.code(), Some(2));
    assert_eq!(
        run_in(d, &["--model", "toy1", "--n", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run_in(d, &["--model", "toy1", "--adapt-jump", "maybe"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run_in(
            d,
            &[
                "--model",
                "toy1",
                "--algorithm",
                "adaptive-informative",
                "--eps-init",
                "inf"
            ]
        )
        .status
        .code(),
        Some(2)
    );
    let bad = d.join("bad.toml");
    fs::write(&bad, "model = \"toy1\"\n[run]\nmax_simz = 10\n").unwrap();
    let out = run_in(d, &["--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_simz"));

    let out = run_in(
        d,
        &["--model", "toy1", "--eps-init", "1e-9", "--max-sims", "200"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps_init"));
}

#[test]
fn tuberculosis_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("clusters.csv");
    fs::write(&data, "cluster_size,count\n5,2\n2,10\n1,40\n").unwrap();
    let spec = format!("file:{}", data.display());
    let out = run_in(
        &dir.path().join("out"),
        &[
            "--model",
            &spec,
            "--n",
            "20",
            "--max-sims",
            "60",
            "--v-over-gamma",
            "7",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let missing = run_in(dir.path(), &["--model", "file:/nonexistent/x.csv"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn oracle_quartic() {
    let out = sabc(&["oracle", "quartic", "--u", "0.01", "--v-over-gamma", "3"]);
    assert!(out.status.success());
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 1.175e-3).abs() < 1e-6, "{v}");
    assert_eq!(
        sabc(&["oracle", "quartic", "--u", "-1", "--v-over-gamma", "3"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn oracle_posterior_cdf() {
    let out = sabc(&["oracle", "posterior-cdf", "--model", "toy1", "--theta", "0"]);
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 0.5).abs() < 1e-12);
    let out = sabc(&[
        "oracle",
        "posterior-cdf",
        "--model",
        "toy1",
        "--theta",
        "0.1",
    ]);
    let v: f64 = stdout(&out).trim().parse().unwrap();
    assert!((v - 0.6905).abs() < 1e-4, "{v}");
    assert_eq!(
        sabc(&["oracle", "posterior-cdf", "--model", "tb", "--theta", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn oracle_pi_eps_csv() {
    let out = sabc(&[
        "oracle", "pi-eps", "--model", "toy2", "--eps", "1", "--count", "10000",
    ]);
    assert!(out.status.success());
    let (particles, weights) = sabc::ensemble::read_particles_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(particles.len(), 10_000);
    assert!(weights.iter().all(|&w| w == 1.0));
    let mean = particles.iter().map(|p| p.theta[0]).sum::<f64>() / 1e4;
    // sd of the mean: sqrt(2/3 / 10000)
    assert!(
        (mean - 1.0).abs() < 4.0 * (2.0f64 / 3.0 / 1e4).sqrt(),
        "{mean}"
    );
}
