use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mfuq() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mfuq"));
    c.env_remove("MFUQ_OUT");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    let o = mfuq().args(args).arg("--out").arg(out).output().unwrap();
    assert!(
        o.status.success(),
        "mfuq {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Data rows of a stamped CSV, parsed as numbers.
fn rows(p: &Path) -> (String, Vec<Vec<f64>>) {
    let text = read(p);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    let header = lines.next().unwrap().to_string();
    let body = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, body)
}

#[test]
fn no_arguments_prints_usage() {
    let o = mfuq().output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = mfuq().args(["benchmark", "--case", "lin1d", "--colour"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = mfuq().args(["benchmark", "--case", "lin9d"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfuq()
        .args(["fit", "--cheap", "missing.csv", "--expensive", "missing.csv", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn fit_lift_tables_interpolates_nektar() {
    let dir = tempfile::tempdir().unwrap();
    let cheap = data("lift_cheap.csv");
    let expensive = data("lift_expensive.csv");
    run(
        &["fit", "--cheap", cheap.to_str().unwrap(), "--expensive", expensive.to_str().unwrap()],
        dir.path(),
    );
    let (header, grid) = rows(&dir.path().join("grid.csv"));
    assert_eq!(header, "aoa,mean,s2");
    assert_eq!(grid.len(), 101);
    assert_eq!((grid[0][0], grid[100][0]), (1.0, 7.0));
    assert!(grid.iter().all(|r| r[2] >= 0.0));

    let model = dir.path().join("model.json");
    let pred = dir.path().join("pred");
    run(
        &["predict", "--model", model.to_str().unwrap(), "--points", expensive.to_str().unwrap()],
        &pred,
    );
    let (_, p) = rows(&pred.join("predictions.csv"));
    for (r, cl) in p.iter().zip([0.6270, 0.7623, 0.9333, 0.9929]) {
        assert!((r[1] - cl).abs() < 1e-4, "{r:?}");
    }
}

#[test]
fn json_out_names_the_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("drag.json");
    let o = mfuq()
        .args(["fit", "--cheap"])
        .arg(data("drag_cheap.csv"))
        .arg("--expensive")
        .arg(data("drag_expensive.csv"))
        .args(["--surrogate", "kriging", "--normalize", "--out"])
        .arg(&target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.exists() && dir.path().join("grid.csv").exists());
    let v: serde_json::Value = serde_json::from_str(&read(&target)).unwrap();
    assert_eq!(v["surrogate"]["kind"], "kriging");
    assert_eq!(v["output"], "cd");
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\n[uq]\nn = 2000\nbins = 20\ndist = \"gaussian\"\n").unwrap();
    let uq = |extra: &[&str], out: &str| {
        let mut args = vec!["uq", "--benchmark", "lin1d", "--config", cfg.to_str().unwrap()];
        args.extend_from_slice(extra);
        run(&args, &dir.path().join(out));
        let v: serde_json::Value = serde_json::from_str(&read(&dir.path().join(out).join("summary.json"))).unwrap();
        v
    };
    let a = uq(&[], "a");
    assert_eq!(a["n_samples"], 2000);
    assert_eq!(a["bins"], 20);
    assert_eq!(a["seed"], 5);
    assert_eq!(a["distribution"]["kind"], "gaussian-truncated");
    let b = uq(&["--bins", "30", "--dist", "uniform"], "b");
    assert_eq!(b["bins"], 30);
    assert_eq!(b["distribution"]["kind"], "uniform");
    assert_ne!(a["config_sha256"], b["config_sha256"]);

    std::fs::write(&cfg, "[uq]\nsamples = 3\n").unwrap();
    let o = mfuq().args(["uq", "--benchmark", "lin1d", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn environment_sets_the_default_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfuq()
        .env("MFUQ_OUT", dir.path())
        .args(["benchmark", "--case", "lin1d", "--model", "kriging"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = read(&dir.path().join("results.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "case,model,seed,n_lf,n_hf,n_test,mse,r2");
    assert!(lines[2].starts_with("lin1d,kriging,0,21,4,1000,"));
    assert_eq!(lines.len(), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("kriging"));
}

#[test]
fn sample_traces_distinct_points() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &["sample", "--benchmark", "lin1d", "--criterion", "2", "--iterations", "3", "--surrogate", "kriging", "--dump-grid"],
        dir.path(),
    );
    let (header, t) = rows(&dir.path().join("trace.csv"));
    assert_eq!(header, "iteration,x,y,criterion_max");
    assert_eq!(t.len(), 3);
    for (i, r) in t.iter().enumerate() {
        assert_eq!(r[0], (i + 1) as f64);
        assert!(t[..i].iter().all(|q| q[1] != r[1]));
    }
    let (_, g) = rows(&dir.path().join("criterion.csv"));
    assert_eq!(g.len(), 3 * 101);
}

#[test]
fn csv_infill_needs_suggest_only() {
    let dir = tempfile::tempdir().unwrap();
    let args = |extra: &[&str]| {
        let mut c = mfuq();
        c.arg("sample").arg("--cheap").arg(data("lift_cheap.csv")).arg("--expensive").arg(data("lift_expensive.csv"));
        c.args(extra).arg("--out").arg(dir.path());
        c.output().unwrap()
    };
    assert_eq!(args(&[]).status.code(), Some(1));
    assert!(args(&["--suggest-only", "--top", "4"]).status.success());
    let (header, s) = rows(&dir.path().join("suggestions.csv"));
    assert_eq!(header, "rank,aoa,criterion");
    assert_eq!(s.len(), 4);
    assert!(s.windows(2).all(|w| w[0][2] >= w[1][2]));
}

#[test]
fn train_and_propagate_network() {
    let dir = tempfile::tempdir().unwrap();
    run(&["train", "--benchmark", "lin1d", "--epochs", "300"], dir.path());
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    assert_eq!(summary["plan"]["preset"], "lin1d");
    assert_eq!(summary["plan"]["lf"]["epochs"], 300);
    assert!(summary["test"]["mse"].as_f64().unwrap().is_finite());

    let model = dir.path().join("model.json");
    let pred = dir.path().join("pred");
    run(&["predict", "--model", model.to_str().unwrap(), "--grid", "11"], &pred);
    let (header, p) = rows(&pred.join("predictions.csv"));
    assert_eq!(header, "x,mean,lf");
    assert_eq!(p.len(), 11);

    let uq = dir.path().join("uq");
    run(
        &["uq", "--model", model.to_str().unwrap(), "--benchmark", "lin1d", "--n", "1000", "--bins", "10"],
        &uq,
    );
    let (header, h) = rows(&uq.join("hist.csv"));
    assert_eq!(header, "lower,upper,count,density");
    assert_eq!(h.iter().map(|r| r[2]).sum::<f64>(), 1000.0);
    let area: f64 = h.iter().map(|r| (r[1] - r[0]) * r[3]).sum();
    assert!((area - 1.0).abs() < 1e-9);
}

#[test]
fn csv_training_needs_an_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfuq()
        .arg("train")
        .arg("--lf-csv")
        .arg(data("lift_cheap.csv"))
        .arg("--hf-csv")
        .arg(data("lift_expensive.csv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--preset"));
}

#[test]
fn dimension_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    run(&["train", "--benchmark", "lin1d", "--epochs", "5"], dir.path());
    let o = mfuq()
        .args(["uq", "--benchmark", "dim32", "--model"])
        .arg(dir.path().join("model.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gaussian_process_size_limit() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfuq()
        .args(["benchmark", "--case", "dim32", "--model", "cokriging", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--lf-count"));
}

#[test]
fn high_dim_benchmark_writes_scatter() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &["benchmark", "--case", "dim32", "--model", "kriging", "--hf-count", "60", "--n-test", "200"],
        dir.path(),
    );
    let (header, s) = rows(&dir.path().join("scatter.csv"));
    assert_eq!(header, "prediction,truth");
    assert_eq!(s.len(), 200);
}
