use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lfsgsc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfsgsc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen(cwd: &Path, out: &str, seed: &str) {
    let o = lfsgsc(
        &[
            "gen",
            "--clusters",
            "4",
            "--ambient",
            "30",
            "--dim",
            "3",
            "--per-cluster",
            "40",
            "--noise",
            "0",
            "--seed",
            seed,
            "-o",
            out,
        ],
        cwd,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn config(cwd: &Path, kind: &str, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let o = lfsgsc(&["config-schema", kind], cwd);
    assert!(o.status.success());
    let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["data"]["matrix"] = "out/data.bin".into();
    v["data"]["labels"] = "out/labels.txt".into();
    edit(&mut v);
    let path = format!("{kind}.json");
    fs::write(cwd.join(&path), serde_json::to_string(&v).unwrap()).unwrap();
    path
}

#[test]
fn gen_is_deterministic_and_rejects_bad_dims() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "a", "7");
    gen(dir.path(), "b", "7");
    for f in ["data.bin", "labels.txt"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    let labels = fs::read_to_string(dir.path().join("a/labels.txt")).unwrap();
    assert_eq!(labels.lines().count(), 160);

    let o = lfsgsc(
        &["gen", "--ambient", "3", "--dim", "3", "-o", "c"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lfsgsc(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        lfsgsc(
            &["eval", "--truth", "missing.txt", "--pred", "missing.txt"],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(lfsgsc(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn eval_on_identical_labels() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "out", "1");
    let o = lfsgsc(
        &[
            "eval",
            "--truth",
            "out/labels.txt",
            "--pred",
            "out/labels.txt",
        ],
        dir.path(),
    );
    assert_eq!(stdout(&o).trim(), "ACC 100.00 NMI 100.00 F1 100.00");
}

#[test]
fn cluster_recovers_noiseless_subspaces() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "out", "2");
    let o = lfsgsc(
        &[
            "cluster",
            "--data",
            "out/data.bin",
            "--clusters",
            "4",
            "--lambda",
            "1e-3",
            "--truth",
            "out/labels.txt",
            "-o",
            "pred.txt",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "ACC 100.00 NMI 100.00 F1 100.00");
    assert_eq!(
        fs::read_to_string(dir.path().join("pred.txt"))
            .unwrap()
            .lines()
            .count(),
        160
    );
}

#[test]
fn hpo_single_grid_writes_trace_summary_and_gap() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "out", "3");
    let cfg = config(dir.path(), "hpo", |_| {});
    let o = lfsgsc(&["hpo", "--config", &cfg, "-o", "hpo"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("hpo/summary.json")).unwrap())
            .unwrap();
    for r in summary["results"].as_array().unwrap() {
        let lambda = r["optimum"]["lambda"].as_f64().unwrap();
        assert!((1e-5..=10.0).contains(&lambda));
    }
    assert!(summary["gap"]["acc"].is_number());
    let trace = fs::read_to_string(dir.path().join("hpo/trace_lfsg.csv")).unwrap();
    assert!(trace.starts_with("iter,l1,l2,l3,l4,h12,h23,h34\n"));
    assert!(dir.path().join("hpo/labels_oracle.txt").is_file());
}

#[test]
fn hpo_two_grids_reports_both_optima() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "out", "4");
    let cfg = config(dir.path(), "hpo", |v| {
        v["algorithm"]["kind"] = "kernel_lsr".into();
        v["grid"] = serde_json::json!([1e-3, 1e-2, 1e-1, 1.0]);
        v["secondary_grid"] = serde_json::json!([1.0, 10.0, 100.0]);
        v["mode"] = "lfsg".into();
    });
    let o = lfsgsc(&["hpo", "--config", &cfg, "-o", "hpo"], dir.path());
    assert!(
        matches!(o.status.code(), Some(0 | 2)),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("hpo/summary.json")).unwrap())
            .unwrap();
    let r = &summary["results"][0];
    assert!(r["optimum"]["lambda"].is_number());
    assert!(r["optimum"]["sigma2"].is_number());
    assert!(dir.path().join("hpo/trace_lfsg_lambda.csv").is_file());
    assert!(dir.path().join("hpo/trace_lfsg_sigma2.csv").is_file());
}

#[test]
fn bench_report_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "out", "5");
    let cfg = config(dir.path(), "bench", |v| {
        v["runs"] = 3.into();
        v["in_per_class"] = 25.into();
        v["out_per_class"] = 15.into();
        v["subspace_dim"] = 3.into();
    });
    let a = lfsgsc(&["bench", "--config", &cfg, "-o", "a"], dir.path());
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    lfsgsc(
        &["bench", "--config", &cfg, "-o", "b", "--serial"],
        dir.path(),
    );
    lfsgsc(&["bench", "--config", &cfg, "-o", "c"], dir.path());
    let ra = fs::read(dir.path().join("a/report.csv")).unwrap();
    assert_eq!(ra, fs::read(dir.path().join("b/report.csv")).unwrap());
    assert_eq!(ra, fs::read(dir.path().join("c/report.csv")).unwrap());
    let text = String::from_utf8(ra).unwrap();
    assert!(text.contains("mean,oracle,out_acc,,100.000000"));
    assert!(text.contains("ranksum_p,lfsg-vs-oracle,in_acc,,1.000000"));
}

#[test]
fn bench_single_run_notes_degenerate_std() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "out", "6");
    let cfg = config(dir.path(), "bench", |v| {
        v["runs"] = 1.into();
        v["in_per_class"] = 20.into();
        v["out_per_class"] = 10.into();
        v["mode"] = "lfsg".into();
    });
    let o = lfsgsc(&["bench", "--config", &cfg, "-o", "r"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("degenerate"));
    let csv = fs::read_to_string(dir.path().join("r/report.csv")).unwrap();
    assert!(csv.contains("std,lfsg,in_acc,,0.000000"));
}

#[test]
fn bench_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "out", "6");
    let cfg = config(dir.path(), "bench", |v| v["runs"] = 0.into());
    assert_eq!(
        lfsgsc(&["bench", "--config", &cfg, "-o", "r"], dir.path())
            .status
            .code(),
        Some(1)
    );
    fs::write(dir.path().join("broken.json"), "{").unwrap();
    assert_eq!(
        lfsgsc(&["hpo", "--config", "broken.json", "-o", "r"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn oos_on_noiseless_held_out_points() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "train", "8");
    // same seed, so the held-out points lie on the same subspaces
    let o = lfsgsc(
        &[
            "gen",
            "--clusters",
            "4",
            "--ambient",
            "30",
            "--dim",
            "3",
            "--per-cluster",
            "80",
            "--seed",
            "8",
            "-o",
            "test",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let o = lfsgsc(
        &[
            "oos",
            "--train",
            "train/data.bin",
            "--train-labels",
            "train/labels.txt",
            "--test",
            "test/data.bin",
            "--test-labels",
            "test/labels.txt",
            "--dim",
            "3",
            "-o",
            "pred.txt",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("OOS ACC 100.00"));
}

#[test]
fn viz_writes_one_pgm_per_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let o = lfsgsc(
        &[
            "gen",
            "--clusters",
            "10",
            "--ambient",
            "256",
            "--dim",
            "4",
            "--per-cluster",
            "20",
            "--noise",
            "0.01",
            "-o",
            "usps",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let o = lfsgsc(
        &[
            "viz",
            "--data",
            "usps/data.bin",
            "--labels",
            "usps/labels.txt",
            "--dx",
            "16",
            "--dy",
            "16",
            "-o",
            "img",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for c in 1..=10 {
        let bytes = fs::read(dir.path().join(format!("img/cluster_{c}.pgm"))).unwrap();
        assert_eq!(bytes.len(), "P5\n16 16\n255\n".len() + 256);
    }
    let o = lfsgsc(
        &[
            "viz",
            "--data",
            "usps/data.bin",
            "--labels",
            "usps/labels.txt",
            "--dx",
            "16",
            "--dy",
            "15",
            "-o",
            "bad",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}
