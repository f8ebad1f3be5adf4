//! End-to-end checks of the command-line surface: exit codes, artifact
//! formats, determinism, and the window-edge contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spot"))
}

fn run(args: &[&str]) -> Output {
    spot().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("cfg.txt");
    std::fs::write(&path, format!("h_c = 1.7\nw = 5\n{extra}")).unwrap();
    path
}

/// Generate a small corridor dataset and return its directory.
fn synth_small(dir: &Path, query_direction: &str) -> PathBuf {
    let data = dir.join("data");
    let out = run(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--length",
        "250",
        "--seed",
        "5",
        "--query-direction",
        query_direction,
        "--query-offset",
        "4",
    ]);
    assert!(out.status.success(), "synth failed: {}", String::from_utf8_lossy(&out.stderr));
    data
}

struct Flow {
    cfg: PathBuf,
    data: PathBuf,
    db: PathBuf,
}

fn build_flow(dir: &Path, query_direction: &str) -> Flow {
    let cfg = write_config(dir, "");
    let data = synth_small(dir, query_direction);
    let db = dir.join("ref.db");
    let out = run(&[
        "build-ref",
        "--config",
        cfg.to_str().unwrap(),
        "--trajectory",
        data.join("ref_trajectory.csv").to_str().unwrap(),
        "--points",
        data.join("ref_points.bin").to_str().unwrap(),
        "--gt",
        data.join("ref_gt.csv").to_str().unwrap(),
        "--out",
        db.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "build-ref failed: {}", String::from_utf8_lossy(&out.stderr));
    Flow { cfg, data, db }
}

fn run_match(flow: &Flow, out_dir: &Path) {
    let out = run(&[
        "match",
        "--config",
        flow.cfg.to_str().unwrap(),
        "--db",
        flow.db.to_str().unwrap(),
        "--trajectory",
        flow.data.join("query_trajectory.csv").to_str().unwrap(),
        "--points",
        flow.data.join("query_points.bin").to_str().unwrap(),
        "--gt",
        flow.data.join("query_gt.csv").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "match failed: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    std::fs::write(&cfg, "h_c = 1.7\nfrobnicate = 3\n").unwrap();
    let out = run(&["build-ref", "--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frobnicate"));
}

#[test]
fn missing_h_c_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    std::fs::write(&cfg, "w = 5\n").unwrap();
    let out = run(&["build-ref", "--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("h_c"));
}

#[test]
fn missing_input_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = run(&[
        "build-ref",
        "--config",
        cfg.to_str().unwrap(),
        "--trajectory",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--points",
        dir.path().join("nope.bin").to_str().unwrap(),
        "--out",
        dir.path().join("db").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_set_syntax_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out =
        run(&["build-ref", "--config", cfg.to_str().unwrap(), "--set", "w25", "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn print_config_round_trips_and_honors_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "metric = cd\n");
    let out = run(&[
        "build-ref",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "w=9",
        "--print-config",
    ]);
    assert!(out.status.success());
    let dumped = String::from_utf8(out.stdout).unwrap();
    assert!(dumped.contains("w = 9"));
    assert!(dumped.contains("metric = cd"));

    // Parsing the dump and dumping again must reproduce it byte for byte.
    let cfg2 = dir.path().join("cfg2.txt");
    std::fs::write(&cfg2, &dumped).unwrap();
    let out2 = run(&["build-ref", "--config", cfg2.to_str().unwrap(), "--print-config"]);
    assert!(out2.status.success());
    assert_eq!(dumped, String::from_utf8(out2.stdout).unwrap());
}

#[test]
fn match_is_deterministic_and_respects_window_edges() {
    let dir = tempfile::tempdir().unwrap();
    let flow = build_flow(dir.path(), "reverse");
    let m1 = dir.path().join("m1");
    let m2 = dir.path().join("m2");
    run_match(&flow, &m1);
    run_match(&flow, &m2);
    let a = std::fs::read(m1.join("match.csv")).unwrap();
    let b = std::fs::read(m2.join("match.csv")).unwrap();
    assert_eq!(a, b, "identical inputs and config must give byte-identical match CSVs");

    let queries = std::fs::read_to_string(m1.join("queries.csv")).unwrap();
    let query_count = queries.lines().count() - 1;
    let matches = String::from_utf8(a).unwrap();
    let idx: Vec<usize> = matches
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    // w = 5: the first and last two queries never receive a match.
    assert_eq!(idx.first(), Some(&2));
    assert_eq!(idx.last(), Some(&(query_count - 3)));
    assert_eq!(idx.len(), query_count - 4);
    assert!(m1.join("timing.txt").is_file());
}

#[test]
fn eval_writes_pr_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let flow = build_flow(dir.path(), "reverse");
    let m = dir.path().join("m");
    run_match(&flow, &m);
    let e = dir.path().join("e");
    let out = run(&[
        "eval",
        "--config",
        flow.cfg.to_str().unwrap(),
        "--db",
        flow.db.to_str().unwrap(),
        "--match-dir",
        m.to_str().unwrap(),
        "--out",
        e.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "eval failed: {}", String::from_utf8_lossy(&out.stderr));
    for name in ["pr_15.csv", "pr_80.csv", "summary.txt"] {
        assert!(e.join(name).is_file(), "{name} missing");
    }
    let pr = std::fs::read_to_string(e.join("pr_15.csv")).unwrap();
    assert!(pr.starts_with("threshold,precision,recall\n"));
    let summary = std::fs::read_to_string(e.join("summary.txt")).unwrap();
    for key in ["mr100_15=", "auc_15=", "mr100_80=", "auc_80="] {
        assert!(summary.contains(key), "summary lacks {key}: {summary}");
    }
    // An opposing query over the same corridor should localize well.
    let mr100: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("mr100_15="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(mr100 > 0.5, "opposing small-corridor mr100 was {mr100}");
}

#[test]
fn eval_without_ground_truth_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let flow = build_flow(dir.path(), "reverse");
    let m = dir.path().join("m");
    // Match without --gt: queries.csv carries no positions.
    let out = run(&[
        "match",
        "--config",
        flow.cfg.to_str().unwrap(),
        "--db",
        flow.db.to_str().unwrap(),
        "--trajectory",
        flow.data.join("query_trajectory.csv").to_str().unwrap(),
        "--points",
        flow.data.join("query_points.bin").to_str().unwrap(),
        "--out",
        m.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&[
        "eval",
        "--config",
        flow.cfg.to_str().unwrap(),
        "--db",
        flow.db.to_str().unwrap(),
        "--match-dir",
        m.to_str().unwrap(),
        "--out",
        dir.path().join("e").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn paths_can_come_from_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path(), "forward");
    let db = dir.path().join("ref.db");
    let cfg = dir.path().join("cfg.txt");
    std::fs::write(
        &cfg,
        format!(
            "h_c = 1.7\nw = 5\ntrajectory = {}\npoints = {}\ngt = {}\ndb = {}\n",
            data.join("ref_trajectory.csv").display(),
            data.join("ref_points.bin").display(),
            data.join("ref_gt.csv").display(),
            db.display(),
        ),
    )
    .unwrap();
    let out = run(&["build-ref", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(db.is_file());
}

#[test]
fn matcher_variants_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let flow = build_flow(dir.path(), "reverse");
    for matcher in ["sm", "nn", "rk"] {
        let m = dir.path().join(format!("m_{matcher}"));
        let out = run(&[
            "match",
            "--config",
            flow.cfg.to_str().unwrap(),
            "--set",
            &format!("matcher={matcher}"),
            "--db",
            flow.db.to_str().unwrap(),
            "--trajectory",
            flow.data.join("query_trajectory.csv").to_str().unwrap(),
            "--points",
            flow.data.join("query_points.bin").to_str().unwrap(),
            "--gt",
            flow.data.join("query_gt.csv").to_str().unwrap(),
            "--out",
            m.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "matcher {matcher} failed");
        let rows = std::fs::read_to_string(m.join("match.csv")).unwrap();
        assert!(rows.lines().count() > 1, "matcher {matcher} produced no rows");
    }
}

#[test]
fn sweep_w_writes_one_summary_per_length() {
    let dir = tempfile::tempdir().unwrap();
    let flow = build_flow(dir.path(), "reverse");
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep-w",
        "--config",
        flow.cfg.to_str().unwrap(),
        "--db",
        flow.db.to_str().unwrap(),
        "--trajectory",
        flow.data.join("query_trajectory.csv").to_str().unwrap(),
        "--points",
        flow.data.join("query_points.bin").to_str().unwrap(),
        "--gt",
        flow.data.join("query_gt.csv").to_str().unwrap(),
        "--w-list",
        "5,9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary_w5.txt").is_file());
    assert!(out_dir.join("summary_w9.txt").is_file());
    let sweep = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("w,r_m,mr100,auc"));
    assert_eq!(sweep.lines().count(), 1 + 2 * 2);
}

#[test]
fn even_sweep_length_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let flow = build_flow(dir.path(), "forward");
    let out = run(&[
        "sweep-w",
        "--config",
        flow.cfg.to_str().unwrap(),
        "--db",
        flow.db.to_str().unwrap(),
        "--w-list",
        "4",
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
