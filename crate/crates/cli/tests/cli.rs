//! End-to-end tests driving the compiled binary through temp-dir pipelines.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualclust"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn dualclust");
    assert!(
        out.status.success(),
        "command failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("read json artifact");
    serde_json::from_str(&text).expect("parse json artifact")
}

/// Three tight groups on a line; points 0 and 1 share a group.
fn write_line_dataset(path: &Path) {
    let mut text = String::from("f0,f1\n");
    for base in [0.0, 10.0, 20.0] {
        for off in [0.0, 0.3, 0.6] {
            text.push_str(&format!("{},{}\n", base + off, off));
        }
    }
    std::fs::write(path, text).expect("write dataset");
}

struct Pipeline {
    dir: tempfile::TempDir,
}

impl Pipeline {
    fn new() -> Self {
        Pipeline { dir: tempfile::tempdir().expect("tempdir") }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Synthetic dataset + ground-truth constraint set, shared by several tests.
    fn synth_with_constraints(&self) -> (PathBuf, PathBuf) {
        let data = self.path("data.csv");
        let cons = self.path("cons.json");
        run_ok(bin()
            .args(["synth", "--metric", "euclidean", "--seed", "4", "--out"])
            .arg(&data));
        run_ok(bin()
            .arg("genconstraints")
            .arg("--data")
            .arg(&data)
            .args(["--size", "6", "--seed", "9", "--out"])
            .arg(&cons));
        (data, cons)
    }
}

#[test]
fn synth_is_deterministic_and_readable() {
    let p = Pipeline::new();
    let a = p.path("a.csv");
    let b = p.path("b.csv");
    for out in [&a, &b] {
        run_ok(bin()
            .args(["synth", "--metric", "manhattan", "--seed", "11", "--out"])
            .arg(out));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must reproduce the same file");
    let text = String::from_utf8(bytes_a).unwrap();
    assert!(text.starts_with("# dualclust "), "missing provenance preamble");
    // 200 points + preamble + header.
    assert_eq!(text.lines().count(), 202);
}

#[test]
fn pipeline_dual_fitness_filter() {
    let p = Pipeline::new();
    let (data, cons) = p.synth_with_constraints();
    let dual = p.path("dual.json");
    run_ok(bin()
        .arg("dual")
        .arg("--data")
        .arg(&data)
        .args(["--model", "mssc", "--k", "3", "--seed", "2"])
        .args(["--max-iterations", "30", "--time-limit", "5"])
        .arg("--constraints")
        .arg(&cons)
        .arg("--out")
        .arg(&dual));
    let dual_json = read_json(&dual);
    assert!(dual_json["dual_bound"].as_f64().unwrap().is_finite());
    assert_eq!(dual_json["k"], 3);
    assert_eq!(dual_json["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
    assert_eq!(dual_json["config"]["command"], "dual");
    assert_eq!(dual_json["must_link"].as_array().unwrap().len() + dual_json["cannot_link"].as_array().unwrap().len(), 6);

    let fit = p.path("fit.json");
    run_ok(bin().arg("fitness").arg("--dual").arg(&dual).arg("--out").arg(&fit));
    let fit_json = read_json(&fit);
    let score = fit_json["score"].as_u64().unwrap();
    let max_score = fit_json["max_score"].as_u64().unwrap();
    assert_eq!(max_score, 18, "k=3 times 6 constraints");
    assert!(score <= max_score);
    assert_eq!(fit_json["per_constraint"].as_array().unwrap().len(), 6);

    let kept = p.path("kept.json");
    let removed = p.path("removed.json");
    run_ok(bin()
        .arg("filter")
        .arg("--dual")
        .arg(&dual)
        .args(["--alpha", "0.5", "--keep-zero-impact"])
        .arg("--out")
        .arg(&kept)
        .arg("--removed")
        .arg(&removed));
    let kept_json = read_json(&kept);
    let removed_json = read_json(&removed);
    let count = |v: &Value| {
        v["must_link"].as_array().unwrap().len() + v["cannot_link"].as_array().unwrap().len()
    };
    // keep_zero_impact puts every constraint in exactly one side.
    assert_eq!(count(&kept_json) + count(&removed_json), 6);
}

#[test]
fn dual_reruns_are_byte_identical() {
    let p = Pipeline::new();
    let (data, cons) = p.synth_with_constraints();
    let out1 = p.path("dual1.json");
    let out2 = p.path("dual2.json");
    for out in [&out1, &out2] {
        run_ok(bin()
            .arg("dual")
            .arg("--data")
            .arg(&data)
            .args(["--model", "mssc", "--k", "3", "--seed", "7"])
            .args(["--max-iterations", "25", "--time-limit", "5"])
            .arg("--constraints")
            .arg(&cons)
            .arg("--out")
            .arg(out));
    }
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out2).unwrap(),
        "identical invocations must produce identical artifacts"
    );
}

#[test]
fn ari_of_identical_partitions_prints_one() {
    let p = Pipeline::new();
    let (data, _) = p.synth_with_constraints();
    let part = p.path("part.json");
    run_ok(bin()
        .arg("cluster")
        .arg("--data")
        .arg(&data)
        .args(["--model", "mssc", "--k", "3", "--restarts", "3", "--seed", "1"])
        .arg("--out")
        .arg(&part));
    let out = run_ok(bin().arg("ari").arg("--a").arg(&part).arg("--b").arg(&part));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.0");
}

#[test]
fn dual_without_constraints_is_a_usage_error() {
    let p = Pipeline::new();
    let out = bin()
        .arg("dual")
        .arg("--data")
        .arg(p.path("missing.csv"))
        .args(["--model", "mssc", "--k", "3"])
        .output()
        .expect("spawn dualclust");
    assert_eq!(out.status.code(), Some(2), "missing required flag is a usage error");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--constraints"), "stderr should name the missing flag: {stderr}");
}

#[test]
fn domain_errors_exit_one_with_coded_message() {
    let p = Pipeline::new();
    let out = bin()
        .arg("fitness")
        .arg("--dual")
        .arg(p.path("nope.json"))
        .output()
        .expect("spawn dualclust");
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error["), "expected coded error, got: {stderr}");
}

#[test]
fn transform_satisfies_violated_constraint() {
    let p = Pipeline::new();
    let data = p.path("line.csv");
    write_line_dataset(&data);
    // Points 0 and 1 are in the same tight group: cannot-link is violated.
    std::fs::write(p.path("cl.json"), r#"{"cannot_link": [[0, 1]]}"#).unwrap();
    let out_csv = p.path("moved.csv");
    let trace = p.path("trace.csv");
    let out = run_ok(bin()
        .arg("transform")
        .arg("--data")
        .arg(&data)
        .args(["--k", "3", "--mode", "random", "--restarts", "2", "--seed", "5"])
        .arg("--constraints")
        .arg(p.path("cl.json"))
        .arg("--trace")
        .arg(&trace)
        .arg("--out")
        .arg(&out_csv));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("0 of 1 constraints still violated"),
        "transform should satisfy the constraint: {stdout}"
    );
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    let header = trace_text.lines().nth(1).unwrap();
    assert_eq!(
        header,
        "iteration,constraint_i,constraint_j,kind,moved_points,step_distance,cumulative_distance,ari,mssc"
    );
    // The transformed dataset still parses as a dataset.
    let moved_text = std::fs::read_to_string(&out_csv).unwrap();
    assert_eq!(moved_text.lines().count(), 11, "preamble + header + 9 points");
}

#[test]
fn declosses_reports_known_values() {
    let p = Pipeline::new();
    std::fs::write(p.path("q.csv"), "0.9,0.1\n0.2,0.8\n0.5,0.5\n").unwrap();
    std::fs::write(p.path("p.csv"), "1.0,0.0\n0.0,1.0\n0.5,0.5\n").unwrap();
    std::fs::write(p.path("c.json"), r#"{"must_link": [[0,1]], "cannot_link": [[0,2]]}"#).unwrap();
    let out = run_ok(bin()
        .arg("declosses")
        .arg("--q")
        .arg(p.path("q.csv"))
        .arg("--p")
        .arg(p.path("p.csv"))
        .arg("--constraints")
        .arg(p.path("c.json")));
    let value: Value = serde_json::from_slice(&out.stdout).expect("stdout json");
    let l_ml = value["l_ml"].as_f64().unwrap();
    let l_cl = value["l_cl"].as_f64().unwrap();
    assert!((l_ml - 0.26f64.ln()).abs() < 1e-12);
    assert!((l_cl - 0.5f64.ln()).abs() < 1e-12);
    assert!(value["l_c"].as_f64().unwrap() >= 0.0);
}

#[test]
fn kmedoids_cluster_from_data_with_metric() {
    let p = Pipeline::new();
    let data = p.path("line.csv");
    write_line_dataset(&data);
    let part = p.path("part.json");
    run_ok(bin()
        .arg("cluster")
        .arg("--data")
        .arg(&data)
        .args(["--model", "kmedoids", "--metric", "manhattan", "--k", "3"])
        .args(["--kmedoids-mode", "exact", "--out"])
        .arg(&part));
    let json = read_json(&part);
    assert_eq!(json["assignment"].as_array().unwrap().len(), 9);
    assert_eq!(json["medoids"].as_array().unwrap().len(), 3);
    assert!(json["objective"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let p = Pipeline::new();
    let (data, cons) = p.synth_with_constraints();
    let config = p.path("conf.toml");
    std::fs::write(
        &config,
        "k = 3\nseed = 2\n\n[solver]\nmax_iterations = 10\ntime_limit_seconds = 5.0\n",
    )
    .unwrap();
    let from_file = p.path("file.json");
    run_ok(bin()
        .arg("--config")
        .arg(&config)
        .arg("dual")
        .arg("--data")
        .arg(&data)
        .arg("--constraints")
        .arg(&cons)
        .arg("--out")
        .arg(&from_file));
    let json = read_json(&from_file);
    assert_eq!(json["iterations"].as_u64(), Some(10), "config file iteration cap");

    let overridden = p.path("flag.json");
    run_ok(bin()
        .arg("--config")
        .arg(&config)
        .arg("dual")
        .arg("--data")
        .arg(&data)
        .args(["--max-iterations", "5"])
        .arg("--constraints")
        .arg(&cons)
        .arg("--out")
        .arg(&overridden));
    let json = read_json(&overridden);
    assert_eq!(json["iterations"].as_u64(), Some(5), "flag overrides config file");
}
