//! End-to-end runs of the compiled binary: exit codes, file layout,
//! header formats, sidecar contents and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radau-dae"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn first_line(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("utf-8").lines().next().expect("non-empty")
}

#[test]
fn solve_writes_three_deterministic_files() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().to_str().expect("utf-8 path");
    let args = [
        "solve",
        "--problem", "demo_index1",
        "--degree", "16",
        "--grid", "0:125.664:10",
        "--subnodes", "50",
        "--out-dir", out,
    ];
    let first = run(&args, &[]);
    assert_eq!(first.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&first.stderr));

    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .expect("listing")
        .map(|e| e.expect("entry").file_name().into_string().expect("utf-8"))
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "demo_index1_N16.errors.csv",
            "demo_index1_N16.run.json",
            "demo_index1_N16.trajectory.csv",
        ]
    );

    let trajectory = read(dir.path(), "demo_index1_N16.trajectory.csv");
    let errors = read(dir.path(), "demo_index1_N16.errors.csv");
    let sidecar = read(dir.path(), "demo_index1_N16.run.json");
    assert_eq!(first_line(&trajectory), "kind,t,u0,u1,v0");
    assert_eq!(first_line(&errors), "kind,t,eps_u,eps_v,eps_g1");
    // 1 header + 11 node rows + 10 cells x 50 sub-nodes.
    assert_eq!(
        std::str::from_utf8(&trajectory).expect("utf-8").lines().count(),
        1 + 11 + 500
    );

    let json: serde_json::Value = serde_json::from_slice(&sidecar).expect("valid json");
    assert_eq!(json["config"]["degree"], 16);
    assert_eq!(json["config"]["problem"]["name"], "demo_index1");
    assert_eq!(json["config"]["grid"]["cells"], 10);
    assert_eq!(json["outcome"]["completed_cells"], 10);
    assert_eq!(json["outcome"]["failure"], serde_json::Value::Null);
    assert!(json["outcome"]["counters"]["newton_iterations"].as_u64().expect("count") >= 10);

    // A rerun with the identical config overwrites with identical bytes.
    let second = run(&args, &[]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(read(dir.path(), "demo_index1_N16.trajectory.csv"), trajectory);
    assert_eq!(read(dir.path(), "demo_index1_N16.errors.csv"), errors);
    assert_eq!(read(dir.path(), "demo_index1_N16.run.json"), sidecar);
}

#[test]
fn unknown_problem_is_a_usage_error_listing_the_registry() {
    let out = run(
        &["solve", "--problem", "nope", "--degree", "2", "--grid", "0:1:4"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown problem `nope`"), "stderr: {stderr}");
    for name in ["ode_harmonic", "pendulum_index3", "flame"] {
        assert!(stderr.contains(name), "registry listing misses {name}: {stderr}");
    }
}

#[test]
fn malformed_grid_is_a_usage_error() {
    let out = run(
        &["solve", "--problem", "ode_harmonic", "--degree", "2", "--grid", "0:1"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn segmented_flame_grid_runs_to_the_far_boundary() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(
        &[
            "solve",
            "--problem", "flame,delta=1e-4",
            "--degree", "3",
            "--grid", "0:8000:10,8000:12000:1000,12000:20000:10",
            "--subnodes", "1",
            "--out-dir", dir.path().to_str().expect("utf-8 path"),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "flame_N3.run.json")).expect("valid json");
    assert_eq!(json["outcome"]["completed_cells"], 1020);
    assert_eq!(json["config"]["grid"]["span"][1], 20000.0);
}

#[test]
fn newton_failure_reports_the_cell_and_keeps_the_partial_run() {
    // The fine segment misses the flame transition at t = 1/delta = 1e4,
    // so a coarse cell crossing it fails to converge.
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(
        &[
            "solve",
            "--problem", "flame,delta=1e-4",
            "--degree", "3",
            "--grid", "0:4000:10,4000:6000:1000,6000:20000:10",
            "--subnodes", "1",
            "--out-dir", dir.path().to_str().expect("utf-8 path"),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("cell"), "stderr: {stderr}");
    let json: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "flame_N3.run.json")).expect("valid json");
    let completed = json["outcome"]["completed_cells"].as_u64().expect("count");
    assert!(completed < 1020, "failure must stop the march, got {completed}");
    assert!(json["outcome"]["failure"].is_string());
    let trajectory = read(dir.path(), "flame_N3.trajectory.csv");
    assert_eq!(
        std::str::from_utf8(&trajectory).expect("utf-8").lines().count() as u64,
        1 + (completed + 1) + completed
    );
}

#[test]
fn convergence_recovers_the_superconvergent_node_order() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(
        &[
            "convergence",
            "--problem", "ode_harmonic",
            "--degree", "3",
            "--grids", "0:12.566370614359172:10;0:12.566370614359172:14;0:12.566370614359172:20",
            "--out-dir", dir.path().to_str().expect("utf-8 path"),
        ],
        &[("RADAU_DAE_THREADS", "2")],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for name in ["orders.csv", "global_errors.csv", "run.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let orders = read(dir.path(), "orders.csv");
    let text = std::str::from_utf8(&orders).expect("utf-8");
    assert_eq!(text.lines().next(), Some("N,target,norm,fitted_p,fit_residual,samples_used,floor_filtered"));
    let row = text
        .lines()
        .find(|l| l.starts_with("3,u-node,L1,"))
        .expect("u-node L1 row present");
    let fitted: f64 = row.split(',').nth(3).expect("fitted column").parse().expect("number");
    assert!((fitted - 7.0).abs() < 1.0, "degree 3 node order, got {fitted}");
    let row = text
        .lines()
        .find(|l| l.starts_with("3,u-local,L1,"))
        .expect("u-local L1 row present");
    let fitted: f64 = row.split(',').nth(3).expect("fitted column").parse().expect("number");
    assert!((fitted - 4.0).abs() < 1.0, "degree 3 local order, got {fitted}");
    // The final-time norm exists for node samples only.
    assert!(!text.contains("u-local,final"));
    assert!(text.contains("u-node,final"));
}

#[test]
fn single_grid_convergence_is_a_usage_error() {
    let out = run(
        &[
            "convergence",
            "--problem", "ode_harmonic",
            "--degree", "3",
            "--grids", "0:12.566370614359172:10",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn newton_trace_records_per_cell_increments() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(
        &[
            "newton-trace",
            "--problem", "newton_demo",
            "--degree", "4",
            "--grid", "0:6.283185307179586:10",
            "--out-dir", dir.path().to_str().expect("utf-8 path"),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let trace = read(dir.path(), "newton_demo_N4.newton_trace.csv");
    let text = std::str::from_utf8(&trace).expect("utf-8");
    assert_eq!(text.lines().next(), Some("cell,iteration,neg_log10_dx"));
    assert!(text.lines().any(|l| l.starts_with("9,")), "all ten cells traced");
    let json: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "newton_demo_N4.run.json")).expect("valid json");
    let max = json["outcome"]["max_iterations"].as_u64().expect("count");
    assert!((1..=8).contains(&max), "double-precision cells converge fast, got {max}");
}

#[test]
fn stability_profiles_record_the_unit_origin() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run(
        &[
            "stability",
            "--degree", "1",
            "--window", "-20:0:-20:20",
            "--resolution", "24:25",
            "--rays", "1,1.5",
            "--ray-range", "1e-1:1e2",
            "--out-dir", dir.path().to_str().expect("utf-8 path"),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let rays = read(dir.path(), "stability_N1.rays.csv");
    let text = std::str::from_utf8(&rays).expect("utf-8");
    assert_eq!(text.lines().next(), Some("angle_pi,abs_z,re_r,im_r,abs_r"));
    let origin_rows: Vec<&str> = text
        .lines()
        .filter(|l| l.split(',').nth(1) == Some("0.0000000000000000e0"))
        .collect();
    assert_eq!(origin_rows.len(), 2, "one z = 0 row per ray");
    for row in origin_rows {
        let abs_r = row.split(',').nth(4).expect("abs_r column");
        assert_eq!(abs_r, "1.0000000000000000e0");
    }

    let raster = read(dir.path(), "stability_N1.raster.csv");
    assert_eq!(first_line(&raster), "re,im,abs_r");
    assert_eq!(
        std::str::from_utf8(&raster).expect("utf-8").lines().count(),
        1 + 24 * 25
    );

    let json: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "stability_N1.run.json")).expect("valid json");
    let max = json["outcome"]["max_abs_r"].as_f64().expect("number");
    assert!(max <= 1.0 + 1e-12, "A-stable window, got {max}");
}

#[test]
fn list_problems_prints_the_whole_registry() {
    let out = run(&["list-problems"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in [
        "ode_harmonic",
        "demo_index1",
        "newton_demo",
        "simple_index1",
        "hessenberg_index1",
        "hessenberg_index2",
        "hessenberg_index2_reduced1",
        "pendulum_index3",
        "pendulum_index2",
        "pendulum_index1",
        "double_pendulum_index3",
        "double_pendulum_index2",
        "double_pendulum_index1",
        "flame",
    ] {
        assert!(stdout.contains(name), "listing misses {name}");
    }
    assert!(stdout.contains("delta"), "flame parameter documented");
}
