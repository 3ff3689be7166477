use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use minkvox_core::io::{load_volume, store_volume, summary_json, to_json_text, Dtype};
use minkvox_core::{analyze, Kernel, Scheme, ShapeSpec, VoxelGrid};
use serde_json::Value;
use tempfile::TempDir;

fn minkvox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minkvox")).args(args).output().expect("spawn minkvox")
}

fn ok(args: &[&str]) -> String {
    let out = minkvox(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    minkvox(args).status.code().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate_ball(dir: &TempDir, name: &str, dims: &str, diameter: &str, depth: &str) -> PathBuf {
    let out = dir.path().join(name);
    ok(&["generate", "--shape", "ball", "--dims", dims, "--diameter", diameter, "--depth", depth, "--out", path_str(&out)]);
    out
}

#[test]
fn generate_then_analyze_matches_library() {
    let dir = TempDir::new().unwrap();
    let raw = generate_ball(&dir, "ball.raw", "24", "12", "3");
    let report = ok(&["analyze", path_str(&raw), "--kernel", "gaussian", "--sigma", "1.0"]);

    let grid = load_volume(&raw).unwrap();
    let expected = analyze(&grid, &Kernel::Gaussian { sigma: 1.0 }, Scheme::Central, 1e-12).unwrap();
    assert_eq!(report, to_json_text(&summary_json(&expected)));

    let v: Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["degenerate"], false);
    let beta = v["beta"].as_f64().unwrap();
    assert!(beta > 0.99, "beta {beta}");
}

#[test]
fn reports_are_byte_stable_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let raw = generate_ball(&dir, "ball.raw", "20", "10", "2");
    let args = ["analyze", path_str(&raw), "--format", "csv"];
    let first = ok(&args);
    assert_eq!(first, ok(&args));
    let single = Command::new(env!("CARGO_BIN_EXE_minkvox")).args(args).env("MINKVOX_THREADS", "1").output().unwrap();
    assert!(single.status.success());
    assert_eq!(first, String::from_utf8(single.stdout).unwrap());
}

#[test]
fn empty_image_is_degenerate_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("empty.raw");
    store_volume(&VoxelGrid::zeros([8, 8, 8], 1.0).unwrap(), &raw, Dtype::U8).unwrap();
    let out = minkvox(&["analyze", path_str(&raw)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["degenerate"], true);
    assert!(v["qnt"].is_null());
    assert!(v["beta"].is_null());
    assert_eq!(v["volume"].as_f64(), Some(0.0));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["analyze"]), 1);

    let missing = dir.path().join("missing.raw");
    assert_eq!(code(&["analyze", path_str(&missing)]), 2);

    let bad = dir.path().join("bad.raw");
    std::fs::write(&bad, [0u8; 10]).unwrap();
    std::fs::write(dir.path().join("bad.raw.json"), "{\"dims\": [4, 4, 4]}").unwrap();
    assert_eq!(code(&["analyze", path_str(&bad)]), 2);

    let raw = generate_ball(&dir, "small.raw", "8", "4", "1");
    assert_eq!(code(&["analyze", path_str(&raw), "--sigma", "9"]), 1);
    // An image without interface has no voxel with structure to orient.
    let empty = dir.path().join("empty.raw");
    store_volume(&VoxelGrid::zeros([8, 8, 8], 1.0).unwrap(), &empty, Dtype::U8).unwrap();
    assert_eq!(code(&["fiber-orient", path_str(&empty), "--mu", "1"]), 3);
    assert_eq!(code(&["fiber-orient", path_str(&raw), "--mu", "1", "--mask-rel", "2"]), 1);

    let out = dir.path().join("big.raw");
    assert_eq!(code(&["generate", "--shape", "ball", "--dims", "8", "--diameter", "16", "--out", path_str(&out)]), 1);
    assert!(!out.exists());
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let raw = generate_ball(&dir, "ball.raw", "8", "4", "1");
    let out = Command::new(env!("CARGO_BIN_EXE_minkvox"))
        .args(["analyze", path_str(&raw)])
        .env("MINKVOX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn separated_balls_have_additive_surface() {
    let dir = TempDir::new().unwrap();
    let dims = [48, 24, 24];
    let a = ShapeSpec::ball([12.3, 12.1, 12.2], 5.0);
    let b = ShapeSpec::ball([36.3, 12.1, 12.2], 5.0);
    let union = ShapeSpec::Union(vec![a.clone(), b]);

    let mut surfaces = Vec::new();
    for (name, shape) in [("one.raw", a), ("two.raw", union)] {
        let grid = minkvox_core::voxelize(&shape, dims, 1.0, 3).unwrap();
        let raw = dir.path().join(name);
        store_volume(&grid, &raw, Dtype::U8).unwrap();
        let v: Value = serde_json::from_str(&ok(&["analyze", path_str(&raw)])).unwrap();
        surfaces.push(v["surface"].as_f64().unwrap());
    }
    let rel = (surfaces[1] - 2.0 * surfaces[0]).abs() / surfaces[1];
    assert!(rel < 1e-10, "S(two) = {}, 2 S(one) = {}", surfaces[1], 2.0 * surfaces[0]);
}

#[test]
fn periodic_shift_leaves_report_unchanged() {
    let dir = TempDir::new().unwrap();
    let raw = generate_ball(&dir, "ball.raw", "20", "9", "2");
    let grid = load_volume(&raw).unwrap();
    let shifted = dir.path().join("shifted.raw");
    store_volume(&grid.shift([3, -5, 7]), &shifted, Dtype::U8).unwrap();

    let parse = |p: &Path| -> Value { serde_json::from_str(&ok(&["analyze", path_str(p)])).unwrap() };
    let (a, b) = (parse(&raw), parse(&shifted));
    for key in ["volume", "surface"] {
        let (x, y) = (a[key].as_f64().unwrap(), b[key].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-12 * x.abs(), "{key}: {x} vs {y}");
    }
    for c in ["xx", "yy", "zz", "xy", "xz", "yz"] {
        let (x, y) = (a["qnt"][c].as_f64().unwrap(), b["qnt"][c].as_f64().unwrap());
        assert!((x - y).abs() < 1e-12, "qnt {c}: {x} vs {y}");
    }
}

#[test]
fn convergence_table_is_sorted_and_stable() {
    let args = [
        "convergence",
        "--diameter",
        "8",
        "--resolutions",
        "8,4",
        "--depths",
        "2,1",
        "--kernels",
        "ball:1.2,none",
        "--no-timing",
    ];
    let csv = ok(&args);
    assert_eq!(csv, ok(&args));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "d_over_h,p,kernel,sigma,scheme,volume,surface,e,e_bar,wall_time_s");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    let keys: Vec<(f64, u32)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[9], "");
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
}

#[test]
fn fiber_orient_requires_second_filter() {
    let dir = TempDir::new().unwrap();
    let raw = generate_ball(&dir, "ball.raw", "16", "8", "1");
    let out = minkvox(&["fiber-orient", path_str(&raw)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("second filter"));
}

#[test]
fn fiber_array_orientation_with_reference() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("fibers.raw");
    ok(&[
        "generate",
        "--shape",
        "fiber-array",
        "--axes",
        "1,0,0;0,1,0;0,0,1",
        "--length",
        "24",
        "--diameter",
        "4",
        "--out",
        path_str(&raw),
    ]);
    let report = ok(&[
        "fiber-orient",
        path_str(&raw),
        "--mu",
        "2",
        "--reference",
        "0.3333333333333333,0.3333333333333333,0.3333333333333333,0,0,0",
    ]);
    let v: Value = serde_json::from_str(&report).unwrap();
    let e_a = v["e_a"].as_f64().unwrap();
    assert!(e_a < 0.1, "E_A {e_a}");
    let tr: f64 = ["xx", "yy", "zz"].iter().map(|c| v["a"][c].as_f64().unwrap()).sum();
    assert!((tr - 1.0).abs() < 1e-9);
}

#[test]
fn generated_ball_has_expected_volume_fraction() {
    let dir = TempDir::new().unwrap();
    let raw = generate_ball(&dir, "ball.raw", "24", "16", "4");
    let grid = load_volume(&raw).unwrap();
    let fraction = grid.mean();
    assert!((fraction - 0.155).abs() < 0.001, "fraction {fraction}");
}

#[test]
fn unidirectional_fibers_match_reference_orientation() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("ud.raw");
    let axes = vec!["1,0,0"; 20].join(";");
    ok(&[
        "generate", "--shape", "fiber-array", "--axes", &axes, "--cells", "1,5,4", "--length", "48", "--diameter", "8",
        "--gap", "8", "--out", path_str(&raw),
    ]);
    let report = ok(&["fiber-orient", path_str(&raw), "--sigma", "1.2", "--mu", "6", "--reference", "1,0,0,0,0,0"]);
    let v: Value = serde_json::from_str(&report).unwrap();
    let e_a = v["e_a"].as_f64().unwrap();
    assert!(e_a <= 0.09, "E_A {e_a}");
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn ball_sweep_converges_in_qnt() {
    let csv = ok(&[
        "convergence", "--resolutions", "4,8,16", "--depths", "3", "--kernels", "none", "--no-timing",
    ]);
    let e_bar = column(&csv, "e_bar");
    assert_eq!(e_bar.len(), 3);
    assert!(e_bar[0] > e_bar[1] && e_bar[1] > e_bar[2], "{e_bar:?}");

    let row = ok(&["convergence", "--resolutions", "16", "--depths", "3", "--kernels", "ball:1.2", "--no-timing"]);
    let e = column(&row, "e");
    assert!(e[0] <= 0.06, "E {}", e[0]);
}
