mod common;

use std::path::Path;
use std::process::Command;

use common::{fixtures_dir, write_vgrid};
use ect::fixtures::synthetic_pair;
use ect::volume::{BinaryVolume, GrayVolume, Volume};
use serde_json::Value;

const GOLDEN_SEED: u64 = 7;

fn ect(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ect"))
        .args(args)
        .env_remove("ECT_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &std::process::Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn fixture_paths() -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
    let dir = fixtures_dir();
    (
        dir.join("pred_8.vgrid"),
        dir.join("gt_8.vgrid"),
        dir.join("loss_seed7.json"),
    )
}

/// Set `UPDATE_GOLDEN=1` to rewrite the fixture volumes and the expected
/// report.
#[test]
fn golden_loss_report() {
    let (pred, gt, golden) = fixture_paths();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let (p, g) = synthetic_pair([8, 8, 8], GOLDEN_SEED).unwrap();
        std::fs::create_dir_all(fixtures_dir()).unwrap();
        write_vgrid(&fixtures_dir(), "pred_8.vgrid", p);
        write_vgrid(&fixtures_dir(), "gt_8.vgrid", g);
        let out = ect(&["loss", s(&pred), s(&gt), "--seed", "7"]);
        assert!(out.status.success());
        std::fs::write(&golden, &out.stdout).unwrap();
    }
    let expected = std::fs::read(&golden).unwrap();
    for threads in ["1", "4"] {
        let out = ect(&[
            "--threads",
            threads,
            "loss",
            s(&pred),
            s(&gt),
            "--seed",
            "7",
        ]);
        assert!(out.status.success());
        assert_eq!(
            String::from_utf8(out.stdout).unwrap(),
            String::from_utf8(expected.clone()).unwrap()
        );
    }
}

#[test]
fn golden_fixture_matches_library() {
    let (pred, gt, golden) = fixture_paths();
    let p = ect::load_volume(&pred).unwrap().into_gray();
    let g = ect::load_volume(&gt).unwrap().into_gray();
    let cfg = ect::LossConfig {
        seed: GOLDEN_SEED,
        ..Default::default()
    };
    let r = ect::total_loss(&p, &g, &cfg).unwrap();
    let v: Value = serde_json::from_slice(&std::fs::read(golden).unwrap()).unwrap();
    assert_eq!(v["topo"].as_f64().unwrap(), r.topo);
    assert_eq!(v["dice"].as_f64().unwrap(), r.dice);
    assert_eq!(v["total"].as_f64().unwrap(), r.total);
    assert_eq!(v["per_threshold"].as_array().unwrap().len(), 40);
    assert_eq!(v["config"]["seed"], 7);
    assert!(r.topo > 0.0);
}

#[test]
fn env_var_sets_threads() {
    let (pred, gt, golden) = fixture_paths();
    let out = Command::new(env!("CARGO_BIN_EXE_ect"))
        .args(["loss", s(&pred), s(&gt), "--seed", "7"])
        .env("ECT_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(golden).unwrap());

    let bad = Command::new(env!("CARGO_BIN_EXE_ect"))
        .args(["cells", s(&gt)])
        .env("ECT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn cells_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let block = BinaryVolume::from_fn([3, 3, 3], |c| c != [1, 1, 1]).unwrap();
    let p = write_vgrid(dir.path(), "shell.vgrid", block);
    let v = stdout_json(&ect(&["cells", s(&p)]));
    assert_eq!(v["counts"], serde_json::json!([26, 48, 24, 0]));
    assert_eq!(v["euler_characteristic"], 2);
    assert!(v["config"].is_object());

    let bar = BinaryVolume::from_coords([5, 1, 1], &[[0, 0, 0], [1, 0, 0], [2, 0, 0], [4, 0, 0]])
        .unwrap();
    let p = write_vgrid(dir.path(), "bar.vgrid", bar);
    let out = ect(&[
        "curve",
        "--input",
        s(&p),
        "--direction",
        "1,0,0",
        "--steps",
        "4",
    ]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "h,chi\n0,1\n1,1\n2,1\n3,1\n4,2\n"
    );

    let v = stdout_json(&ect(&[
        "--output",
        "json",
        "curve",
        "--input",
        s(&p),
        "--direction",
        "-1,0,0",
        "--steps",
        "4",
        "--range",
        "grid",
    ]));
    assert_eq!(v["samples"], serde_json::json!([1, 1, 2, 2, 2]));
}

#[test]
fn transform_and_distance() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_vgrid(
        dir.path(),
        "a.vgrid",
        BinaryVolume::from_coords([4, 4, 4], &[[1, 1, 1]]).unwrap(),
    );
    let b = write_vgrid(
        dir.path(),
        "b.vgrid",
        BinaryVolume::from_coords([4, 4, 4], &[[1, 1, 1], [3, 3, 3]]).unwrap(),
    );
    let v = stdout_json(&ect(&[
        "transform",
        "--input",
        s(&a),
        "--directions",
        "5",
        "--steps",
        "6",
    ]));
    assert_eq!(v["curves"].as_array().unwrap().len(), 5);
    assert_eq!(v["curves"][0].as_array().unwrap().len(), 7);

    let out = ect(&[
        "--output",
        "csv",
        "transform",
        "--input",
        s(&a),
        "--directions",
        "2",
        "--steps",
        "3",
    ]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().lines().count(),
        1 + 2 * 4
    );

    let same = stdout_json(&ect(&["distance", s(&a), s(&a)]));
    assert_eq!(same["distance_sq"], 0.0);
    let diff = stdout_json(&ect(&["distance", s(&a), s(&b), "--mode", "fibonacci"]));
    assert!(diff["distance_sq"].as_f64().unwrap() > 0.0);
    let complex = stdout_json(&ect(&["distance", s(&a), s(&b), "--range", "complex"]));
    assert!(complex["distance_sq"].as_f64().unwrap() >= 0.0);
}

#[test]
fn metrics_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let gt = BinaryVolume::from_fn([4, 4, 4], |[x, y, z]| x < 2 && y < 2 && z < 2).unwrap();
    let pred = GrayVolume::from_fn(
        [4, 4, 4],
        |[x, y, z]| if x < 2 && y < 2 && z < 1 { 0.9 } else { 0.2 },
    )
    .unwrap();
    let g = write_vgrid(dir.path(), "gt.vgrid", gt);
    let p = write_vgrid(dir.path(), "pred.vgrid", pred);
    let v = stdout_json(&ect(&["metrics", s(&p), s(&g)]));
    assert_eq!(v["iou_error"], 0.5);
    assert_eq!(v["volume_error"], 0.5);

    let v = stdout_json(&ect(&["verify", "--suite", "lemma2"]));
    assert_eq!(v["max_by_dimension"], serde_json::json!([1, 3, 9, 27]));
    assert_eq!(v["pass"], true);
    let v = stdout_json(&ect(&[
        "verify",
        "--suite",
        "stability",
        "--trials",
        "20",
        "--seed",
        "3",
    ]));
    assert_eq!(v["pass"], true);
    let v = stdout_json(&ect(&["verify", "--suite", "lemma1", "--trials", "30"]));
    assert_eq!(v["passed"], 30);
}

#[test]
fn bench_reports_every_size() {
    let v = stdout_json(&ect(&[
        "bench",
        "--sizes",
        "4,6",
        "--runs",
        "1",
        "--directions",
        "4",
        "--thresholds",
        "2",
    ]));
    let sizes = v["sizes"].as_array().unwrap();
    assert_eq!(sizes.len(), 2);
    assert_eq!(sizes[0]["runs"], 5);
    assert!(sizes[1]["transform_scaling"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let gray = write_vgrid(
        dir.path(),
        "g.vgrid",
        Volume::Gray(GrayVolume::filled([2, 2, 2], 0.5).unwrap()),
    );
    let small = write_vgrid(
        dir.path(),
        "s.vgrid",
        BinaryVolume::full([2, 2, 2]).unwrap(),
    );
    let big = write_vgrid(
        dir.path(),
        "b.vgrid",
        BinaryVolume::full([3, 3, 3]).unwrap(),
    );
    let junk = dir.path().join("junk.vgrid");
    std::fs::write(&junk, b"NOTAGRID\n").unwrap();

    // usage errors
    assert_eq!(ect(&[]).status.code(), Some(2));
    assert_eq!(
        ect(&["cells", "/no/such/file.vgrid"]).status.code(),
        Some(2)
    );
    assert_eq!(ect(&["cells", s(&small), "--bogus"]).status.code(), Some(2));
    assert_eq!(
        ect(&["--output", "csv", "cells", s(&small)]).status.code(),
        Some(2)
    );
    assert_eq!(
        ect(&["--threads", "0", "cells", s(&small)]).status.code(),
        Some(2)
    );
    let out = ect(&["loss", "/missing/a.vgrid", s(&small)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    // domain errors: structured JSON on stderr
    for (args, kind) in [
        (vec!["cells", s(&gray)], "not_binary"),
        (vec!["cells", s(&junk)], "bad_magic"),
        (vec!["distance", s(&small), s(&big)], "shape_mismatch"),
        (
            vec!["loss", s(&small), s(&small), "--steps", "0"],
            "invalid_parameter",
        ),
        (
            vec!["curve", "--input", s(&small), "--direction", "0,0,0"],
            "invalid_direction",
        ),
    ] {
        let out = ect(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], kind, "{args:?}");
    }

    assert_eq!(ect(&["--version"]).status.code(), Some(0));
}
