use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn lcs3d(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcs3d"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// A steady-ABC run small enough for CI: 24x24 grids, short windows.
fn tiny_config(dir: &Path, out: &str) -> PathBuf {
    let cfg = json!({
        "elliptic": {
            "t": 4.0, "nx": 24, "ny": 24,
            "x_range": [2.7, 4.7], "y_range": [3.7, 5.7],
            "seed_nx": 6, "seed_ny": 6
        },
        "hyperbolic": { "t": 1.0, "nx": 24, "ny": 24, "eps0": 0.5, "seed_nx": 6, "seed_ny": 6 },
        "lines": { "eps0": 0.5 },
        "surfaces": { "sweep_time": 0.5, "sweep_rows": 3, "m": 16 },
        "verify": { "oracle_cases": 2 },
        "output": dir.join(out)
    });
    let path = dir.join(format!("{out}.json"));
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn too_small_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"elliptic": {"nx": 4}}"#).unwrap();
    let out = lcs3d(dir.path(), &["--config", path.to_str().unwrap(), "grid"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("8x8"));
}

#[test]
fn bad_invocations_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lcs3d(dir.path(), &["--preset", "spiral", "grid"])), 1);
    assert_eq!(code(&lcs3d(dir.path(), &["grid", "--kind", "vortex"])), 1);
    assert_eq!(code(&lcs3d(dir.path(), &["--workers", "0", "grid"])), 1);
    assert_eq!(code(&lcs3d(dir.path(), &["--help"])), 0);
}

#[test]
fn lines_without_grids_is_a_compute_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "empty");
    let out = lcs3d(dir.path(), &["--config", cfg.to_str().unwrap(), "lines"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lcs3d grid --kind shear"));
}

#[test]
fn shear_pipeline_and_manifest_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "run");
    let cfg = cfg.to_str().unwrap();
    for cmd in ["grid", "lines", "surfaces"] {
        let out = lcs3d(dir.path(), &["--config", cfg, cmd, "--kind", "shear"]);
        assert_eq!(
            code(&out),
            0,
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let stage = dir.path().join("run/elliptic");
    let manifest: Value = serde_json::from_slice(&read(&stage.join("grid_manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["elliptic"]["nx"], 24);
    assert_eq!(manifest["planes"][0]["file"], "grids/plane_0000.grid");
    for kind in ["shear-plus", "shear-minus"] {
        let lines: Value =
            serde_json::from_slice(&read(&stage.join("lines").join(kind).join("manifest.json")))
                .unwrap();
        assert_eq!(lines["planes"].as_array().unwrap().len(), 1);
        assert!(stage
            .join("surfaces")
            .join(kind)
            .join("surfaces.json")
            .is_file());
    }

    // The manifest alone reproduces the grid.
    let rerun = lcs3d(
        dir.path(),
        &[
            "--config",
            stage.join("grid_manifest.json").to_str().unwrap(),
            "--out",
            dir.path().join("again").to_str().unwrap(),
            "grid",
        ],
    );
    assert_eq!(code(&rerun), 0);
    assert_eq!(
        read(&stage.join("grids/plane_0000.grid")),
        read(&dir.path().join("again/elliptic/grids/plane_0000.grid"))
    );
}

#[test]
fn strain_lines_and_perturbed_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "strain");
    let cfg = cfg.to_str().unwrap();
    for cmd in ["grid", "lines"] {
        let out = lcs3d(dir.path(), &["--config", cfg, cmd, "--kind", "strain"]);
        assert_eq!(
            code(&out),
            0,
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = lcs3d(
        dir.path(),
        &["--config", cfg, "verify", "perturbed-strainline"],
    );
    // Pass or fail of the drift checks is data dependent; the report is not.
    assert!(
        matches!(code(&out), 0 | 3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&read(
        &dir.path().join("strain/verify/perturbed-strainline.json"),
    ))
    .unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);
    assert!(dir
        .path()
        .join("strain/verify/perturbed_center.ply")
        .is_file());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "det");
    let cfg = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let out_dir = out_dir.to_str().unwrap();
        for cmd in ["grid", "lines"] {
            let out = lcs3d(
                dir.path(),
                &["--config", cfg, "--workers", workers, "--out", out_dir, cmd],
            );
            assert_eq!(code(&out), 0);
        }
        let stage = dir.path().join(format!("w{workers}/elliptic"));
        outputs.push((
            read(&stage.join("grids/plane_0000.grid")),
            read(&stage.join("lines/shear-plus/plane_0000.csv")),
            read(&stage.join("lines/shear-minus/plane_0000.csv")),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn oracle_and_area_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "verify");
    let cfg = cfg.to_str().unwrap();
    for exp in ["oracles", "area"] {
        let out = lcs3d(dir.path(), &["--config", cfg, "verify", exp]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        let report: Value =
            serde_json::from_slice(&read(&dir.path().join(format!("verify/verify/{exp}.json"))))
                .unwrap();
        assert!(report["checks"]
            .as_array()
            .unwrap()
            .iter()
            .all(|c| c["pass"] == true));
    }
}

#[test]
fn tracers_need_a_closed_shearline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "tr");
    let out = lcs3d(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "verify", "tracers"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn forcing_gen_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f.json");
    std::fs::write(
        &cfg,
        json!({ "forcing": { "t_span": [0.0, 20.0] }, "output": dir.path().join("f") }).to_string(),
    )
    .unwrap();
    let out = lcs3d(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "forcing-gen"],
    );
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(read(&dir.path().join("f/forcing.csv"))).unwrap();
    // 20 time units at dt = 0.01 plus the header.
    assert!(text.lines().count() >= 2001, "{}", text.lines().count());

    // The table drives the chaotic model.
    let chaotic = dir.path().join("c.json");
    std::fs::write(
        &chaotic,
        json!({
            "preset": "chaotic-abc",
            "field": { "forcing_file": dir.path().join("f/forcing.csv") },
            "elliptic": {
                "t": 2.0, "nx": 10, "ny": 10, "planes": { "list": [0.0] },
                "x_range": [3.0, 4.0], "y_range": [4.0, 5.0]
            },
            "output": dir.path().join("c")
        })
        .to_string(),
    )
    .unwrap();
    let out = lcs3d(dir.path(), &["--config", chaotic.to_str().unwrap(), "grid"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}
