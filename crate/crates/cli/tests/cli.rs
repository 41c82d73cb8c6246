use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::Vector3;
use ricciface::align::{apply_transform, RigidTransform};
use ricciface::channels::read_mci;
use ricciface::fixtures;
use ricciface::mesh::write_obj;
use serde_json::Value;
use tempfile::TempDir;

fn ricciface(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ricciface"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Temp dir holding the fixture meshes under `fx/`.
fn with_fixtures() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = ricciface(&["fixtures", "--out", "fx"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

fn copy(dir: &Path, names: &[&str], to: &str) -> PathBuf {
    let target = dir.join(to);
    std::fs::create_dir_all(&target).unwrap();
    for n in names {
        std::fs::copy(dir.join("fx").join(n), target.join(n)).unwrap();
    }
    target
}

#[test]
fn flatten_writes_image_and_reports() {
    let dir = with_fixtures();
    let out = ricciface(&["flatten", "--input", "fx/cap.obj", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.contains("1 of 1"));

    let img = read_mci(dir.path().join("out/cap.mci")).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (182, 182, 9));
    assert!(img.mask_count() > 0);
    let flow = json(dir.path().join("out/cap.flow.json"));
    assert_eq!(flow["converged"], true);
    let stats = json(dir.path().join("out/cap.stats.json"));
    assert_eq!(stats["distortion"]["flipped"], 0);
}

#[test]
fn orthographic_flatten_has_constant_factor_channel() {
    let dir = with_fixtures();
    let args = ["flatten", "--input", "fx/cap_coarse.obj", "--out", "out", "--projection", "orthographic"];
    let refused = ricciface(&args, dir.path());
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--no-align"));

    let mut with_choice = args.to_vec();
    with_choice.extend(["--no-align", "--size", "64x48"]);
    let out = ricciface(&with_choice, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let img = read_mci(dir.path().join("out/cap_coarse.mci")).unwrap();
    assert_eq!((img.width(), img.height()), (64, 48));
    assert!(img.channel(7).unwrap().iter().all(|&x| x == 0.0));
    assert!(!dir.path().join("out/cap_coarse.flow.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let empty = ricciface(&["flatten", "--input", "nothing/*.obj", "--out", "out"], dir.path());
    assert_eq!(empty.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("no inputs matched"));

    std::fs::write(dir.path().join("a.obj"), "v 0 0 0\n").unwrap();
    for args in [
        vec!["flatten", "--input", "a.obj", "--size", "1x9"],
        vec!["flatten", "--input", "a.obj", "--epsilon", "-1"],
        vec!["flatten", "--input", "a.obj", "--jobs", "0"],
        vec!["flatten", "--input", "a.obj", "--reference", "a.obj", "--no-align"],
        vec!["icp", "--input", "a.obj"],
        vec!["export-pgm", "--input", "a.obj", "--channel", "Q"],
        vec!["flatten", "--input", "a.obj", "--config", "missing.toml"],
    ] {
        let out = ricciface(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn failed_inputs_do_not_stop_the_batch() {
    let dir = with_fixtures();
    let inputs = copy(dir.path(), &["cap_coarse.obj", "pyramid.obj"], "in");
    std::fs::write(inputs.join("broken.obj"), "v 0 0 0\nv 1 0 0\nf 1 2 7\n").unwrap();
    let out = ricciface(&["flatten", "--input", "in/*.obj", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 of 3"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.obj"));
    assert!(dir.path().join("out/cap_coarse.mci").exists());
    assert!(dir.path().join("out/pyramid.mci").exists());
    assert!(!dir.path().join("out/broken.mci").exists());
}

#[test]
fn parallel_runs_match_serial_runs() {
    let dir = with_fixtures();
    copy(dir.path(), &["cap_coarse.obj", "pyramid.obj", "flat_5x5.obj", "hemisphere.obj"], "in");
    for (jobs, out) in [("1", "serial"), ("3", "parallel"), ("1", "again")] {
        let o = ricciface(&["flatten", "--input", "in/*.obj", "--out", out, "--jobs", jobs], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["cap_coarse", "pyramid", "flat_5x5", "hemisphere"] {
        for ext in ["mci", "flow.json", "stats.json"] {
            let read = |d: &str| std::fs::read(dir.path().join(d).join(format!("{name}.{ext}"))).unwrap();
            assert_eq!(read("serial"), read("parallel"), "{name}.{ext}");
            assert_eq!(read("serial"), read("again"), "{name}.{ext}");
        }
    }
}

#[test]
fn compare_reports_distortion() {
    let dir = with_fixtures();
    let args = [
        "compare", "--input", "fx/flat_5x5.obj", "--input", "fx/hemisphere.obj", "--input", "fx/cap_profile.obj",
        "--out", "cmp", "--no-align",
    ];
    let out = ricciface(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let flat = json(dir.path().join("cmp/flat_5x5.compare.json"));
    assert!((flat["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let hemi = json(dir.path().join("cmp/hemisphere.compare.json"));
    assert!(hemi["conformal"]["mean"].as_f64().unwrap() < hemi["orthographic"]["mean"].as_f64().unwrap());
    let profile = json(dir.path().join("cmp/cap_profile.compare.json"));
    let bad = profile["orthographic"]["flipped"].as_u64().unwrap() + profile["orthographic"]["collapsed"].as_u64().unwrap();
    assert!(bad > 0);
    assert_eq!(profile["conformal"]["flipped"], 0);

    let refused = ricciface(&["compare", "--input", "fx/flat_5x5.obj"], dir.path());
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = with_fixtures();
    std::fs::write(
        dir.path().join("run.toml"),
        "input = \"fx/cap_coarse.obj\"\nout = \"from_config\"\nsize = \"40x30\"\nmode = \"gradient\"\n",
    )
    .unwrap();
    let out = ricciface(&["flatten", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let img = read_mci(dir.path().join("from_config/cap_coarse.mci")).unwrap();
    assert_eq!((img.width(), img.height()), (40, 30));
    assert_eq!(json(dir.path().join("from_config/cap_coarse.flow.json"))["mode"], "gradient");

    let out = ricciface(&["flatten", "--config", "run.toml", "--size", "20x20", "--mode", "newton"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let img = read_mci(dir.path().join("from_config/cap_coarse.mci")).unwrap();
    assert_eq!((img.width(), img.height()), (20, 20));
    assert_eq!(json(dir.path().join("from_config/cap_coarse.flow.json"))["mode"], "newton");

    std::fs::write(dir.path().join("bad.toml"), "colour = 3\n").unwrap();
    let out = ricciface(&["flatten", "--config", "bad.toml", "--input", "fx/cap.obj"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn icp_aligns_a_rotated_copy() {
    let dir = TempDir::new().unwrap();
    let face = fixtures::synthetic_face(31, 37, 3.0);
    let turn = RigidTransform::from_axis_angle(Vector3::new(0.2, 1.0, 0.1), 12f64.to_radians(), Vector3::new(2.0, -1.0, 0.5));
    std::fs::write(dir.path().join("ref.obj"), write_obj(&face)).unwrap();
    std::fs::write(dir.path().join("turned.obj"), write_obj(&apply_transform(&face, &turn))).unwrap();
    let out = ricciface(&["icp", "--input", "turned.obj", "--reference", "ref.obj", "--out", "icp"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(dir.path().join("icp/turned.icp.json"));
    let history: Vec<f64> = report["rms_history"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(history.windows(2).all(|w| w[1] <= w[0]));
    assert!(report["rms"].as_f64().unwrap() < 1e-4);
    let found = RigidTransform::from_json(&report["transform"].to_string()).unwrap();
    assert!(found.compose(&turn).rotation_angle().to_degrees() < 0.01);
    assert!(dir.path().join("icp/turned.aligned.obj").exists());
}

#[test]
fn stats_and_pgm_export() {
    let dir = with_fixtures();
    let out = ricciface(&["stats", "--input", "fx/pyramid.obj", "--out", "st"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stats = json(dir.path().join("st/pyramid.geom.json"));
    assert_eq!(stats["euler_characteristic"], 1);
    assert_eq!(stats["vertices"], 5);
    assert!((stats["total_curvature"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);

    let out = ricciface(&["flatten", "--input", "fx/cap_coarse.obj", "--out", "img", "--size", "32x32"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = ricciface(&["export-pgm", "--input", "img/*.mci", "--out", "pgm"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["R", "G", "B", "Nx", "Ny", "Nz", "K", "CF", "D"] {
        let bytes = std::fs::read(dir.path().join(format!("pgm/cap_coarse.{name}.pgm"))).unwrap();
        assert!(bytes.starts_with(b"P5\n32 32\n255\n"), "{name}");
        assert_eq!(bytes.len(), b"P5\n32 32\n255\n".len() + 32 * 32);
    }
    let out = ricciface(&["export-pgm", "--input", "img/cap_coarse.mci", "--channel", "cf", "--out", "one"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("one/cap_coarse.CF.pgm").exists());
}

#[test]
fn depth_inputs_are_flattened() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::new();
    for r in 0..12 {
        let row: Vec<String> = (0..14)
            .map(|c| {
                let (x, y) = (c as f64 - 6.5, r as f64 - 5.5);
                format!("{:.4}", 10.0 - 0.05 * (x * x + y * y))
            })
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(dir.path().join("scan.csv"), csv).unwrap();
    let out = ricciface(
        &["flatten", "--input", "scan.csv", "--kind", "depth", "--spacing", "0.5", "--out", "o", "--size", "24x24"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stats = json(dir.path().join("o/scan.stats.json"));
    assert_eq!(stats["vertices"], 12 * 14);
}
