//! Exit-code and output contract of the `mmpoint` binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmpoint"))
}

#[test]
fn afm_default_prints_json_and_exits_zero() {
    let out = bin().args(["afm", "default"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_virtual"], 192);
}

#[test]
fn missing_config_exits_2() {
    let out = bin().args(["run", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn bad_product_list_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    std::fs::write(
        &cfg,
        format!(
            "scene = {:?}\nseed = 1\nout_dir = {:?}\nproducts = [\"metrics\"]\n\n\
             [radar]\nfc = 77e9\nkr = 30e12\ntp = 6.4e-6\nfs = 10e6\nn_samples = 64\nn_chirps = 16\n",
            root.join("data/demo_scene.toml"),
            dir.path().join("out")
        ),
    )
    .unwrap();
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--products", "holograms"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn missing_scene_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "scene = \"no_such_scene.toml\"\nseed = 1\nout_dir = {:?}\nproducts = [\"metrics\"]\n\n\
             [radar]\nfc = 77e9\nkr = 30e12\ntp = 6.4e-6\nfs = 10e6\nn_samples = 64\nn_chirps = 16\n",
            dir.path().join("out")
        ),
    )
    .unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn invalid_scene_exits_3_with_failed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    // present but invalid: negative radar cross-section fails in the scene stage
    std::fs::write(
        &scene,
        "frame_interval_s = 0.05\nn_frames = 1\n\n\
         [[scatterers]]\npos = [0.0, 20.0, 0.0]\nvel = [0.0, 0.0, 0.0]\nrcs = -1.0\nlabel = \"car\"\n",
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "scene = \"scene.toml\"\nseed = 1\nout_dir = {:?}\nproducts = [\"metrics\"]\n\n\
             [radar]\nfc = 77e9\nkr = 30e12\ntp = 6.4e-6\nfs = 10e6\nn_samples = 64\nn_chirps = 16\n",
            out_dir
        ),
    )
    .unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "failed");
    assert_eq!(manifest["failing_stage"], "scene");
}

#[test]
fn run_small_config_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let layout = dir.path().join("layout.toml");
    std::fs::write(
        &layout,
        "tx = [[0.0, 0.0]]\nrx = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]\n",
    )
    .unwrap();
    let scene = dir.path().join("scene.toml");
    std::fs::write(
        &scene,
        "frame_interval_s = 0.05\nn_frames = 1\n\n\
         [[scatterers]]\npos = [0.0, 20.0, 0.0]\nvel = [0.0, 0.0, 0.0]\nrcs = 10.0\nlabel = \"car\"\n",
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "scene = \"scene.toml\"\nlayout = \"layout.toml\"\nseed = 9\nnoise_power = 1e-7\n\
             out_dir = {:?}\nproducts = [\"cloud\", \"metrics\"]\n\n\
             [radar]\nfc = 77e9\nkr = 30e12\ntp = 25.6e-6\nfs = 10e6\nn_samples = 256\nn_chirps = 16\n",
            out_dir
        ),
    )
    .unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    for f in ["cloud.csv", "cloud.ply", "metrics.json", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out_dir.join("cloud.csv")).unwrap();
    assert!(csv.lines().count() >= 2, "no detections in {csv}");
}

#[test]
fn eval_masks_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
    let y: Vec<f64> = (0..10).map(|i| 10.0 + i as f64 * 0.5).collect();
    let ram = dir.path().join("ram.pgm");
    mmpoint::io::write_scalar_map(
        &ram,
        &ndarray::Array2::from_elem((y.len(), x.len()), 1.0),
        &x,
        &y,
        "x_m",
        "y_m",
    )
    .unwrap();
    let values = ndarray::Array2::from_shape_fn((y.len(), x.len()), |(iy, ix)| {
        if iy < 5 && ix < 10 {
            1.0
        } else {
            0.0
        }
    });
    let mask = mmpoint::metrics::MaskGrid::new(values, x.clone(), y.clone()).unwrap();
    let pred = dir.path().join("pred.pgm");
    mmpoint::io::write_mask(&pred, &mask).unwrap();
    let out = bin()
        .args([
            "eval-masks",
            ram.to_str().unwrap(),
            pred.to_str().unwrap(),
            pred.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["overall"], 1.0);
}
