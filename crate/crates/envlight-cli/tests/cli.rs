//! End-to-end checks of the command-line surface: determinism, the full
//! render/estimate/eval round trip, and error reporting with distinct exit
//! codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_envlight"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_kv(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(&format!("{key}=")) {
            return rest.to_string();
        }
    }
    panic!("key {key} missing in output:\n{text}");
}

#[test]
fn gen_env_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["gen-env", "--lights", "1", "--seed", "7", "--out", "a.pfm"],
        dir.path(),
    );
    run_ok(
        &["gen-env", "--lights", "1", "--seed", "7", "--out", "b.pfm"],
        dir.path(),
    );
    run_ok(
        &["gen-env", "--lights", "1", "--seed", "8", "--out", "c.pfm"],
        dir.path(),
    );
    let a = std::fs::read(dir.path().join("a.pfm")).unwrap();
    let b = std::fs::read(dir.path().join("b.pfm")).unwrap();
    let c = std::fs::read(dir.path().join("c.pfm")).unwrap();
    assert_eq!(a, b, "same seed must produce identical bytes");
    assert_ne!(a, c, "different seeds must differ");
}

#[test]
fn render_estimate_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "gen-scene",
            "--preset",
            "sphere-on-plane",
            "--rho-d",
            "0.8,0.8,0.8",
            "--seed",
            "11",
            "--out",
            "scene.toml",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "gen-env", "--lights", "1", "--seed", "5", "--out", "env.pfm",
        ],
        dir.path(),
    );
    std::fs::write(dir.path().join("cfg.toml"), "crop = 128\n").unwrap();
    run_ok(
        &[
            "render",
            "--scene",
            "scene.toml",
            "--env",
            "env.pfm",
            "--out-prefix",
            "run",
            "--resolution",
            "128",
            "--skip-stack",
        ],
        dir.path(),
    );
    for artifact in [
        "run_rgb.pfm",
        "run_depth.pfm",
        "run_albedo.pfm",
        "run_diffuse.pfm",
        "run_specular.pfm",
        "run_normals.pfm",
        "run_camera.toml",
    ] {
        assert!(dir.path().join(artifact).exists(), "missing {artifact}");
    }
    run_ok(
        &[
            "estimate",
            "--rgb",
            "run_rgb.pfm",
            "--depth",
            "run_depth.pfm",
            "--config",
            "cfg.toml",
            "--use-gt-decomposition",
            "run",
            "--out-env",
            "est.pfm",
            "--out-trace",
            "trace.txt",
        ],
        dir.path(),
    );
    let trace = std::fs::read_to_string(dir.path().join("trace.txt")).unwrap();
    assert!(trace.lines().count() > 2, "solver trace should have iterations");
    // Every emitted file re-parses through the library's own readers.
    for artifact in ["run_rgb.pfm", "run_albedo.pfm", "run_diffuse.pfm", "run_specular.pfm"] {
        let img = envlight::io::read_pfm(dir.path().join(artifact)).unwrap();
        assert_eq!(img.channels, 3);
        assert_eq!((img.width, img.height), (128, 128));
    }
    assert_eq!(
        envlight::io::read_pfm(dir.path().join("run_depth.pfm")).unwrap().channels,
        1
    );
    envlight::io::load_camera(dir.path().join("run_camera.toml")).unwrap();
    envlight::io::read_env(dir.path().join("est.pfm")).unwrap();

    let eval = run_ok(
        &[
            "eval", "--est", "est.pfm", "--gt", "env.pfm", "--probes", "quick",
        ],
        dir.path(),
    );
    assert_eq!(stdout_kv(&eval, "space"), "linear");
    let rmse: f64 = stdout_kv(&eval, "render_rmse").parse().unwrap();
    assert!(rmse.is_finite() && rmse < 0.05, "render_rmse {rmse}");
    let light: f64 = stdout_kv(&eval, "light_rmse").parse().unwrap();
    assert!(light.is_finite());
    for key in ["sh3_light_rmse", "sh5_render_rmse", "huber"] {
        let v: f64 = stdout_kv(&eval, key).parse().unwrap();
        assert!(v.is_finite());
    }
}

#[test]
fn estimate_seq_emits_frames_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "gen-scene",
            "--preset",
            "box-on-plane",
            "--rho-d",
            "0.4,0.5,0.6",
            "--rho-s",
            "0.3",
            "--sigma",
            "0.08",
            "--seed",
            "2",
            "--out",
            "scene.toml",
        ],
        dir.path(),
    );
    run_ok(
        &["gen-env", "--lights", "1", "--seed", "3", "--out", "env.pfm"],
        dir.path(),
    );
    std::fs::write(dir.path().join("cfg.toml"), "crop = 96\n").unwrap();
    // Two frames of the same scene act as a static sequence.
    for name in ["f0", "f1"] {
        run_ok(
            &[
                "render",
                "--scene",
                "scene.toml",
                "--env",
                "env.pfm",
                "--out-prefix",
                name,
                "--resolution",
                "96",
                "--skip-stack",
            ],
            dir.path(),
        );
    }
    let manifest = r#"schema = 1

[[frames]]
rgb = "f0_rgb.pfm"
depth = "f0_depth.pfm"
camera = "f0_camera.toml"

[[frames]]
rgb = "f1_rgb.pfm"
depth = "f1_depth.pfm"
camera = "f1_camera.toml"
"#;
    std::fs::write(dir.path().join("seq.toml"), manifest).unwrap();
    let out = run_ok(
        &[
            "estimate-seq",
            "--frames",
            "seq.toml",
            "--config",
            "cfg.toml",
            "--alpha",
            "0.3",
            "--out-prefix",
            "seq",
        ],
        dir.path(),
    );
    assert!(dir.path().join("seq_frame000.pfm").exists());
    assert!(dir.path().join("seq_frame001.pfm").exists());
    assert!(dir.path().join("seq_temporal.txt").exists());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("mean_raw="), "{text}");
    assert!(text.contains("mean_smoothed="), "{text}");
}

#[test]
fn eval_rejects_mismatched_resolutions_with_both_named() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["gen-env", "--lights", "1", "--seed", "1", "--out", "a.pfm"],
        dir.path(),
    );
    run_ok(
        &[
            "gen-env", "--lights", "1", "--seed", "1", "--width", "128", "--height", "64",
            "--out", "b.pfm",
        ],
        dir.path(),
    );
    let out = bin()
        .args(["eval", "--est", "a.pfm", "--gt", "b.pfm"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5), "resolution mismatch exit code");
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("256x128"), "{err}");
    assert!(err.contains("128x64"), "{err}");
    assert!(err.contains("kind=resolution-mismatch"), "{err}");
}

#[test]
fn missing_file_and_unknown_flag_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["eval", "--est", "missing.pfm", "--gt", "missing.pfm"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "io failure exit code");
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=io"));

    let out = bin().args(["eval", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "clap usage exit code");
}

#[test]
fn estimate_without_camera_is_a_contract_error() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["gen-env", "--lights", "1", "--seed", "1", "--out", "env.pfm"],
        dir.path(),
    );
    let out = bin()
        .args([
            "estimate",
            "--rgb",
            "env.pfm",
            "--depth",
            "env.pfm",
            "--out-env",
            "est.pfm",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=contract"));
}
