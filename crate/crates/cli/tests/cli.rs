//! End-to-end checks of the `wanderkit` binary: exit codes, config layering and
//! every subcommand on small synthetic scenes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{UnitQuaternion, Vector3};
use serde_json::Value;
use tempfile::TempDir;
use wanderkit_core::geom::{Pose, Trajectory};
use wanderkit_core::img::Image;
use wanderkit_core::io::{load_depth, save_pnm, save_point_cloud, save_tum};
use wanderkit_core::nav::{NavMesh, NavParams};
use wanderkit_core::recon::{PointCloud, TriangleMesh};
use wanderkit_core::sim::{run_episode, write_episodes, Action, ExpertPolicy, FnPolicy, Observation, SimConfig, Termination};

fn wk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wanderkit"))
        .args(args)
        .env_remove("WANDERKIT_CONFIG")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// The JSON error object on the last stderr line.
fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr is not empty");
    serde_json::from_str::<Value>(line).expect("last stderr line is JSON")["error"].clone()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn wobbly_trajectory(n: usize) -> Trajectory {
    let poses = (0..n)
        .map(|i| {
            let t = i as f64 * 0.3;
            let q = UnitQuaternion::from_euler_angles(0.1 * t.sin(), 0.2 * t.cos(), 0.05 * t);
            Pose::new(q, Vector3::new(t.cos() * 3.0, t.sin() * 2.0, 0.1 * t)).with_timestamp(i as f64)
        })
        .collect();
    Trajectory::from_poses(poses).unwrap()
}

fn room_cloud() -> PointCloud {
    let step = 0.05;
    let at = |i: usize| (i as f64 + 0.5) * step;
    let mut points = Vec::new();
    for j in 0..120 {
        for i in 0..160 {
            points.push(Vector3::new(at(i), at(j), 0.02));
        }
    }
    for k in 0..50 {
        for i in 0..160 {
            points.push(Vector3::new(at(i), -0.05, at(k)));
            points.push(Vector3::new(at(i), 6.05, at(k)));
        }
        for j in 0..120 {
            points.push(Vector3::new(-0.05, at(j), at(k)));
            points.push(Vector3::new(8.05, at(j), at(k)));
        }
    }
    PointCloud::from_points(points)
}

fn room_cameras() -> Trajectory {
    let ring = [(1.5, 1.5), (4.0, 1.2), (6.5, 1.5), (6.8, 3.0), (6.5, 4.5), (4.0, 4.8), (1.5, 4.5), (1.2, 3.0)];
    let poses = ring
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Pose::from_translation(Vector3::new(x, y, 1.5)).with_timestamp(i as f64))
        .collect();
    Trajectory::from_poses(poses).unwrap()
}

fn floor(side: usize) -> TriangleMesh {
    let id = |i: usize, j: usize| j * (side + 1) + i;
    let vertices = (0..=side).flat_map(|j| (0..=side).map(move |i| Vector3::new(i as f64, j as f64, 0.0))).collect();
    let triangles = (0..side)
        .flat_map(|j| (0..side).flat_map(move |i| [[id(i, j), id(i + 1, j), id(i + 1, j + 1)], [id(i, j), id(i + 1, j + 1), id(i, j + 1)]]))
        .collect();
    TriangleMesh::new(vertices, triangles).unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = wk(&["--bogus"]);
    assert_eq!(code(&out), 64);
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "usage");
    assert_eq!(err["exit_code"], 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));
}

#[test]
fn help_and_missing_subcommand() {
    assert_eq!(code(&wk(&["--help"])), 0);
    assert_eq!(code(&wk(&["eval-traj", "--help"])), 0);
    assert_eq!(code(&wk(&[])), 64);
    assert_eq!(code(&wk(&["plan", "--navmesh", "x.json", "--start", "1,2", "--goal", "0,0,0"])), 64);
}

#[test]
fn version_prints_config() {
    let out = wk(&["--version"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(&format!("wanderkit {}", env!("CARGO_PKG_VERSION"))));
    assert!(text.contains("[navmesh]"));
}

#[test]
fn config_layers_apply_in_order() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("wk.toml");
    fs::write(&file, "seed = 5\n[navmesh]\nagent_radius = 0.3\n[episodes]\nvicinity = 0.5\n").unwrap();

    let out = wk(&["--config", s(&file), "--set", "navmesh.agent_radius=0.25", "--seed", "9", "--config-dump"]);
    assert_eq!(code(&out), 0);
    let dumped: toml::Table = toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(dumped["seed"].as_integer(), Some(9));
    assert_eq!(dumped["gaussians"]["seed"].as_integer(), Some(9));
    assert_eq!(dumped["navmesh"]["agent_radius"].as_float(), Some(0.25));
    assert_eq!(dumped["episodes"]["vicinity"].as_float(), Some(0.5));

    let via_env = Command::new(env!("CARGO_BIN_EXE_wanderkit"))
        .args(["--config-dump"])
        .env("WANDERKIT_CONFIG", &file)
        .output()
        .unwrap();
    let dumped: toml::Table = toml::from_str(&String::from_utf8(via_env.stdout).unwrap()).unwrap();
    assert_eq!(dumped["seed"].as_integer(), Some(5));

    // A dump is itself a valid config file.
    let again = dir.path().join("again.toml");
    fs::write(&again, toml::to_string(&dumped).unwrap()).unwrap();
    assert_eq!(code(&wk(&["--config", s(&again), "--config-dump"])), 0);

    assert_eq!(code(&wk(&["--set", "navmesh.radius=1", "--config-dump"])), 64);
    assert_eq!(code(&wk(&["--set", "navmesh.agent_radius=-1", "--config-dump"])), 64);
    fs::write(&file, "[navmesh]\nbogus = 1\n").unwrap();
    assert_eq!(code(&wk(&["--config", s(&file), "--config-dump"])), 64);
}

#[test]
fn eval_traj_of_identical_trajectories() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.txt");
    save_tum(&gt, &wobbly_trajectory(30)).unwrap();
    let report = stdout_json(&wk(&["eval-traj", "--gt", s(&gt), "--pred", s(&gt)]));
    for key in ["t_ate_raw", "t_ate_scaled", "r_ate", "t_rte", "t_rte_deg", "r_rte"] {
        let v = report[key].as_f64().unwrap();
        assert!(v.abs() < 1e-9, "{key} = {v}");
    }
    let auc = report["auc_at_30"].as_f64().unwrap();
    assert!((auc - 1.0).abs() < 1e-12, "auc {auc}");
    assert_eq!(report["n_poses"], 30);

    let capped = stdout_json(&wk(&["eval-traj", "--gt", s(&gt), "--pred", s(&gt), "--max-images", "10"]));
    assert_eq!(capped["n_poses"], 10);
}

#[test]
fn eval_traj_error_classes() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.txt");
    save_tum(&gt, &wobbly_trajectory(12)).unwrap();

    let collapsed = dir.path().join("collapsed.txt");
    let same = (0..12).map(|i| Pose::from_translation(Vector3::new(1.0, 1.0, 1.0)).with_timestamp(i as f64)).collect();
    save_tum(&collapsed, &Trajectory::from_poses(same).unwrap()).unwrap();
    let out = wk(&["eval-traj", "--gt", s(&gt), "--pred", s(&collapsed)]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["kind"], "degenerate");

    let short = dir.path().join("short.txt");
    save_tum(&short, &wobbly_trajectory(5)).unwrap();
    assert_eq!(code(&wk(&["eval-traj", "--gt", s(&gt), "--pred", s(&short)])), 65);

    let garbage = dir.path().join("garbage.txt");
    fs::write(&garbage, "0 1 2 three 0 0 0 1\n").unwrap();
    assert_eq!(code(&wk(&["eval-traj", "--gt", s(&gt), "--pred", s(&garbage)])), 65);

    let out = wk(&["eval-traj", "--gt", s(&gt), "--pred", "/nonexistent/pred.txt"]);
    assert_eq!(code(&out), 65);
    assert_eq!(stderr_error(&out)["exit_code"], 65);
}

#[test]
fn eval_dataset_counts_failed_scenes() {
    let dir = TempDir::new().unwrap();
    for (scene, b_len) in [("s1", 20), ("s2", 7)] {
        let sd = dir.path().join("scenes").join(scene);
        fs::create_dir_all(&sd).unwrap();
        save_tum(&sd.join("gt.txt"), &wobbly_trajectory(20)).unwrap();
        save_tum(&sd.join("a.txt"), &wobbly_trajectory(20)).unwrap();
        save_tum(&sd.join("b.txt"), &wobbly_trajectory(b_len)).unwrap();
        let manifest = serde_json::json!({
            "format_version": 1,
            "scene_id": scene,
            "units": "meters",
            "split": "train",
            "gt_trajectory": "gt.txt",
            "predicted_trajectories": { "a": "a.txt", "b": "b.txt" },
        });
        fs::write(sd.join("manifest.json"), manifest.to_string()).unwrap();
    }
    let csv = dir.path().join("summary.csv");
    let scenes_csv = dir.path().join("scenes.csv");
    let out = stdout_json(&wk(&[
        "eval-dataset",
        "--manifest-dir",
        s(dir.path()),
        "--csv",
        s(&csv),
        "--scenes-csv",
        s(&scenes_csv),
    ]));
    assert_eq!(out["n_scenes"], 2);
    assert_eq!(out["methods"]["a"]["n_failed"], 0);
    assert_eq!(out["methods"]["a"]["success_rate"], 1.0);
    assert_eq!(out["methods"]["b"]["n_failed"], 1);
    assert_eq!(out["methods"]["b"]["success_rate"], 0.5);

    let summary = fs::read_to_string(&csv).unwrap();
    assert!(summary.starts_with("method,statistic,"));
    assert_eq!(summary.lines().count(), 5);
    assert_eq!(fs::read_to_string(&scenes_csv).unwrap().lines().count(), 4);

    let empty = TempDir::new().unwrap();
    assert_eq!(code(&wk(&["eval-dataset", "--manifest-dir", s(empty.path())])), 65);
}

#[test]
fn eval_nav_on_mixed_outcomes() {
    let nav = NavMesh::bake(&floor(12), &NavParams::default()).unwrap();
    let (start, goal) = (Vector3::new(2.0, 6.0, 0.0), Vector3::new(10.0, 6.0, 0.0));
    let cfg = SimConfig::default();
    let mut short = cfg.clone();
    short.limits.max_steps = 5;

    let success = run_episode(&nav, &start, &goal, 0.0, &mut ExpertPolicy::new(&nav, goal, cfg.limits.clone()), &cfg).unwrap();
    let timeout = run_episode(&nav, &start, &goal, 0.0, &mut ExpertPolicy::new(&nav, goal, short.limits.clone()), &short).unwrap();
    let mut idle = FnPolicy(|_: &Observation| Ok(Action::new(0.0, 0.0)));
    let stuck = run_episode(&nav, &start, &goal, 0.0, &mut idle, &cfg).unwrap();
    assert_eq!(
        [success.termination, timeout.termination, stuck.termination],
        [Termination::Success, Termination::Timeout, Termination::Stuck]
    );

    let dir = TempDir::new().unwrap();
    let log = dir.path().join("episodes.jsonl");
    write_episodes(fs::File::create(&log).unwrap(), &[success, timeout, stuck]).unwrap();
    let report = stdout_json(&wk(&["eval-nav", "--episodes", s(&log)]));
    assert_eq!(report["episodes"], 3);
    assert!((report["sr"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((report["ir"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(report["spl"].as_f64().unwrap() <= report["sr"].as_f64().unwrap());

    fs::write(&log, "{not json}\n").unwrap();
    assert_eq!(code(&wk(&["eval-nav", "--episodes", s(&log)])), 65);
    fs::write(&log, "").unwrap();
    assert_eq!(code(&wk(&["eval-nav", "--episodes", s(&log)])), 2);
}

/// Builds the room scene through the CLI and returns its manifest path.
fn build_room(dir: &Path) -> PathBuf {
    let p = |name: &str| dir.join(name);
    save_point_cloud(&p("room.ply"), &room_cloud()).unwrap();
    save_tum(&p("cams.txt"), &room_cameras()).unwrap();

    let mesh = stdout_json(&wk(&["extract-mesh", "--cloud", s(&p("room.ply")), "--traj", s(&p("cams.txt")), "-o", s(&p("room.obj"))]));
    assert!(mesh["faces"].as_u64().unwrap() > 0);
    let baked = stdout_json(&wk(&["bake-navmesh", "--mesh", s(&p("room.obj")), "-o", s(&p("room.nav.json"))]));
    assert!(baked["triangles"].as_u64().unwrap() > 0);

    let manifest = serde_json::json!({
        "format_version": 1,
        "scene_id": "room",
        "units": "meters",
        "split": "train",
        "point_cloud": "room.ply",
        "gt_trajectory": "cams.txt",
        "mesh": "room.obj",
        "navmesh": "room.nav.json",
    });
    fs::write(p("manifest.json"), manifest.to_string()).unwrap();
    p("manifest.json")
}

#[test]
fn scan_to_navigation_pipeline() {
    let dir = TempDir::new().unwrap();
    let manifest = build_room(dir.path());
    let nav = dir.path().join("room.nav.json");

    let path = stdout_json(&wk(&["plan", "--navmesh", s(&nav), "--start", "1.5,1.5,0", "--goal", "6.5,4.5,0"]));
    let length = path["length"].as_f64().unwrap();
    let straight = (5.0f64.powi(2) + 3.0f64.powi(2)).sqrt();
    assert!(length >= straight - 1e-6 && length < straight + 0.5, "path length {length}");

    let saved = dir.path().join("path.json");
    wk(&["plan", "--navmesh", s(&nav), "--start", "1.5,1.5,0", "--goal", "6.5,4.5,0", "-o", s(&saved)]);
    let from_file: Value = serde_json::from_str(&fs::read_to_string(&saved).unwrap()).unwrap();
    assert_eq!(from_file["length"], path["length"]);

    let off_mesh = wk(&["plan", "--navmesh", s(&nav), "--start", "50,50,0", "--goal", "6.5,4.5,0"]);
    assert_eq!(code(&off_mesh), 65);

    let log = dir.path().join("expert.jsonl");
    let run = stdout_json(&wk(&[
        "run-episodes",
        "--manifest",
        s(&manifest),
        "--policy",
        "builtin:expert",
        "--episodes",
        "6",
        "-o",
        s(&log),
    ]));
    assert_eq!(run["episodes"], 6);
    let first = fs::read(&log).unwrap();
    let report = stdout_json(&wk(&["eval-nav", "--episodes", s(&log)]));
    assert_eq!(report["sr"], 1.0);
    assert_eq!(report["ir"], 0.0);

    // Same seed, same log, whatever the thread count.
    wk(&["--jobs", "1", "run-episodes", "--manifest", s(&manifest), "--policy", "builtin:expert", "--episodes", "6", "-o", s(&log)]);
    assert_eq!(fs::read(&log).unwrap(), first);
    wk(&["--seed", "3", "run-episodes", "--manifest", s(&manifest), "--policy", "builtin:expert", "--episodes", "6", "-o", s(&log)]);
    assert_ne!(fs::read(&log).unwrap(), first);

    let random = dir.path().join("random.jsonl");
    let run = stdout_json(&wk(&[
        "--set",
        "episodes.sim.limits.max_steps=30",
        "run-episodes",
        "--manifest",
        s(&manifest),
        "--policy",
        "builtin:random",
        "--episodes",
        "4",
        "-o",
        s(&random),
    ]));
    assert_eq!(run["episodes"], 4);
    assert_eq!(code(&wk(&["run-episodes", "--manifest", s(&manifest), "--policy", "builtin:nope", "-o", s(&random)])), 64);
}

#[test]
fn external_policy_over_pipes() {
    let dir = TempDir::new().unwrap();
    let manifest = build_room(dir.path());
    let script = dir.path().join("idle.sh");
    fs::write(&script, "while read -r obs; do echo '{\"forward_velocity\": 0.0, \"yaw_rate\": 0.5}'; done\n").unwrap();
    let log = dir.path().join("idle.jsonl");
    let run = stdout_json(&wk(&[
        "run-episodes",
        "--manifest",
        s(&manifest),
        "--policy",
        "/bin/sh",
        "--policy-arg",
        s(&script),
        "--episodes",
        "2",
        "-o",
        s(&log),
    ]));
    assert_eq!(run["terminations"]["stuck"], 2);
    let report = stdout_json(&wk(&["eval-nav", "--episodes", s(&log)]));
    assert_eq!(report["sr"], 0.0);
    assert_eq!(report["ir"], 1.0);

    // A policy that answers with garbage is a harness error, excluded from the metrics.
    let bad = dir.path().join("bad.sh");
    fs::write(&bad, "while read -r obs; do echo 'nonsense'; done\n").unwrap();
    let run = stdout_json(&wk(&[
        "run-episodes",
        "--manifest",
        s(&manifest),
        "--policy",
        "/bin/sh",
        "--policy-arg",
        s(&bad),
        "--episodes",
        "1",
        "-o",
        s(&log),
    ]));
    assert_eq!(run["terminations"]["harness_error"], 1);
    assert_eq!(code(&wk(&["eval-nav", "--episodes", s(&log)])), 2);
}

#[test]
fn gaussians_and_depth_targets() {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name);
    save_point_cloud(&p("room.ply"), &room_cloud()).unwrap();
    // Cameras looking straight down from 1.5 m.
    let down = UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, 0.0);
    let poses = (0..3).map(|i| Pose::new(down, Vector3::new(2.0 + 2.0 * i as f64, 3.0, 1.5)).with_timestamp(i as f64)).collect();
    save_tum(&p("cams.txt"), &Trajectory::from_poses(poses).unwrap()).unwrap();
    fs::write(p("intr.json"), r#"{"fx": 40, "fy": 40, "cx": 32, "cy": 24, "width": 64, "height": 48}"#).unwrap();

    let init = stdout_json(&wk(&["--set", "gaussians.target_count=5000", "init-gaussians", "--cloud", s(&p("room.ply")), "-o", s(&p("gs.ply"))]));
    let n = init["gaussians"].as_u64().unwrap();
    assert!(n > 0 && n <= 5000, "{n} gaussians");

    let out = stdout_json(&wk(&[
        "render-depth",
        "--gaussians",
        s(&p("gs.ply")),
        "--traj",
        s(&p("cams.txt")),
        "--intrinsics",
        s(&p("intr.json")),
        "-o",
        s(&p("depth")),
    ]));
    assert_eq!(out["frames"], 3);
    let depth = load_depth(&p("depth").join("depth_00001.wdep")).unwrap();
    assert_eq!((depth.width(), depth.height()), (64, 48));
    let centre = depth.get(32, 24).unwrap();
    assert!((centre - 1.48).abs() < 0.1, "centre depth {centre}");

    fs::write(p("intr.json"), r#"{"fx": -1, "fy": 40, "cx": 32, "cy": 24, "width": 64, "height": 48}"#).unwrap();
    let bad = wk(&["render-depth", "--gaussians", s(&p("gs.ply")), "--traj", s(&p("cams.txt")), "--intrinsics", s(&p("intr.json")), "-o", s(&p("depth"))]);
    assert_ne!(code(&bad), 0);
}

#[test]
fn eval_nvs_on_image_folders() {
    let dir = TempDir::new().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    let ramp = |offset: f64| {
        let data = (0..32 * 24 * 3).map(|i| ((i % 97) as f64 / 97.0 * 0.8 + offset).clamp(0.0, 1.0)).collect();
        Image::new(32, 24, 3, data).unwrap()
    };
    save_pnm(&gt.join("a.ppm"), &ramp(0.0)).unwrap();
    save_pnm(&pred.join("a.ppm"), &ramp(0.0)).unwrap();
    save_pnm(&gt.join("b.ppm"), &ramp(0.1)).unwrap();
    save_pnm(&pred.join("b.ppm"), &ramp(0.0)).unwrap();

    let report = stdout_json(&wk(&["eval-nvs", "--pred-dir", s(&pred), "--gt-dir", s(&gt)]));
    let images = report["images"].as_array().unwrap();
    assert_eq!(images.len(), 2);
    assert_eq!(images[0]["name"], "a.ppm");
    assert_eq!(images[0]["psnr"], "inf");
    assert_eq!(images[0]["ssim"].as_f64().unwrap(), 1.0);
    let psnr_b = images[1]["psnr"].as_f64().unwrap();
    assert!(psnr_b > 15.0 && psnr_b < 30.0, "psnr {psnr_b}");

    fs::remove_file(pred.join("b.ppm")).unwrap();
    let out = wk(&["eval-nvs", "--pred-dir", s(&pred), "--gt-dir", s(&gt)]);
    assert_eq!(code(&out), 65);
    assert!(stderr_error(&out)["message"].as_str().unwrap().contains("b.ppm"));
}
