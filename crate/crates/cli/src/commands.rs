//! Subcommand bodies. Results go to stdout as JSON; logs go to stderr.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use wanderkit_core::geom::{subsample_uniform, Trajectory};
use wanderkit_core::gs_init::{init_gaussians as init_set, render_depths, CameraIntrinsics};
use wanderkit_core::img::evaluate_pairs;
use wanderkit_core::io::{
    load_gaussians, load_image, load_manifest, load_obj, load_point_cloud, load_tum, save_depth, save_gaussians, save_obj,
};
use wanderkit_core::nav::{load_navmesh, save_navmesh, NavMesh};
use wanderkit_core::recon::extract_collision_mesh;
use wanderkit_core::sim::{
    evaluate, read_episodes, run_episode, write_episodes, Episode, ExpertPolicy, ExternalPolicy, Policy, RandomPolicy,
};
use wanderkit_core::traj_eval::{aggregate_scenes, evaluate_scene, write_csv, DatasetSummary, PairSampling, PoseMetricReport};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::{BakeNavmesh, EvalDataset, EvalNav, EvalNvs, EvalTraj, ExtractMesh, InitGaussians, Plan, RenderDepth, RunEpisodes};

fn emit<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn sampling(cfg: &Config) -> PairSampling {
    let cap = cfg.traj_eval.max_pairs;
    PairSampling { max_pairs: (cap > 0).then_some(cap), seed: cfg.seed }
}

/// Loads both trajectories, checks index correspondence and subsamples them alike.
fn scene_pair(gt: &Path, pred: &Path, cfg: &Config) -> CliResult<(Trajectory, Trajectory)> {
    let (gt_traj, _) = load_tum(gt)?;
    let (pred_traj, _) = load_tum(pred)?;
    if gt_traj.len() != pred_traj.len() {
        return Err(CliError::data(format!(
            "{} has {} poses but {} has {}",
            pred.display(),
            pred_traj.len(),
            gt.display(),
            gt_traj.len()
        )));
    }
    let keep = cfg.traj_eval.max_images;
    Ok((subsample_uniform(&gt_traj, keep)?, subsample_uniform(&pred_traj, keep)?))
}

pub fn eval_traj(a: &EvalTraj, cfg: &Config) -> CliResult<()> {
    let (gt, pred) = scene_pair(&a.gt, &a.pred, cfg)?;
    emit(&evaluate_scene(&pred, &gt, &sampling(cfg))?)
}

fn find_manifests(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            find_manifests(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "manifest.json") {
            out.push(path);
        }
    }
    Ok(())
}

struct SceneScores {
    scene_id: String,
    methods: BTreeMap<String, Option<PoseMetricReport>>,
}

fn score_scene(path: &Path, cfg: &Config) -> CliResult<SceneScores> {
    let m = load_manifest(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let gt = m.require("gt_trajectory", &m.gt_trajectory)?;
    let methods = m
        .predicted_trajectories
        .iter()
        .map(|(name, pred)| {
            let scored = scene_pair(&gt, &m.resolve(pred), cfg)
                .and_then(|(gt, pred)| Ok(evaluate_scene(&pred, &gt, &sampling(cfg))?));
            let report = match scored {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("scene {} method {name}: {e}; counted as failed", m.scene_id);
                    None
                }
            };
            (name.clone(), report)
        })
        .collect();
    Ok(SceneScores { scene_id: m.scene_id.clone(), methods })
}

const SUMMARY_HEADER: [&str; 12] = [
    "method",
    "statistic",
    "t_ate_raw",
    "t_ate_scaled",
    "r_ate",
    "t_rte",
    "t_rte_deg",
    "r_rte",
    "auc_at_30",
    "success_rate",
    "n_scenes",
    "n_failed",
];

fn write_summary_csv(path: &Path, summaries: &BTreeMap<String, Option<DatasetSummary>>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::internal(e.to_string());
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for (method, s) in summaries {
        let Some(s) = s else { continue };
        let stats = [s.t_ate_raw, s.t_ate_scaled, s.r_ate, s.t_rte, s.t_rte_deg, s.r_rte, s.auc_at_30];
        for (label, pick) in [("mean", 0), ("median", 1)] {
            let mut row = vec![method.clone(), label.to_string()];
            row.extend(stats.iter().map(|m| if pick == 0 { m.mean } else { m.median }.to_string()));
            row.extend([s.success_rate.to_string(), s.n_scenes.to_string(), s.n_failed.to_string()]);
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn eval_dataset(a: &EvalDataset, cfg: &Config) -> CliResult<()> {
    let mut paths = Vec::new();
    find_manifests(&a.manifest_dir, &mut paths)?;
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!("no manifest.json under {}", a.manifest_dir.display())));
    }
    let scenes = paths.par_iter().map(|p| score_scene(p, cfg)).collect::<CliResult<Vec<_>>>()?;
    let methods: BTreeSet<&String> = scenes.iter().flat_map(|s| s.methods.keys()).collect();
    let mut summaries = BTreeMap::new();
    for method in methods {
        let column: Vec<Option<PoseMetricReport>> =
            scenes.iter().map(|s| s.methods.get(method).copied().flatten()).collect();
        let summary = match aggregate_scenes(&column) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("method {method}: {e}");
                None
            }
        };
        summaries.insert(method.clone(), summary);
    }
    if let Some(path) = &a.csv {
        write_summary_csv(path, &summaries)?;
    }
    if let Some(path) = &a.scenes_csv {
        let rows: Vec<_> = scenes
            .iter()
            .flat_map(|s| s.methods.iter().filter_map(|(m, r)| r.map(|r| (s.scene_id.clone(), m.clone(), r))))
            .collect();
        let file = File::create(path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
        write_csv(file, &rows).map_err(|e| CliError::internal(e.to_string()))?;
    }
    emit(&json!({ "n_scenes": scenes.len(), "methods": summaries }))
}

pub fn extract_mesh(a: &ExtractMesh, cfg: &Config) -> CliResult<()> {
    let cloud = load_point_cloud(&a.cloud)?;
    let (traj, _) = load_tum(&a.traj)?;
    let mesh = extract_collision_mesh(&cloud, &traj, &cfg.extract)?;
    if mesh.is_empty() {
        log::warn!("extracted mesh is empty");
    }
    save_obj(&a.output, &mesh).map_err(|e| CliError::internal(e.to_string()))?;
    emit(&json!({ "vertices": mesh.vertices.len(), "faces": mesh.face_count(), "output": a.output }))
}

pub fn bake_navmesh(a: &BakeNavmesh, cfg: &Config) -> CliResult<()> {
    let mesh = load_obj(&a.mesh)?;
    let nav = NavMesh::bake(&mesh, &cfg.navmesh)?;
    save_navmesh(&a.output, &nav, &a.mesh).map_err(|e| CliError::internal(e.to_string()))?;
    emit(&json!({ "triangles": nav.len(), "regions": nav.region_count(), "output": a.output }))
}

pub fn plan(a: &Plan, _cfg: &Config) -> CliResult<()> {
    let nav = load_navmesh(&a.navmesh)?;
    let path = nav.shortest_path(&a.start, &a.goal)?;
    match &a.output {
        Some(out) => {
            let text = serde_json::to_string_pretty(&path).map_err(|e| CliError::internal(e.to_string()))?;
            write_text(out, &(text + "\n"))?;
            emit(&json!({ "length": path.length, "waypoints": path.waypoints.len(), "output": out }))
        }
        None => emit(&path),
    }
}

pub fn init_gaussians(a: &InitGaussians, cfg: &Config) -> CliResult<()> {
    let cloud = load_point_cloud(&a.cloud)?;
    let set = init_set(&cloud, &cfg.gaussians)?;
    save_gaussians(&a.output, &set).map_err(|e| CliError::internal(e.to_string()))?;
    emit(&json!({ "input_points": cloud.len(), "gaussians": set.len(), "output": a.output }))
}

pub fn render_depth(a: &RenderDepth, cfg: &Config) -> CliResult<()> {
    let set = load_gaussians(&a.gaussians)?;
    let (traj, _) = load_tum(&a.traj)?;
    let text = std::fs::read_to_string(&a.intrinsics)
        .map_err(|e| CliError::data(format!("{}: {e}", a.intrinsics.display())))?;
    let k: CameraIntrinsics =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", a.intrinsics.display())))?;
    k.validate()?;
    std::fs::create_dir_all(&a.output).map_err(|e| CliError::internal(format!("{}: {e}", a.output.display())))?;
    let depths = render_depths(&set, traj.poses(), &k, cfg.render.splat_radius);
    for (i, d) in depths.iter().enumerate() {
        save_depth(&a.output.join(format!("depth_{i:05}.wdep")), d).map_err(|e| CliError::internal(e.to_string()))?;
    }
    emit(&json!({ "frames": depths.len(), "output": a.output }))
}

enum PolicyKind {
    Expert,
    Random,
    External(String),
}

fn parse_policy(s: &str) -> CliResult<PolicyKind> {
    match s.strip_prefix("builtin:") {
        Some("expert") => Ok(PolicyKind::Expert),
        Some("random") => Ok(PolicyKind::Random),
        Some(other) => Err(CliError::usage(format!("unknown builtin policy '{other}' (expected expert or random)"))),
        None => Ok(PolicyKind::External(s.to_string())),
    }
}

/// Episode `i` draws its endpoints from seed `base + i` and its initial heading
/// from a separate stream of the same seed.
fn one_episode(nav: &NavMesh, cams: &Trajectory, kind: &PolicyKind, args: &[String], seed: u64, cfg: &Config) -> CliResult<Episode> {
    let ep = &cfg.episodes;
    let (start, goal) = nav.sample_endpoints(cams, ep.vicinity, ep.min_geodesic, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let limits = ep.sim.limits.clone();
    let mut policy: Box<dyn Policy + '_> = match kind {
        PolicyKind::Expert => Box::new(ExpertPolicy::new(nav, goal.point, limits)),
        PolicyKind::Random => Box::new(RandomPolicy::new(seed, limits)),
        PolicyKind::External(program) => Box::new(
            ExternalPolicy::spawn(program, args, &limits)
                .map_err(|e| CliError::usage(format!("cannot start policy '{program}': {e}")))?,
        ),
    };
    Ok(run_episode(nav, &start.point, &goal.point, heading, policy.as_mut(), &ep.sim)?)
}

pub fn run_episodes(a: &RunEpisodes, cfg: &Config) -> CliResult<()> {
    let kind = parse_policy(&a.policy)?;
    let m = load_manifest(&a.manifest).map_err(|e| CliError::from(e).context(a.manifest.display()))?;
    let nav = load_navmesh(&m.require("navmesh", &m.navmesh)?)?;
    let (cams, _) = load_tum(&m.require("gt_trajectory", &m.gt_trajectory)?)?;
    let seeds: Vec<u64> = (0..a.episodes as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let run = |&s: &u64| one_episode(&nav, &cams, &kind, &a.policy_args, s, cfg);
    // External programs run one at a time; built-in policies are independent per episode.
    let episodes = match kind {
        PolicyKind::External(_) => seeds.iter().map(run).collect::<CliResult<Vec<_>>>()?,
        _ => seeds.par_iter().map(run).collect::<CliResult<Vec<_>>>()?,
    };
    let file = File::create(&a.output).map_err(|e| CliError::internal(format!("{}: {e}", a.output.display())))?;
    write_episodes(std::io::BufWriter::new(file), &episodes)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in &episodes {
        let name = serde_json::to_value(e.termination)?.as_str().unwrap_or_default().to_string();
        *counts.entry(name).or_default() += 1;
    }
    emit(&json!({ "episodes": episodes.len(), "terminations": counts, "output": a.output }))
}

pub fn eval_nav(a: &EvalNav) -> CliResult<()> {
    let file = File::open(&a.episodes).map_err(|e| CliError::data(format!("{}: {e}", a.episodes.display())))?;
    let episodes = read_episodes(BufReader::new(file)).map_err(|e| CliError::from(e).context(a.episodes.display()))?;
    emit(&evaluate(&episodes)?)
}

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

fn image_names(dir: &Path) -> CliResult<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            names.push(path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string());
        }
    }
    names.sort();
    Ok(names)
}

pub fn eval_nvs(a: &EvalNvs, cfg: &Config) -> CliResult<()> {
    let names = image_names(&a.gt_dir)?;
    if names.is_empty() {
        return Err(CliError::data(format!("no images in {}", a.gt_dir.display())));
    }
    let missing: Vec<String> = names
        .iter()
        .filter(|n| !a.pred_dir.join(n).is_file())
        .map(|n| a.pred_dir.join(n).display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::data(format!("missing predicted images: {}", missing.join(", "))));
    }
    let pairs = names
        .par_iter()
        .map(|n| Ok((n.clone(), load_image(&a.pred_dir.join(n))?, load_image(&a.gt_dir.join(n))?)))
        .collect::<CliResult<Vec<_>>>()?;
    let report = evaluate_pairs(&pairs, cfg.nvs.ssim_mode).map_err(|e| CliError::data(e.to_string()))?;
    emit(&report)
}
