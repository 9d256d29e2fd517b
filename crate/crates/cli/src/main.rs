//! `wanderkit`: command-line front end of the scan-to-simulator toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use config::{Config, CONFIG_ENV};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "wanderkit", about = "Trajectory metrics, mesh extraction, navmesh planning and navigation evaluation", disable_version_flag = true)]
struct Cli {
    /// TOML config file (default: $WANDERKIT_CONFIG when set).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set navmesh.agent_radius=0.3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    config_dump: bool,
    /// Print the version and the effective configuration, then exit.
    #[arg(long, short = 'V')]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a predicted TUM trajectory against ground truth.
    EvalTraj(EvalTraj),
    /// Score every predicted trajectory of every scene manifest under a directory.
    EvalDataset(EvalDataset),
    /// Extract a cropped, filtered collision mesh from a point cloud.
    ExtractMesh(ExtractMesh),
    /// Bake a navmesh from a collision mesh.
    BakeNavmesh(BakeNavmesh),
    /// Plan a shortest path on a navmesh.
    Plan(Plan),
    /// Initialize Gaussians from a point cloud.
    InitGaussians(InitGaussians),
    /// Render depth targets of Gaussians at every pose of a trajectory.
    RenderDepth(RenderDepth),
    /// Run navigation episodes on a scene and log them as JSON lines.
    RunEpisodes(RunEpisodes),
    /// Summarize an episode log as NE / SR / SPL / IR.
    EvalNav(EvalNav),
    /// PSNR and SSIM of predicted against ground-truth images.
    EvalNvs(EvalNvs),
}

#[derive(Debug, Args)]
pub struct EvalTraj {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Subsample both trajectories to at most this many poses.
    #[arg(long)]
    pub max_images: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalDataset {
    /// Directory searched recursively for `manifest.json` files.
    #[arg(long)]
    pub manifest_dir: PathBuf,
    /// Write mean/median rows per method to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write one row per scene and method to this CSV file.
    #[arg(long)]
    pub scenes_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractMesh {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BakeNavmesh {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct Plan {
    #[arg(long)]
    pub navmesh: PathBuf,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub start: Vector3<f64>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub goal: Vector3<f64>,
    /// Path JSON destination (stdout when absent).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InitGaussians {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderDepth {
    #[arg(long)]
    pub gaussians: PathBuf,
    #[arg(long)]
    pub traj: PathBuf,
    /// JSON object with fx, fy, cx, cy, width, height.
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// Output directory for `depth_NNNNN.wdep` files.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunEpisodes {
    /// Scene manifest with `navmesh` and `gt_trajectory` entries.
    #[arg(long)]
    pub manifest: PathBuf,
    /// `builtin:expert`, `builtin:random`, or a program speaking the JSON-lines protocol.
    #[arg(long)]
    pub policy: String,
    /// Argument passed to an external policy program. Repeatable.
    #[arg(long = "policy-arg", allow_hyphen_values = true)]
    pub policy_args: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalNav {
    #[arg(long)]
    pub episodes: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalNvs {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
}

fn parse_point(s: &str) -> Result<Vector3<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vector3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got '{s}'")),
    }
}

fn effective_config(cli: &Cli) -> CliResult<Config> {
    let file = cli.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match file {
        Some(path) => Config::load(&path)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        cfg.set(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.gaussians.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(Command::EvalTraj(a)) = &cli.command {
        if let Some(m) = a.max_images {
            cfg.traj_eval.max_images = m;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = effective_config(&cli)?;
    if cli.version {
        print!("wanderkit {}\n\n{}", env!("CARGO_PKG_VERSION"), cfg.to_toml());
        return Ok(());
    }
    if cli.config_dump {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let Some(command) = cli.command else {
        return Err(CliError::usage("no subcommand given; see --help"));
    };
    match command {
        Command::EvalTraj(a) => commands::eval_traj(&a, &cfg),
        Command::EvalDataset(a) => commands::eval_dataset(&a, &cfg),
        Command::ExtractMesh(a) => commands::extract_mesh(&a, &cfg),
        Command::BakeNavmesh(a) => commands::bake_navmesh(&a, &cfg),
        Command::Plan(a) => commands::plan(&a, &cfg),
        Command::InitGaussians(a) => commands::init_gaussians(&a, &cfg),
        Command::RenderDepth(a) => commands::render_depth(&a, &cfg),
        Command::RunEpisodes(a) => commands::run_episodes(&a, &cfg),
        Command::EvalNav(a) => commands::eval_nav(&a),
        Command::EvalNvs(a) => commands::eval_nvs(&a, &cfg),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.kind.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(&CliError::usage(e.kind().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
