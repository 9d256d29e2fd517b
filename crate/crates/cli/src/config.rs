//! Effective configuration: built-in defaults, then a TOML file, then
//! `--set section.key=value` overrides, then dedicated flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wanderkit_core::gs_init::GsInitParams;
use wanderkit_core::img::SsimMode;
use wanderkit_core::nav::NavParams;
use wanderkit_core::recon::ExtractParams;
use wanderkit_core::sim::SimConfig;

use crate::error::{CliError, CliResult};

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "WANDERKIT_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seed for every randomized step (pair sampling, episode sampling, random policy).
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub jobs: usize,
    pub traj_eval: TrajEvalConfig,
    pub extract: ExtractParams,
    pub navmesh: NavParams,
    pub gaussians: GsInitParams,
    pub render: RenderConfig,
    pub episodes: EpisodeConfig,
    pub nvs: NvsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajEvalConfig {
    /// Trajectories longer than this are uniformly subsampled before scoring.
    pub max_images: usize,
    /// Cap on camera pairs for pairwise metrics; 0 scores every pair.
    pub max_pairs: usize,
}

impl Default for TrajEvalConfig {
    fn default() -> Self {
        Self { max_images: 500, max_pairs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Disc radius each projected center stamps, pixels.
    pub splat_radius: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { splat_radius: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Endpoint perturbation radius around camera positions, meters.
    pub vicinity: f64,
    /// Shortest accepted start-goal path, meters.
    pub min_geodesic: f64,
    pub sim: SimConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { vicinity: 1.0, min_geodesic: 2.0, sim: SimConfig::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvsConfig {
    pub ssim_mode: SsimMode,
}

impl Config {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config file {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Applies one `dotted.key=value` override. The value is read as a TOML
    /// literal, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects key=value, got '{assignment}'")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(|e| CliError::internal(e.to_string()))?;
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| CliError::usage(format!("unknown config key '{key}'")))?;
        }
        if slot.is_table() {
            return Err(CliError::usage(format!("'{key}' is a section, not a value")));
        }
        *slot = value;
        *self = root.try_into().map_err(|e| CliError::usage(format!("--set {key}: {e}")))?;
        Ok(())
    }

    /// Rejects values the operations would refuse later.
    pub fn validate(&self) -> CliResult<()> {
        self.navmesh.validate()?;
        self.episodes.sim.validate()?;
        if self.traj_eval.max_images < 2 {
            return Err(CliError::usage("traj_eval.max_images must be at least 2"));
        }
        let e = &self.extract;
        if !(e.voxel_size > 0.0 && e.voxel_size.is_finite()) || e.min_points_per_voxel == 0 {
            return Err(CliError::usage("extract.voxel_size must be positive and min_points_per_voxel at least 1"));
        }
        if !(e.iso > 0.0 && e.iso < 1.0) || !(e.crop_radius > 0.0) {
            return Err(CliError::usage("extract.iso must lie in (0, 1) and crop_radius be positive"));
        }
        let g = &self.gaussians;
        if g.target_count == 0 || g.k == 0 || !(g.max_opacity > 0.0 && g.max_opacity < 1.0) {
            return Err(CliError::usage("gaussians: target_count and k must be at least 1, max_opacity in (0, 1)"));
        }
        if !(self.episodes.vicinity >= 0.0 && self.episodes.vicinity.is_finite()) || !(self.episodes.min_geodesic >= 0.0) {
            return Err(CliError::usage("episodes.vicinity and episodes.min_geodesic must be non-negative"));
        }
        Ok(())
    }
}
