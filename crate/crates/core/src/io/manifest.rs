//! Scene manifest: a JSON document naming every artifact of one scene.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{open, IoError};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Extrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Meters,
}

/// Paths are stored as written (relative to the manifest's directory unless absolute).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub format_version: u32,
    pub scene_id: String,
    pub units: Units,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_cloud: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_trajectory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub predicted_trajectories: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub navmesh: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussians: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_dir: Option<PathBuf>,
    /// Directory the relative paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SceneManifest {
    pub fn new(scene_id: impl Into<String>, split: Split) -> Self {
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            scene_id: scene_id.into(),
            units: Units::Meters,
            split,
            point_cloud: None,
            gt_trajectory: None,
            predicted_trajectories: BTreeMap::new(),
            mesh: None,
            navmesh: None,
            gaussians: None,
            images_dir: None,
            depth_dir: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every referenced path, resolved, in field order.
    pub fn referenced_paths(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let singles = [&self.point_cloud, &self.gt_trajectory];
        out.extend(singles.iter().filter_map(|p| p.as_deref()).map(|p| self.resolve(p)));
        out.extend(self.predicted_trajectories.values().map(|p| self.resolve(p)));
        let rest = [&self.mesh, &self.navmesh, &self.gaussians, &self.images_dir, &self.depth_dir];
        out.extend(rest.iter().filter_map(|p| p.as_deref()).map(|p| self.resolve(p)));
        out
    }

    /// Resolved path of a required field, or an error naming it.
    pub fn require(&self, field: &str, value: &Option<PathBuf>) -> Result<PathBuf, IoError> {
        value
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| IoError::Invalid(format!("manifest '{}' has no {field}", self.scene_id)))
    }

    fn validate(&self) -> Result<(), IoError> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(IoError::Unsupported(format!("manifest format_version {}", self.format_version)));
        }
        if self.scene_id.is_empty() {
            return Err(IoError::Invalid("scene_id is empty".into()));
        }
        let missing: Vec<PathBuf> = self.referenced_paths().into_iter().filter(|p| !p.exists()).collect();
        if !missing.is_empty() {
            return Err(IoError::MissingFiles(missing));
        }
        Ok(())
    }
}

/// Parses from JSON text and checks every referenced path relative to `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<SceneManifest, IoError> {
    let mut m: SceneManifest = serde_json::from_str(text)?;
    m.base_dir = base_dir.to_path_buf();
    m.validate()?;
    Ok(m)
}

pub fn load_manifest(path: &Path) -> Result<SceneManifest, IoError> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut open(path)?, &mut text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, &base)
}
