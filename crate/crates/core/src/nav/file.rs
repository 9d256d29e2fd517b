//! JSON navmesh files. The file stores indices into the faces of a source OBJ
//! mesh together with the adjacency; loading rebuilds the navmesh from the OBJ
//! and checks that the stored adjacency still matches.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NavError, NavMesh, NavParams};
use crate::io::obj::load_obj;

pub const NAVMESH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavMeshFile {
    pub format_version: u32,
    /// OBJ file the face indices refer to; relative paths resolve against the JSON file's directory.
    pub source_mesh: PathBuf,
    pub source_face_count: usize,
    pub params: NavParams,
    /// Source-mesh face index of each navmesh triangle.
    pub faces: Vec<usize>,
    /// Neighboring navmesh triangle across each edge, `null` where there is none.
    pub adjacency: Vec<[Option<usize>; 3]>,
}

impl NavMeshFile {
    pub fn from_navmesh(nav: &NavMesh, source_mesh: PathBuf, source_face_count: usize) -> Self {
        Self {
            format_version: NAVMESH_FORMAT_VERSION,
            source_mesh,
            source_face_count,
            params: nav.params.clone(),
            faces: nav.source_faces.clone(),
            adjacency: nav.neighbors.clone(),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> NavError {
    NavError::Io(format!("{}: {e}", path.display()))
}

/// Writes `nav` to `path`. `source_mesh` is the OBJ the navmesh was baked from;
/// it is stored relative to `path`'s directory when it lies below it.
pub fn save_navmesh(path: &Path, nav: &NavMesh, source_mesh: &Path) -> Result<(), NavError> {
    let mesh = load_obj(source_mesh).map_err(|e| io_err(source_mesh, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let stored = abs(source_mesh)
        .strip_prefix(abs(base))
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| abs(source_mesh));
    let file = NavMeshFile::from_navmesh(nav, stored, mesh.face_count());
    let text = serde_json::to_string_pretty(&file).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn load_navmesh(path: &Path) -> Result<NavMesh, NavError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: NavMeshFile = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    if file.format_version != NAVMESH_FORMAT_VERSION {
        return Err(NavError::Invalid(format!("unsupported navmesh format_version {}", file.format_version)));
    }
    let source = if file.source_mesh.is_relative() {
        path.parent().unwrap_or(Path::new("")).join(&file.source_mesh)
    } else {
        file.source_mesh.clone()
    };
    let mesh = load_obj(&source).map_err(|e| io_err(&source, e))?;
    if mesh.face_count() != file.source_face_count {
        return Err(NavError::Invalid(format!(
            "{} has {} faces, navmesh was baked from {}",
            source.display(),
            mesh.face_count(),
            file.source_face_count
        )));
    }
    let nav = NavMesh::from_faces(&mesh, &file.faces, &file.params)?;
    if nav.neighbors != file.adjacency {
        return Err(NavError::Invalid("stored adjacency does not match the source mesh".into()));
    }
    Ok(nav)
}
