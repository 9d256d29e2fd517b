//! Wavefront OBJ restricted to `v` and `f` records.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{create, open, IoError};
use crate::recon::TriangleMesh;

/// Records that carry no geometry for a collision mesh and are skipped.
const IGNORED: &[&str] = &["vt", "vn", "vp", "o", "g", "s", "usemtl", "mtllib"];

/// Parses vertices and faces; polygons are fan-triangulated from their first vertex.
/// Face tokens may use `v/vt/vn` forms and negative (relative) indices.
pub fn read_obj<R: BufRead>(r: R) -> Result<TriangleMesh, IoError> {
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut triangles = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        let mut tok = text.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        match kind {
            "v" => {
                let vals: Vec<f64> = tok
                    .map(|t| t.parse::<f64>().map_err(|_| IoError::parse(line_no, format!("bad coordinate '{t}'"))))
                    .collect::<Result<_, _>>()?;
                // Trailing values (w or per-vertex color) are accepted and ignored.
                if vals.len() < 3 {
                    return Err(IoError::parse(line_no, "vertex needs x y z"));
                }
                if !vals[..3].iter().all(|v| v.is_finite()) {
                    return Err(IoError::parse(line_no, "non-finite vertex coordinate"));
                }
                vertices.push(Vector3::new(vals[0], vals[1], vals[2]));
            }
            "f" => {
                let idx: Vec<usize> = tok
                    .map(|t| resolve_index(t, vertices.len(), line_no))
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(IoError::parse(line_no, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    let t = [idx[0], idx[k], idx[k + 1]];
                    if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                        return Err(IoError::parse(line_no, "degenerate face repeats a vertex"));
                    }
                    triangles.push(t);
                }
            }
            k if IGNORED.contains(&k) => {}
            other => return Err(IoError::parse(line_no, format!("unsupported record '{other}'"))),
        }
    }
    Ok(TriangleMesh { vertices, triangles })
}

fn resolve_index(token: &str, n_vertices: usize, line_no: usize) -> Result<usize, IoError> {
    let first = token.split('/').next().unwrap_or("");
    let raw: i64 = first
        .parse()
        .map_err(|_| IoError::parse(line_no, format!("bad face index '{token}'")))?;
    let idx = match raw {
        0 => return Err(IoError::parse(line_no, "face index 0 is invalid")),
        r if r > 0 => r - 1,
        r => n_vertices as i64 + r,
    };
    if idx < 0 || idx as usize >= n_vertices {
        return Err(IoError::parse(line_no, format!("face index {raw} out of range")));
    }
    Ok(idx as usize)
}

/// Writes `v x y z` with shortest round-trip formatting and 1-based `f a b c`.
pub fn write_obj<W: Write>(mut w: W, mesh: &TriangleMesh) -> Result<(), IoError> {
    mesh.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
    for v in &mesh.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh, IoError> {
    read_obj(open(path)?)
}

pub fn save_obj(path: &Path, mesh: &TriangleMesh) -> Result<(), IoError> {
    write_obj(create(path)?, mesh)
}
