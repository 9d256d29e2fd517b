//! TUM trajectory text: `timestamp tx ty tz qx qy qz qw` per line.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::Serialize;

use super::{create, open, IoError};
use crate::geom::{Pose, Trajectory};

/// Quaternions farther than this from unit norm are renormalized on load.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-9;

/// Normalizations applied while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TumReport {
    pub poses: usize,
    pub comment_lines: usize,
    /// Lines whose timestamp was smaller than the preceding line's.
    pub out_of_order: usize,
    pub renormalized: usize,
}

pub fn read_tum<R: BufRead>(r: R) -> Result<(Trajectory, TumReport), IoError> {
    let mut report = TumReport::default();
    let mut poses: Vec<Pose> = Vec::new();
    let mut lines_of: Vec<usize> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text.starts_with('#') {
            report.comment_lines += 1;
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(IoError::parse(line_no, format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0f64; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| IoError::parse(line_no, format!("'{f}' is not a number")))?;
            if !slot.is_finite() {
                return Err(IoError::parse(line_no, format!("non-finite value '{f}'")));
            }
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        let norm = q.norm();
        if norm == 0.0 {
            return Err(IoError::parse(line_no, "zero quaternion"));
        }
        let rotation = if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            report.renormalized += 1;
            log::warn!("line {line_no}: quaternion norm {norm} renormalized");
            UnitQuaternion::from_quaternion(q)
        } else {
            UnitQuaternion::new_unchecked(q)
        };
        if let Some(prev) = poses.last() {
            if v[0] < prev.timestamp.unwrap_or(f64::NEG_INFINITY) {
                report.out_of_order += 1;
            }
        }
        poses.push(Pose::new(rotation, Vector3::new(v[1], v[2], v[3])).with_timestamp(v[0]));
        lines_of.push(line_no);
    }
    if report.out_of_order > 0 {
        log::warn!("{} out-of-order timestamps; poses sorted", report.out_of_order);
        let mut order: Vec<usize> = (0..poses.len()).collect();
        order.sort_by(|&a, &b| poses[a].timestamp.partial_cmp(&poses[b].timestamp).expect("finite"));
        poses = order.iter().map(|&i| poses[i]).collect();
        lines_of = order.iter().map(|&i| lines_of[i]).collect();
    }
    for (k, w) in poses.windows(2).enumerate() {
        if w[0].timestamp == w[1].timestamp {
            return Err(IoError::parse(
                lines_of[k + 1],
                format!("duplicate timestamp {}", w[1].timestamp.unwrap_or_default()),
            ));
        }
    }
    report.poses = poses.len();
    let traj = Trajectory::from_poses(poses).map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok((traj, report))
}

/// Writes one line per pose with 17 significant digits. Untimed poses get their index as timestamp.
pub fn write_tum<W: Write>(mut w: W, traj: &Trajectory) -> Result<(), IoError> {
    for (i, p) in traj.poses().iter().enumerate() {
        let t = p.timestamp.unwrap_or(i as f64);
        let q = p.rotation.quaternion();
        let fields = [t, p.translation.x, p.translation.y, p.translation.z, q.i, q.j, q.k, q.w];
        let line: Vec<String> = fields.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_tum(path: &Path) -> Result<(Trajectory, TumReport), IoError> {
    read_tum(open(path)?)
}

pub fn save_tum(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    write_tum(create(path)?, traj)
}
