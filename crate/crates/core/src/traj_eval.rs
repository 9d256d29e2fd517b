//! Camera-pose accuracy metrics.
//!
//! Absolute errors (T-ATE raw/scaled, R-ATE) are computed after a closed-form
//! alignment. Relative errors (T-RTE, T-RTE in degrees, R-RTE) and AUC@30 are
//! computed over all unordered camera pairs, optionally capped by
//! [`PairSampling`].

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{align_se3, align_sim3, alignment_rmse, relative_angle, vector_angle, GeomError, Trajectory};

/// Relative translations shorter than this (meters) have no direction.
pub const MIN_PAIR_BASELINE: f64 = 1e-9;
/// Upper integration bound of the AUC, degrees.
pub const AUC_MAX_DEG: f64 = 30.0;
/// A scene counts as reconstructed when its AUC@30 is strictly above this.
pub const SCENE_SUCCESS_AUC: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("no scenes to aggregate")]
    Empty,
}

/// Optional cap on the number of camera pairs used by pairwise metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairSampling {
    pub max_pairs: Option<usize>,
    pub seed: u64,
}

impl PairSampling {
    /// All `n (n - 1) / 2` pairs, or a seeded uniform subset without replacement.
    pub fn pairs(&self, n: usize) -> Vec<(usize, usize)> {
        let total = n * n.saturating_sub(1) / 2;
        match self.max_pairs {
            Some(cap) if cap < total => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut picked: Vec<usize> = sample(&mut rng, total, cap).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|k| pair_from_index(k, n)).collect()
            }
            _ => (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect(),
        }
    }
}

fn pair_from_index(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

/// Per-scene metric report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMetricReport {
    pub t_ate_raw: f64,
    pub t_ate_scaled: f64,
    pub r_ate: f64,
    pub t_rte: f64,
    pub t_rte_deg: f64,
    pub r_rte: f64,
    pub auc_at_30: f64,
    pub n_poses: usize,
    pub degenerate_pairs_skipped: usize,
}

fn check_pair(pred: &Trajectory, gt: &Trajectory) -> Result<(), EvalError> {
    if pred.len() != gt.len() {
        return Err(GeomError::LengthMismatch { pred: pred.len(), gt: gt.len() }.into());
    }
    if pred.len() < 2 {
        return Err(GeomError::TooFewPoses { required: 2, got: pred.len() }.into());
    }
    Ok(())
}

fn rms(sum_sq: f64, count: usize) -> f64 {
    (sum_sq / count as f64).sqrt()
}

/// Translation RMSE after rigid alignment, meters.
pub fn t_ate_raw(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    let a = align_se3(pred, gt)?;
    Ok(alignment_rmse(&a.transform, pred, gt)?)
}

/// Translation RMSE after similarity alignment, meters.
pub fn t_ate_scaled(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    let a = align_sim3(pred, gt)?;
    Ok(alignment_rmse(&a.transform, pred, gt)?)
}

/// Rotation-angle RMSE in degrees, with the similarity-alignment rotation
/// applied to the predicted orientations first.
pub fn r_ate(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    let a = align_sim3(pred, gt)?;
    Ok(r_ate_with(&a.transform.rotation, pred, gt))
}

fn r_ate_with(gauge: &Matrix3<f64>, pred: &Trajectory, gt: &Trajectory) -> f64 {
    let sum: f64 = pred
        .poses()
        .iter()
        .zip(gt.poses())
        .map(|(p, g)| {
            relative_angle(&g.rotation_matrix(), &(gauge * p.rotation_matrix()))
                .to_degrees()
                .powi(2)
        })
        .sum();
    rms(sum, pred.len())
}

/// RMSE over pairs of the difference in pairwise distances, meters. No alignment.
pub fn t_rte(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    t_rte_sampled(pred, gt, &PairSampling::default())
}

pub fn t_rte_sampled(pred: &Trajectory, gt: &Trajectory, sampling: &PairSampling) -> Result<f64, EvalError> {
    check_pair(pred, gt)?;
    let tp = pred.translations();
    let tg = gt.translations();
    let pairs = sampling.pairs(pred.len());
    let sum: f64 = pairs
        .iter()
        .map(|&(i, j)| ((tp[i] - tp[j]).norm() - (tg[i] - tg[j]).norm()).powi(2))
        .sum();
    Ok(rms(sum, pairs.len()))
}

/// Direction-angle RMSE of relative translations in degrees, with predicted
/// directions rotated by the similarity-alignment rotation.
pub fn t_rte_deg(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    let a = align_sim3(pred, gt)?;
    let pairs = PairSampling::default().pairs(pred.len());
    let errs = pair_errors(&a.transform.rotation, pred, gt, &pairs);
    direction_rmse(&errs)
}

/// Relative-rotation RMSE in degrees. Invariant to a global rotation, so no
/// alignment is applied.
pub fn r_rte(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    check_pair(pred, gt)?;
    let pairs = PairSampling::default().pairs(pred.len());
    let errs = pair_errors(&Matrix3::identity(), pred, gt, &pairs);
    Ok(rms(errs.iter().map(|e| e.rotation_deg.powi(2)).sum(), errs.len()))
}

/// Normalized area under the CDF of per-pair `max(rotation, direction)` errors up to 30 degrees.
pub fn auc_at_30(pred: &Trajectory, gt: &Trajectory) -> Result<f64, EvalError> {
    let a = align_sim3(pred, gt)?;
    let pairs = PairSampling::default().pairs(pred.len());
    let errs = pair_errors(&a.transform.rotation, pred, gt, &pairs);
    Ok(auc_from_errors(&errs.iter().map(PairError::max_error).collect::<Vec<_>>(), AUC_MAX_DEG))
}

/// `(1 / T) * ∫_0^T P(e < θ) dθ` for the empirical distribution of `errors_deg`.
///
/// The CDF is piecewise constant, so the integral reduces to the mean of
/// `T - min(e, T)`. Returns 1 for an empty list.
pub fn auc_from_errors(errors_deg: &[f64], max_deg: f64) -> f64 {
    if errors_deg.is_empty() {
        return 1.0;
    }
    let covered: f64 = errors_deg.iter().map(|e| max_deg - e.clamp(0.0, max_deg)).sum();
    covered / (max_deg * errors_deg.len() as f64)
}

#[derive(Debug, Clone, Copy)]
struct PairError {
    rotation_deg: f64,
    /// `None` when either relative translation is too short to have a direction.
    direction_deg: Option<f64>,
}

impl PairError {
    fn max_error(&self) -> f64 {
        match self.direction_deg {
            Some(d) => self.rotation_deg.max(d),
            None => self.rotation_deg,
        }
    }
}

fn pair_errors(
    gauge: &Matrix3<f64>,
    pred: &Trajectory,
    gt: &Trajectory,
    pairs: &[(usize, usize)],
) -> Vec<PairError> {
    let tp = pred.translations();
    let tg = gt.translations();
    let rp = pred.rotation_matrices();
    let rg = gt.rotation_matrices();
    pairs
        .iter()
        .map(|&(i, j)| {
            let rel_pred = rp[i].transpose() * rp[j];
            let rel_gt = rg[i].transpose() * rg[j];
            let rotation_deg = relative_angle(&rel_gt, &rel_pred).to_degrees();
            let dp: Vector3<f64> = tp[i] - tp[j];
            let dg: Vector3<f64> = tg[i] - tg[j];
            let direction_deg = if dp.norm() < MIN_PAIR_BASELINE || dg.norm() < MIN_PAIR_BASELINE {
                None
            } else {
                Some(vector_angle(&(gauge * dp), &dg).to_degrees())
            };
            PairError { rotation_deg, direction_deg }
        })
        .collect()
}

fn direction_rmse(errs: &[PairError]) -> Result<f64, EvalError> {
    let dirs: Vec<f64> = errs.iter().filter_map(|e| e.direction_deg).collect();
    if dirs.is_empty() {
        return Err(EvalError::Undefined(
            "every camera pair has a zero-length relative translation".into(),
        ));
    }
    Ok(rms(dirs.iter().map(|d| d * d).sum(), dirs.len()))
}

/// Computes the full report with one alignment per estimator.
pub fn evaluate_scene(
    pred: &Trajectory,
    gt: &Trajectory,
    sampling: &PairSampling,
) -> Result<PoseMetricReport, EvalError> {
    check_pair(pred, gt)?;
    let se3 = align_se3(pred, gt)?;
    let sim3 = align_sim3(pred, gt)?;
    let gauge = sim3.transform.rotation;
    let pairs = sampling.pairs(pred.len());
    let errs = pair_errors(&gauge, pred, gt, &pairs);
    let skipped = errs.iter().filter(|e| e.direction_deg.is_none()).count();
    Ok(PoseMetricReport {
        t_ate_raw: alignment_rmse(&se3.transform, pred, gt)?,
        t_ate_scaled: alignment_rmse(&sim3.transform, pred, gt)?,
        r_ate: r_ate_with(&gauge, pred, gt),
        t_rte: t_rte_sampled(pred, gt, sampling)?,
        t_rte_deg: direction_rmse(&errs)?,
        r_rte: rms(errs.iter().map(|e| e.rotation_deg.powi(2)).sum(), errs.len()),
        auc_at_30: auc_from_errors(&errs.iter().map(PairError::max_error).collect::<Vec<_>>(), AUC_MAX_DEG),
        n_poses: pred.len(),
        degenerate_pairs_skipped: skipped,
    })
}

pub fn scene_success(auc: f64) -> bool {
    auc > SCENE_SUCCESS_AUC
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub median: f64,
}

impl MetricStats {
    fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Self { mean: values.iter().sum::<f64>() / n as f64, median }
    }
}

/// Mean/median per metric plus the fraction of successful scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_scenes: usize,
    pub n_failed: usize,
    pub t_ate_raw: MetricStats,
    pub t_ate_scaled: MetricStats,
    pub r_ate: MetricStats,
    pub t_rte: MetricStats,
    pub t_rte_deg: MetricStats,
    pub r_rte: MetricStats,
    pub auc_at_30: MetricStats,
    pub success_rate: f64,
}

pub fn aggregate(reports: &[PoseMetricReport]) -> Result<DatasetSummary, EvalError> {
    let scenes: Vec<Option<PoseMetricReport>> = reports.iter().copied().map(Some).collect();
    aggregate_scenes(&scenes)
}

/// Like [`aggregate`], with `None` marking scenes whose reconstruction failed.
/// Failed scenes are left out of the error statistics and count as unsuccessful.
pub fn aggregate_scenes(scenes: &[Option<PoseMetricReport>]) -> Result<DatasetSummary, EvalError> {
    let ok: Vec<&PoseMetricReport> = scenes.iter().flatten().collect();
    if ok.is_empty() {
        return Err(EvalError::Empty);
    }
    let stat = |f: fn(&PoseMetricReport) -> f64| MetricStats::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    let successes = ok.iter().filter(|r| scene_success(r.auc_at_30)).count();
    Ok(DatasetSummary {
        n_scenes: scenes.len(),
        n_failed: scenes.len() - ok.len(),
        t_ate_raw: stat(|r| r.t_ate_raw),
        t_ate_scaled: stat(|r| r.t_ate_scaled),
        r_ate: stat(|r| r.r_ate),
        t_rte: stat(|r| r.t_rte),
        t_rte_deg: stat(|r| r.t_rte_deg),
        r_rte: stat(|r| r.r_rte),
        auc_at_30: stat(|r| r.auc_at_30),
        success_rate: successes as f64 / scenes.len() as f64,
    })
}

/// One CSV row per scene: `scene,method,<report fields>`.
pub fn write_csv<W: Write>(out: W, rows: &[(String, String, PoseMetricReport)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scene",
        "method",
        "t_ate_raw",
        "t_ate_scaled",
        "r_ate",
        "t_rte",
        "t_rte_deg",
        "r_rte",
        "auc_at_30",
        "n_poses",
        "degenerate_pairs_skipped",
    ])?;
    for (scene, method, r) in rows {
        w.write_record([
            scene.clone(),
            method.clone(),
            r.t_ate_raw.to_string(),
            r.t_ate_scaled.to_string(),
            r.r_ate.to_string(),
            r.t_rte.to_string(),
            r.t_rte_deg.to_string(),
            r.r_rte.to_string(),
            r.auc_at_30.to_string(),
            r.n_poses.to_string(),
            r.degenerate_pairs_skipped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use nalgebra::UnitQuaternion;

    fn xline(xs: &[f64]) -> Trajectory {
        let pts: Vec<_> = xs.iter().map(|&x| Vector3::new(x, 0.0, 0.0)).collect();
        Trajectory::from_translations(&pts)
    }

    #[test]
    fn two_point_ate() {
        let gt = xline(&[0.0, 2.0]);
        let pred = xline(&[0.0, 4.0]);
        assert!((t_ate_raw(&pred, &gt).unwrap() - 1.0).abs() < 1e-12);
        assert!(t_ate_scaled(&pred, &gt).unwrap() < 1e-12);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_from_errors(&[0.0, 15.0, 45.0], 30.0), 0.5);
        assert_eq!(auc_from_errors(&[0.0, 0.0], 30.0), 1.0);
        assert_eq!(auc_from_errors(&[30.0, 90.0], 30.0), 0.0);
    }

    #[test]
    fn single_pose_error_spreads_over_rmse() {
        let pts = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 2.0, 0.0),
            Vector3::new(0.0, 0.0, 3.0),
            Vector3::new(1.0, 1.0, 1.0),
        ];
        let gt = Trajectory::from_translations(&pts);
        let mut poses = gt.poses().to_vec();
        poses[2].rotation = UnitQuaternion::from_euler_angles(0.0, 0.0, 10f64.to_radians()) * poses[2].rotation;
        let pred = Trajectory::from_poses(poses).unwrap();
        assert!((r_ate(&pred, &gt).unwrap() - 10.0 / 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn t_rte_doubles() {
        // Unit-spaced triangle: all pairwise distances 1.
        let s = 3f64.sqrt() / 2.0;
        let gt = Trajectory::from_translations(&[
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.5, s, 0.0),
        ]);
        let pred = Trajectory::from_translations(&gt.translations().iter().map(|p| p * 2.0).collect::<Vec<_>>());
        assert!((t_rte(&pred, &gt).unwrap() - 1.0).abs() < 1e-12);
        assert!(t_rte_deg(&pred, &gt).unwrap() < 1e-9);
    }

    #[test]
    fn r_rte_ignores_world_rotation() {
        let rot = |r: f64, p: f64, y: f64| UnitQuaternion::from_euler_angles(r, p, y);
        let gt = Trajectory::from_poses(vec![
            Pose::new(rot(0.1, 0.2, 0.3), Vector3::new(0.0, 0.0, 0.0)),
            Pose::new(rot(-0.4, 0.0, 1.1), Vector3::new(1.0, 0.0, 0.0)),
            Pose::new(rot(0.7, -0.3, -0.2), Vector3::new(0.0, 1.0, 0.0)),
        ])
        .unwrap();
        let mut poses = gt.poses().to_vec();
        poses[1].rotation = rot(0.0, 0.0, 0.2) * poses[1].rotation;
        let pred = Trajectory::from_poses(poses).unwrap();
        let world = rot(0.9, -1.2, 2.0);
        let turned = Trajectory::from_poses(
            pred.poses().iter().map(|p| Pose::new(world * p.rotation, world * p.translation)).collect(),
        )
        .unwrap();
        let base = r_rte(&pred, &gt).unwrap();
        assert!(base > 1.0);
        assert!((r_rte(&turned, &gt).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn all_degenerate_pairs_are_an_error() {
        let poses = vec![
            Pose::new(UnitQuaternion::identity(), Vector3::zeros()),
            Pose::new(UnitQuaternion::from_euler_angles(0.1, 0.0, 0.0), Vector3::zeros()),
        ];
        let t = Trajectory::from_poses(poses).unwrap();
        let errs = pair_errors(&Matrix3::identity(), &t, &t, &[(0, 1)]);
        assert!(matches!(direction_rmse(&errs), Err(EvalError::Undefined(_))));
    }

    #[test]
    fn success_is_strict_and_aggregate_counts() {
        assert!(!scene_success(0.1));
        assert!(scene_success(0.1000001));
        let base = PoseMetricReport {
            t_ate_raw: 1.0,
            t_ate_scaled: 1.0,
            r_ate: 1.0,
            t_rte: 1.0,
            t_rte_deg: 1.0,
            r_rte: 1.0,
            auc_at_30: 0.0,
            n_poses: 3,
            degenerate_pairs_skipped: 0,
        };
        let reports: Vec<_> = [0.05, 0.2, 0.5]
            .iter()
            .map(|&auc| PoseMetricReport { auc_at_30: auc, ..base })
            .collect();
        let s = aggregate(&reports).unwrap();
        assert!((s.success_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.auc_at_30.median, 0.2);

        let one = aggregate(&reports[..1]).unwrap();
        assert_eq!(one.auc_at_30.mean, one.auc_at_30.median);
        assert_eq!(aggregate(&[]), Err(EvalError::Empty));

        let with_failure = aggregate_scenes(&[Some(reports[2]), None]).unwrap();
        assert_eq!(with_failure.success_rate, 0.5);
        assert_eq!(with_failure.auc_at_30.mean, 0.5);
        assert_eq!(with_failure.n_failed, 1);
    }

    #[test]
    fn even_count_median_averages_middle() {
        assert_eq!(MetricStats::of(&[4.0, 1.0, 3.0, 2.0]).median, 2.5);
    }

    #[test]
    fn pair_sampling_cap() {
        let all = PairSampling::default().pairs(6);
        assert_eq!(all.len(), 15);
        let capped = PairSampling { max_pairs: Some(5), seed: 7 }.pairs(6);
        assert_eq!(capped.len(), 5);
        assert!(capped.iter().all(|p| all.contains(p)));
        assert_eq!(capped, PairSampling { max_pairs: Some(5), seed: 7 }.pairs(6));
        for (k, p) in all.iter().enumerate() {
            assert_eq!(pair_from_index(k, 6), *p);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = PoseMetricReport {
            t_ate_raw: 0.5,
            t_ate_scaled: 0.25,
            r_ate: 1.0,
            t_rte: 2.0,
            t_rte_deg: 3.0,
            r_rte: 4.0,
            auc_at_30: 0.75,
            n_poses: 10,
            degenerate_pairs_skipped: 1,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[("s1".into(), "m".into(), r)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("scene,method,t_ate_raw"));
        assert_eq!(lines[1], "s1,m,0.5,0.25,1,2,3,4,0.75,10,1");
    }
}
