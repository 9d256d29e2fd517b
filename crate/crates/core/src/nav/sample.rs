//! Start/goal sampling near camera positions.
//!
//! Each attempt draws two camera indices uniformly, moves each camera position
//! by a uniform random offset in the disc of radius `vicinity` perpendicular to
//! up, and snaps both onto the navmesh. The pair is kept when both snaps are
//! within the cap, both land in the same region, and the planned path is at
//! least `min_geodesic` long.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NavError, NavMesh, SurfacePoint};
use crate::geom::Trajectory;

pub const DEFAULT_SAMPLING_BUDGET: usize = 1000;

pub(super) fn sample_endpoints(
    nav: &NavMesh,
    cameras: &Trajectory,
    vicinity: f64,
    min_geodesic: f64,
    seed: u64,
    budget: usize,
) -> Result<(SurfacePoint, SurfacePoint), NavError> {
    if !(vicinity >= 0.0 && vicinity.is_finite()) {
        return Err(NavError::InvalidParameter(format!("vicinity must be non-negative, got {vicinity}")));
    }
    if !(min_geodesic >= 0.0) {
        return Err(NavError::InvalidParameter(format!("min_geodesic must be non-negative, got {min_geodesic}")));
    }
    if cameras.is_empty() {
        return Err(NavError::InvalidParameter("camera trajectory is empty".into()));
    }
    let positions = cameras.translations();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let c = positions[rng.random_range(0..positions.len())];
        let r = vicinity * rng.random::<f64>().sqrt();
        let theta = TAU * rng.random::<f64>();
        c + nav.heading_direction(theta) * r
    };
    for _ in 0..budget {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let (Ok(sa), Ok(sb)) = (nav.snap_endpoint(&a), nav.snap_endpoint(&b)) else { continue };
        if nav.region(sa.triangle) != nav.region(sb.triangle) {
            continue;
        }
        match nav.path_between(&sa, &sb) {
            Ok(p) if p.length >= min_geodesic => return Ok((sa, sb)),
            _ => continue,
        }
    }
    Err(NavError::SamplingFailed { attempts: budget })
}
