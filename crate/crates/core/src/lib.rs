//! Geometry and evaluation toolkit for real-to-sim navigation scenes.
//!
//! The crate covers the deterministic parts of a scan-to-simulator pipeline:
//!
//! - [`geom`]: poses, trajectories, closed-form SE(3)/SIM(3) alignment and keyframing.
//! - [`traj_eval`]: camera-pose accuracy metrics (ATE, RTE, AUC@30) and dataset summaries.
//! - [`recon`]: occupancy voxelization, marching cubes and collision-mesh cleanup.
//! - [`gs_init`]: Gaussian-splat initialization and depth-target rendering.
//! - [`nav`]: navmesh baking, snapping, shortest paths and endpoint sampling.
//! - [`sim`]: kinematic episode harness, reward shaping and NE/SR/SPL/IR.
//! - [`img`]: PSNR and SSIM.
//! - [`io`]: PLY, TUM, OBJ, image, depth, grid and manifest formats.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geom;
pub mod gs_init;
pub mod img;
pub mod io;
pub mod nav;
pub mod recon;
pub mod sim;
pub mod traj_eval;

pub use nalgebra::{Point3, UnitQuaternion, Vector3};
