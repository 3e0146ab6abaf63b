//! Pose estimation for objects seen from a single viewpoint, from masked depth maps.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can run
//! anywhere; file formats, the experiment runner and the CLI live in the
//! `occlureg` companion crate.
//!
//! Pipeline overview:
//!
//! 1. [`scene`] renders depth maps and object masks by ray casting and
//!    backprojects them into partial target clouds.
//! 2. [`cloud`] normalizes, voxelizes, samples and crops point clouds.
//! 3. [`descriptors`] produces one feature vector per point (FPFH or an
//!    oracle with controllable quality).
//! 4. [`matching`] turns descriptor inner products into a score map, appends
//!    outlier bins and solves the entropic transport problem in the log
//!    domain.
//! 5. [`registration`] extracts weighted correspondences and solves for the
//!    rigid pose in one shot; ICP and RANSAC baselines share the same types.
//! 6. [`eval`] aggregates pose errors into threshold-swept success rates.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cloud;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod matching;
pub mod registration;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, CameraPose, RigidTransform, Vec3};
