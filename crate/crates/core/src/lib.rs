//! Global rigid registration of two point clouds.
//!
//! The pipeline selects high-curvature keypoints, matches them by FPFH
//! descriptor, ranks the matches by pairwise length consistency, grows
//! PPF-gated triplets from the ranked list and finally takes the per-axis
//! histogram mode of the rotation and translation votes cast by every triplet.
//!
//! Estimated transforms map the second cloud (`Y`) onto the first (`X`).

// `!(x > 0.0)` is used on purpose in validation so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod correspondence;
pub mod error;
pub mod eval;
pub mod fpfh;
pub mod io;
pub mod kdtree;
pub mod pipeline;
pub mod keypoints;
pub mod ppf;
pub mod transform;
pub mod triplets;
pub mod voting;

pub use cloud::{apply_transform, compute_medd, estimate_normals, PointCloud};
pub use error::{Error, Result, Stage};
pub use kdtree::{KdTree, Neighbor, SpatialIndex};
pub use transform::{Mat3, RigidTransform, RotationVector, Vec3};
pub use pipeline::{register, RegistrationConfig, RegistrationResult};
