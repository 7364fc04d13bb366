//! File formats: PLY clouds, ground-truth transforms and vote dumps.

pub mod dump;
pub mod ply;
pub mod transform_file;

pub use ply::{read_ply, write_ply};
pub use transform_file::{read_transform, write_transform, TransformRecord};
