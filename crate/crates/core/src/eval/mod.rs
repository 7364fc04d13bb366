//! Evaluation harness: the RMSE metric, synthetic models and ring-view generation.

pub mod fixtures;
pub mod ring;
pub mod rmse;

pub use ring::{generate_ring_views, hidden_point_removal, RingConfig, RingDataset};
pub use rmse::rmse;
