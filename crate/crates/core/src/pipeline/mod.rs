//! Phantoms, k-space simulation, file formats, PNG export and experiment plumbing.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod formats;
pub mod phantom;
pub mod render;
pub mod simulate;

pub use config::ExperimentConfig;
pub use phantom::{shepp_logan, warped_shepp_logan, Warp};
pub use render::{error_map, export_error_png, export_png};
pub use simulate::simulate_kspace;
