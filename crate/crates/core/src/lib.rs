//! Virtual base station construction from LiDAR point clouds and
//! VBS-assisted partial beam training for near-field mmWave links.
//!
//! The pipeline runs scene → scan → objects → meshes → VBSs → coverage
//! grid, then uses the grid to build coarse channels and pick a small set
//! of beam pairs to train against a ground-truth channel from [`oracle`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod chan;
pub mod cloud;
pub mod config;
mod error;
pub mod geom;
pub mod mesh;
pub mod oracle;
pub mod pipeline;
pub mod vbs;

pub use error::{Error, Result};
