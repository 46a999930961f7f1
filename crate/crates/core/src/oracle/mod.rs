//! Ground truth: box-world scenes, exact image-method tracing up to second
//! order, complex channels, and the channel knowledge map used by the
//! RCKM baseline.
//!
//! The oracle never looks at point clouds or meshes. Occlusion is decided
//! against the analytic boxes, so it is independent of the triangle
//! machinery it is used to check.

mod ckm;
mod scene;
mod trace;

pub use ckm::{build_ckm, CkmTable};
pub use scene::{Face, FaceKind, Scene, SceneBox};
pub use trace::{ground_truth_channel, trace_paths, TruePath};
