//! Consistent normal orientation for indoor building point clouds.
//!
//! Planes are detected in the cloud, rasterized into coarse patches, and
//! every patch is classified and oriented by multi-bounce path tracing
//! against the patch set. Per-plane voting, a single-bounce façade
//! correction and a second vote follow; the result is copied back onto the
//! original points.
//!
//! The crate also ships a synthetic building/scanner simulator and an
//! evaluation harness that scores orientations against scanner positions.

pub mod config;
pub mod error;
pub mod eval;
pub mod geom;
pub mod io;
pub mod knn;
pub mod normals;
pub mod orient;
pub mod patches;
pub mod pipeline;
pub mod ransac;
pub mod ray;
pub mod rng;
pub mod synth;
#[cfg(test)]
mod proptests;
#[cfg(test)]
mod scenarios;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use geom::{Point, Quad, Vector};
pub use eval::EvalReport;
pub use io::{PointCloud, PointFormat, PointLabel, ScannerMetadata};
pub use orient::{orient, OrientOutput};
pub use patches::{OccupancyBitmap, Patch, PatchSet};
pub use pipeline::{Phase, PatchClass, PatchDecision, PipelineResult, SideStats, SurfaceVote};
pub use ransac::{DetectionParams, Plane};
pub use ray::{Scene, TraceConfig};
