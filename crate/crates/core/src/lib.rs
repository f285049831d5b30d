//! Compresses the grasp-relevant geometry of many objects into one composite object.
//!
//! The pipeline samples grasp candidates on each object, extracts the object points that fall
//! inside the parallel-jaw closing volume (expressed in gripper coordinates), voxelizes them into
//! binary occupancy grids, keeps one representative per distinct grid, classifies each unique
//! feature by its gripper-plane projections and tiles all of them into a single occlusion-free
//! point cloud with a placement manifest.

pub mod assembly;
pub mod dedup;
pub mod error;
pub mod geometry;
pub mod model_io;
pub mod pipeline;
pub mod region;

pub use error::{Error, Result};
