//! Geometric grasp filtering with an oriented-bounding-box prior.
//!
//! The library converts depth images to point clouds, fits a PCA-based
//! oriented bounding box to a segmented object cloud, selects the box faces
//! nearest the camera, and uses their normals to hard-filter and re-score
//! 6-DoF grasp candidates so that frontal, face-aligned approaches rank
//! first. A deterministic synthetic benchmark compares the filtered pipeline
//! against plain score ranking over a structured scenario grid.

pub mod collision;
pub mod eigen;
pub mod harness;
pub mod io;
pub mod obb;
pub mod perception;
pub mod pose;
pub mod scoring;
pub mod synth;

pub use obb::{Face, Obb};
pub use perception::{CameraIntrinsics, DepthImage, PixelBox, PointCloud};
pub use pose::Pose;
pub use scoring::{GraspCandidate, ScoringConfig};
