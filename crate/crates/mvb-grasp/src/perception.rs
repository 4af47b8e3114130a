//! Depth-image back-projection, box segmentation, and cloud denoising.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::VoxelIndex;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("depth image is {got_h}x{got_w} but intrinsics expect {want_h}x{want_w}")]
    DimensionMismatch {
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },
    #[error("point cloud carries no pixel coordinates")]
    MissingPixelCoords,
    #[error("operation requires a non-empty point cloud")]
    EmptyCloud,
    #[error("statistical filter needs more than {k} points, cloud has {n}")]
    TooFewPoints { k: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Pinhole camera model with a maximum valid depth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Depths beyond this are treated as invalid (meters).
    pub d_max: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(PerceptionError::InvalidParameter("fx, fy must be positive".into()));
        }
        if self.cx < 0.0 || self.cx >= self.width as f64 || self.cy < 0.0 || self.cy >= self.height as f64 {
            return Err(PerceptionError::InvalidParameter("principal point outside image".into()));
        }
        if self.d_max <= 0.0 {
            return Err(PerceptionError::InvalidParameter("d_max must be positive".into()));
        }
        Ok(())
    }
}

/// Row-major grid of depths in meters. Non-finite or non-positive values
/// mark invalid pixels.
#[derive(Debug, Clone)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "depth buffer size mismatch");
        Self { width, height, data }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }
}

/// Inclusive 2-D detection box in pixel coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PixelBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
    pub confidence: f64,
}

impl PixelBox {
    pub fn contains(&self, u: u32, v: u32) -> bool {
        self.x1 <= u && u <= self.x2 && self.y1 <= v && v <= self.y2
    }
}

/// A 3-D point cloud in meters, optionally carrying the source pixel of
/// each point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub pixel_coords: Option<Vec<(u32, u32)>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self {
            points,
            pixel_coords: None,
        }
    }

    pub fn with_pixels(points: Vec<Vector3<f64>>, pixels: Vec<(u32, u32)>) -> Self {
        assert_eq!(points.len(), pixels.len(), "pixel list length mismatch");
        Self {
            points,
            pixel_coords: Some(pixels),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64)
    }

    /// Keep points at the indices for which `keep` is true, preserving order.
    fn retain_mask(&self, keep: &[bool]) -> PointCloud {
        let points = self
            .points
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| *p)
            .collect();
        let pixel_coords = self.pixel_coords.as_ref().map(|px| {
            px.iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(p, _)| *p)
                .collect()
        });
        PointCloud { points, pixel_coords }
    }
}

/// One point per valid pixel: `x = (u-cx)·d/fx`, `y = (v-cy)·d/fy`, `z = d`,
/// keeping only depths in `(0, d_max]`.
pub fn back_project(depth: &DepthImage, intr: &CameraIntrinsics) -> Result<PointCloud, PerceptionError> {
    if depth.width != intr.width || depth.height != intr.height {
        return Err(PerceptionError::DimensionMismatch {
            got_h: depth.height,
            got_w: depth.width,
            want_h: intr.height,
            want_w: intr.width,
        });
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v);
            if !d.is_finite() || d <= 0.0 || d > intr.d_max {
                continue;
            }
            let x = (u as f64 - intr.cx) * d / intr.fx;
            let y = (v as f64 - intr.cy) * d / intr.fy;
            points.push(Vector3::new(x, y, d));
            pixels.push((u as u32, v as u32));
        }
    }
    Ok(PointCloud::with_pixels(points, pixels))
}

/// Retain points whose source pixel lies inside the box (inclusive bounds).
pub fn segment_by_box(cloud: &PointCloud, boxx: &PixelBox) -> Result<PointCloud, PerceptionError> {
    let pixels = cloud
        .pixel_coords
        .as_ref()
        .ok_or(PerceptionError::MissingPixelCoords)?;
    let keep: Vec<bool> = pixels.iter().map(|&(u, v)| boxx.contains(u, v)).collect();
    Ok(cloud.retain_mask(&keep))
}

/// Clip depths to the `[lo_pct, hi_pct]` empirical percentile interval.
///
/// Nearest-rank convention on the sorted depth list: the lower bound is the
/// depth at 0-based index `floor(lo_pct·n)` and the upper bound at
/// `ceil(hi_pct·n) - 1`, so `[0, 1]` is the identity.
pub fn clip_depth_percentile(
    cloud: &PointCloud,
    lo_pct: f64,
    hi_pct: f64,
) -> Result<PointCloud, PerceptionError> {
    if cloud.is_empty() {
        return Err(PerceptionError::EmptyCloud);
    }
    if !(0.0..1.0).contains(&lo_pct) || hi_pct <= lo_pct || hi_pct > 1.0 {
        return Err(PerceptionError::InvalidParameter(
            "percentiles must satisfy 0 <= lo < hi <= 1".into(),
        ));
    }
    let n = cloud.len();
    let mut depths: Vec<f64> = cloud.points.iter().map(|p| p.z).collect();
    depths.sort_by(f64::total_cmp);
    let lo_idx = ((lo_pct * n as f64).floor() as usize).min(n - 1);
    let hi_idx = ((hi_pct * n as f64).ceil() as usize).saturating_sub(1).min(n - 1);
    let (z_lo, z_hi) = (depths[lo_idx], depths[hi_idx]);
    let keep: Vec<bool> = cloud.points.iter().map(|p| p.z >= z_lo && p.z <= z_hi).collect();
    Ok(cloud.retain_mask(&keep))
}

/// Remove points whose mean distance to their `k_neighbors` nearest
/// neighbors exceeds `mu + sigma_mult * sigma` of that statistic.
pub fn remove_statistical_outliers(
    cloud: &PointCloud,
    k_neighbors: usize,
    sigma_mult: f64,
) -> Result<PointCloud, PerceptionError> {
    if k_neighbors == 0 {
        return Err(PerceptionError::InvalidParameter("k_neighbors must be positive".into()));
    }
    let n = cloud.len();
    if n <= k_neighbors {
        return Err(PerceptionError::TooFewPoints { k: k_neighbors, n });
    }
    let index = VoxelIndex::build(&cloud.points, neighbor_cell_size(cloud));
    let mean_dists: Vec<f64> = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = index.k_nearest(p, k_neighbors, Some(i));
            nn.iter().map(|(_, d)| d).sum::<f64>() / nn.len() as f64
        })
        .collect();
    let mu = mean_dists.iter().sum::<f64>() / n as f64;
    let var = mean_dists.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n as f64;
    let threshold = mu + sigma_mult * var.sqrt();
    let keep: Vec<bool> = mean_dists.iter().map(|&d| d <= threshold).collect();
    Ok(cloud.retain_mask(&keep))
}

/// Remove points with fewer than `n_min` neighbors (self excluded) within
/// `radius`.
pub fn remove_radius_outliers(
    cloud: &PointCloud,
    radius: f64,
    n_min: usize,
) -> Result<PointCloud, PerceptionError> {
    if radius <= 0.0 {
        return Err(PerceptionError::InvalidParameter("radius must be positive".into()));
    }
    if n_min == 0 || cloud.is_empty() {
        return Ok(cloud.clone());
    }
    let index = VoxelIndex::build(&cloud.points, radius);
    let keep: Vec<bool> = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| index.neighbors_within(p, radius).iter().filter(|&&j| j != i).count() >= n_min)
        .collect();
    Ok(cloud.retain_mask(&keep))
}

/// Cell size heuristic for k-nearest queries: roughly the mean point
/// spacing, estimated from the bounding-box volume.
fn neighbor_cell_size(cloud: &PointCloud) -> f64 {
    let mut min = cloud.points[0];
    let mut max = cloud.points[0];
    for p in &cloud.points {
        min = min.inf(p);
        max = max.sup(p);
    }
    let ext = max - min;
    let vol = ext.x.max(1e-9) * ext.y.max(1e-9) * ext.z.max(1e-9);
    (vol / cloud.len() as f64).cbrt().max(1e-6)
}

/// Default denoising parameters matching the D405 near-range regime.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    pub lo_pct: f64,
    pub hi_pct: f64,
    pub stat_k: usize,
    pub stat_sigma_mult: f64,
    pub radius: f64,
    pub radius_n_min: usize,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            lo_pct: 0.01,
            hi_pct: 0.99,
            stat_k: 20,
            stat_sigma_mult: 2.0,
            radius: 0.01,
            radius_n_min: 5,
        }
    }
}

/// Apply the three filters in order: percentile clip, statistical removal,
/// radius removal. Filters that lack enough points are skipped.
pub fn denoise(cloud: &PointCloud, cfg: &DenoiseConfig) -> Result<PointCloud, PerceptionError> {
    let mut out = clip_depth_percentile(cloud, cfg.lo_pct, cfg.hi_pct)?;
    if out.len() > cfg.stat_k {
        out = remove_statistical_outliers(&out, cfg.stat_k, cfg.stat_sigma_mult)?;
    }
    out = remove_radius_outliers(&out, cfg.radius, cfg.radius_n_min)?;
    Ok(out)
}
