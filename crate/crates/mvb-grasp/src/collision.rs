//! Point-penetration collision checks accelerated by a voxel-grid index.

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::perception::PointCloud;
use crate::pose::Pose;

/// Default penetration threshold in meters (2 mm).
pub const DEFAULT_TAU: f64 = 0.002;

/// Gripper collision geometry as a bare vertex set in the gripper frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GripperModel {
    pub vertices: Vec<Vector3<f64>>,
}

impl GripperModel {
    pub fn new(vertices: Vec<Vector3<f64>>) -> Self {
        Self { vertices }
    }

    /// Parallel-jaw point skeleton: two finger segments 0.14 m apart plus a
    /// palm block behind them. Gripper frame: z is the approach direction,
    /// y is the finger-opening direction.
    pub fn default_parallel_jaw() -> Self {
        let mut vertices = Vec::new();
        let half_open = 0.07;
        let finger_len = 0.05;
        // Finger segments, sampled every centimeter along z.
        for side in [-1.0, 1.0] {
            for i in 0..=5 {
                let z = -finger_len + (i as f64) * 0.01;
                vertices.push(Vector3::new(0.0, side * half_open, z));
            }
        }
        // Palm block behind the fingers.
        for y in [-half_open, 0.0, half_open] {
            for x in [-0.02, 0.0, 0.02] {
                vertices.push(Vector3::new(x, y, -finger_len - 0.02));
            }
        }
        Self { vertices }
    }
}

/// Spatial hash over scene points with a fixed cell size.
///
/// Immutable after construction; queries with radius at most `cell_size`
/// touch only the 27 cells around the query point.
#[derive(Debug, Clone)]
pub struct VoxelIndex {
    cell_size: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    points: Vec<Vector3<f64>>,
    cell_min: (i64, i64, i64),
    cell_max: (i64, i64, i64),
}

impl VoxelIndex {
    pub fn build(points: &[Vector3<f64>], cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell_size must be positive");
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        let mut cell_min = (i64::MAX, i64::MAX, i64::MAX);
        let mut cell_max = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of(p, cell_size);
            cell_min = (cell_min.0.min(c.0), cell_min.1.min(c.1), cell_min.2.min(c.2));
            cell_max = (cell_max.0.max(c.0), cell_max.1.max(c.1), cell_max.2.max(c.2));
            cells.entry(c).or_default().push(i);
        }
        Self {
            cell_size,
            cells,
            points: points.to_vec(),
            cell_min,
            cell_max,
        }
    }

    fn cell_of(p: &Vector3<f64>, cell_size: f64) -> (i64, i64, i64) {
        (
            (p.x / cell_size).floor() as i64,
            (p.y / cell_size).floor() as i64,
            (p.z / cell_size).floor() as i64,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Indices of all points with `|p - center| <= radius`, ascending.
    pub fn neighbors_within(&self, center: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let r2 = radius * radius;
        let reach = (radius / self.cell_size).ceil() as i64;
        let c = Self::cell_of(center, self.cell_size);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(ids) = self.cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        for &i in ids {
                            if (self.points[i] - center).norm_squared() <= r2 {
                                out.push(i);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// True iff any point lies strictly closer than `radius` to `center`.
    pub fn any_within_strict(&self, center: &Vector3<f64>, radius: f64) -> bool {
        let r2 = radius * radius;
        let reach = (radius / self.cell_size).ceil() as i64;
        let c = Self::cell_of(center, self.cell_size);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(ids) = self.cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        for &i in ids {
                            if (self.points[i] - center).norm_squared() < r2 {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }

    /// The `k` nearest points to `center` as `(index, distance)`, ascending
    /// by distance, optionally excluding one index (the query point itself).
    /// Returns fewer than `k` entries when the index holds fewer points.
    pub fn k_nearest(
        &self,
        center: &Vector3<f64>,
        k: usize,
        exclude: Option<usize>,
    ) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let c = Self::cell_of(center, self.cell_size);
        // Largest Chebyshev ring that can still contain an occupied cell.
        let max_ring = [
            (c.0 - self.cell_min.0).abs(),
            (self.cell_max.0 - c.0).abs(),
            (c.1 - self.cell_min.1).abs(),
            (self.cell_max.1 - c.1).abs(),
            (c.2 - self.cell_min.2).abs(),
            (self.cell_max.2 - c.2).abs(),
        ]
        .into_iter()
        .max()
        .unwrap()
        .max(0);

        let mut best: Vec<(usize, f64)> = Vec::new();
        for ring in 0..=max_ring {
            // Any point in a cell at Chebyshev ring r is at least
            // (r-1)*cell_size away from the query point.
            if best.len() >= k {
                let kth = best[k - 1].1;
                if ((ring - 1).max(0) as f64) * self.cell_size > kth {
                    break;
                }
            }
            self.for_ring_cells(c, ring, |ids| {
                for &i in ids {
                    if exclude == Some(i) {
                        continue;
                    }
                    let d = (self.points[i] - center).norm();
                    best.push((i, d));
                }
            });
            best.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            best.truncate(k);
        }
        best
    }

    fn for_ring_cells(&self, c: (i64, i64, i64), ring: i64, mut f: impl FnMut(&[usize])) {
        if ring == 0 {
            if let Some(ids) = self.cells.get(&c) {
                f(ids);
            }
            return;
        }
        for dx in -ring..=ring {
            for dy in -ring..=ring {
                for dz in -ring..=ring {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                        continue;
                    }
                    if let Some(ids) = self.cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        f(ids);
                    }
                }
            }
        }
    }
}

/// Build an index over the scene for repeated collision queries.
pub fn build_voxel_index(scene: &PointCloud, cell_size: f64) -> VoxelIndex {
    VoxelIndex::build(&scene.points, cell_size)
}

/// True iff some transformed gripper vertex lies strictly within `tau` of a
/// scene point.
pub fn check_collision(pose: &Pose, gripper: &GripperModel, scene: &PointCloud, tau: f64) -> bool {
    assert!(tau > 0.0, "tau must be positive");
    assert!(!gripper.vertices.is_empty(), "gripper must have vertices");
    if scene.points.is_empty() {
        return false;
    }
    let index = build_voxel_index(scene, tau);
    check_collision_indexed(pose, gripper, &index, tau)
}

/// Same verdict as [`check_collision`] against a prebuilt index.
pub fn check_collision_indexed(
    pose: &Pose,
    gripper: &GripperModel,
    index: &VoxelIndex,
    tau: f64,
) -> bool {
    gripper
        .vertices
        .iter()
        .any(|v| index.any_within_strict(&pose.apply(v), tau))
}

/// Minimum distance from any transformed gripper vertex to the scene, or
/// `None` for an empty scene. Brute force; used for reporting, not gating.
pub fn min_distance(pose: &Pose, gripper: &GripperModel, scene: &PointCloud) -> Option<f64> {
    if scene.points.is_empty() {
        return None;
    }
    let mut best = f64::INFINITY;
    for v in &gripper.vertices {
        let w = pose.apply(v);
        for p in &scene.points {
            best = best.min((w - p).norm());
        }
    }
    Some(best)
}
