//! PCA-based oriented bounding box fitting and face selection.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::eigen_symmetric3;
use crate::perception::PointCloud;

#[derive(Debug, Error)]
pub enum ObbError {
    #[error("OBB fitting needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("face count k must be in 1..=6, got {0}")]
    InvalidFaceCount(usize),
}

/// Oriented bounding box: `rotation` columns are the principal axes sorted
/// by decreasing eigenvalue, `extents` are full side lengths (projection
/// spans) along those axes.
#[derive(Debug, Clone, Copy)]
pub struct Obb {
    pub rotation: Matrix3<f64>,
    pub center: Vector3<f64>,
    pub extents: Vector3<f64>,
}

impl Obb {
    /// Coordinates of a world point in the box frame.
    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.center)
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.rotation.column(i).into_owned()
    }
}

/// One box face: outward unit normal plus the 3-D face center.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Face {
    pub normal: Vector3<f64>,
    pub center: Vector3<f64>,
    /// Principal-axis index (0..3) this face belongs to.
    pub axis: usize,
    /// +1 or -1 along that axis.
    pub sign: i8,
}

/// Fit a PCA box: eigenvectors of the sample covariance (denominator M-1)
/// give the axes, the center is the midpoint of per-axis projection extrema,
/// extents are the projection spans.
pub fn fit_obb(cloud: &PointCloud) -> Result<Obb, ObbError> {
    let n = cloud.len();
    if n < 3 {
        return Err(ObbError::TooFewPoints(n));
    }
    let centroid = cloud.centroid().unwrap();
    let mut cov = Matrix3::zeros();
    for p in &cloud.points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= (n - 1) as f64;

    let (vals, vecs) = eigen_symmetric3(&cov);

    // Deterministic sign: largest-magnitude component positive, ties broken
    // toward the lowest component index.
    let mut axes: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| (vals[i], fix_sign(vecs.column(i).into_owned())))
        .collect();

    // Decreasing eigenvalue; near-equal eigenvalues (relative gap < 1e-9)
    // tie-break on the sign-fixed eigenvector lexicographically.
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    axes.sort_by(|a, b| {
        if (a.0 - b.0).abs() < 1e-9 * scale {
            lex_cmp(&a.1, &b.1)
        } else {
            b.0.total_cmp(&a.0)
        }
    });

    let v1 = axes[0].1;
    let mut v2 = axes[1].1;
    // Guard against numerically parallel axes on degenerate covariances.
    v2 = (v2 - v1 * v1.dot(&v2)).normalize();
    let v3 = v1.cross(&v2);
    let rotation = Matrix3::from_columns(&[v1, v2, v3]);

    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in &cloud.points {
        let q = rotation.transpose() * p;
        lo = lo.inf(&q);
        hi = hi.sup(&q);
    }
    let mid = (lo + hi) * 0.5;
    Ok(Obb {
        rotation,
        center: rotation * mid,
        extents: hi - lo,
    })
}

fn fix_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() > v[best].abs() + 1e-15 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        -v
    } else {
        v
    }
}

fn lex_cmp(a: &Vector3<f64>, b: &Vector3<f64>) -> std::cmp::Ordering {
    for i in 0..3 {
        let c = a[i].total_cmp(&b[i]);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

/// The six face descriptors: for axis `i` and sign `s`, normal `s·v_i` and
/// center `c + (e_i/2)·normal`. Order: axis-major, sign -1 before +1.
pub fn extract_faces(obb: &Obb) -> Vec<Face> {
    let mut faces = Vec::with_capacity(6);
    for i in 0..3 {
        for sign in [-1i8, 1i8] {
            let normal = obb.axis(i) * sign as f64;
            faces.push(Face {
                normal,
                center: obb.center + normal * (obb.extents[i] / 2.0),
                axis: i,
                sign,
            });
        }
    }
    faces
}

/// The `k` faces whose centers are nearest `origin`, ascending by distance;
/// ties broken by axis index, then sign -1 before +1.
pub fn select_faces(faces: &[Face], k: usize, origin: &Vector3<f64>) -> Result<Vec<Face>, ObbError> {
    if k == 0 || k > 6 {
        return Err(ObbError::InvalidFaceCount(k));
    }
    let mut sorted: Vec<Face> = faces.to_vec();
    sorted.sort_by(|a, b| {
        let da = (a.center - origin).norm();
        let db = (b.center - origin).norm();
        da.total_cmp(&db)
            .then(a.axis.cmp(&b.axis))
            .then(a.sign.cmp(&b.sign))
    });
    sorted.truncate(k);
    Ok(sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn box_corners(ex: f64, ey: f64, ez: f64) -> PointCloud {
        let mut points = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    points.push(Vector3::new(sx * ex / 2.0, sy * ey / 2.0, sz * ez / 2.0));
                }
            }
        }
        PointCloud::new(points)
    }

    #[test]
    fn axis_aligned_box_corners() {
        let cloud = box_corners(2.0, 1.0, 0.5);
        let obb = fit_obb(&cloud).unwrap();
        assert_abs_diff_eq!(obb.center, Vector3::zeros(), epsilon = 1e-12);
        assert_abs_diff_eq!(obb.extents, Vector3::new(2.0, 1.0, 0.5), epsilon = 1e-9);
        assert_abs_diff_eq!(obb.axis(0), Vector3::x(), epsilon = 1e-9);
    }

    #[test]
    fn rotated_box_recovers_rotation() {
        let angle = 30f64.to_radians();
        let rot = crate::pose::Pose::rot_z(angle).rotation;
        let cloud = box_corners(2.0, 1.0, 0.5);
        let rotated = PointCloud::new(cloud.points.iter().map(|p| rot * p).collect());
        let obb = fit_obb(&rotated).unwrap();
        assert_abs_diff_eq!(obb.extents, Vector3::new(2.0, 1.0, 0.5), epsilon = 1e-6);
        for i in 0..3 {
            let expected = rot.column(i).into_owned();
            let got = obb.axis(i);
            // Recovered axes match up to sign.
            assert!(
                (got - expected).norm() < 1e-6 || (got + expected).norm() < 1e-6,
                "axis {i} mismatch: {got:?} vs {expected:?}"
            );
        }
    }

    #[test]
    fn collinear_points() {
        let points: Vec<Vector3<f64>> = (0..=20).map(|i| Vector3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        let obb = fit_obb(&PointCloud::new(points)).unwrap();
        assert_abs_diff_eq!(obb.extents[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(obb.extents[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(obb.extents[2], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(obb.center, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-9);
        // Rotation stays a proper orthonormal frame.
        assert_abs_diff_eq!(obb.rotation.determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn too_few_points() {
        let cloud = PointCloud::new(vec![Vector3::zeros(), Vector3::x()]);
        assert!(matches!(fit_obb(&cloud), Err(ObbError::TooFewPoints(2))));
    }

    #[test]
    fn unit_cube_face_centers() {
        let obb = Obb {
            rotation: Matrix3::identity(),
            center: Vector3::zeros(),
            extents: Vector3::new(2.0, 2.0, 2.0),
        };
        let faces = extract_faces(&obb);
        assert_eq!(faces.len(), 6);
        let centers: Vec<Vector3<f64>> = faces.iter().map(|f| f.center).collect();
        for expected in [
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(0.0, 0.0, 1.0),
        ] {
            assert!(centers.iter().any(|c| (c - expected).norm() < 1e-12));
        }
    }

    #[test]
    fn face_normals_cancel_in_pairs() {
        let obb = fit_obb(&box_corners(1.0, 0.8, 0.3)).unwrap();
        let sum: Vector3<f64> = extract_faces(&obb).iter().map(|f| f.normal).sum();
        assert_abs_diff_eq!(sum, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn translating_center_translates_faces() {
        let obb = fit_obb(&box_corners(1.0, 0.8, 0.3)).unwrap();
        let t = Vector3::new(0.3, -0.2, 0.7);
        let moved = Obb {
            center: obb.center + t,
            ..obb
        };
        for (a, b) in extract_faces(&obb).iter().zip(extract_faces(&moved).iter()) {
            assert_abs_diff_eq!(b.center, a.center + t, epsilon = 1e-12);
            assert_eq!(a.normal, b.normal);
        }
    }

    #[test]
    fn select_all_faces_sorted_by_distance() {
        let obb = fit_obb(&box_corners(1.0, 0.8, 0.3)).unwrap();
        let faces = extract_faces(&obb);
        let sel = select_faces(&faces, 6, &Vector3::zeros()).unwrap();
        assert_eq!(sel.len(), 6);
        let dists: Vec<f64> = sel.iter().map(|f| f.center.norm()).collect();
        assert!(dists.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn select_two_nearest_on_offset_box() {
        // Identity box centered at (1,2,5), extents (2,4,6): nearest faces
        // from the origin are (1,2,2) at distance 3, then (1,0,5) at sqrt(26).
        let obb = Obb {
            rotation: Matrix3::identity(),
            center: Vector3::new(1.0, 2.0, 5.0),
            extents: Vector3::new(2.0, 4.0, 6.0),
        };
        let sel = select_faces(&extract_faces(&obb), 2, &Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(sel[0].center, Vector3::new(1.0, 2.0, 2.0), epsilon = 1e-12);
        assert_abs_diff_eq!(sel[1].center, Vector3::new(1.0, 0.0, 5.0), epsilon = 1e-12);
    }

    #[test]
    fn nearest_face_of_cube_on_z_axis() {
        let obb = Obb {
            rotation: Matrix3::identity(),
            center: Vector3::new(0.0, 0.0, 5.0),
            extents: Vector3::new(2.0, 2.0, 2.0),
        };
        let sel = select_faces(&extract_faces(&obb), 1, &Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(sel[0].center, Vector3::new(0.0, 0.0, 4.0), epsilon = 1e-12);
    }

    #[test]
    fn containment_and_tightness_random_clouds() {
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(3..200);
            let points: Vec<Vector3<f64>> = (0..n)
                .map(|_| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let cloud = PointCloud::new(points);
            let obb = fit_obb(&cloud).unwrap();
            let mut lo = Vector3::repeat(f64::INFINITY);
            let mut hi = Vector3::repeat(f64::NEG_INFINITY);
            for p in &cloud.points {
                let q = obb.to_local(p);
                for i in 0..3 {
                    assert!(q[i].abs() <= obb.extents[i] / 2.0 + 1e-6);
                }
                lo = lo.inf(&q);
                hi = hi.sup(&q);
            }
            for i in 0..3 {
                assert!((lo[i] + obb.extents[i] / 2.0).abs() < 1e-9);
                assert!((hi[i] - obb.extents[i] / 2.0).abs() < 1e-9);
            }
        }
    }
}
