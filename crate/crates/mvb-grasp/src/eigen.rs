//! Symmetric 3x3 eigendecomposition via cyclic Jacobi rotations.

use nalgebra::{Matrix3, Vector3};

/// Eigen-pairs of a symmetric 3x3 matrix, unsorted.
///
/// Columns of `vectors` are unit eigenvectors; `values[i]` is the eigenvalue
/// of column `i`. Convergence: all off-diagonals below `1e-12 * trace`,
/// capped at 50 sweeps.
pub fn eigen_symmetric3(m: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let mut a = *m;
    // Symmetrize once so tiny asymmetries from accumulation cannot drift.
    a[(1, 0)] = a[(0, 1)];
    a[(2, 0)] = a[(0, 2)];
    a[(2, 1)] = a[(1, 2)];

    let mut v = Matrix3::identity();
    let scale = a.trace().abs().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    for _sweep in 0..50 {
        let off = a[(0, 1)].abs().max(a[(0, 2)].abs()).max(a[(1, 2)].abs());
        if off < tol {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq.abs() < f64::MIN_POSITIVE {
                continue;
            }
            let app = a[(p, p)];
            let aqq = a[(q, q)];
            let theta = (aqq - app) / (2.0 * apq);
            // Stable tangent of the smaller rotation angle.
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;

            // A <- J^T A J restricted to rows/cols p, q.
            for i in 0..3 {
                let aip = a[(i, p)];
                let aiq = a[(i, q)];
                a[(i, p)] = c * aip - s * aiq;
                a[(i, q)] = s * aip + c * aiq;
            }
            for i in 0..3 {
                let api = a[(p, i)];
                let aqi = a[(q, i)];
                a[(p, i)] = c * api - s * aqi;
                a[(q, i)] = s * api + c * aqi;
            }
            for i in 0..3 {
                let vip = v[(i, p)];
                let viq = v[(i, q)];
                v[(i, p)] = c * vip - s * viq;
                v[(i, q)] = s * vip + c * viq;
            }
        }
    }

    (Vector3::new(a[(0, 0)], a[(1, 1)], a[(2, 2)]), v)
}
