//! Rigid transforms in SE(3) stored as rotation matrix plus translation.

use nalgebra::{Matrix3, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A rigid transform: `p' = rotation * p + translation`.
///
/// Equivalent to a 4x4 homogeneous matrix; serialized as its 16 row-major
/// entries so candidate files stay plain JSON arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation about the z axis by `angle` radians.
    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(
            Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            Vector3::zeros(),
        )
    }

    /// Rotation about the y axis by `angle` radians.
    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(
            Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            Vector3::zeros(),
        )
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// The 16 entries of the homogeneous matrix, row major.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn from_row_major(m: &[f64; 16]) -> Self {
        Pose {
            rotation: Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]),
            translation: Vector3::new(m[3], m[7], m[11]),
        }
    }

    /// Max deviation of `R^T R` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.rotation.transpose() * self.rotation - Matrix3::identity();
        d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v: Vec<f64> = Vec::deserialize(deserializer)?;
        let arr: [f64; 16] = v
            .try_into()
            .map_err(|_| D::Error::custom("pose must have 16 row-major entries"))?;
        Ok(Pose::from_row_major(&arr))
    }
}
