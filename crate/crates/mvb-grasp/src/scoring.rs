//! Score normalization, face-alignment filtering, re-scoring, and ranking.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obb::Face;
use crate::pose::Pose;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("face list is empty")]
    EmptyFaces,
    #[error("hard filter rejected every candidate")]
    FilterExhausted,
}

/// A 6-DoF grasp candidate and its score fields as they accrue through the
/// pipeline. `combined` is only set for candidates that pass the hard filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub pose: Pose,
    pub raw_score: f64,
    pub norm_score: Option<f64>,
    pub alignment: Option<f64>,
    pub combined: Option<f64>,
    pub passed_filter: bool,
    /// Position in the original sampled list; ranking tie-break key.
    pub source_index: usize,
}

impl GraspCandidate {
    pub fn new(pose: Pose, raw_score: f64, source_index: usize) -> Self {
        Self {
            pose,
            raw_score,
            norm_score: None,
            alignment: None,
            combined: None,
            passed_filter: false,
            source_index,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    /// Blend weight for alignment vs normalized score.
    pub alpha: f64,
    /// How many nearest faces to align against.
    pub k_faces: usize,
    /// Normalization denominator guard.
    pub epsilon: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            k_faces: 2,
            epsilon: 1e-6,
        }
    }
}

/// Min-max normalize raw scores: `(s - s_min) / (s_max - s_min + epsilon)`.
pub fn normalize_scores(
    candidates: &[GraspCandidate],
    epsilon: f64,
) -> Result<Vec<GraspCandidate>, ScoringError> {
    if candidates.is_empty() {
        return Err(ScoringError::EmptyCandidates);
    }
    let s_min = candidates.iter().map(|c| c.raw_score).fold(f64::INFINITY, f64::min);
    let s_max = candidates.iter().map(|c| c.raw_score).fold(f64::NEG_INFINITY, f64::max);
    let denom = s_max - s_min + epsilon;
    Ok(candidates
        .iter()
        .map(|c| GraspCandidate {
            norm_score: Some((c.raw_score - s_min) / denom),
            ..c.clone()
        })
        .collect())
}

/// The gripper approach direction: third column of the pose rotation.
pub fn approach_axis(pose: &Pose) -> Vector3<f64> {
    pose.rotation.column(2).into_owned()
}

/// Best alignment of `axis` against the inward normals of the faces:
/// `max_i <axis, -n_i>`.
pub fn alignment_score(axis: &Vector3<f64>, faces: &[Face]) -> Result<f64, ScoringError> {
    if faces.is_empty() {
        return Err(ScoringError::EmptyFaces);
    }
    Ok(faces
        .iter()
        .map(|f| -axis.dot(&f.normal))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Output of the hard filter: survivors ranked by descending combined score
/// and the rejected remainder (alignment recorded, no combined score).
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub survivors: Vec<GraspCandidate>,
    pub rejected: Vec<GraspCandidate>,
}

/// Reject candidates with alignment <= 0; blend survivor scores as
/// `alpha·a + (1-alpha)·s̄` and sort descending, ties by source index.
///
/// Expects `norm_score` to be populated. Returns `FilterExhausted` when no
/// candidate passes, so callers can fall back to plain score ranking.
pub fn filter_and_rescore(
    candidates: &[GraspCandidate],
    faces: &[Face],
    cfg: &ScoringConfig,
) -> Result<FilterOutput, ScoringError> {
    if candidates.is_empty() {
        return Err(ScoringError::EmptyCandidates);
    }
    if faces.is_empty() {
        return Err(ScoringError::EmptyFaces);
    }
    let mut survivors = Vec::new();
    let mut rejected = Vec::new();
    for c in candidates {
        let a = alignment_score(&approach_axis(&c.pose), faces)?;
        let mut c = c.clone();
        c.alignment = Some(a);
        if a > 0.0 {
            let s_bar = c.norm_score.expect("scores must be normalized before filtering");
            c.combined = Some(cfg.alpha * a + (1.0 - cfg.alpha) * s_bar);
            c.passed_filter = true;
            survivors.push(c);
        } else {
            c.passed_filter = false;
            rejected.push(c);
        }
    }
    if survivors.is_empty() {
        return Err(ScoringError::FilterExhausted);
    }
    survivors.sort_by(|a, b| {
        b.combined
            .unwrap()
            .total_cmp(&a.combined.unwrap())
            .then(a.source_index.cmp(&b.source_index))
    });
    Ok(FilterOutput { survivors, rejected })
}

/// Baseline ranking: all candidates sorted by descending normalized score,
/// ties by source index.
pub fn vanilla_rank(candidates: &[GraspCandidate]) -> Result<Vec<GraspCandidate>, ScoringError> {
    if candidates.is_empty() {
        return Err(ScoringError::EmptyCandidates);
    }
    let mut ranked = candidates.to_vec();
    ranked.sort_by(|a, b| {
        let sa = a.norm_score.expect("scores must be normalized before ranking");
        let sb = b.norm_score.expect("scores must be normalized before ranking");
        sb.total_cmp(&sa).then(a.source_index.cmp(&b.source_index))
    });
    Ok(ranked)
}

/// Left-multiply every candidate pose by `extrinsic` (e.g. camera-to-base).
pub fn transform_poses(candidates: &[GraspCandidate], extrinsic: &Pose) -> Vec<GraspCandidate> {
    candidates
        .iter()
        .map(|c| GraspCandidate {
            pose: extrinsic.compose(&c.pose),
            ..c.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn cand(raw: f64, idx: usize) -> GraspCandidate {
        GraspCandidate::new(Pose::identity(), raw, idx)
    }

    fn face(normal: Vector3<f64>) -> Face {
        Face {
            normal,
            center: Vector3::zeros(),
            axis: 0,
            sign: 1,
        }
    }

    fn cand_with_axis(axis: Vector3<f64>, raw: f64, idx: usize) -> GraspCandidate {
        // Build any proper rotation whose z column equals `axis`.
        let z = axis.normalize();
        let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let x = helper.cross(&z).normalize();
        let y = z.cross(&x);
        GraspCandidate::new(
            Pose::new(Matrix3::from_columns(&[x, y, z]), Vector3::zeros()),
            raw,
            idx,
        )
    }

    #[test]
    fn normalize_three_scores() {
        let out = normalize_scores(&[cand(1.0, 0), cand(2.0, 1), cand(3.0, 2)], 1e-6).unwrap();
        let norms: Vec<f64> = out.iter().map(|c| c.norm_score.unwrap()).collect();
        assert_abs_diff_eq!(norms[0], 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(norms[1], 0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(norms[2], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn normalize_equal_scores_all_zero() {
        let out = normalize_scores(&[cand(0.7, 0), cand(0.7, 1)], 1e-6).unwrap();
        assert!(out.iter().all(|c| c.norm_score.unwrap() == 0.0));
    }

    #[test]
    fn normalize_two_scores() {
        let out = normalize_scores(&[cand(0.2, 0), cand(0.8, 1)], 1e-6).unwrap();
        assert_abs_diff_eq!(out[0].norm_score.unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out[1].norm_score.unwrap(), 0.999998, epsilon = 1e-6);
    }

    #[test]
    fn normalize_empty_is_error() {
        assert!(matches!(normalize_scores(&[], 1e-6), Err(ScoringError::EmptyCandidates)));
    }

    #[test]
    fn approach_axis_conventions() {
        assert_eq!(approach_axis(&Pose::identity()), Vector3::z());
        // 90 deg about x maps z to -y.
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_abs_diff_eq!(
            approach_axis(&Pose::new(rx, Vector3::zeros())),
            Vector3::new(0.0, -1.0, 0.0),
            epsilon = 1e-12
        );
        // 180 deg about y maps z to -z.
        let ry = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert_abs_diff_eq!(
            approach_axis(&Pose::new(ry, Vector3::zeros())),
            Vector3::new(0.0, 0.0, -1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn alignment_perfect_and_antipodal() {
        let f = face(Vector3::new(0.0, 0.0, -1.0));
        assert_abs_diff_eq!(alignment_score(&Vector3::z(), &[f]).unwrap(), 1.0, epsilon = 1e-12);
        let f2 = face(Vector3::z());
        assert_abs_diff_eq!(alignment_score(&Vector3::z(), &[f2]).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn alignment_takes_max_over_faces() {
        let faces = [face(Vector3::new(0.0, 0.0, -1.0)), face(Vector3::x())];
        assert_abs_diff_eq!(alignment_score(&Vector3::z(), &faces).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn alignment_empty_faces_is_error() {
        assert!(matches!(
            alignment_score(&Vector3::z(), &[]),
            Err(ScoringError::EmptyFaces)
        ));
    }

    #[test]
    fn strict_positive_alignment_required() {
        // Face normal -z: axis +z aligns at 1, axis -z at -1, axis x at 0.
        let faces = [face(Vector3::new(0.0, 0.0, -1.0))];
        let cands = normalize_scores(
            &[
                cand_with_axis(Vector3::z(), 0.9, 0),
                cand_with_axis(-Vector3::z(), 0.8, 1),
                cand_with_axis(Vector3::x(), 0.7, 2),
            ],
            1e-6,
        )
        .unwrap();
        let out = filter_and_rescore(&cands, &faces, &ScoringConfig::default()).unwrap();
        assert_eq!(out.survivors.len(), 1);
        assert_eq!(out.survivors[0].source_index, 0);
        assert_eq!(out.rejected.len(), 2);
        // a = 0 is rejected.
        assert!(out.rejected.iter().any(|c| c.source_index == 2));
    }

    #[test]
    fn combined_score_arithmetic() {
        let faces = [face(Vector3::new(0.0, 0.0, -1.0))];
        // Axis tilted 60 deg from z gives alignment 0.5.
        let axis = Vector3::new((3f64).sqrt() / 2.0, 0.0, 0.5);
        let mut c = cand_with_axis(axis, 1.0, 0);
        c.norm_score = Some(0.8);
        let out = filter_and_rescore(&[c], &faces, &ScoringConfig::default()).unwrap();
        assert_abs_diff_eq!(out.survivors[0].combined.unwrap(), 0.545, epsilon = 1e-9);
    }

    #[test]
    fn alpha_zero_matches_vanilla_among_survivors() {
        let faces = [face(Vector3::new(0.0, 0.0, -1.0))];
        let cands = normalize_scores(
            &[
                cand_with_axis(Vector3::new(0.1, 0.0, 1.0), 0.3, 0),
                cand_with_axis(Vector3::new(-0.2, 0.1, 1.0), 0.9, 1),
                cand_with_axis(Vector3::new(0.0, 0.3, 1.0), 0.6, 2),
            ],
            1e-6,
        )
        .unwrap();
        let cfg = ScoringConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let out = filter_and_rescore(&cands, &faces, &cfg).unwrap();
        let order: Vec<usize> = out.survivors.iter().map(|c| c.source_index).collect();
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn filter_exhausted_is_distinct() {
        let faces = [face(Vector3::z())];
        let cands = normalize_scores(&[cand_with_axis(Vector3::z(), 0.5, 0)], 1e-6).unwrap();
        assert!(matches!(
            filter_and_rescore(&cands, &faces, &ScoringConfig::default()),
            Err(ScoringError::FilterExhausted)
        ));
    }

    #[test]
    fn vanilla_rank_orders_by_score_then_index() {
        let cands = normalize_scores(&[cand(3.0, 0), cand(1.0, 1), cand(2.0, 2)], 1e-6).unwrap();
        let ranked = vanilla_rank(&cands).unwrap();
        let order: Vec<usize> = ranked.iter().map(|c| c.source_index).collect();
        assert_eq!(order, vec![0, 2, 1]);
    }

    #[test]
    fn vanilla_rank_stable_on_ties() {
        let cands = normalize_scores(&[cand(0.5, 0), cand(0.5, 1), cand(0.5, 2)], 1e-6).unwrap();
        let ranked = vanilla_rank(&cands).unwrap();
        let order: Vec<usize> = ranked.iter().map(|c| c.source_index).collect();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn vanilla_rank_single_candidate() {
        let cands = normalize_scores(&[cand(0.4, 0)], 1e-6).unwrap();
        assert_eq!(vanilla_rank(&cands).unwrap().len(), 1);
    }

    #[test]
    fn transform_poses_identity_and_translation() {
        let cands = vec![cand_with_axis(Vector3::z(), 0.5, 0)];
        let same = transform_poses(&cands, &Pose::identity());
        assert_eq!(same[0].pose, cands[0].pose);

        let t = Pose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let moved = transform_poses(&cands, &t);
        assert_eq!(moved[0].pose.rotation, cands[0].pose.rotation);
        assert_eq!(moved[0].pose.translation, cands[0].pose.translation + t.translation);
    }

    #[test]
    fn transform_roundtrip() {
        let cands = vec![cand_with_axis(Vector3::new(0.3, -0.4, 0.8), 0.5, 0)];
        let t = Pose::rot_z(0.9).compose(&Pose::from_translation(Vector3::new(0.1, 0.2, -0.3)));
        let back = transform_poses(&transform_poses(&cands, &t), &t.inverse());
        assert_abs_diff_eq!(back[0].pose.rotation, cands[0].pose.rotation, epsilon = 1e-9);
        assert_abs_diff_eq!(back[0].pose.translation, cands[0].pose.translation, epsilon = 1e-9);
    }
}
