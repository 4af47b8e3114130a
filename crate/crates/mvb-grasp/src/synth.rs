//! Deterministic synthetic stand-in for the learned generator and physics:
//! parametric object clouds, a seeded SE(3) candidate sampler, an analytic
//! feasibility oracle, and the 81-cell scenario grid.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::perception::PointCloud;
use crate::pose::Pose;
use crate::scoring::GraspCandidate;

/// Camera position used for visibility biasing and face selection when no
/// override is configured: at the robot base, 0.30 m above the table.
pub const DEFAULT_CAMERA: Vector3<f64> = Vector3::new(0.0, 0.0, 0.30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Cylinder,
    BoxAsym,
    Bottle,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 3] = [ObjectKind::Cylinder, ObjectKind::BoxAsym, ObjectKind::Bottle];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectKind::Cylinder => "cylinder",
            ObjectKind::BoxAsym => "box_asym",
            ObjectKind::Bottle => "bottle",
        }
    }

    pub fn parse(s: &str) -> Option<ObjectKind> {
        match s {
            "cylinder" => Some(ObjectKind::Cylinder),
            "box_asym" => Some(ObjectKind::BoxAsym),
            "bottle" => Some(ObjectKind::Bottle),
            _ => None,
        }
    }
}

/// Per-kind shape dimensions in meters, local frame: base on z = 0, the
/// shape extends upward.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeDims {
    Cylinder {
        radius: f64,
        height: f64,
    },
    Box {
        size_x: f64,
        size_y: f64,
        size_z: f64,
    },
    Bottle {
        body_radius: f64,
        body_height: f64,
        neck_radius: f64,
        neck_height: f64,
    },
}

impl ShapeDims {
    pub fn default_for(kind: ObjectKind) -> ShapeDims {
        match kind {
            ObjectKind::Cylinder => ShapeDims::Cylinder {
                radius: 0.03,
                height: 0.12,
            },
            ObjectKind::BoxAsym => ShapeDims::Box {
                size_x: 0.04,
                size_y: 0.06,
                size_z: 0.10,
            },
            ObjectKind::Bottle => ShapeDims::Bottle {
                body_radius: 0.032,
                body_height: 0.16,
                neck_radius: 0.012,
                neck_height: 0.05,
            },
        }
    }

    /// Total height of the shape in its local frame.
    pub fn height(&self) -> f64 {
        match *self {
            ShapeDims::Cylinder { height, .. } => height,
            ShapeDims::Box { size_z, .. } => size_z,
            ShapeDims::Bottle {
                body_height,
                neck_height,
                ..
            } => body_height + neck_height,
        }
    }

    /// Support function `max_p <p, d>` over the shape in the local frame.
    pub fn support(&self, d: &Vector3<f64>) -> f64 {
        let dxy = (d.x * d.x + d.y * d.y).sqrt();
        match *self {
            ShapeDims::Cylinder { radius, height } => radius * dxy + height * d.z.max(0.0),
            ShapeDims::Box {
                size_x,
                size_y,
                size_z,
            } => size_x / 2.0 * d.x.abs() + size_y / 2.0 * d.y.abs() + size_z * d.z.max(0.0),
            ShapeDims::Bottle {
                body_radius,
                body_height,
                neck_radius,
                neck_height,
            } => {
                let body = body_radius * dxy + body_height * d.z.max(0.0);
                let neck = neck_radius * dxy + (body_height + neck_height) * d.z.max(0.0);
                body.max(neck)
            }
        }
    }

    /// Full extent of the shape along a local direction.
    pub fn width_along(&self, d: &Vector3<f64>) -> f64 {
        self.support(d) + self.support(&-d)
    }
}

/// A parametric object posed in the world frame.
#[derive(Debug, Clone)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    pub dims: ShapeDims,
    pub pose: Pose,
}

impl ObjectSpec {
    pub fn new(kind: ObjectKind, pose: Pose) -> Self {
        Self {
            kind,
            dims: ShapeDims::default_for(kind),
            pose,
        }
    }

    /// Outward unit surface normal (world frame) at the surface feature
    /// nearest to a world-frame query point.
    pub fn surface_normal_near(&self, world_point: &Vector3<f64>) -> Vector3<f64> {
        let q = self.pose.inverse().apply(world_point);
        let n_local = local_surface_normal(&self.dims, &q);
        self.pose.rotation * n_local
    }

    /// Signed distance from a local point to the analytic surface; used by
    /// tests to assert zero-noise samples lie exactly on the surface.
    pub fn local_surface_distance(&self, q: &Vector3<f64>) -> f64 {
        local_surface_distance(&self.dims, q)
    }
}

fn local_surface_normal(dims: &ShapeDims, q: &Vector3<f64>) -> Vector3<f64> {
    let radial = |q: &Vector3<f64>| -> Vector3<f64> {
        let r = (q.x * q.x + q.y * q.y).sqrt();
        if r < 1e-12 {
            Vector3::x()
        } else {
            Vector3::new(q.x / r, q.y / r, 0.0)
        }
    };
    match *dims {
        ShapeDims::Cylinder { radius, height } => {
            let r_q = (q.x * q.x + q.y * q.y).sqrt();
            let d_lat = (r_q - radius).abs();
            let d_top = (q.z - height).abs();
            let d_bot = q.z.abs();
            if d_lat <= d_top && d_lat <= d_bot {
                radial(q)
            } else if d_top <= d_bot {
                Vector3::z()
            } else {
                -Vector3::z()
            }
        }
        ShapeDims::Box {
            size_x,
            size_y,
            size_z,
        } => {
            // Distance from q to each face plane, measured inside-out from
            // the box center at (0, 0, size_z/2).
            let c = Vector3::new(0.0, 0.0, size_z / 2.0);
            let half = Vector3::new(size_x / 2.0, size_y / 2.0, size_z / 2.0);
            let rel = q - c;
            let mut best = f64::INFINITY;
            let mut normal = Vector3::x();
            for i in 0..3 {
                for s in [-1.0, 1.0] {
                    let d = (rel[i] - s * half[i]).abs();
                    if d < best {
                        best = d;
                        let mut n = Vector3::zeros();
                        n[i] = s;
                        normal = n;
                    }
                }
            }
            normal
        }
        ShapeDims::Bottle {
            body_radius,
            body_height,
            neck_radius,
            neck_height,
        } => {
            let r_q = (q.x * q.x + q.y * q.y).sqrt();
            if q.z <= body_height {
                let d_lat = (r_q - body_radius).abs();
                let d_bot = q.z.abs();
                if d_lat <= d_bot {
                    radial(q)
                } else {
                    -Vector3::z()
                }
            } else {
                let top = body_height + neck_height;
                let d_top = (q.z - top).abs();
                // Frustum lateral: radius shrinks linearly along the neck.
                let t = ((q.z - body_height) / neck_height).clamp(0.0, 1.0);
                let r_at = body_radius + (neck_radius - body_radius) * t;
                let d_lat = (r_q - r_at).abs();
                if d_top < d_lat && r_q <= neck_radius {
                    Vector3::z()
                } else {
                    let slope = (body_radius - neck_radius) / neck_height;
                    let rad = radial(q);
                    (rad + Vector3::z() * slope).normalize()
                }
            }
        }
    }
}

fn local_surface_distance(dims: &ShapeDims, q: &Vector3<f64>) -> f64 {
    let r_q = (q.x * q.x + q.y * q.y).sqrt();
    match *dims {
        ShapeDims::Cylinder { radius, height } => {
            let d_lat = if (0.0..=height).contains(&q.z) {
                (r_q - radius).abs()
            } else {
                let dz = if q.z < 0.0 { -q.z } else { q.z - height };
                ((r_q - radius).max(0.0).powi(2) + dz * dz).sqrt()
            };
            let d_top = if r_q <= radius {
                (q.z - height).abs()
            } else {
                f64::INFINITY
            };
            let d_bot = if r_q <= radius { q.z.abs() } else { f64::INFINITY };
            d_lat.min(d_top).min(d_bot)
        }
        ShapeDims::Box {
            size_x,
            size_y,
            size_z,
        } => {
            let c = Vector3::new(0.0, 0.0, size_z / 2.0);
            let half = Vector3::new(size_x / 2.0, size_y / 2.0, size_z / 2.0);
            let rel = q - c;
            let mut best = f64::INFINITY;
            for i in 0..3 {
                for s in [-1.0f64, 1.0] {
                    // Distance to the face rectangle: clamp onto the face.
                    let mut diff = 0.0;
                    for j in 0..3 {
                        if j == i {
                            diff += (rel[j] - s * half[j]).powi(2);
                        } else {
                            let over = rel[j].abs() - half[j];
                            if over > 0.0 {
                                diff += over * over;
                            }
                        }
                    }
                    best = best.min(diff.sqrt());
                }
            }
            best
        }
        ShapeDims::Bottle {
            body_radius,
            body_height,
            neck_radius,
            neck_height,
        } => {
            let body = local_surface_distance(
                &ShapeDims::Cylinder {
                    radius: body_radius,
                    height: body_height,
                },
                q,
            );
            // Frustum lateral, approximated radially at clamped height.
            let t = ((q.z - body_height) / neck_height).clamp(0.0, 1.0);
            let r_at = body_radius + (neck_radius - body_radius) * t;
            let frustum = if (body_height..=body_height + neck_height).contains(&q.z) {
                (r_q - r_at).abs()
            } else {
                f64::INFINITY
            };
            let top = if r_q <= neck_radius {
                (q.z - body_height - neck_height).abs()
            } else {
                f64::INFINITY
            };
            body.min(frustum).min(top)
        }
    }
}

/// Distance bins of the scenario grid, front distance from the robot base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceBin {
    Near,
    Mid,
    Far,
}

impl DistanceBin {
    pub const ALL: [DistanceBin; 3] = [DistanceBin::Near, DistanceBin::Mid, DistanceBin::Far];

    pub fn meters(&self) -> f64 {
        match self {
            DistanceBin::Near => 0.35,
            DistanceBin::Mid => 0.50,
            DistanceBin::Far => 0.65,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceBin::Near => "Near",
            DistanceBin::Mid => "Mid",
            DistanceBin::Far => "Far",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LateralBin {
    Left,
    Center,
    Right,
}

impl LateralBin {
    pub const ALL: [LateralBin; 3] = [LateralBin::Left, LateralBin::Center, LateralBin::Right];

    pub fn meters(&self) -> f64 {
        match self {
            LateralBin::Left => -0.15,
            LateralBin::Center => 0.0,
            LateralBin::Right => 0.15,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LateralBin::Left => "Left",
            LateralBin::Center => "Center",
            LateralBin::Right => "Right",
        }
    }
}

pub const PITCHES_DEG: [i32; 3] = [-45, 0, 45];

/// One cell of the 3x3x3x3 evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub object: ObjectKind,
    pub distance_bin: DistanceBin,
    pub lateral_bin: LateralBin,
    pub pitch_deg: i32,
    pub seed: u64,
}

impl Scenario {
    /// The posed object for this cell: pitched about the lateral (y) axis,
    /// lifted so its bounding support rests on the z = 0 table plane.
    pub fn object_spec(&self) -> ObjectSpec {
        let dims = ShapeDims::default_for(self.object);
        let rot = Pose::rot_y((self.pitch_deg as f64).to_radians());
        // min z of the rotated shape is -support(R^T * -z).
        let down_local = rot.rotation.transpose() * -Vector3::z();
        let lift = dims.support(&down_local);
        let translation = Vector3::new(
            self.distance_bin.meters(),
            self.lateral_bin.meters(),
            lift,
        );
        ObjectSpec {
            kind: self.object,
            dims,
            pose: Pose::new(rot.rotation, translation),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The full 81-cell grid in object-major order with per-cell seeds derived
/// from the master seed and the cell coordinates.
pub fn scenario_grid(master_seed: u64) -> Vec<Scenario> {
    let mut grid = Vec::with_capacity(81);
    for (oi, &object) in ObjectKind::ALL.iter().enumerate() {
        for (di, &distance_bin) in DistanceBin::ALL.iter().enumerate() {
            for (li, &lateral_bin) in LateralBin::ALL.iter().enumerate() {
                for (pi, &pitch_deg) in PITCHES_DEG.iter().enumerate() {
                    let mut h = splitmix64(master_seed);
                    for part in [oi as u64, di as u64, li as u64, pi as u64] {
                        h = splitmix64(h ^ part);
                    }
                    grid.push(Scenario {
                        object,
                        distance_bin,
                        lateral_bin,
                        pitch_deg,
                        seed: h,
                    });
                }
            }
        }
    }
    grid
}

/// Knobs of the synthetic cloud and candidate generators.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub points_per_object: usize,
    pub noise_sigma: f64,
    /// Fraction of approach axes drawn surface-inward; the rest are uniform
    /// on the sphere.
    pub inward_mixture_weight: f64,
    /// Standoff of the grasp point behind the surface sample, meters.
    pub grasp_standoff: f64,
    /// Camera position for visibility biasing and face selection.
    pub camera: [f64; 3],
    /// Probability of keeping a camera-averted surface sample.
    pub back_face_keep: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            points_per_object: 1200,
            noise_sigma: 0.001,
            inward_mixture_weight: 0.5,
            grasp_standoff: 0.01,
            camera: [DEFAULT_CAMERA.x, DEFAULT_CAMERA.y, DEFAULT_CAMERA.z],
            back_face_keep: 0.15,
        }
    }
}

impl SynthParams {
    pub fn camera_pos(&self) -> Vector3<f64> {
        Vector3::new(self.camera[0], self.camera[1], self.camera[2])
    }
}

/// Deterministic surface samples of the posed shape, biased toward the
/// camera-facing side, with isotropic Gaussian noise of `noise_sigma`.
pub fn make_object_cloud(
    spec: &ObjectSpec,
    points_per_object: usize,
    noise_sigma: f64,
    rng_seed: u64,
) -> PointCloud {
    let params = SynthParams {
        points_per_object,
        noise_sigma,
        ..Default::default()
    };
    make_object_cloud_with(spec, &params, rng_seed)
}

pub fn make_object_cloud_with(spec: &ObjectSpec, params: &SynthParams, rng_seed: u64) -> PointCloud {
    assert!(params.points_per_object > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, params.noise_sigma.max(0.0)).unwrap();
    let camera = params.camera_pos();
    let mut points = Vec::with_capacity(params.points_per_object);
    let mut attempts = 0usize;
    let max_attempts = params.points_per_object * 200;
    while points.len() < params.points_per_object {
        attempts += 1;
        let (p_local, n_local) = sample_surface(&spec.dims, &mut rng);
        let p_world = spec.pose.apply(&p_local);
        let n_world = spec.pose.rotation * n_local;
        let visible = n_world.dot(&(camera - p_world)) > 0.0;
        let keep = visible
            || rng.gen::<f64>() < params.back_face_keep
            || attempts > max_attempts;
        if !keep {
            continue;
        }
        let noisy = if params.noise_sigma > 0.0 {
            p_world + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
        } else {
            p_world
        };
        points.push(noisy);
    }
    PointCloud::new(points)
}

/// Uniform-ish surface sample of the shape with its outward normal, both in
/// the local frame.
fn sample_surface(dims: &ShapeDims, rng: &mut ChaCha8Rng) -> (Vector3<f64>, Vector3<f64>) {
    match *dims {
        ShapeDims::Cylinder { radius, height } => {
            let a_lat = 2.0 * std::f64::consts::PI * radius * height;
            let a_cap = std::f64::consts::PI * radius * radius;
            let pick = rng.gen_range(0.0..a_lat + 2.0 * a_cap);
            if pick < a_lat {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let z = rng.gen_range(0.0..height);
                let n = Vector3::new(theta.cos(), theta.sin(), 0.0);
                (Vector3::new(radius * n.x, radius * n.y, z), n)
            } else {
                let top = pick < a_lat + a_cap;
                let r = radius * rng.gen::<f64>().sqrt();
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let z = if top { height } else { 0.0 };
                let n = if top { Vector3::z() } else { -Vector3::z() };
                (Vector3::new(r * theta.cos(), r * theta.sin(), z), n)
            }
        }
        ShapeDims::Box {
            size_x,
            size_y,
            size_z,
        } => {
            let areas = [
                size_y * size_z, // x faces
                size_y * size_z,
                size_x * size_z, // y faces
                size_x * size_z,
                size_x * size_y, // z faces
                size_x * size_y,
            ];
            let total: f64 = areas.iter().sum();
            let mut pick = rng.gen_range(0.0..total);
            let mut face = 0;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let (axis, s) = (face / 2, if face % 2 == 0 { -1.0 } else { 1.0 });
            let half = [size_x / 2.0, size_y / 2.0, size_z / 2.0];
            let mut p = Vector3::new(
                rng.gen_range(-half[0]..half[0]),
                rng.gen_range(-half[1]..half[1]),
                rng.gen_range(-half[2]..half[2]),
            );
            p[axis] = s * half[axis];
            let mut n = Vector3::zeros();
            n[axis] = s;
            // Shift so the base rests at z = 0.
            p.z += size_z / 2.0;
            (p, n)
        }
        ShapeDims::Bottle {
            body_radius,
            body_height,
            neck_radius,
            neck_height,
        } => {
            let a_body = 2.0 * std::f64::consts::PI * body_radius * body_height;
            let slant = ((body_radius - neck_radius).powi(2) + neck_height.powi(2)).sqrt();
            let a_neck = std::f64::consts::PI * (body_radius + neck_radius) * slant;
            let a_top = std::f64::consts::PI * neck_radius * neck_radius;
            let a_bot = std::f64::consts::PI * body_radius * body_radius;
            let pick = rng.gen_range(0.0..a_body + a_neck + a_top + a_bot);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let (c, s) = (theta.cos(), theta.sin());
            if pick < a_body {
                let z = rng.gen_range(0.0..body_height);
                (
                    Vector3::new(body_radius * c, body_radius * s, z),
                    Vector3::new(c, s, 0.0),
                )
            } else if pick < a_body + a_neck {
                let t = rng.gen::<f64>();
                let r = body_radius + (neck_radius - body_radius) * t;
                let z = body_height + neck_height * t;
                let slope = (body_radius - neck_radius) / neck_height;
                let n = (Vector3::new(c, s, slope)).normalize();
                (Vector3::new(r * c, r * s, z), n)
            } else if pick < a_body + a_neck + a_top {
                let r = neck_radius * rng.gen::<f64>().sqrt();
                (
                    Vector3::new(r * c, r * s, body_height + neck_height),
                    Vector3::z(),
                )
            } else {
                let r = body_radius * rng.gen::<f64>().sqrt();
                (Vector3::new(r * c, r * s, 0.0), -Vector3::z())
            }
        }
    }
}

/// Seeded SE(3) candidate sampler standing in for the learned generator.
///
/// Translations sit just behind surface samples along the approach axis;
/// axes mix surface-inward and uniform-sphere directions; raw scores are
/// correlated with proximity to the cloud centroid plus seeded noise. The
/// score model deliberately carries no notion of frontal reachability.
pub fn sample_candidates(cloud: &PointCloud, n: usize, rng_seed: u64) -> Vec<GraspCandidate> {
    sample_candidates_with(cloud, n, rng_seed, &SynthParams::default())
}

pub fn sample_candidates_with(
    cloud: &PointCloud,
    n: usize,
    rng_seed: u64,
    params: &SynthParams,
) -> Vec<GraspCandidate> {
    assert!(n > 0, "candidate count must be positive");
    assert!(!cloud.is_empty(), "cloud must be non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0xC0FF_EE00_D15E_A5E5);
    let centroid = cloud.centroid().unwrap();
    let r_max = cloud
        .points
        .iter()
        .map(|p| (p - centroid).norm())
        .fold(0.0f64, f64::max)
        .max(1e-6);
    let score_noise = Normal::new(0.0, 0.15).unwrap();

    (0..n)
        .map(|j| {
            let p = cloud.points[rng.gen_range(0..cloud.len())];
            let axis = if rng.gen::<f64>() < params.inward_mixture_weight {
                let inward = centroid - p;
                let base = if inward.norm() > 1e-9 {
                    inward.normalize()
                } else {
                    uniform_sphere(&mut rng)
                };
                // Jitter the inward direction a little.
                (base + uniform_sphere(&mut rng) * 0.25).normalize()
            } else {
                uniform_sphere(&mut rng)
            };
            let translation = p - axis * params.grasp_standoff;
            let roll = rng.gen_range(0.0..std::f64::consts::TAU);
            let rotation = frame_with_z(&axis, roll);
            let d = (translation - centroid).norm();
            let raw = (1.0 - d / (2.0 * r_max) + score_noise.sample(&mut rng)).clamp(0.0, 1.0);
            GraspCandidate::new(Pose::new(rotation, translation), raw, j)
        })
        .collect()
}

pub fn uniform_sphere(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    // Marsaglia rejection sampling.
    loop {
        let v: Vector3<f64> = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n2 = v.norm_squared();
        if n2 > 1e-12 && n2 <= 1.0 {
            return v / n2.sqrt();
        }
    }
}

/// Proper rotation whose z column is `z_axis`, rolled by `roll` about it.
pub fn frame_with_z(z_axis: &Vector3<f64>, roll: f64) -> Matrix3<f64> {
    let z = z_axis.normalize();
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x0 = helper.cross(&z).normalize();
    let y0 = z.cross(&x0);
    let x = x0 * roll.cos() + y0 * roll.sin();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// Analytic proxy for physics lift success.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FeasibilitySpec {
    pub frontal_cone_half_angle_deg: f64,
    pub table_clearance: f64,
    pub max_reach: f64,
    pub grasp_width_max: f64,
}

impl Default for FeasibilitySpec {
    fn default() -> Self {
        Self {
            frontal_cone_half_angle_deg: 60.0,
            table_clearance: 0.02,
            max_reach: 0.70,
            grasp_width_max: 0.085,
        }
    }
}

/// Oracle predicate names; reported per failed episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Cone,
    Clearance,
    Reach,
    Width,
    SurfaceNormal,
    Collision,
    Internal,
}

impl FailureReason {
    pub fn name(&self) -> &'static str {
        match self {
            FailureReason::Cone => "cone",
            FailureReason::Clearance => "clearance",
            FailureReason::Reach => "reach",
            FailureReason::Width => "width",
            FailureReason::SurfaceNormal => "surface_normal",
            FailureReason::Collision => "collision",
            FailureReason::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub success: bool,
    pub failures: Vec<FailureReason>,
}

/// Success iff all five predicates hold: frontal cone, table clearance,
/// reach, graspable width along the finger axis, and an approach pointing
/// into the nearest surface.
pub fn feasibility_oracle(
    candidate: &GraspCandidate,
    object: &ObjectSpec,
    spec: &FeasibilitySpec,
) -> FeasibilityReport {
    let mut failures = Vec::new();
    let axis = crate::scoring::approach_axis(&candidate.pose);
    let t = candidate.pose.translation;

    // Frontal direction: horizontal unit vector from the robot base toward
    // the object.
    let obj_xy = Vector3::new(object.pose.translation.x, object.pose.translation.y, 0.0);
    let frontal = if obj_xy.norm() > 1e-9 {
        obj_xy.normalize()
    } else {
        Vector3::x()
    };
    let cos_limit = spec.frontal_cone_half_angle_deg.to_radians().cos();
    if axis.dot(&frontal) < cos_limit {
        failures.push(FailureReason::Cone);
    }
    if t.z <= spec.table_clearance {
        failures.push(FailureReason::Clearance);
    }
    if t.norm() > spec.max_reach {
        failures.push(FailureReason::Reach);
    }
    // Finger-opening axis is the y column of the grasp rotation.
    let finger_axis = candidate.pose.rotation.column(1).into_owned();
    let finger_local = object.pose.rotation.transpose() * finger_axis;
    if object.dims.width_along(&finger_local) > spec.grasp_width_max {
        failures.push(FailureReason::Width);
    }
    let n = object.surface_normal_near(&t);
    if axis.dot(&n) >= 0.0 {
        failures.push(FailureReason::SurfaceNormal);
    }
    FeasibilityReport {
        success: failures.is_empty(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obb::fit_obb;

    #[test]
    fn zero_noise_cylinder_lies_on_surface() {
        let spec = ObjectSpec::new(ObjectKind::Cylinder, Pose::identity());
        let cloud = make_object_cloud(&spec, 2000, 0.0, 42);
        assert_eq!(cloud.len(), 2000);
        for p in &cloud.points {
            assert!(spec.local_surface_distance(p) < 1e-9, "off-surface point {p:?}");
        }
    }

    #[test]
    fn zero_noise_bottle_lies_on_surface() {
        let spec = ObjectSpec::new(ObjectKind::Bottle, Pose::identity());
        let cloud = make_object_cloud(&spec, 1000, 0.0, 7);
        for p in &cloud.points {
            assert!(spec.local_surface_distance(p) < 1e-9, "off-surface point {p:?}");
        }
    }

    #[test]
    fn same_seed_same_cloud() {
        let spec = ObjectSpec::new(ObjectKind::BoxAsym, Pose::from_translation(Vector3::new(0.5, 0.0, 0.0)));
        let a = make_object_cloud(&spec, 500, 0.001, 123);
        let b = make_object_cloud(&spec, 500, 0.001, 123);
        assert_eq!(a, b);
    }

    #[test]
    fn box_cloud_obb_extents_match_generating_dims() {
        let spec = ObjectSpec::new(ObjectKind::BoxAsym, Pose::identity());
        let cloud = make_object_cloud(&spec, 4000, 0.0005, 9);
        let obb = fit_obb(&cloud).unwrap();
        let mut got: Vec<f64> = obb.extents.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let mut want = [0.04, 0.06, 0.10];
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(want.iter()) {
            // Within noise (2 sigma per side) plus sampling slack.
            assert!((g - w).abs() < 2.0 * 0.0005 * 2.0 + 0.01, "extent {g} vs {w}");
        }
    }

    #[test]
    fn candidate_sampler_is_deterministic_and_orthonormal() {
        let spec = ObjectSpec::new(ObjectKind::Cylinder, Pose::from_translation(Vector3::new(0.5, 0.0, 0.0)));
        let cloud = make_object_cloud(&spec, 800, 0.001, 5);
        let a = sample_candidates(&cloud, 800, 17);
        let b = sample_candidates(&cloud, 800, 17);
        assert_eq!(a.len(), 800);
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.pose, cb.pose);
            assert_eq!(ca.raw_score, cb.raw_score);
            assert!(ca.pose.orthonormality_error() < 1e-9);
            assert!((0.0..=1.0).contains(&ca.raw_score));
        }
    }

    #[test]
    fn grid_has_81_unique_cells() {
        let grid = scenario_grid(0);
        assert_eq!(grid.len(), 81);
        let mut keys: Vec<_> = grid
            .iter()
            .map(|s| (s.object, s.distance_bin, s.lateral_bin, s.pitch_deg))
            .collect();
        keys.sort_by_key(|k| format!("{k:?}"));
        keys.dedup();
        assert_eq!(keys.len(), 81);
        for kind in ObjectKind::ALL {
            assert_eq!(grid.iter().filter(|s| s.object == kind).count(), 27);
        }
    }

    #[test]
    fn grid_seeds_differ_between_cells_and_masters() {
        let a = scenario_grid(1);
        let b = scenario_grid(2);
        assert_ne!(a[0].seed, b[0].seed);
        let mut seeds: Vec<u64> = a.iter().map(|s| s.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 81);
    }

    #[test]
    fn pitched_object_rests_on_table() {
        for pitch in PITCHES_DEG {
            let sc = Scenario {
                object: ObjectKind::Cylinder,
                distance_bin: DistanceBin::Mid,
                lateral_bin: LateralBin::Center,
                pitch_deg: pitch,
                seed: 0,
            };
            let spec = sc.object_spec();
            let cloud = make_object_cloud(&spec, 500, 0.0, 3);
            let min_z = cloud.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
            assert!(min_z > -1e-9, "object sinks below table: min_z = {min_z}");
        }
    }

    #[test]
    fn oracle_rejects_table_approach() {
        let sc = Scenario {
            object: ObjectKind::Cylinder,
            distance_bin: DistanceBin::Near,
            lateral_bin: LateralBin::Center,
            pitch_deg: 0,
            seed: 0,
        };
        let object = sc.object_spec();
        // Straight down through the table at 5 mm height.
        let pose = Pose::new(
            frame_with_z(&-Vector3::z(), 0.0),
            Vector3::new(0.35, 0.0, 0.005),
        );
        let report = feasibility_oracle(&GraspCandidate::new(pose, 0.5, 0), &object, &FeasibilitySpec::default());
        assert!(!report.success);
        assert!(report.failures.contains(&FailureReason::Clearance));
    }

    #[test]
    fn oracle_accepts_frontal_midheight_cylinder_grasp() {
        let sc = Scenario {
            object: ObjectKind::Cylinder,
            distance_bin: DistanceBin::Near,
            lateral_bin: LateralBin::Center,
            pitch_deg: 0,
            seed: 0,
        };
        let object = sc.object_spec();
        // Approach along +x into the near side of the cylinder at mid height.
        let axis = Vector3::x();
        let pose = Pose::new(frame_with_z(&axis, 0.0), Vector3::new(0.35 - 0.04, 0.0, 0.06));
        let report = feasibility_oracle(&GraspCandidate::new(pose, 0.5, 0), &object, &FeasibilitySpec::default());
        assert!(report.success, "failures: {:?}", report.failures);
    }

    #[test]
    fn oracle_rejects_out_of_reach() {
        let sc = Scenario {
            object: ObjectKind::Cylinder,
            distance_bin: DistanceBin::Far,
            lateral_bin: LateralBin::Center,
            pitch_deg: 0,
            seed: 0,
        };
        let object = sc.object_spec();
        let pose = Pose::new(frame_with_z(&Vector3::x(), 0.0), Vector3::new(0.9, 0.0, 0.06));
        let report = feasibility_oracle(&GraspCandidate::new(pose, 0.5, 0), &object, &FeasibilitySpec::default());
        assert!(report.failures.contains(&FailureReason::Reach));
    }
}
