//! Deterministic synthetic corridor worlds.
//!
//! A world is a straight corridor along world +z (north) with box-shaped
//! objects scattered on both sides of the roadway. Traversals march along
//! the corridor (optionally reversed, laterally offset, with dropout and a
//! pose-noise random walk) and a simple visibility model renders camera
//! points per frame: surface samples in front of the camera, inside the
//! horizontal field of view, within range `r_d`.
//!
//! World frame: x east, y down (ground plane at y = 0, so up is -y),
//! z north. Cameras sit at `y = -camera_height`; ground-truth positions are
//! the true (east, north) pairs.

pub mod oracle;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{GroundTruthTrack, Pose};

/// Corridor world parameters. Equal specs generate identical worlds.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub seed: u64,
    /// Corridor length in meters.
    pub length: f64,
    /// Half-width of the object-free roadway.
    pub half_width: f64,
    /// Objects per 100 m of corridor.
    pub density_per_100m: f64,
    /// Box footprint edge range (min, max) in meters.
    pub size_range: (f64, f64),
    /// Box height range (min, max) in meters.
    pub height_range: (f64, f64),
    /// Surface sampling pitch in meters.
    pub sample_pitch: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            length: 2000.0,
            half_width: 4.0,
            density_per_100m: 20.0,
            size_range: (1.0, 4.0),
            height_range: (2.0, 6.0),
            sample_pitch: 0.5,
        }
    }
}

/// Ground-based box: footprint center, footprint size, height above ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectBox {
    /// Footprint center (east, north).
    pub center: [f64; 2],
    /// Footprint size (east extent, north extent).
    pub size: [f64; 2],
    pub height: f64,
}

/// Band of lateral center offsets outside the roadway where objects appear.
const LATERAL_BAND: (f64, f64) = (1.0, 13.0);

/// Place boxes on both sides of the corridor, outside the roadway.
pub fn generate_world(spec: &WorldSpec) -> Vec<ObjectBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = (spec.density_per_100m * spec.length / 100.0).round() as usize;
    (0..count)
        .map(|_| {
            let north = rng.gen_range(0.0..spec.length);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lateral =
                side * (spec.half_width + rng.gen_range(LATERAL_BAND.0..LATERAL_BAND.1));
            let sx = rng.gen_range(spec.size_range.0..=spec.size_range.1);
            let sz = rng.gen_range(spec.size_range.0..=spec.size_range.1);
            let height = rng.gen_range(spec.height_range.0..=spec.height_range.1);
            ObjectBox { center: [lateral, north], size: [sx, sz], height }
        })
        .collect()
}

/// A world with per-box surface samples precomputed for rendering.
#[derive(Debug, Clone)]
pub struct SampledWorld {
    boxes: Vec<ObjectBox>,
    /// World-frame surface samples per box.
    samples: Vec<Vec<Point3<f64>>>,
    /// Horizontal bounding radius per box.
    bound: Vec<f64>,
}

impl SampledWorld {
    pub fn new(boxes: Vec<ObjectBox>, sample_pitch: f64) -> Self {
        let samples: Vec<Vec<Point3<f64>>> =
            boxes.iter().map(|b| surface_samples(b, sample_pitch)).collect();
        let bound = boxes
            .iter()
            .map(|b| ((b.size[0] / 2.0).powi(2) + (b.size[1] / 2.0).powi(2)).sqrt())
            .collect();
        Self { boxes, samples, bound }
    }

    pub fn from_spec(spec: &WorldSpec) -> Self {
        Self::new(generate_world(spec), spec.sample_pitch)
    }

    pub fn boxes(&self) -> &[ObjectBox] {
        &self.boxes
    }
}

fn axis_offsets(extent: f64, pitch: f64) -> Vec<f64> {
    let steps = (extent / pitch).floor() as usize;
    (0..=steps).map(|i| i as f64 * pitch).collect()
}

/// Sample the four vertical faces and the top face at fixed pitch.
fn surface_samples(b: &ObjectBox, pitch: f64) -> Vec<Point3<f64>> {
    let [cx, cz] = b.center;
    let (hx, hz) = (b.size[0] / 2.0, b.size[1] / 2.0);
    let xs = axis_offsets(b.size[0], pitch);
    let zs = axis_offsets(b.size[1], pitch);
    let ys = axis_offsets(b.height, pitch);
    let mut pts = Vec::new();
    for y_off in &ys {
        let y = -y_off; // ground at 0, up is -y
        for z_off in &zs {
            pts.push(Point3::new(cx - hx, y, cz - hz + z_off));
            pts.push(Point3::new(cx + hx, y, cz - hz + z_off));
        }
        for x_off in &xs {
            pts.push(Point3::new(cx - hx + x_off, y, cz - hz));
            pts.push(Point3::new(cx - hx + x_off, y, cz + hz));
        }
    }
    let top = -b.height;
    for x_off in &xs {
        for z_off in &zs {
            pts.push(Point3::new(cx - hx + x_off, top, cz - hz + z_off));
        }
    }
    pts
}

/// Travel direction along the corridor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// A rectangular off-corridor excursion: leave the centerline
/// perpendicular by `out` meters, continue `along` meters parallel to the
/// route, and return. Off-corridor path length is `2 * out + along`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetourSpec {
    /// Distance along the travel direction at which the detour starts.
    pub start_along: f64,
    pub out: f64,
    pub along: f64,
}

/// One traversal of the corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalSpec {
    pub direction: Direction,
    /// World-frame east offset of the lane (models opposing-lane gaps).
    pub lateral_offset: f64,
    pub frame_step: f64,
    pub fov_deg: f64,
    /// Per-point drop probability during rendering.
    pub dropout: f64,
    /// Std of the per-frame, per-axis random-walk pose noise (meters).
    pub pose_noise_std: f64,
    pub seed: u64,
    pub camera_height: f64,
    pub detour: Option<DetourSpec>,
}

impl Default for TraversalSpec {
    fn default() -> Self {
        Self {
            direction: Direction::Forward,
            lateral_offset: 0.0,
            frame_step: 0.5,
            fov_deg: 90.0,
            dropout: 0.0,
            pose_noise_std: 0.0,
            seed: 1,
            camera_height: 1.7,
            detour: None,
        }
    }
}

/// Poses and ground truth for one traversal.
///
/// `poses` carry the random-walk noise (what the odometry would report);
/// `true_poses` are the exact camera poses used for rendering; the track
/// holds the true planar positions.
#[derive(Debug, Clone)]
pub struct Traversal {
    pub poses: Vec<Pose>,
    pub true_poses: Vec<Pose>,
    pub ground_truth: GroundTruthTrack,
}

fn heading_rotation(dx: f64, dz: f64) -> UnitQuaternion<f64> {
    // Columns: camera right, down, forward expressed in the world frame.
    let rot = Rotation3::from_matrix_unchecked(Matrix3::new(
        dz, 0.0, dx, //
        0.0, 1.0, 0.0, //
        -dx, 0.0, dz,
    ));
    UnitQuaternion::from_rotation_matrix(&rot)
}

/// March poses along the (possibly detoured) corridor path at `frame_step`
/// spacing.
pub fn generate_traversal(world: &WorldSpec, spec: &TraversalSpec) -> Traversal {
    assert!(spec.frame_step > 0.0, "frame step must be positive");
    assert!((0.0..=1.0).contains(&spec.dropout), "dropout must be a probability");

    let x0 = spec.lateral_offset;
    let (z_start, dir) = match spec.direction {
        Direction::Forward => (0.0, 1.0),
        Direction::Reverse => (world.length, -1.0),
    };
    let z_end = z_start + dir * world.length;
    let mut waypoints: Vec<[f64; 2]> = vec![[x0, z_start]];
    if let Some(d) = spec.detour {
        let z_d = z_start + dir * d.start_along;
        waypoints.push([x0, z_d]);
        waypoints.push([x0 + d.out, z_d]);
        waypoints.push([x0 + d.out, z_d + dir * d.along]);
        waypoints.push([x0, z_d + dir * d.along]);
    }
    waypoints.push([x0, z_end]);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut walk = Vector3::zeros();
    let mut poses = Vec::new();
    let mut true_poses = Vec::new();
    let mut track = GroundTruthTrack::default();

    let mut seg = 0usize;
    let mut seg_done = 0.0; // arclength consumed on the current segment
    let mut along = 0.0;
    let mut frame: u64 = 0;
    loop {
        // Advance to the segment containing the current arclength.
        let (mut p, mut q);
        loop {
            p = waypoints[seg];
            q = waypoints[seg + 1];
            let seg_len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            if seg_done <= seg_len || seg + 2 == waypoints.len() {
                break;
            }
            seg_done -= seg_len;
            seg += 1;
        }
        let seg_len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        if seg_done > seg_len {
            break; // past the final waypoint
        }
        let t = seg_done / seg_len;
        let x = p[0] + t * (q[0] - p[0]);
        let z = p[1] + t * (q[1] - p[1]);
        let (dx, dz) = ((q[0] - p[0]) / seg_len, (q[1] - p[1]) / seg_len);
        let rotation = heading_rotation(dx, dz);
        let translation = Vector3::new(x, -spec.camera_height, z);
        let t_sec = frame as f64 * 0.1;
        true_poses.push(Pose::new(frame, t_sec, translation, rotation));
        if spec.pose_noise_std > 0.0 {
            for axis in 0..3 {
                walk[axis] += gaussian(&mut rng, spec.pose_noise_std);
            }
        }
        poses.push(Pose::new(frame, t_sec, translation + walk, rotation));
        track.push([x, z]);

        frame += 1;
        seg_done += spec.frame_step;
        along += spec.frame_step;
        let total: f64 = waypoints
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum();
        if along > total {
            break;
        }
    }

    Traversal { poses, true_poses, ground_truth: track }
}

fn gaussian(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    // Box-Muller; two uniforms per sample keeps the stream simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Deterministic per-frame render seed.
pub fn frame_seed(base: u64, frame: u64) -> u64 {
    base ^ frame.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(31)
}

/// Render the camera-frame points visible from `pose`: surface samples with
/// `z > 0`, inside the horizontal field of view, within range `r_d`, each
/// independently dropped with probability `dropout`.
pub fn render_frame(
    world: &SampledWorld,
    pose: &Pose,
    fov_deg: f64,
    r_d: f64,
    dropout: f64,
    seed: u64,
) -> Vec<Point3<f64>> {
    assert!(fov_deg > 0.0 && fov_deg <= 180.0, "fov must be in (0, 180]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tan_half = (fov_deg.to_radians() / 2.0).tan();
    let cam = pose.position();
    let mut out = Vec::new();
    for (i, b) in world.boxes.iter().enumerate() {
        let dx = b.center[0] - cam.x;
        let dz = b.center[1] - cam.z;
        if (dx * dx + dz * dz).sqrt() > r_d + world.bound[i] {
            continue;
        }
        for p in &world.samples[i] {
            let c = pose.point_to_camera(p);
            if c.z <= 0.0 {
                continue;
            }
            if c.coords.norm() > r_d {
                continue;
            }
            if c.x.abs() > c.z * tan_half {
                continue;
            }
            if dropout > 0.0 && rng.gen::<f64>() < dropout {
                continue;
            }
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_generation_is_deterministic() {
        let spec = WorldSpec { length: 500.0, ..Default::default() };
        assert_eq!(generate_world(&spec), generate_world(&spec));
    }

    #[test]
    fn zero_density_world_is_empty() {
        let spec = WorldSpec { density_per_100m: 0.0, ..Default::default() };
        assert!(generate_world(&spec).is_empty());
    }

    #[test]
    fn box_centers_stay_off_the_roadway() {
        let spec = WorldSpec { length: 800.0, ..Default::default() };
        for b in generate_world(&spec) {
            assert!(b.center[0].abs() >= spec.half_width);
        }
    }

    #[test]
    fn reverse_traversal_negates_forward_axes() {
        let world = WorldSpec { length: 100.0, ..Default::default() };
        let fwd = generate_traversal(&world, &TraversalSpec::default());
        let rev = generate_traversal(
            &world,
            &TraversalSpec { direction: Direction::Reverse, ..Default::default() },
        );
        for (f, r) in fwd.poses.iter().zip(&rev.poses) {
            let ff = f.rotation * Vector3::z();
            let rf = r.rotation * Vector3::z();
            assert!((ff + rf).norm() < 1e-12);
        }
    }

    #[test]
    fn step_two_over_hundred_meters_gives_51_poses() {
        let world = WorldSpec { length: 100.0, ..Default::default() };
        let spec = TraversalSpec { frame_step: 2.0, ..Default::default() };
        let t = generate_traversal(&world, &spec);
        assert_eq!(t.poses.len(), 51);
        assert_eq!(t.ground_truth.len(), 51);
    }

    #[test]
    fn noiseless_ground_truth_equals_translations() {
        let world = WorldSpec { length: 60.0, ..Default::default() };
        let t = generate_traversal(&world, &TraversalSpec::default());
        for (pose, gt) in t.poses.iter().zip(t.ground_truth.positions()) {
            assert_eq!([pose.translation.x, pose.translation.z], *gt);
        }
    }

    #[test]
    fn detour_adds_off_corridor_path() {
        let world = WorldSpec { length: 400.0, ..Default::default() };
        let spec = TraversalSpec {
            detour: Some(DetourSpec { start_along: 100.0, out: 50.0, along: 80.0 }),
            ..Default::default()
        };
        let t = generate_traversal(&world, &spec);
        let max_x = t
            .ground_truth
            .positions()
            .iter()
            .map(|p| p[0])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((max_x - 50.0).abs() < 1.0);
        // Total path length grows by 2 * out.
        let expected = ((400.0 + 100.0) / 0.5) as usize + 1;
        assert!((t.poses.len() as i64 - expected as i64).abs() <= 2);
    }

    fn single_box_world() -> SampledWorld {
        SampledWorld::new(
            vec![ObjectBox { center: [5.0, 20.0], size: [2.0, 2.0], height: 3.0 }],
            0.5,
        )
    }

    fn camera_at(z: f64) -> Pose {
        Pose::new(0, 0.0, Vector3::new(0.0, -1.7, z), UnitQuaternion::identity())
    }

    #[test]
    fn object_behind_camera_contributes_nothing() {
        let world = single_box_world();
        let pts = render_frame(&world, &camera_at(30.0), 90.0, 35.35, 0.0, 1);
        assert!(pts.is_empty());
    }

    #[test]
    fn object_beyond_depth_threshold_contributes_nothing() {
        let world = single_box_world();
        let pts = render_frame(&world, &camera_at(-25.0), 90.0, 35.35, 0.0, 1);
        assert!(pts.is_empty(), "box at ~45 m is past r_d");
    }

    #[test]
    fn full_dropout_gives_empty_frame() {
        let world = single_box_world();
        let visible = render_frame(&world, &camera_at(10.0), 90.0, 35.35, 0.0, 1);
        assert!(!visible.is_empty());
        let dropped = render_frame(&world, &camera_at(10.0), 90.0, 35.35, 1.0, 1);
        assert!(dropped.is_empty());
    }

    #[test]
    fn rendered_points_reproject_onto_surfaces() {
        let world = SampledWorld::new(
            vec![
                ObjectBox { center: [6.0, 30.0], size: [3.0, 1.5], height: 4.0 },
                ObjectBox { center: [-7.5, 45.0], size: [2.0, 2.0], height: 2.5 },
            ],
            0.5,
        );
        let spec = WorldSpec { length: 80.0, ..Default::default() };
        let t = generate_traversal(
            &spec,
            &TraversalSpec { direction: Direction::Reverse, ..Default::default() },
        );
        let mut checked = 0usize;
        for pose in t.true_poses.iter().step_by(17) {
            for c in render_frame(&world, pose, 90.0, 35.35, 0.0, 3) {
                let w = pose.point_to_world(&c);
                let on_surface = world.samples.iter().flatten().any(|s| (s - w).norm() < 1e-9);
                assert!(on_surface, "reprojected point {w} off every surface");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn render_is_deterministic_in_seed() {
        let world = single_box_world();
        let a = render_frame(&world, &camera_at(10.0), 90.0, 35.35, 0.4, 42);
        let b = render_frame(&world, &camera_at(10.0), 90.0, 35.35, 0.4, 42);
        assert_eq!(a, b);
    }
}
