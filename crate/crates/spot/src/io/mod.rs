//! On-disk artifacts: trajectories, per-frame point blocks, ground truth,
//! reference databases, and the match/eval reports.
//!
//! All binary formats are little-endian. CSV files use `.` as the decimal
//! separator regardless of locale, and floating-point fields are written in
//! shortest round-trip form.
//!
//! Pose convention: rows of a trajectory store the camera position in the
//! world frame (`tx,ty,tz`) and a unit quaternion (`qx,qy,qz,qw`) rotating
//! camera-frame vectors into the world frame (world-from-camera).

mod ground_truth;
mod points;
mod refdb;
mod reports;
mod trajectory;

pub use ground_truth::{parse_ground_truth, write_ground_truth, GroundTruthTrack};
pub use points::{parse_points, write_points, PointsFile};
pub use refdb::{DbParams, RefDb, RefRecord};
pub use reports::{
    format_radius, read_match_csv, read_queries_csv, write_match_csv, write_pr_csv,
    write_queries_csv, write_summary, write_timing, MatchRow, QueryRow, SummaryEntry,
    TimingReport,
};
pub use trajectory::{filter_stationary, parse_trajectory, write_trajectory, TRAJECTORY_HEADER};

use nalgebra::{Point3, UnitQuaternion, Vector3};
use thiserror::Error;

/// Errors produced while reading or writing on-disk artifacts.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Malformed text input; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Malformed binary input; `offset` is the byte position of the problem.
    #[error("offset {offset}: {msg}")]
    Format { offset: u64, msg: String },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { offset, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// One timestamped camera pose.
///
/// `translation` is the camera position in the world frame and `rotation`
/// maps camera-frame vectors into world-frame vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub frame_id: u64,
    pub t_sec: f64,
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(
        frame_id: u64,
        t_sec: f64,
        translation: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
    ) -> Self {
        Self { frame_id, t_sec, translation, rotation }
    }

    /// Pose at the world origin looking along +z.
    pub fn identity(frame_id: u64, t_sec: f64) -> Self {
        Self::new(frame_id, t_sec, Vector3::zeros(), UnitQuaternion::identity())
    }

    /// Camera-frame point to world frame.
    pub fn point_to_world(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    /// World-frame point to camera frame.
    pub fn point_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    /// Camera position, as a point.
    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }
}

/// One VO output frame: a pose plus camera-frame structure points
/// (x right, y down, z forward), already depth-filtered.
#[derive(Debug, Clone)]
pub struct FrameObservation {
    pub pose: Pose,
    pub points_cam: Vec<Point3<f64>>,
}

impl FrameObservation {
    pub fn new(pose: Pose, points_cam: Vec<Point3<f64>>) -> Self {
        Self { pose, points_cam }
    }
}
