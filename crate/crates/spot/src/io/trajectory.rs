//! Trajectory CSV: `frame_id,t_sec,tx,ty,tz,qx,qy,qz,qw`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{Error, Pose, Result};

pub const TRAJECTORY_HEADER: &str = "frame_id,t_sec,tx,ty,tz,qx,qy,qz,qw";

const QUAT_NORM_TOL: f64 = 1e-6;

/// Parse a trajectory file, dropping stationary poses.
///
/// A pose is dropped when its translation moved less than `stationary_eps`
/// meters from the previously retained pose. Quaternions are validated to be
/// within `1e-6` of unit norm and renormalized. Frame ids must be strictly
/// increasing in file order.
pub fn parse_trajectory(path: &Path, stationary_eps: f64) -> Result<Vec<Pose>> {
    let reader = BufReader::new(File::open(path)?);
    let mut poses = Vec::new();
    let mut last_frame_id: Option<u64> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if idx == 0 {
            if line.trim() != TRAJECTORY_HEADER {
                return Err(Error::parse(
                    line_no,
                    format!("expected header `{TRAJECTORY_HEADER}`, got `{line}`"),
                ));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::parse(
                line_no,
                format!("expected 9 fields, got {}", fields.len()),
            ));
        }
        let frame_id: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad frame_id: {e}")))?;
        if let Some(prev) = last_frame_id {
            if frame_id <= prev {
                return Err(Error::parse(
                    line_no,
                    format!("frame_id {frame_id} not greater than previous {prev}"),
                ));
            }
        }
        last_frame_id = Some(frame_id);

        let mut vals = [0.0f64; 8];
        for (i, field) in fields[1..].iter().enumerate() {
            vals[i] = field
                .trim()
                .parse()
                .map_err(|e| Error::parse(line_no, format!("bad float field {}: {e}", i + 2)))?;
        }
        let quat = Quaternion::new(vals[7], vals[4], vals[5], vals[6]); // w, x, y, z
        let norm = quat.norm();
        if (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(Error::parse(
                line_no,
                format!("quaternion norm {norm} not within {QUAT_NORM_TOL} of 1"),
            ));
        }
        poses.push(Pose::new(
            frame_id,
            vals[0],
            Vector3::new(vals[1], vals[2], vals[3]),
            UnitQuaternion::from_quaternion(quat),
        ));
    }

    Ok(filter_stationary(poses, stationary_eps))
}

/// Drop poses that moved less than `eps` from the previously retained pose.
pub fn filter_stationary(poses: Vec<Pose>, eps: f64) -> Vec<Pose> {
    let mut kept: Vec<Pose> = Vec::with_capacity(poses.len());
    for pose in poses {
        match kept.last() {
            Some(prev) if (pose.translation - prev.translation).norm() < eps => {}
            _ => kept.push(pose),
        }
    }
    kept
}

pub fn write_trajectory(path: &Path, poses: &[Pose]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for p in poses {
        let q = p.rotation.quaternion();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.frame_id, p.t_sec, p.translation.x, p.translation.y, p.translation.z, q.i, q.j,
            q.k, q.w
        )?;
    }
    w.flush()?;
    Ok(())
}
