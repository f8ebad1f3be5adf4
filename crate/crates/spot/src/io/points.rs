//! Per-frame camera-point blocks.
//!
//! Layout: magic `SPOTPTS1` | u32 frame count | per frame: u64 frame_id,
//! u32 n, then n * 3 * f32 little-endian (x, y, z).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Point3;

use super::{Error, Result};

const MAGIC: &[u8; 8] = b"SPOTPTS1";

/// Frame-indexed camera points as stored on disk (values are `f32`).
pub type PointsFile = BTreeMap<u64, Vec<Point3<f64>>>;

struct Counting<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Counting<R> {
    fn read_exactly(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let at = self.offset;
        self.inner
            .read_exact(buf)
            .map_err(|_| Error::format(at, format!("truncated while reading {what}")))?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exactly(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exactly(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }
}

/// Read a points file into a frame-id keyed map.
pub fn parse_points(path: &Path) -> Result<PointsFile> {
    let mut r = Counting { inner: BufReader::new(File::open(path)?), offset: 0 };
    let mut magic = [0u8; 8];
    r.read_exactly(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let frame_count = r.read_u32("frame count")?;
    let mut frames = PointsFile::new();
    for _ in 0..frame_count {
        let frame_id = r.read_u64("frame id")?;
        let n = r.read_u32("point count")? as usize;
        let mut buf = vec![0u8; n * 12];
        r.read_exactly(&mut buf, "point block")?;
        let points = buf
            .chunks_exact(12)
            .map(|c| {
                let x = f32::from_le_bytes(c[0..4].try_into().unwrap());
                let y = f32::from_le_bytes(c[4..8].try_into().unwrap());
                let z = f32::from_le_bytes(c[8..12].try_into().unwrap());
                Point3::new(x as f64, y as f64, z as f64)
            })
            .collect();
        if frames.insert(frame_id, points).is_some() {
            return Err(Error::format(r.offset, format!("duplicate frame_id {frame_id}")));
        }
    }
    Ok(frames)
}

/// Write per-frame point blocks. Coordinates are quantized to `f32`.
pub fn write_points<'a, I>(path: &Path, frames: I) -> Result<()>
where
    I: IntoIterator<Item = (u64, &'a [Point3<f64>])>,
{
    let frames: Vec<(u64, &[Point3<f64>])> = frames.into_iter().collect();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(frames.len() as u32).to_le_bytes())?;
    for (frame_id, points) in frames {
        w.write_all(&frame_id.to_le_bytes())?;
        w.write_all(&(points.len() as u32).to_le_bytes())?;
        for p in points {
            w.write_all(&(p.x as f32).to_le_bytes())?;
            w.write_all(&(p.y as f32).to_le_bytes())?;
            w.write_all(&(p.z as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
