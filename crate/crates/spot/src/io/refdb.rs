//! Reference descriptor database.
//!
//! Layout: magic `SPOTDB01` | u16 version (=1) | param block (m, n as u16;
//! r_lo, r_la, h_c, s as f32) | u32 record count | per record: u32
//! keyframe_id, u8 gt_flag, 2 * f64 ground-truth east/north (zeros when the
//! flag is 0), then m*n f32 grid values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::descriptor::CartContext;
use crate::scalar::Scalar;

use super::{Error, Result};

const MAGIC: &[u8; 8] = b"SPOTDB01";
const VERSION: u16 = 1;

/// Descriptor-generation parameters persisted with the database.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbParams {
    pub m: u16,
    pub n: u16,
    pub r_lo: f32,
    pub r_la: f32,
    pub h_c: f32,
    pub s: f32,
}

/// One reference place: keyframe id, optional ground-truth position, and the
/// stored grid (row-major, `m * n` values).
#[derive(Debug, Clone, PartialEq)]
pub struct RefRecord {
    pub keyframe_id: u32,
    pub gt: Option<[f64; 2]>,
    pub grid: Vec<f32>,
}

/// A reference database as persisted on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RefDb {
    pub params: DbParams,
    pub records: Vec<RefRecord>,
}

impl RefDb {
    /// Widen all stored grids to descriptors of scalar type `T`.
    pub fn to_descriptors<T: Scalar>(&self) -> Vec<CartContext<T>> {
        self.records
            .iter()
            .map(|r| {
                CartContext::from_vec(
                    self.params.m as usize,
                    self.params.n as usize,
                    r.grid.iter().map(|&v| T::from_f64_lossy(v as f64)).collect(),
                )
            })
            .collect()
    }

    /// Ground-truth positions of all records, if every record has one.
    pub fn ground_truth_track(&self) -> Option<Vec<[f64; 2]>> {
        self.records.iter().map(|r| r.gt).collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut offset = 0u64;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, &mut offset, "magic")?;
        if &magic != MAGIC {
            return Err(Error::format(0, format!("bad magic {magic:?}, expected {MAGIC:?}")));
        }
        let version = read_u16(&mut r, &mut offset, "version")?;
        if version != VERSION {
            return Err(Error::format(8, format!("unsupported version {version}")));
        }
        let m = read_u16(&mut r, &mut offset, "m")?;
        let n = read_u16(&mut r, &mut offset, "n")?;
        let r_lo = read_f32(&mut r, &mut offset, "r_lo")?;
        let r_la = read_f32(&mut r, &mut offset, "r_la")?;
        let h_c = read_f32(&mut r, &mut offset, "h_c")?;
        let s = read_f32(&mut r, &mut offset, "s")?;
        let count = read_u32(&mut r, &mut offset, "record count")?;
        let cells = m as usize * n as usize;
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let keyframe_id = read_u32(&mut r, &mut offset, "keyframe_id")?;
            let mut flag = [0u8; 1];
            read_exact(&mut r, &mut flag, &mut offset, "gt_flag")?;
            let east = read_f64(&mut r, &mut offset, "gt east")?;
            let north = read_f64(&mut r, &mut offset, "gt north")?;
            let gt = match flag[0] {
                0 => None,
                1 => Some([east, north]),
                other => {
                    return Err(Error::format(offset, format!("invalid gt_flag {other}")));
                }
            };
            let mut buf = vec![0u8; cells * 4];
            read_exact(&mut r, &mut buf, &mut offset, "grid")?;
            let grid = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            records.push(RefRecord { keyframe_id, gt, grid });
        }
        Ok(RefDb { params: DbParams { m, n, r_lo, r_la, h_c, s }, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let cells = self.params.m as usize * self.params.n as usize;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.params.m.to_le_bytes())?;
        w.write_all(&self.params.n.to_le_bytes())?;
        w.write_all(&self.params.r_lo.to_le_bytes())?;
        w.write_all(&self.params.r_la.to_le_bytes())?;
        w.write_all(&self.params.h_c.to_le_bytes())?;
        w.write_all(&self.params.s.to_le_bytes())?;
        w.write_all(&(self.records.len() as u32).to_le_bytes())?;
        for rec in &self.records {
            assert_eq!(rec.grid.len(), cells, "record grid size must match params");
            w.write_all(&rec.keyframe_id.to_le_bytes())?;
            let [east, north] = rec.gt.unwrap_or([0.0, 0.0]);
            w.write_all(&[rec.gt.is_some() as u8])?;
            w.write_all(&east.to_le_bytes())?;
            w.write_all(&north.to_le_bytes())?;
            for v in &rec.grid {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    let at = *offset;
    r.read_exact(buf)
        .map_err(|_| Error::format(at, format!("truncated while reading {what}")))?;
    *offset += buf.len() as u64;
    Ok(())
}

fn read_u16<R: Read>(r: &mut R, offset: &mut u64, what: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b, offset, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, offset: &mut u64, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, offset, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R, offset: &mut u64, what: &str) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, offset, what)?;
    Ok(f32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, offset: &mut u64, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, offset, what)?;
    Ok(f64::from_le_bytes(b))
}
