//! Ground-truth CSV: `index,east,north`, densely indexed from 0.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Error, Result};

pub const GROUND_TRUTH_HEADER: &str = "index,east,north";

/// Planar (east, north) ground-truth positions, one per trajectory frame
/// or per keyframe depending on context.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthTrack {
    positions: Vec<[f64; 2]>,
}

impl GroundTruthTrack {
    pub fn new(positions: Vec<[f64; 2]>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<[f64; 2]> {
        self.positions.get(index).copied()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn push(&mut self, pos: [f64; 2]) {
        self.positions.push(pos);
    }
}

/// Parse a ground-truth track. An empty file yields an empty track; any gap
/// in the index column is a format error.
pub fn parse_ground_truth(path: &Path) -> Result<GroundTruthTrack> {
    let reader = BufReader::new(File::open(path)?);
    let mut positions = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if !saw_header {
            if line.trim().is_empty() {
                continue;
            }
            if line.trim() != GROUND_TRUTH_HEADER {
                return Err(Error::parse(
                    line_no,
                    format!("expected header `{GROUND_TRUTH_HEADER}`, got `{line}`"),
                ));
            }
            saw_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(line_no, format!("expected 3 fields, got {}", fields.len())));
        }
        let index: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad index: {e}")))?;
        if index != positions.len() {
            return Err(Error::parse(
                line_no,
                format!("index gap: expected {}, got {index}", positions.len()),
            ));
        }
        let east: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad east: {e}")))?;
        let north: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad north: {e}")))?;
        if !east.is_finite() || !north.is_finite() {
            return Err(Error::parse(line_no, "non-finite ground-truth position"));
        }
        positions.push([east, north]);
    }
    Ok(GroundTruthTrack::new(positions))
}

pub fn write_ground_truth(path: &Path, track: &GroundTruthTrack) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{GROUND_TRUTH_HEADER}")?;
    for (i, [east, north]) in track.positions().iter().enumerate() {
        writeln!(w, "{i},{east},{north}")?;
    }
    w.flush()?;
    Ok(())
}
