//! Match, query, precision-recall, summary and timing reports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::eval::PrCurve;
use crate::matching::{MatchResult, Viewpoint};

use super::{Error, Result};

pub const MATCH_HEADER: &str = "query_idx,ref_idx,score,viewpoint,line_sum";
pub const QUERIES_HEADER: &str = "query_idx,frame_id,east,north";
pub const PR_HEADER: &str = "threshold,precision,recall";

/// One row of a match CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRow {
    pub query_idx: usize,
    pub ref_idx: usize,
    pub score: f64,
    pub viewpoint: Viewpoint,
    pub line_sum: f64,
}

/// One row of a queries CSV: every emitted query keyframe, with its
/// ground-truth position when known.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRow {
    pub query_idx: usize,
    pub frame_id: u64,
    pub gt: Option<[f64; 2]>,
}

/// Per-radius evaluation summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryEntry {
    pub r_m: f64,
    pub mr100: f64,
    pub auc: f64,
}

/// Mean per-stage computation times, mirroring the description/matching
/// split of the reference timing table.
#[derive(Debug, Clone, Copy, Default)]
pub struct TimingReport {
    pub keyframes: usize,
    pub queries_matched: usize,
    pub description_ms_mean: f64,
    pub matching_ms_mean: f64,
}

pub fn write_match_csv(path: &Path, results: &[MatchResult<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MATCH_HEADER}")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.query_index, r.ref_index, r.score, r.viewpoint, r.line_sum
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_match_csv(path: &Path) -> Result<Vec<MatchRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if idx == 0 {
            if line.trim() != MATCH_HEADER {
                return Err(Error::parse(line_no, format!("expected header `{MATCH_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(line_no, format!("expected 5 fields, got {}", fields.len())));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse().map_err(|e| Error::parse(line_no, format!("bad {what}: {e}")))
        };
        rows.push(MatchRow {
            query_idx: fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::parse(line_no, format!("bad query_idx: {e}")))?,
            ref_idx: fields[1]
                .trim()
                .parse()
                .map_err(|e| Error::parse(line_no, format!("bad ref_idx: {e}")))?,
            score: parse_f(fields[2], "score")?,
            viewpoint: fields[3]
                .trim()
                .parse()
                .map_err(|e: String| Error::parse(line_no, e))?,
            line_sum: parse_f(fields[4], "line_sum")?,
        });
    }
    Ok(rows)
}

pub fn write_queries_csv(path: &Path, rows: &[QueryRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{QUERIES_HEADER}")?;
    for r in rows {
        let [east, north] = r.gt.unwrap_or([f64::NAN, f64::NAN]);
        writeln!(w, "{},{},{},{}", r.query_idx, r.frame_id, east, north)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_queries_csv(path: &Path) -> Result<Vec<QueryRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if idx == 0 {
            if line.trim() != QUERIES_HEADER {
                return Err(Error::parse(line_no, format!("expected header `{QUERIES_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(line_no, format!("expected 4 fields, got {}", fields.len())));
        }
        let query_idx = fields[0]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad query_idx: {e}")))?;
        let frame_id = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad frame_id: {e}")))?;
        let east: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad east: {e}")))?;
        let north: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad north: {e}")))?;
        let gt = if east.is_nan() || north.is_nan() { None } else { Some([east, north]) };
        rows.push(QueryRow { query_idx, frame_id, gt });
    }
    Ok(rows)
}

pub fn write_pr_csv(path: &Path, curve: &PrCurve) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{PR_HEADER}")?;
    for p in &curve.points {
        writeln!(w, "{},{},{}", p.threshold, p.precision, p.recall)?;
    }
    w.flush()?;
    Ok(())
}

/// Format a localization radius for file names and summary keys
/// (`15` rather than `15.0`, `12.5` kept as is).
pub fn format_radius(r_m: f64) -> String {
    format!("{r_m}")
}

pub fn write_summary(path: &Path, entries: &[SummaryEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        let tag = format_radius(e.r_m);
        writeln!(w, "mr100_{tag}={:.6}", e.mr100)?;
        writeln!(w, "auc_{tag}={:.6}", e.auc)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing(path: &Path, t: &TimingReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "keyframes={}", t.keyframes)?;
    writeln!(w, "queries_matched={}", t.queries_matched)?;
    writeln!(w, "description_ms_mean={:.4}", t.description_ms_mean)?;
    writeln!(w, "matching_ms_mean={:.4}", t.matching_ms_mean)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn match_csv_round_trip() {
        let results = vec![
            MatchResult {
                query_index: 37,
                ref_index: 12,
                score: 0.25,
                viewpoint: Viewpoint::Opposing,
                line_sum: 3.5,
            },
            MatchResult {
                query_index: 38,
                ref_index: 13,
                score: 0.5000000000000001,
                viewpoint: Viewpoint::Similar,
                line_sum: 7.25,
            },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_match_csv(f.path(), &results).unwrap();
        let rows = read_match_csv(f.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].query_idx, 37);
        assert_eq!(rows[0].viewpoint, Viewpoint::Opposing);
        assert_eq!(rows[1].score, 0.5000000000000001);
    }

    #[test]
    fn queries_csv_round_trip_with_missing_gt() {
        let rows = vec![
            QueryRow { query_idx: 0, frame_id: 107, gt: Some([1.5, -2.0]) },
            QueryRow { query_idx: 1, frame_id: 112, gt: None },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_queries_csv(f.path(), &rows).unwrap();
        let back = read_queries_csv(f.path()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn radius_formatting() {
        assert_eq!(format_radius(15.0), "15");
        assert_eq!(format_radius(12.5), "12.5");
        assert_eq!(format_radius(80.0), "80");
    }
}
