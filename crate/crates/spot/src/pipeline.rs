//! End-to-end orchestration shared by the CLI and the integration tests:
//! reference-database construction, streaming query matching, outcome
//! assembly, and evaluation.

use std::time::Instant;

use thiserror::Error;

use crate::config::{MatcherKind, PipelineConfig};
use crate::Descriptor;
use crate::descriptor::{describe, DescriptorParams};
use crate::distance::{query_distance_columns, DistanceColumnPair, DistanceMetric, VdBatch};
use crate::eval::{auc, mr100, pr_curve, OutcomeMatch, PrCurve, QueryOutcome};
use crate::io::{
    self, FrameObservation, GroundTruthTrack, QueryRow, RefDb, RefRecord, SummaryEntry,
    TimingReport,
};
use crate::mapping::{advance_frame, AccumulationState};
use crate::matching::{
    dd_match_at, nn_match, retrieval_key, rk_candidates, sm_match_at, DistanceMatrices,
    MatchResult, Viewpoint,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] io::Error),
    /// Ground-truth data missing or misaligned with the trajectory.
    #[error("ground truth: {0}")]
    GroundTruth(String),
    #[error("reference database is empty")]
    EmptyDatabase,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn gt_for_frame(
    gt: Option<&GroundTruthTrack>,
    frame_id: u64,
) -> Result<Option<[f64; 2]>> {
    match gt {
        None => Ok(None),
        Some(track) => track
            .get(frame_id as usize)
            .map(Some)
            .ok_or_else(|| {
                PipelineError::GroundTruth(format!(
                    "no ground-truth row for frame_id {frame_id} (track has {} rows; row index \
                     must equal frame_id)",
                    track.len()
                ))
            }),
    }
}

/// Run the keyframing and description stages over a frame stream and collect
/// the reference database. Descriptors are computed in `f64` and stored at
/// `f32` precision.
pub fn build_reference_db(
    frames: impl IntoIterator<Item = FrameObservation>,
    gt: Option<&GroundTruthTrack>,
    cfg: &PipelineConfig,
) -> Result<RefDb> {
    let mut state = AccumulationState::new();
    let mut records = Vec::new();
    for obs in frames {
        if let Some(kf) = advance_frame(&mut state, &obs, &cfg.mapping) {
            let grid: Descriptor = describe(&kf, &cfg.descriptor);
            records.push(RefRecord {
                keyframe_id: kf.index as u32,
                gt: gt_for_frame(gt, kf.pose.frame_id)?,
                grid: grid.cast::<f32>().as_slice().to_vec(),
            });
        }
    }
    Ok(RefDb {
        params: io::DbParams {
            m: cfg.descriptor.m as u16,
            n: cfg.descriptor.n as u16,
            r_lo: cfg.descriptor.r_lo as f32,
            r_la: cfg.descriptor.r_la as f32,
            h_c: cfg.descriptor.h_c as f32,
            s: cfg.mapping.s as f32,
        },
        records,
    })
}

/// Descriptor parameters a query run must use to be comparable with a
/// database: the stored grid geometry wins over the local config.
pub fn descriptor_params_from_db(db: &RefDb) -> DescriptorParams {
    DescriptorParams {
        r_lo: db.params.r_lo as f64,
        r_la: db.params.r_la as f64,
        m: db.params.m as usize,
        n: db.params.n as usize,
        h_c: db.params.h_c as f64,
    }
}

/// Everything produced by a query run against a fixed reference database.
pub struct MatchRun {
    pub results: Vec<MatchResult<f64>>,
    /// One row per emitted query keyframe, in order.
    pub queries: Vec<QueryRow>,
    pub query_descriptors: Vec<Descriptor>,
    pub matrices: DistanceMatrices<f64>,
    pub timing: TimingReport,
}

/// Stream query frames through keyframing, description, and distance-column
/// computation, then run the configured matcher.
///
/// Grid geometry and keyframe spacing come from the database parameters so
/// queries stay comparable with the stored references.
pub fn run_query_matching(
    frames: impl IntoIterator<Item = FrameObservation>,
    gt: Option<&GroundTruthTrack>,
    db: &RefDb,
    cfg: &PipelineConfig,
) -> Result<MatchRun> {
    if db.records.is_empty() {
        return Err(PipelineError::EmptyDatabase);
    }
    let desc_params = descriptor_params_from_db(db);
    let mut mapping = cfg.mapping;
    mapping.s = db.params.s as f64;

    let refs: Vec<Descriptor> = db.to_descriptors();
    let vd_batch = match cfg.metric {
        DistanceMetric::Vd => Some(VdBatch::new(&refs, &cfg.shifts)),
        _ => None,
    };

    let mut state = AccumulationState::new();
    let mut matrices = DistanceMatrices::new(refs.len());
    let mut queries = Vec::new();
    let mut descriptors = Vec::new();
    let mut desc_ms = 0.0f64;
    let mut match_ms = 0.0f64;

    for obs in frames {
        let Some(kf) = advance_frame(&mut state, &obs, &mapping) else {
            continue;
        };
        let t0 = Instant::now();
        let grid: Descriptor = describe(&kf, &desc_params);
        desc_ms += t0.elapsed().as_secs_f64() * 1e3;

        let t1 = Instant::now();
        let cols = match &vd_batch {
            Some(batch) => batch.columns(kf.index, &grid),
            None => query_distance_columns(kf.index, &grid, &refs, &cfg.shifts, cfg.metric),
        };
        matrices.append_query_columns(&cols);
        match_ms += t1.elapsed().as_secs_f64() * 1e3;

        queries.push(QueryRow {
            query_idx: kf.index,
            frame_id: kf.pose.frame_id,
            gt: gt_for_frame(gt, kf.pose.frame_id)?,
        });
        descriptors.push(grid);
    }

    let t2 = Instant::now();
    let results = match_over_matrices(&matrices, &descriptors, &refs, cfg, cfg.matching.w);
    match_ms += t2.elapsed().as_secs_f64() * 1e3;

    let keyframes = queries.len();
    let timing = TimingReport {
        keyframes,
        queries_matched: results.len(),
        description_ms_mean: if keyframes > 0 { desc_ms / keyframes as f64 } else { 0.0 },
        matching_ms_mean: if keyframes > 0 { match_ms / keyframes as f64 } else { 0.0 },
    };
    Ok(MatchRun { results, queries, query_descriptors: descriptors, matrices, timing })
}

/// Run the configured matcher over already-computed distance matrices.
///
/// Sequence matchers emit one result per window position (none for the
/// first and last `(w - 1) / 2` queries); the nearest-neighbor variants
/// emit one result per query.
pub fn match_over_matrices(
    matrices: &DistanceMatrices<f64>,
    query_descriptors: &[Descriptor],
    refs: &[Descriptor],
    cfg: &PipelineConfig,
    w: usize,
) -> Vec<MatchResult<f64>> {
    let q = matrices.query_count();
    let mut params = cfg.matching;
    params.w = w;
    match cfg.matcher {
        MatcherKind::Dd => (w..=q)
            .filter_map(|end| dd_match_at(matrices, end, &params).ok())
            .collect(),
        MatcherKind::Sm => (w..=q)
            .filter_map(|end| sm_match_at(matrices, end, &params).ok())
            .collect(),
        MatcherKind::Nn => (0..q)
            .map(|t| {
                nn_match(&DistanceColumnPair {
                    query_index: t,
                    sim: matrices.sim().column(t).to_vec(),
                    opp: matrices.opp().column(t).to_vec(),
                })
            })
            .collect(),
        MatcherKind::RkNn => {
            let keys: Vec<Vec<f64>> = refs.iter().map(retrieval_key).collect();
            (0..q)
                .map(|t| {
                    let candidates = rk_candidates(&query_descriptors[t], &keys, cfg.rk_top_k);
                    let sim = matrices.sim().column(t);
                    let opp = matrices.opp().column(t);
                    let pick = |col: &[f64]| {
                        let mut best = candidates[0];
                        for &j in &candidates {
                            if col[j] < col[best] || (col[j] == col[best] && j < best) {
                                best = j;
                            }
                        }
                        best
                    };
                    let (si, oi) = (pick(sim), pick(opp));
                    let (ref_index, score, viewpoint) = if sim[si] <= opp[oi] {
                        (si, sim[si], Viewpoint::Similar)
                    } else {
                        (oi, opp[oi], Viewpoint::Opposing)
                    };
                    MatchResult { query_index: t, ref_index, score, viewpoint, line_sum: score }
                })
                .collect()
        }
    }
}

/// Join query rows with match results and database ground truth into
/// evaluation outcomes. Both sides must carry ground-truth positions.
pub fn assemble_outcomes(
    queries: &[QueryRow],
    results: &[MatchResult<f64>],
    db: &RefDb,
) -> Result<Vec<QueryOutcome>> {
    let ref_track = db.ground_truth_track().ok_or_else(|| {
        PipelineError::GroundTruth("reference database has records without ground truth".into())
    })?;
    let mut by_query: std::collections::HashMap<usize, &MatchResult<f64>> =
        std::collections::HashMap::new();
    for r in results {
        by_query.insert(r.query_index, r);
    }
    queries
        .iter()
        .map(|row| {
            let query_pos = row.gt.ok_or_else(|| {
                PipelineError::GroundTruth(format!(
                    "query {} has no ground-truth position",
                    row.query_idx
                ))
            })?;
            let matched = by_query.get(&row.query_idx).map(|r| OutcomeMatch {
                ref_index: r.ref_index,
                score: r.score,
                matched_pos: ref_track[r.ref_index],
            });
            Ok(QueryOutcome { query_index: row.query_idx, query_pos, matched })
        })
        .collect()
}

/// Reference ground-truth positions as a track (the index set J).
pub fn reference_track(db: &RefDb) -> Result<GroundTruthTrack> {
    db.ground_truth_track()
        .map(GroundTruthTrack::new)
        .ok_or_else(|| {
            PipelineError::GroundTruth(
                "reference database has records without ground truth".into(),
            )
        })
}

/// Precision-recall curve plus scalar metrics for one localization radius.
pub fn evaluate_at(
    outcomes: &[QueryOutcome],
    ref_track: &GroundTruthTrack,
    r_m: f64,
) -> (PrCurve, SummaryEntry) {
    let curve = pr_curve(outcomes, ref_track, r_m);
    let entry = SummaryEntry { r_m, mr100: mr100(&curve), auc: auc(&curve) };
    (curve, entry)
}
