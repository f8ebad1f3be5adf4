//! Streaming distance matrices and sequence matching.
//!
//! Every query appends one column to each of two matrices: `sim` (original
//! query vs references) and `opp` (double-flipped query vs references). A
//! same-direction revisit appears as a low-sum line of positive slope in
//! `sim`; an opposing revisit as a negative-slope line in `opp`. The double
//! matcher searches both and reports the query at the center of the last-w
//! window, scoring the winner by best sum over second-best sum outside an
//! exclusion window of references.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::descriptor::CartContext;
use crate::distance::DistanceColumnPair;
use crate::scalar::Scalar;

/// Sequence matching parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingParams {
    /// Window length in queries; odd.
    pub w: usize,
    /// Minimum slope magnitude (references per query).
    pub v_min: f64,
    /// Maximum slope magnitude.
    pub v_max: f64,
    /// Number of evenly spaced slope samples in `[v_min, v_max]`.
    pub n_v: usize,
    /// Half-width (references) of the exclusion window around the best match
    /// when searching for the second-best sum.
    pub exclusion_half_width: usize,
}

impl Default for MatchingParams {
    fn default() -> Self {
        Self { w: 75, v_min: 0.6, v_max: 1.4, n_v: 9, exclusion_half_width: 75 }
    }
}

impl MatchingParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.w < 1 || self.w.is_multiple_of(2) {
            return Err(format!("w must be odd and >= 1, got {}", self.w));
        }
        if !(self.v_min > 0.0 && self.v_min <= self.v_max) {
            return Err(format!("need 0 < v_min <= v_max, got {} and {}", self.v_min, self.v_max));
        }
        if self.n_v < 1 {
            return Err("n_v must be >= 1".into());
        }
        Ok(())
    }

    /// Evenly spaced slope magnitudes.
    pub fn slopes(&self) -> Vec<f64> {
        if self.n_v == 1 {
            return vec![self.v_min];
        }
        (0..self.n_v)
            .map(|i| self.v_min + i as f64 * (self.v_max - self.v_min) / (self.n_v - 1) as f64)
            .collect()
    }

    /// Queries at each end of a run that never receive a match.
    pub fn edge_queries(&self) -> usize {
        (self.w - 1) / 2
    }
}

/// Append-only column matrix: one row per reference, one column per query.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMatrix<T> {
    rows: usize,
    cols: Vec<Vec<T>>,
}

impl<T: Scalar> ColumnMatrix<T> {
    pub fn new(rows: usize) -> Self {
        assert!(rows > 0, "matrix needs at least one reference row");
        Self { rows, cols: Vec::new() }
    }

    pub fn from_columns(cols: Vec<Vec<T>>) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        assert!(rows > 0, "matrix needs at least one reference row");
        assert!(cols.iter().all(|c| c.len() == rows), "ragged columns");
        Self { rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn query_count(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, t: usize) -> &[T] {
        &self.cols[t]
    }

    pub fn value(&self, ref_index: usize, query: usize) -> T {
        self.cols[query][ref_index]
    }

    fn push_column(&mut self, col: Vec<T>) {
        assert_eq!(col.len(), self.rows, "column length must equal reference count");
        self.cols.push(col);
    }

    /// Elementwise minimum of two equally-shaped matrices.
    pub fn elementwise_min(a: &Self, b: &Self) -> Self {
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.cols.len(), b.cols.len());
        Self {
            rows: a.rows,
            cols: a
                .cols
                .iter()
                .zip(&b.cols)
                .map(|(ca, cb)| ca.iter().zip(cb).map(|(&x, &y)| x.min(y)).collect())
                .collect(),
        }
    }
}

/// The streaming pair of similar/opposing distance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrices<T> {
    sim: ColumnMatrix<T>,
    opp: ColumnMatrix<T>,
}

impl<T: Scalar> DistanceMatrices<T> {
    pub fn new(ref_count: usize) -> Self {
        Self { sim: ColumnMatrix::new(ref_count), opp: ColumnMatrix::new(ref_count) }
    }

    pub fn ref_count(&self) -> usize {
        self.sim.rows()
    }

    pub fn query_count(&self) -> usize {
        self.sim.query_count()
    }

    pub fn sim(&self) -> &ColumnMatrix<T> {
        &self.sim
    }

    pub fn opp(&self) -> &ColumnMatrix<T> {
        &self.opp
    }

    /// Append one query's column pair. Prior columns are never modified.
    pub fn append_query_columns(&mut self, cols: &DistanceColumnPair<T>) {
        assert_eq!(cols.sim.len(), self.ref_count(), "column length must equal reference count");
        assert_eq!(cols.opp.len(), self.ref_count(), "column length must equal reference count");
        self.sim.push_column(cols.sim.clone());
        self.opp.push_column(cols.opp.clone());
    }
}

/// Which of the two hypotheses produced the match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Viewpoint {
    Similar,
    Opposing,
}

impl fmt::Display for Viewpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Viewpoint::Similar => "sim",
            Viewpoint::Opposing => "opp",
        })
    }
}

impl FromStr for Viewpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" => Ok(Viewpoint::Similar),
            "opp" => Ok(Viewpoint::Opposing),
            other => Err(format!("unknown viewpoint `{other}`")),
        }
    }
}

/// Final output for one window-center query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult<T> {
    pub query_index: usize,
    pub ref_index: usize,
    /// Best sum over second-best sum; lower is more confident. Zero when no
    /// second-best candidate exists.
    pub score: T,
    pub viewpoint: Viewpoint,
    /// Line sum of the winning candidate.
    pub line_sum: T,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    /// No candidate line fits inside the reference range.
    #[error("insufficient references for any candidate line")]
    InsufficientReferences,
}

/// Winner of a one-matrix line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestLine<T> {
    pub ref_index: usize,
    pub best_sum: T,
    /// Lowest sum among candidates whose center reference lies outside the
    /// exclusion window; absent when no such candidate exists.
    pub second_best_sum: Option<T>,
}

/// Search the last `w` columns of `matrix` for the min-sum line.
///
/// For every center reference `r` and slope `v` (sign applied by
/// `slope_sign`), the candidate line is `j(t) = round(r + sign*v*(t - t_c))`
/// with `t_c` the window center; lines leaving the reference range are
/// rejected entirely so all candidate sums span equal-length windows. Ties
/// break to the smallest reference index, then the smallest slope.
pub fn sequence_best_line<T: Scalar>(
    matrix: &ColumnMatrix<T>,
    slope_sign: i32,
    params: &MatchingParams,
) -> Result<BestLine<T>, MatchError> {
    best_line_in_window(matrix, matrix.query_count(), slope_sign, params)
}

/// Smallest `r` in `[0, refs)` whose rounded line index `round(r + x)` is
/// at least 0, by binary search (the predicate is monotone in `r`).
fn first_in_lower_bound(refs: usize, x: f64) -> usize {
    let (mut lo, mut hi) = (0usize, refs);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if (mid as f64 + x).round() < 0.0 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One past the largest `r` in `[0, refs)` with `round(r + x) <= refs - 1`.
fn first_above_upper_bound(refs: usize, x: f64) -> usize {
    let (mut lo, mut hi) = (0usize, refs);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if (mid as f64 + x).round() <= (refs - 1) as f64 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// As [`sequence_best_line`] over the window ending at column `end`
/// (exclusive).
pub fn best_line_in_window<T: Scalar>(
    matrix: &ColumnMatrix<T>,
    end: usize,
    slope_sign: i32,
    params: &MatchingParams,
) -> Result<BestLine<T>, MatchError> {
    let w = params.w;
    assert!(end <= matrix.query_count(), "window end beyond available queries");
    assert!(end >= w, "need at least w query columns");
    assert!(slope_sign == 1 || slope_sign == -1, "slope sign must be +1 or -1");
    let refs = matrix.rows();
    let half = (w - 1) / 2;
    let t0 = end - w;
    let sign = slope_sign as f64;
    let slopes = params.slopes();

    // Loop order is slope, then window column, then center reference: for a
    // fixed (v, t), the line index round(r + v*dt) steps by exactly one per
    // reference (rounding is shift invariant away from .5 fractions), so the
    // inner accumulation walks both the column and the sums sequentially.
    let mut per_ref_best: Vec<Option<T>> = vec![None; refs];
    let mut acc: Vec<T> = vec![T::zero(); refs];
    for &v in &slopes {
        let sv = sign * v;
        // A line is a candidate only if it stays in bounds at both window
        // ends; rounding is monotone in dt, so the interior follows.
        let (mut lo, mut hi_excl) = (0usize, refs);
        for dt in [-(half as f64), half as f64] {
            let x = sv * dt;
            lo = lo.max(first_in_lower_bound(refs, x));
            hi_excl = hi_excl.min(first_above_upper_bound(refs, x));
        }
        if lo >= hi_excl {
            continue;
        }
        for slot in &mut acc[lo..hi_excl] {
            *slot = T::zero();
        }
        for t_local in 0..w {
            let dt = t_local as f64 - half as f64;
            let x = sv * dt;
            let col = matrix.column(t0 + t_local);
            // Near half-integer offsets, ties and float absorption in
            // r + x can break shift invariance (round moves away from zero
            // and r + x may collapse onto an exact half); fall back to
            // per-element rounding inside a guard band far wider than the
            // absorption zone yet far narrower than the slope grid.
            if (x.abs().fract() - 0.5).abs() < 1e-9 {
                for r in lo..hi_excl {
                    acc[r] += col[(r as f64 + x).round() as usize];
                }
            } else {
                let j_lo = (lo as f64 + x).round() as usize;
                debug_assert!(j_lo + (hi_excl - lo) <= refs);
                for (slot, &value) in acc[lo..hi_excl].iter_mut().zip(&col[j_lo..]) {
                    *slot += value;
                }
            }
        }
        for r in lo..hi_excl {
            if per_ref_best[r].is_none_or(|b| acc[r] < b) {
                per_ref_best[r] = Some(acc[r]);
            }
        }
    }

    let mut best: Option<(usize, T)> = None;
    for (r, sum) in per_ref_best.iter().enumerate() {
        if let Some(sum) = sum {
            if best.is_none_or(|(_, b)| *sum < b) {
                best = Some((r, *sum));
            }
        }
    }
    let (ref_index, best_sum) = best.ok_or(MatchError::InsufficientReferences)?;

    let excl = params.exclusion_half_width;
    let lo = ref_index.saturating_sub(excl);
    let hi = ref_index + excl;
    let mut second: Option<T> = None;
    for (r, sum) in per_ref_best.iter().enumerate() {
        if r >= lo && r <= hi {
            continue;
        }
        if let Some(sum) = sum {
            if second.is_none_or(|b| *sum < b) {
                second = Some(*sum);
            }
        }
    }

    Ok(BestLine { ref_index, best_sum, second_best_sum: second })
}

fn score_of<T: Scalar>(line: &BestLine<T>) -> T {
    match line.second_best_sum {
        Some(s2) if s2 > T::zero() => line.best_sum / s2,
        _ => T::zero(),
    }
}

fn center_query_index(query_count: usize, params: &MatchingParams) -> usize {
    query_count - 1 - params.edge_queries()
}

/// Double distance matrix matching: search `sim` with positive slopes and
/// `opp` with negative slopes; the lower best sum wins and fixes the
/// viewpoint hypothesis. Reports the query at the center of the last-w
/// window.
pub fn dd_match<T: Scalar>(
    matrices: &DistanceMatrices<T>,
    params: &MatchingParams,
) -> Result<MatchResult<T>, MatchError> {
    dd_match_at(matrices, matrices.query_count(), params)
}

pub fn dd_match_at<T: Scalar>(
    matrices: &DistanceMatrices<T>,
    end: usize,
    params: &MatchingParams,
) -> Result<MatchResult<T>, MatchError> {
    let sim = best_line_in_window(matrices.sim(), end, 1, params)?;
    let opp = best_line_in_window(matrices.opp(), end, -1, params)?;
    let (winner, viewpoint) = if sim.best_sum <= opp.best_sum {
        (sim, Viewpoint::Similar)
    } else {
        (opp, Viewpoint::Opposing)
    };
    Ok(MatchResult {
        query_index: center_query_index(end, params),
        ref_index: winner.ref_index,
        score: score_of(&winner),
        viewpoint,
        line_sum: winner.best_sum,
    })
}

/// Single-matrix sequence matching over the elementwise minimum of the two
/// matrices, evaluating both slope signs; the sign of the winning slope
/// fixes the viewpoint.
pub fn sm_match<T: Scalar>(
    matrices: &DistanceMatrices<T>,
    params: &MatchingParams,
) -> Result<MatchResult<T>, MatchError> {
    sm_match_at(matrices, matrices.query_count(), params)
}

pub fn sm_match_at<T: Scalar>(
    matrices: &DistanceMatrices<T>,
    end: usize,
    params: &MatchingParams,
) -> Result<MatchResult<T>, MatchError> {
    assert!(end >= params.w, "need at least w query columns");
    // Only the window can contribute; take the elementwise min there.
    let t0 = end - params.w;
    let merged = ColumnMatrix::from_columns(
        (t0..end)
            .map(|t| {
                matrices
                    .sim()
                    .column(t)
                    .iter()
                    .zip(matrices.opp().column(t))
                    .map(|(&a, &b)| a.min(b))
                    .collect()
            })
            .collect(),
    );
    let pos = best_line_in_window(&merged, params.w, 1, params)?;
    let neg = best_line_in_window(&merged, params.w, -1, params)?;
    let (winner, viewpoint) = if pos.best_sum <= neg.best_sum {
        (pos, Viewpoint::Similar)
    } else {
        (neg, Viewpoint::Opposing)
    };
    Ok(MatchResult {
        query_index: center_query_index(end, params),
        ref_index: winner.ref_index,
        score: score_of(&winner),
        viewpoint,
        line_sum: winner.best_sum,
    })
}

/// Nearest-neighbor matching over one column pair: global minimum across
/// both columns; ties prefer the similar viewpoint, then the smallest
/// reference index. The score is the minimum distance itself.
pub fn nn_match<T: Scalar>(cols: &DistanceColumnPair<T>) -> MatchResult<T> {
    assert!(!cols.sim.is_empty(), "columns must be non-empty");
    let argmin = |v: &[T]| {
        let mut best = 0usize;
        for (i, &x) in v.iter().enumerate() {
            if x < v[best] {
                best = i;
            }
        }
        best
    };
    let si = argmin(&cols.sim);
    let oi = argmin(&cols.opp);
    let (ref_index, score, viewpoint) = if cols.sim[si] <= cols.opp[oi] {
        (si, cols.sim[si], Viewpoint::Similar)
    } else {
        (oi, cols.opp[oi], Viewpoint::Opposing)
    };
    MatchResult { query_index: cols.query_index, ref_index, score, viewpoint, line_sum: score }
}

/// Per-row means of the grid; the flip of a descriptor has the reversed key.
pub fn retrieval_key<T: Scalar>(d: &CartContext<T>) -> Vec<T> {
    let inv_n = T::one() / T::from_f64_lossy(d.cols() as f64);
    (0..d.rows())
        .map(|i| d.row(i).iter().copied().sum::<T>() * inv_n)
        .collect()
}

/// Indices of the `top_k` references minimizing the Euclidean key distance,
/// taking the better of the query key and its reversal so opposing-view
/// references remain retrievable. Exact; equivalent to a linear scan.
pub fn rk_candidates<T: Scalar>(
    query: &CartContext<T>,
    ref_keys: &[Vec<T>],
    top_k: usize,
) -> Vec<usize> {
    assert!(!ref_keys.is_empty(), "reference key set must be non-empty");
    assert!(top_k >= 1, "top_k must be >= 1");
    let key = retrieval_key(query);
    let mut rev = key.clone();
    rev.reverse();
    let dist_sq = |a: &[T], b: &[T]| -> T {
        a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
    };
    let mut scored: Vec<(T, usize)> = ref_keys
        .iter()
        .enumerate()
        .map(|(i, rk)| (dist_sq(&key, rk).min(dist_sq(&rev, rk)), i))
        .collect();
    scored.sort_by(|a, b| a.partial_cmp(b).expect("key distances are comparable"));
    scored.truncate(top_k);
    scored.into_iter().map(|(_, i)| i).collect()
}
