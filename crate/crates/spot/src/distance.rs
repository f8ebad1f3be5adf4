//! Descriptor distances.
//!
//! The primary metric is the variable-offset distance: the minimum cosine
//! distance over the overlapping submatrices produced by a set of integer
//! longitudinal/lateral grid shifts. Two aligned variants (`sc`, `cd`) cover
//! the ablation configurations, and [`query_distance_columns`] produces the
//! per-query column pair (original query vs references, double-flipped query
//! vs references) that feeds the distance matrices.
//!
//! [`VdBatch`] is the production path for variable-offset columns: it
//! pre-pads reference rows and caches per-shift patch norms so a query
//! column is a pure sweep of dot products. Its results are bit-identical to
//! [`vd_distance`] for non-negative descriptors (same accumulation order;
//! the padding only inserts `+0.0` no-ops).

use rayon::prelude::*;

use crate::descriptor::CartContext;
use crate::scalar::Scalar;

/// Integer grid shifts evaluated by the variable-offset distance.
///
/// Both sets must contain 0 so the unshifted overlap is always a candidate.
/// Values are kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftSet {
    s_lo: Vec<i32>,
    s_la: Vec<i32>,
}

impl ShiftSet {
    pub fn new(mut s_lo: Vec<i32>, mut s_la: Vec<i32>) -> Self {
        s_lo.sort_unstable();
        s_lo.dedup();
        s_la.sort_unstable();
        s_la.dedup();
        assert!(s_lo.contains(&0), "longitudinal shift set must contain 0");
        assert!(s_la.contains(&0), "lateral shift set must contain 0");
        Self { s_lo, s_la }
    }

    /// Symmetric ranges `[-lo, lo] x [-la, la]`.
    pub fn symmetric(lo: i32, la: i32) -> Self {
        assert!(lo >= 0 && la >= 0);
        Self::new((-lo..=lo).collect(), (-la..=la).collect())
    }

    pub fn longitudinal(&self) -> &[i32] {
        &self.s_lo
    }

    pub fn lateral(&self) -> &[i32] {
        &self.s_la
    }

    /// Number of (k, l) combinations.
    pub fn len(&self) -> usize {
        self.s_lo.len() * self.s_la.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn assert_fits(&self, rows: usize, cols: usize) {
        let max_lo = self.s_lo.iter().map(|k| k.unsigned_abs() as usize).max().unwrap();
        let max_la = self.s_la.iter().map(|l| l.unsigned_abs() as usize).max().unwrap();
        assert!(max_lo < rows, "longitudinal shift magnitude {max_lo} must be < {rows}");
        assert!(max_la < cols, "lateral shift magnitude {max_la} must be < {cols}");
    }
}

impl Default for ShiftSet {
    fn default() -> Self {
        Self::symmetric(2, 5)
    }
}

/// Descriptor distance selection for the pipeline and ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    /// Variable-offset minimum cosine distance over shifted overlaps.
    Vd,
    /// Aligning-key circular alignment, then mean column-wise cosine distance.
    Sc,
    /// Aligning-key circular alignment, then flat cosine distance.
    Cd,
}

/// One query's distances against every reference, for the original (`sim`)
/// and double-flipped (`opp`) query descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceColumnPair<T> {
    pub query_index: usize,
    pub sim: Vec<T>,
    pub opp: Vec<T>,
}

fn cosine_from_parts<T: Scalar>(dot: T, na_sq: T, nb_sq: T) -> T {
    if na_sq == T::zero() || nb_sq == T::zero() {
        // Zero-norm patches score maximal distance so empty regions cannot
        // produce spurious perfect matches.
        return T::one();
    }
    let cos = (dot / (na_sq * nb_sq).sqrt()).min(T::one());
    T::one() - cos
}

/// Cosine distance between two equally-shaped grids, flattened.
///
/// Returns 1 when either norm is zero; values lie in `[0, 1]` for
/// non-negative grids.
pub fn flat_cosine_distance<T: Scalar>(a: &CartContext<T>, b: &CartContext<T>) -> T {
    assert_eq!(
        (a.rows(), a.cols()),
        (b.rows(), b.cols()),
        "flat_cosine_distance requires equal shapes"
    );
    let (dot, na, nb) = fused_dot_norms(a.as_slice(), b.as_slice());
    cosine_from_parts(dot, na, nb)
}

fn fused_dot_norms<T: Scalar>(a: &[T], b: &[T]) -> (T, T, T) {
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    (dot, na, nb)
}

/// Variable-offset distance: minimum over `(k, l)` shifts of the cosine
/// distance between the overlapping submatrices of `q` and `r`.
pub fn vd_distance<T: Scalar>(q: &CartContext<T>, r: &CartContext<T>, shifts: &ShiftSet) -> T {
    assert_eq!((q.rows(), q.cols()), (r.rows(), r.cols()), "vd_distance requires equal shapes");
    shifts.assert_fits(q.rows(), q.cols());
    let mut best = T::infinity();
    for &k in shifts.longitudinal() {
        for &l in shifts.lateral() {
            let d = shifted_cosine_distance(q, r, k, l);
            if d < best {
                best = d;
            }
        }
    }
    best
}

fn shifted_cosine_distance<T: Scalar>(q: &CartContext<T>, r: &CartContext<T>, k: i32, l: i32) -> T {
    let (m, n) = (q.rows(), q.cols());
    let qi0 = (-k).max(0) as usize;
    let ri0 = k.max(0) as usize;
    let qj0 = (-l).max(0) as usize;
    let rj0 = l.max(0) as usize;
    let h = m - k.unsigned_abs() as usize;
    let w = n - l.unsigned_abs() as usize;
    let mut dot = T::zero();
    let mut nq = T::zero();
    let mut nr = T::zero();
    for a in 0..h {
        let qrow = &q.row(qi0 + a)[qj0..qj0 + w];
        let rrow = &r.row(ri0 + a)[rj0..rj0 + w];
        for (&x, &y) in qrow.iter().zip(rrow) {
            dot += x * y;
            nq += x * x;
            nr += y * y;
        }
    }
    cosine_from_parts(dot, nq, nr)
}

/// Squared norm of the query-side overlap patch for shift `(k, l)`.
fn patch_norm_sq_query_side<T: Scalar>(g: &CartContext<T>, k: i32, l: i32) -> T {
    patch_norm_sq(g, (-k).max(0) as usize, (-l).max(0) as usize, k, l)
}

/// Squared norm of the reference-side overlap patch for shift `(k, l)`.
fn patch_norm_sq_ref_side<T: Scalar>(g: &CartContext<T>, k: i32, l: i32) -> T {
    patch_norm_sq(g, k.max(0) as usize, l.max(0) as usize, k, l)
}

fn patch_norm_sq<T: Scalar>(g: &CartContext<T>, i0: usize, j0: usize, k: i32, l: i32) -> T {
    let h = g.rows() - k.unsigned_abs() as usize;
    let w = g.cols() - l.unsigned_abs() as usize;
    let mut acc = T::zero();
    for a in 0..h {
        for &x in &g.row(i0 + a)[j0..j0 + w] {
            acc += x * x;
        }
    }
    acc
}

/// Per-column sums used to align two grids before the `sc`/`cd` distances.
fn column_key<T: Scalar>(g: &CartContext<T>) -> Vec<T> {
    let mut key = vec![T::zero(); g.cols()];
    for i in 0..g.rows() {
        for (j, &x) in g.row(i).iter().enumerate() {
            key[j] += x;
        }
    }
    key
}

/// Circular column shift of `r` maximizing the cross-correlation of the two
/// column keys; ties break to the smallest non-negative shift.
fn best_circular_shift<T: Scalar>(qk: &[T], rk: &[T]) -> usize {
    let n = qk.len();
    let mut best_shift = 0;
    let mut best_corr = T::neg_infinity();
    for s in 0..n {
        let mut corr = T::zero();
        for j in 0..n {
            corr += qk[j] * rk[(j + s) % n];
        }
        if corr > best_corr {
            best_corr = corr;
            best_shift = s;
        }
    }
    best_shift
}

/// Aligning-key distance: align `r` to `q` with the best circular column
/// shift, then take the mean of the per-column cosine distances.
///
/// A column pair where exactly one side has zero norm contributes 1; both
/// zero contributes 0.
pub fn sc_distance<T: Scalar>(q: &CartContext<T>, r: &CartContext<T>) -> T {
    assert_eq!((q.rows(), q.cols()), (r.rows(), r.cols()), "sc_distance requires equal shapes");
    let n = q.cols();
    let shift = best_circular_shift(&column_key(q), &column_key(r));
    let mut total = T::zero();
    for j in 0..n {
        let rj = (j + shift) % n;
        let mut dot = T::zero();
        let mut na = T::zero();
        let mut nb = T::zero();
        for i in 0..q.rows() {
            let x = q.get(i, j);
            let y = r.get(i, rj);
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        let zero_a = na == T::zero();
        let zero_b = nb == T::zero();
        total += if zero_a && zero_b {
            T::zero()
        } else if zero_a || zero_b {
            T::one()
        } else {
            cosine_from_parts(dot, na, nb)
        };
    }
    total / T::from_f64_lossy(n as f64)
}

/// Aligning-key distance with a flat cosine over the aligned full grids.
pub fn cd_distance<T: Scalar>(q: &CartContext<T>, r: &CartContext<T>) -> T {
    assert_eq!((q.rows(), q.cols()), (r.rows(), r.cols()), "cd_distance requires equal shapes");
    let n = q.cols();
    let shift = best_circular_shift(&column_key(q), &column_key(r));
    let mut aligned = CartContext::zeros(r.rows(), n);
    for i in 0..r.rows() {
        for j in 0..n {
            aligned.set(i, j, r.get(i, (j + shift) % n));
        }
    }
    flat_cosine_distance(q, &aligned)
}

fn metric_distance<T: Scalar>(
    metric: DistanceMetric,
    q: &CartContext<T>,
    r: &CartContext<T>,
    shifts: &ShiftSet,
) -> T {
    match metric {
        DistanceMetric::Vd => vd_distance(q, r, shifts),
        DistanceMetric::Sc => sc_distance(q, r),
        DistanceMetric::Cd => cd_distance(q, r),
    }
}

/// Distances of one query against an ordered reference list, for the
/// original and the double-flipped query descriptor.
///
/// Per-reference computations are independent and run in parallel with
/// results collected in reference order, so the output does not depend on
/// the worker count.
pub fn query_distance_columns<T: Scalar>(
    query_index: usize,
    query: &CartContext<T>,
    refs: &[CartContext<T>],
    shifts: &ShiftSet,
    metric: DistanceMetric,
) -> DistanceColumnPair<T> {
    assert!(!refs.is_empty(), "reference list must be non-empty");
    let flipped = query.double_flip();
    let (sim, opp) = refs
        .par_iter()
        .map(|r| {
            (
                metric_distance(metric, query, r, shifts),
                metric_distance(metric, &flipped, r, shifts),
            )
        })
        .unzip();
    DistanceColumnPair { query_index, sim, opp }
}

/// Lane width of the vectorized lag kernel; lateral lag spans up to this
/// width take the fixed-width path, wider spans fall back to a dynamic loop.
const LAG_LANES: usize = 12;

/// A query preprocessed by [`VdBatch::prepare`].
pub struct PreparedQuery<T> {
    /// Nonzero (column, value) cells per grid row.
    rows_nz: Vec<Vec<(u32, T)>>,
    /// Query-side patch norms per (k, l) in engine order.
    norms: Vec<T>,
}

/// Batched variable-offset engine: references padded and norm-cached once,
/// then each query column is a sweep of sliding dot products.
pub struct VdBatch<T> {
    shifts: ShiftSet,
    rows: usize,
    cols: usize,
    lag_min: i32,
    lag_count: usize,
    padded_cols: usize,
    /// Per reference: rows of length `padded_cols` (zeros outside the grid).
    padded: Vec<Vec<T>>,
    /// Per reference: reference-side patch norms per (k, l), lo-major.
    ref_norms: Vec<Vec<T>>,
}

impl<T: Scalar> VdBatch<T> {
    pub fn new(refs: &[CartContext<T>], shifts: &ShiftSet) -> Self {
        assert!(!refs.is_empty(), "reference list must be non-empty");
        let rows = refs[0].rows();
        let cols = refs[0].cols();
        shifts.assert_fits(rows, cols);
        let lag_min = *shifts.lateral().first().unwrap();
        let lag_max = *shifts.lateral().last().unwrap();
        let lag_count = (lag_max - lag_min) as usize + 1;
        let pad_left = (-lag_min).max(0) as usize;
        // Right padding covers the widest window the fixed-lane kernel reads.
        let window = lag_count.max(LAG_LANES);
        let padded_cols = pad_left + cols + window;
        let padded = refs
            .iter()
            .map(|r| {
                assert_eq!((r.rows(), r.cols()), (rows, cols), "all references must share shape");
                let mut buf = vec![T::zero(); rows * padded_cols];
                for i in 0..rows {
                    buf[i * padded_cols + pad_left..i * padded_cols + pad_left + cols]
                        .copy_from_slice(r.row(i));
                }
                buf
            })
            .collect();
        let ref_norms = refs
            .iter()
            .map(|r| {
                shifts
                    .longitudinal()
                    .iter()
                    .flat_map(|&k| {
                        shifts.lateral().iter().map(move |&l| (k, l))
                    })
                    .map(|(k, l)| patch_norm_sq_ref_side(r, k, l))
                    .collect()
            })
            .collect();
        Self { shifts: shifts.clone(), rows, cols, lag_min, lag_count, padded_cols, padded, ref_norms }
    }

    pub fn len(&self) -> usize {
        self.padded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.padded.is_empty()
    }

    /// Preprocess a query descriptor for repeated [`VdBatch::distance_to`]
    /// calls: per-row nonzero cells plus the per-shift patch norms.
    pub fn prepare(&self, query: &CartContext<T>) -> PreparedQuery<T> {
        assert_eq!((query.rows(), query.cols()), (self.rows, self.cols));
        let rows_nz = (0..self.rows)
            .map(|i| {
                query
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != T::zero())
                    .map(|(b, &v)| (b as u32, v))
                    .collect()
            })
            .collect();
        let norms = self
            .shifts
            .longitudinal()
            .iter()
            .flat_map(|&k| self.shifts.lateral().iter().map(move |&l| (k, l)))
            .map(|(k, l)| patch_norm_sq_query_side(query, k, l))
            .collect();
        PreparedQuery { rows_nz, norms }
    }

    /// Distance of a prepared query to reference `index`; equals
    /// `vd_distance(query, refs[index], shifts)` bit-for-bit on non-negative
    /// grids (skipped zero cells and pad reads only ever add +0.0).
    pub fn distance_to(&self, query: &PreparedQuery<T>, index: usize) -> T {
        let padded = &self.padded[index];
        let norms = &self.ref_norms[index];
        let mut best = T::infinity();
        let mut dots = [T::zero(); LAG_LANES];
        let mut dots_wide = vec![T::zero(); self.lag_count];
        let wide = self.lag_count > LAG_LANES;
        for (ki, &k) in self.shifts.longitudinal().iter().enumerate() {
            let qi0 = (-k).max(0) as usize;
            let ri0 = k.max(0) as usize;
            let h = self.rows - k.unsigned_abs() as usize;
            // Sliding windows over the zero-padded reference row accumulate
            // every lateral lag at once; the left padding equals -lag_min,
            // so the window for query column b starts at offset b.
            if wide {
                dots_wide.iter_mut().for_each(|d| *d = T::zero());
                for a in 0..h {
                    let row_start = (ri0 + a) * self.padded_cols;
                    for &(b, qv) in &query.rows_nz[qi0 + a] {
                        let start = row_start + b as usize;
                        let window = &padded[start..start + self.lag_count];
                        for (dot, &rv) in dots_wide.iter_mut().zip(window) {
                            *dot += qv * rv;
                        }
                    }
                }
            } else {
                dots = [T::zero(); LAG_LANES];
                for a in 0..h {
                    let row_start = (ri0 + a) * self.padded_cols;
                    for &(b, qv) in &query.rows_nz[qi0 + a] {
                        let start = row_start + b as usize;
                        let window: &[T; LAG_LANES] =
                            padded[start..start + LAG_LANES].try_into().unwrap();
                        for i in 0..LAG_LANES {
                            dots[i] += qv * window[i];
                        }
                    }
                }
            }
            for (li, &l) in self.shifts.lateral().iter().enumerate() {
                let lane = (l - self.lag_min) as usize;
                let dot = if wide { dots_wide[lane] } else { dots[lane] };
                let shift_idx = ki * self.shifts.lateral().len() + li;
                let d = cosine_from_parts(dot, query.norms[shift_idx], norms[shift_idx]);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Column pair for one query descriptor against all references.
    pub fn columns(&self, query_index: usize, query: &CartContext<T>) -> DistanceColumnPair<T> {
        let prepared = self.prepare(query);
        let flipped = self.prepare(&query.double_flip());
        let (sim, opp) = (0..self.padded.len())
            .into_par_iter()
            .map(|i| (self.distance_to(&prepared, i), self.distance_to(&flipped, i)))
            .unzip();
        DistanceColumnPair { query_index, sim, opp }
    }
}
