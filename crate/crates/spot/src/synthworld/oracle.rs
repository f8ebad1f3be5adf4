//! Literal, unoptimized reference implementations used to cross-check the
//! production distance and sequence-matching code. These deliberately share
//! no code with the optimized paths.

use crate::descriptor::CartContext;
use crate::matching::{ColumnMatrix, MatchError, MatchingParams};
use crate::scalar::Scalar;

use crate::distance::ShiftSet;

/// Variable-offset distance by explicit enumeration: for every `(k, l)`
/// shift, copy out both overlap submatrices, compute their cosine distance,
/// and take the minimum.
pub fn oracle_vd<T: Scalar>(q: &CartContext<T>, r: &CartContext<T>, shifts: &ShiftSet) -> T {
    assert_eq!((q.rows(), q.cols()), (r.rows(), r.cols()), "oracle_vd requires equal shapes");
    let (m, n) = (q.rows() as i64, q.cols() as i64);
    let mut best = T::infinity();
    for &k in shifts.longitudinal() {
        for &l in shifts.lateral() {
            let (k, l) = (k as i64, l as i64);
            assert!(k.abs() < m && l.abs() < n, "shift magnitude must be below dimension");
            // 1-based corner indices as printed, then converted to 0-based.
            let i_q = (1).max(-k + 1) - 1;
            let j_q = (1).max(-l + 1) - 1;
            let i_r = (1).max(k + 1) - 1;
            let j_r = (1).max(l + 1) - 1;
            let h = m - k.abs();
            let w = n - l.abs();
            let qs = copy_patch(q, i_q as usize, j_q as usize, h as usize, w as usize);
            let rs = copy_patch(r, i_r as usize, j_r as usize, h as usize, w as usize);
            let d = cosine_distance_vecs(&qs, &rs);
            if d < best {
                best = d;
            }
        }
    }
    best
}

fn copy_patch<T: Scalar>(g: &CartContext<T>, i0: usize, j0: usize, h: usize, w: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(h * w);
    for a in 0..h {
        for b in 0..w {
            out.push(g.get(i0 + a, j0 + b));
        }
    }
    out
}

fn cosine_distance_vecs<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut dot = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
    }
    let mut na = T::zero();
    for &x in a {
        na += x * x;
    }
    let mut nb = T::zero();
    for &y in b {
        nb += y * y;
    }
    if na == T::zero() || nb == T::zero() {
        return T::one();
    }
    T::one() - dot / (na.sqrt() * nb.sqrt())
}

/// Sequence line search by a literal triple loop over center reference,
/// slope, and window column, with no pruning, window copying, or
/// parallelism. Returns `(ref_index, best_sum)` and must agree exactly with
/// the production search.
pub fn oracle_sequence<T: Scalar>(
    matrix: &ColumnMatrix<T>,
    slope_sign: i32,
    params: &MatchingParams,
) -> Result<(usize, T), MatchError> {
    let w = params.w;
    let end = matrix.query_count();
    assert!(end >= w, "need at least w query columns");
    let refs = matrix.rows();
    let t0 = end - w;
    let t_c = end - 1 - (w - 1) / 2;
    let sign = slope_sign as f64;

    let mut best: Option<(usize, T)> = None;
    for r in 0..refs {
        for i in 0..params.n_v {
            let v = if params.n_v == 1 {
                params.v_min
            } else {
                params.v_min + i as f64 * (params.v_max - params.v_min) / (params.n_v - 1) as f64
            };
            let sv = sign * v;
            let mut sum = T::zero();
            let mut valid = true;
            for t in t0..end {
                let j = (r as f64 + sv * (t as f64 - t_c as f64)).round();
                if j < 0.0 || j >= refs as f64 {
                    valid = false;
                    break;
                }
                sum += matrix.value(j as usize, t);
            }
            if valid && best.is_none_or(|(_, b)| sum < b) {
                best = Some((r, sum));
            }
        }
    }
    best.ok_or(MatchError::InsufficientReferences)
}
