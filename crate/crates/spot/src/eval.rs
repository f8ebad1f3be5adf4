//! Query labelling and precision-recall metrics.
//!
//! A query is accepted when it has an emitted match with score at or below
//! the threshold. Accepted queries are true positives when the matched
//! reference lies within the localization radius `r_m` of the query's
//! ground-truth position, false positives otherwise. Unaccepted queries are
//! false negatives when any reference lies within `r_m`, true negatives
//! otherwise. Window-edge queries have no emitted match and therefore are
//! never accepted.

use crate::io::GroundTruthTrack;

/// A matched reference for one query: index, score, and the reference's
/// ground-truth position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeMatch {
    pub ref_index: usize,
    pub score: f64,
    pub matched_pos: [f64; 2],
}

/// One query's outcome: its position and the emitted match, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOutcome {
    pub query_index: usize,
    pub query_pos: [f64; 2],
    pub matched: Option<OutcomeMatch>,
}

/// Label counts at one threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    pub fn precision(&self) -> f64 {
        let accepted = self.true_positives + self.false_positives;
        if accepted == 0 {
            1.0
        } else {
            self.true_positives as f64 / accepted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let matchable = self.true_positives + self.false_negatives;
        if matchable == 0 {
            0.0
        } else {
            self.true_positives as f64 / matchable as f64
        }
    }
}

fn planar_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn has_reference_within(track: &GroundTruthTrack, pos: [f64; 2], r_m: f64) -> bool {
    track.positions().iter().any(|&p| planar_distance(pos, p) <= r_m)
}

/// Classify every query at one score threshold.
pub fn label_queries(
    outcomes: &[QueryOutcome],
    ref_track: &GroundTruthTrack,
    threshold: f64,
    r_m: f64,
) -> Counts {
    assert!(r_m > 0.0, "localization radius must be positive");
    let mut counts = Counts::default();
    for outcome in outcomes {
        match outcome.matched {
            Some(m) if m.score <= threshold => {
                if planar_distance(outcome.query_pos, m.matched_pos) <= r_m {
                    counts.true_positives += 1;
                } else {
                    counts.false_positives += 1;
                }
            }
            _ => {
                if has_reference_within(ref_track, outcome.query_pos, r_m) {
                    counts.false_negatives += 1;
                } else {
                    counts.true_negatives += 1;
                }
            }
        }
    }
    counts
}

/// One precision-recall point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision-recall curve over the unique emitted match scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub r_m: f64,
}

/// Sweep the score threshold over every unique emitted score.
///
/// With no emitted matches the curve holds only the conventional
/// zero-recall, full-precision endpoint.
pub fn pr_curve(outcomes: &[QueryOutcome], ref_track: &GroundTruthTrack, r_m: f64) -> PrCurve {
    let mut thresholds: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.matched.map(|m| m.score))
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("scores are comparable"));
    thresholds.dedup();

    if thresholds.is_empty() {
        return PrCurve {
            points: vec![PrPoint { threshold: f64::NEG_INFINITY, precision: 1.0, recall: 0.0 }],
            r_m,
        };
    }

    let points = thresholds
        .into_iter()
        .map(|threshold| {
            let counts = label_queries(outcomes, ref_track, threshold, r_m);
            PrPoint { threshold, precision: counts.precision(), recall: counts.recall() }
        })
        .collect();
    PrCurve { points, r_m }
}

/// Maximum recall among points with precision exactly 1; 0 when none.
pub fn mr100(curve: &PrCurve) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.precision == 1.0)
        .map(|p| p.recall)
        .fold(0.0, f64::max)
}

/// Trapezoidal area under precision over recall, with the curve extended
/// horizontally from its lowest-recall point to recall 0.
pub fn auc(curve: &PrCurve) -> f64 {
    if curve.points.is_empty() {
        return 0.0;
    }
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite recalls"));
    let mut area = 0.0;
    let mut prev = (0.0, pts[0].1);
    for &(r, p) in &pts {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(positions: &[[f64; 2]]) -> GroundTruthTrack {
        GroundTruthTrack::new(positions.to_vec())
    }

    fn matched(query_index: usize, pos: [f64; 2], ref_index: usize, score: f64, ref_pos: [f64; 2]) -> QueryOutcome {
        QueryOutcome {
            query_index,
            query_pos: pos,
            matched: Some(OutcomeMatch { ref_index, score, matched_pos: ref_pos }),
        }
    }

    fn unmatched(query_index: usize, pos: [f64; 2]) -> QueryOutcome {
        QueryOutcome { query_index, query_pos: pos, matched: None }
    }

    #[test]
    fn table_labels() {
        let refs = track(&[[0.0, 0.0], [1000.0, 0.0]]);
        // Accepted match 10 m away with r_m = 15 is a true positive.
        let c = label_queries(&[matched(0, [10.0, 0.0], 0, 0.1, [0.0, 0.0])], &refs, 0.5, 15.0);
        assert_eq!(c.true_positives, 1);
        // Accepted match 50 m away is a false positive.
        let c = label_queries(&[matched(0, [50.0, 0.0], 0, 0.1, [0.0, 0.0])], &refs, 0.5, 15.0);
        assert_eq!(c.false_positives, 1);
        // Unaccepted query with the nearest reference 200 m away is a true
        // negative.
        let c = label_queries(&[unmatched(0, [200.0, 200.0])], &refs, 0.5, 15.0);
        assert_eq!(c.true_negatives, 1);
        // Unaccepted query with a reference in range is a false negative.
        let c = label_queries(&[unmatched(0, [5.0, 0.0])], &refs, 0.5, 15.0);
        assert_eq!(c.false_negatives, 1);
        // Match above threshold is not accepted.
        let c = label_queries(&[matched(0, [10.0, 0.0], 0, 0.9, [0.0, 0.0])], &refs, 0.5, 15.0);
        assert_eq!(c.false_negatives, 1);
    }

    fn three_score_outcomes() -> (Vec<QueryOutcome>, GroundTruthTrack) {
        // Three queries, all matchable: scores 0.1 (correct), 0.2 (correct),
        // 0.3 (incorrect, matched reference 500 m off).
        let refs = track(&[[0.0, 0.0], [10.0, 0.0], [500.0, 0.0]]);
        let outcomes = vec![
            matched(0, [1.0, 0.0], 0, 0.1, [0.0, 0.0]),
            matched(1, [10.0, 0.0], 1, 0.2, [10.0, 0.0]),
            matched(2, [2.0, 0.0], 2, 0.3, [500.0, 0.0]),
        ];
        (outcomes, refs)
    }

    #[test]
    fn pr_curve_hand_case() {
        let (outcomes, refs) = three_score_outcomes();
        let curve = pr_curve(&outcomes, &refs, 15.0);
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.points[0].precision, 1.0);
        assert!((curve.points[0].recall - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(curve.points[1].precision, 1.0);
        assert!((curve.points[1].recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((curve.points[2].precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((mr100(&curve) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_correct_match_curve() {
        let refs = track(&[[0.0, 0.0], [100.0, 0.0]]);
        let outcomes = vec![matched(0, [1.0, 0.0], 0, 0.4, [0.0, 0.0]), unmatched(1, [99.0, 0.0])];
        let curve = pr_curve(&outcomes, &refs, 15.0);
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].precision, 1.0);
        assert_eq!(curve.points[0].recall, 0.5);
    }

    #[test]
    fn empty_matches_conventional_endpoint() {
        let refs = track(&[[0.0, 0.0]]);
        let outcomes = vec![unmatched(0, [1.0, 0.0])];
        let curve = pr_curve(&outcomes, &refs, 15.0);
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].precision, 1.0);
        assert_eq!(curve.points[0].recall, 0.0);
        assert_eq!(mr100(&curve), 0.0);
        assert_eq!(auc(&curve), 0.0);
    }

    #[test]
    fn all_matches_incorrect_gives_zero_mr100() {
        let refs = track(&[[0.0, 0.0], [500.0, 0.0]]);
        let outcomes = vec![matched(0, [1.0, 0.0], 1, 0.1, [500.0, 0.0])];
        let curve = pr_curve(&outcomes, &refs, 15.0);
        assert_eq!(mr100(&curve), 0.0);
    }

    #[test]
    fn auc_trapezoid_examples() {
        let curve = PrCurve {
            points: vec![
                PrPoint { threshold: 0.1, precision: 1.0, recall: 0.0 },
                PrPoint { threshold: 0.2, precision: 1.0, recall: 0.5 },
                PrPoint { threshold: 0.3, precision: 0.5, recall: 1.0 },
            ],
            r_m: 15.0,
        };
        assert_eq!(auc(&curve), 0.875);

        let single = PrCurve {
            points: vec![PrPoint { threshold: 0.1, precision: 1.0, recall: 1.0 }],
            r_m: 15.0,
        };
        assert_eq!(auc(&single), 1.0);
    }

    /// Brute-force recount that classifies each query independently of
    /// `label_queries`.
    fn recount(
        outcomes: &[QueryOutcome],
        refs: &GroundTruthTrack,
        threshold: f64,
        r_m: f64,
    ) -> Counts {
        let mut c = Counts::default();
        for o in outcomes {
            let accepted = matches!(&o.matched, Some(m) if m.score <= threshold);
            if accepted {
                let m = o.matched.as_ref().unwrap();
                let dx = o.query_pos[0] - m.matched_pos[0];
                let dy = o.query_pos[1] - m.matched_pos[1];
                if (dx * dx + dy * dy).sqrt() <= r_m {
                    c.true_positives += 1;
                } else {
                    c.false_positives += 1;
                }
            } else {
                let mut matchable = false;
                for p in refs.positions() {
                    let dx = o.query_pos[0] - p[0];
                    let dy = o.query_pos[1] - p[1];
                    if (dx * dx + dy * dy).sqrt() <= r_m {
                        matchable = true;
                        break;
                    }
                }
                if matchable {
                    c.false_negatives += 1;
                } else {
                    c.true_negatives += 1;
                }
            }
        }
        c
    }

    proptest! {
        #[test]
        fn counts_conserve_and_match_recount(
            specs in proptest::collection::vec(
                (0.0f64..100.0, 0.0f64..1.0, 0usize..6, prop::bool::ANY),
                1..60,
            ),
            threshold in 0.0f64..1.0,
        ) {
            let refs = track(&[[0.0, 0.0], [20.0, 0.0], [40.0, 0.0], [60.0, 0.0], [80.0, 0.0], [100.0, 0.0]]);
            let outcomes: Vec<QueryOutcome> = specs
                .iter()
                .enumerate()
                .map(|(i, &(x, score, ref_idx, has_match))| {
                    if has_match {
                        matched(i, [x, 0.0], ref_idx, score, refs.get(ref_idx).unwrap())
                    } else {
                        unmatched(i, [x, 0.0])
                    }
                })
                .collect();
            let counts = label_queries(&outcomes, &refs, threshold, 15.0);
            prop_assert_eq!(counts.total(), outcomes.len());
            prop_assert_eq!(counts, recount(&outcomes, &refs, threshold, 15.0));
        }

        #[test]
        fn accepted_set_grows_with_threshold(
            scores in proptest::collection::vec(0.0f64..1.0, 1..40),
            t1 in 0.0f64..1.0,
            t2 in 0.0f64..1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let refs = track(&[[0.0, 0.0]]);
            let outcomes: Vec<QueryOutcome> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| matched(i, [1.0, 0.0], 0, s, [0.0, 0.0]))
                .collect();
            let a = label_queries(&outcomes, &refs, lo, 15.0);
            let b = label_queries(&outcomes, &refs, hi, 15.0);
            prop_assert!(b.true_positives + b.false_positives >= a.true_positives + a.false_positives);
        }
    }
}
