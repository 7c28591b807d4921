//! Evaluation against ground truth: square losses, calibration deviation (WDev),
//! area under the precision-recall curve and coverage.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Mean of `(p - truth)^2` over keys present in both maps. `None` on empty overlap.
///
/// Used for value truth (over `(d, v)` candidates), extraction correctness (over
/// `(w, d, v)`) and source accuracy (over `w`, with a real-valued truth).
pub fn square_loss<K: Ord>(predicted: &BTreeMap<K, f64>, truth: &BTreeMap<K, f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, t) in truth {
        if let Some(p) = predicted.get(k) {
            sum += (p - t) * (p - t);
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Lower bounds of the calibration buckets: hundredths below 0.05 and from 0.95,
/// twentieths in between, and a final bucket holding exactly 1.
pub const BUCKET_LOWER: [f64; 29] = [
    0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55,
    0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.96, 0.97, 0.98, 0.99, 1.0,
];

/// Index of the calibration bucket holding `p` (clamped into `[0, 1]`).
pub fn bucket_index(p: f64) -> usize {
    let p = p.clamp(0.0, 1.0);
    BUCKET_LOWER.partition_point(|lo| *lo <= p) - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBucket {
    pub lo: f64,
    pub hi: f64,
    pub predicted_mean: f64,
    pub empirical_accuracy: f64,
    pub count: usize,
}

/// Per-bucket mean prediction and empirical accuracy over keys present in both maps.
/// Empty buckets are omitted.
pub fn calibration<K: Ord>(predicted: &BTreeMap<K, f64>, truth: &BTreeMap<K, f64>) -> Vec<CalibrationBucket> {
    let mut sums = [(0.0f64, 0.0f64, 0usize); 29];
    for (k, t) in truth {
        if let Some(&p) = predicted.get(k) {
            let b = &mut sums[bucket_index(p)];
            b.0 += p;
            b.1 += t;
            b.2 += 1;
        }
    }
    sums.iter()
        .enumerate()
        .filter(|(_, s)| s.2 > 0)
        .map(|(i, &(p, t, c))| CalibrationBucket {
            lo: BUCKET_LOWER[i],
            hi: if i + 1 < BUCKET_LOWER.len() { BUCKET_LOWER[i + 1] } else { 1.0 },
            predicted_mean: p / c as f64,
            empirical_accuracy: t / c as f64,
            count: c,
        })
        .collect()
}

/// Count-weighted mean squared gap between bucket mean prediction and bucket accuracy.
pub fn wdev<K: Ord>(predicted: &BTreeMap<K, f64>, truth: &BTreeMap<K, f64>) -> Option<f64> {
    wdev_from_buckets(&calibration(predicted, truth))
}

pub fn wdev_from_buckets(buckets: &[CalibrationBucket]) -> Option<f64> {
    let total: usize = buckets.iter().map(|b| b.count).sum();
    if total == 0 {
        return None;
    }
    let sum: f64 = buckets
        .iter()
        .map(|b| b.count as f64 * (b.predicted_mean - b.empirical_accuracy).powi(2))
        .sum();
    Some(sum / total as f64)
}

/// `(recall, precision)` at every distinct score, from the highest score down.
/// `None` when there are no positives.
pub fn pr_curve<K: Ord>(predicted: &BTreeMap<K, f64>, truth: &BTreeMap<K, f64>) -> Option<Vec<(f64, f64)>> {
    let mut scored: Vec<(f64, bool)> = truth
        .iter()
        .filter_map(|(k, t)| predicted.get(k).map(|p| (*p, *t > 0.5)))
        .collect();
    let positives = scored.iter().filter(|s| s.1).count();
    if positives == 0 {
        return None;
    }
    // Stable: ties keep key order.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let score = scored[i].0;
        while i < scored.len() && scored[i].0 == score {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64));
    }
    Some(points)
}

/// Trapezoidal area under PR points, anchored at recall 0 with the first point's precision.
pub fn area_under_pr(points: &[(f64, f64)]) -> f64 {
    let Some(&(_, first_precision)) = points.first() else {
        return 0.0;
    };
    let mut area = 0.0;
    let mut prev = (0.0, first_precision);
    for &(r, p) in points {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

pub fn auc_pr<K: Ord>(predicted: &BTreeMap<K, f64>, truth: &BTreeMap<K, f64>) -> Option<f64> {
    pr_curve(predicted, truth).map(|pts| area_under_pr(&pts))
}

/// Fraction of `all` for which a probability was produced. `None` when `all` is empty.
pub fn coverage(evaluated: usize, all: usize) -> Option<f64> {
    (all > 0).then(|| evaluated as f64 / all as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sqv: Option<f64>,
    pub sqc: Option<f64>,
    pub sqa: Option<f64>,
    pub wdev: Option<f64>,
    pub auc_pr: Option<f64>,
    pub cov: Option<f64>,
    pub calibration_buckets: Vec<CalibrationBucket>,
    pub pr_points: Vec<(f64, f64)>,
    pub evaluated: usize,
}

impl EvalReport {
    /// Value-level metrics over `(d, v)` candidates.
    ///
    /// `predicted` holds the covered candidates, `truth` the labelled ones and
    /// `all_candidates` the size of the candidate universe for coverage.
    pub fn for_values<K: Ord>(
        predicted: &BTreeMap<K, f64>,
        truth: &BTreeMap<K, f64>,
        all_candidates: usize,
    ) -> Self {
        let buckets = calibration(predicted, truth);
        let evaluated = truth.keys().filter(|k| predicted.contains_key(k)).count();
        let pr = pr_curve(predicted, truth);
        EvalReport {
            sqv: square_loss(predicted, truth),
            wdev: wdev_from_buckets(&buckets),
            auc_pr: pr.as_deref().map(area_under_pr),
            cov: coverage(predicted.len(), all_candidates),
            calibration_buckets: buckets,
            pr_points: pr.unwrap_or_default(),
            evaluated,
            ..Default::default()
        }
    }

    /// Flat `key=value` text; absent metrics are written as `NA`.
    pub fn to_text(&self) -> String {
        let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6}"));
        let mut s = String::new();
        for (k, v) in [
            ("sqv", self.sqv),
            ("sqc", self.sqc),
            ("sqa", self.sqa),
            ("wdev", self.wdev),
            ("auc_pr", self.auc_pr),
            ("cov", self.cov),
        ] {
            let _ = writeln!(s, "{k}={}", f(v));
        }
        let _ = writeln!(s, "evaluated={}", self.evaluated);
        s
    }

    pub fn calibration_csv(&self) -> String {
        let mut s = String::from("lo,hi,predicted_mean,empirical_accuracy,count\n");
        for b in &self.calibration_buckets {
            let _ = writeln!(
                s,
                "{:.2},{:.2},{:.6},{:.6},{}",
                b.lo, b.hi, b.predicted_mean, b.empirical_accuracy, b.count
            );
        }
        s
    }

    pub fn pr_csv(&self) -> String {
        let mut s = String::from("recall,precision\n");
        for (r, p) in &self.pr_points {
            let _ = writeln!(s, "{r:.6},{p:.6}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps(pred: &[f64], truth: &[f64]) -> (BTreeMap<usize, f64>, BTreeMap<usize, f64>) {
        (
            pred.iter().copied().enumerate().collect(),
            truth.iter().copied().enumerate().collect(),
        )
    }

    #[test]
    fn square_loss_examples() {
        let (p, t) = maps(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]);
        assert_eq!(square_loss(&p, &t), Some(0.0));
        let (p, t) = maps(&[0.6], &[1.0]);
        assert!((square_loss(&p, &t).unwrap() - 0.16).abs() < 1e-15);
        let (p, t) = maps(&[0.5, 0.5], &[1.0, 0.0]);
        assert_eq!(square_loss(&p, &t), Some(0.25));
        let empty: BTreeMap<usize, f64> = BTreeMap::new();
        assert_eq!(square_loss(&p, &empty), None);
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(bucket_index(0.0), 0);
        assert_eq!(bucket_index(0.0099), 0);
        assert_eq!(bucket_index(0.01), 1);
        assert_eq!(bucket_index(0.049), 4);
        assert_eq!(bucket_index(0.05), 5);
        assert_eq!(bucket_index(0.5), 14);
        assert_eq!(bucket_index(0.549), 14);
        assert_eq!(bucket_index(0.95), 23);
        assert_eq!(bucket_index(0.955), 23);
        assert_eq!(bucket_index(0.99), 27);
        assert_eq!(bucket_index(0.99999), 27);
        assert_eq!(bucket_index(1.0), 28);
    }

    #[test]
    fn wdev_examples() {
        let (p, t) = maps(&[1.0; 4], &[1.0; 4]);
        assert_eq!(wdev(&p, &t), Some(0.0));
        let (p, t) = maps(&[0.5; 4], &[1.0, 0.0, 1.0, 0.0]);
        assert!(wdev(&p, &t).unwrap().abs() < 1e-15);
        let (p, t) = maps(&[0.95; 3], &[0.0; 3]);
        assert!((wdev(&p, &t).unwrap() - 0.9025).abs() < 1e-12);
    }

    #[test]
    fn auc_pr_examples() {
        let (p, t) = maps(&[0.9, 0.8, 0.3, 0.1], &[1.0, 1.0, 0.0, 0.0]);
        assert!((auc_pr(&p, &t).unwrap() - 1.0).abs() < 1e-15);
        let (p, t) = maps(&[0.4; 5], &[1.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((auc_pr(&p, &t).unwrap() - 0.4).abs() < 1e-15);
        let (p, t) = maps(&[0.4; 3], &[0.0; 3]);
        assert_eq!(auc_pr(&p, &t), None);
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage(4, 4), Some(1.0));
        assert_eq!(coverage(3, 4), Some(0.75));
        assert_eq!(coverage(0, 0), None);
    }

    #[test]
    fn report_text_has_all_keys() {
        let (p, t) = maps(&[0.9, 0.2], &[1.0, 0.0]);
        let r = EvalReport::for_values(&p, &t, 2);
        let text = r.to_text();
        for key in ["sqv=", "sqc=NA", "sqa=NA", "wdev=", "auc_pr=1.000000", "cov=1.000000"] {
            assert!(text.contains(key), "{text}");
        }
        assert!(r.calibration_csv().starts_with("lo,hi"));
    }
}
