//! Confusion counts, ROC curves, AUC, partial AUC and the paired DeLong test.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{EvalError, IngestError};

pub const PAUC_SPEC_LO: f64 = 0.8;
pub const PAUC_SPEC_HI: f64 = 1.0;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    /// `tp / (tp + fn)`, or `None` without positives.
    pub fn sensitivity(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    /// `tn / (fp + tn)`, or `None` without negatives.
    pub fn specificity(&self) -> Option<f64> {
        let n = self.tn + self.fp;
        (n > 0).then(|| self.tn as f64 / n as f64)
    }
}

fn check_lengths(scores: usize, labels: usize) -> Result<(), EvalError> {
    if scores != labels {
        return Err(EvalError::LengthMismatch { scores, labels });
    }
    Ok(())
}

/// Predicts positive when `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Splits scores by label into (positives, negatives).
pub fn split_by_label(scores: &[f64], labels: &[bool]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    check_lengths(scores.len(), labels.len())?;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &y) in scores.iter().zip(labels) {
        if y {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    Ok((pos, neg))
}

fn check_classes(pos: &[f64], neg: &[f64]) -> Result<(), EvalError> {
    if pos.is_empty() {
        return Err(EvalError::NoPositives);
    }
    if neg.is_empty() {
        return Err(EvalError::NoNegatives);
    }
    Ok(())
}

/// 1-based midranks of `values` (ties share the mean of their ranks).
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Per-example placement values: for each positive, the fraction of
/// negatives it beats (ties 0.5); for each negative, the fraction of
/// positives that beat it.
fn placements(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (pos.len(), neg.len());
    let combined: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let all = midranks(&combined);
    let rp = midranks(pos);
    let rn = midranks(neg);
    let v10 = (0..m).map(|i| (all[i] - rp[i]) / n as f64).collect();
    let v01 = (0..n).map(|j| 1.0 - (all[m + j] - rn[j]) / m as f64).collect();
    (v10, v01)
}

/// Mann-Whitney estimate: share of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn auc(scores_pos: &[f64], scores_neg: &[f64]) -> Result<f64, EvalError> {
    check_classes(scores_pos, scores_neg)?;
    let (v10, _) = placements(scores_pos, scores_neg);
    Ok(v10.iter().sum::<f64>() / v10.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub one_minus_specificity: f64,
    pub sensitivity: f64,
}

/// Empirical ROC from `+inf` through every distinct score down to `-inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn new(scores_pos: &[f64], scores_neg: &[f64]) -> Result<Self, EvalError> {
        check_classes(scores_pos, scores_neg)?;
        let mut tagged: Vec<(f64, bool)> = scores_pos
            .iter()
            .map(|&s| (s, true))
            .chain(scores_neg.iter().map(|&s| (s, false)))
            .collect();
        tagged.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (m, n) = (scores_pos.len() as f64, scores_neg.len() as f64);
        let mut points = vec![RocPoint {
            threshold: f64::INFINITY,
            one_minus_specificity: 0.0,
            sensitivity: 0.0,
        }];
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut i = 0;
        while i < tagged.len() {
            let t = tagged[i].0;
            while i < tagged.len() && tagged[i].0 == t {
                if tagged[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            points.push(RocPoint {
                threshold: t,
                one_minus_specificity: fp as f64 / n,
                sensitivity: tp as f64 / m,
            });
        }
        points.push(RocPoint {
            threshold: f64::NEG_INFINITY,
            one_minus_specificity: 1.0,
            sensitivity: 1.0,
        });
        Ok(RocCurve { points })
    }

    /// Trapezoidal area over `one_minus_specificity` in `[x_lo, x_hi]`.
    pub fn area_between(&self, x_lo: f64, x_hi: f64) -> f64 {
        let mut area = 0.0;
        for w in self.points.windows(2) {
            let (x0, y0, x1, y1) = (
                w[0].one_minus_specificity,
                w[0].sensitivity,
                w[1].one_minus_specificity,
                w[1].sensitivity,
            );
            if x1 <= x0 {
                continue;
            }
            let a = x0.max(x_lo);
            let b = x1.min(x_hi);
            if b <= a {
                continue;
            }
            let at = |x: f64| y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            area += (b - a) * (at(a) + at(b)) / 2.0;
        }
        area
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        let csv_err = |source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = crate::ingest::csv_writer(path)?;
        w.write_record(["threshold", "one_minus_specificity", "sensitivity"])
            .map_err(csv_err)?;
        for p in &self.points {
            w.write_record([
                p.threshold.to_string(),
                p.one_minus_specificity.to_string(),
                p.sensitivity.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Unnormalised area under the ROC for specificity in `[spec_lo, spec_hi]`;
/// at most `spec_hi - spec_lo`.
pub fn partial_auc(scores_pos: &[f64], scores_neg: &[f64], spec_lo: f64, spec_hi: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&spec_lo) || !(0.0..=1.0).contains(&spec_hi) || spec_lo >= spec_hi {
        return Err(EvalError::SpecificityRange { lo: spec_lo, hi: spec_hi });
    }
    let roc = RocCurve::new(scores_pos, scores_neg)?;
    Ok(roc.area_between(1.0 - spec_hi, 1.0 - spec_lo))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub z: f64,
    pub p_value: f64,
}

impl DelongResult {
    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1) as f64
}

/// Paired DeLong test of `auc_a - auc_b` on the same labelled examples.
/// Two-sided p-value from the normal approximation.
pub fn delong_compare(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DelongResult, EvalError> {
    check_lengths(scores_b.len(), labels.len())?;
    let (pa, na) = split_by_label(scores_a, labels)?;
    let (pb, nb) = split_by_label(scores_b, labels)?;
    check_classes(&pa, &na)?;
    let (v10a, v01a) = placements(&pa, &na);
    let (v10b, v01b) = placements(&pb, &nb);
    let (m, n) = (pa.len() as f64, na.len() as f64);
    let auc_a = v10a.iter().sum::<f64>() / m;
    let auc_b = v10b.iter().sum::<f64>() / m;
    let var = (covariance(&v10a, &v10a) + covariance(&v10b, &v10b) - 2.0 * covariance(&v10a, &v10b)) / m
        + (covariance(&v01a, &v01a) + covariance(&v01b, &v01b) - 2.0 * covariance(&v01a, &v01b)) / n;
    let diff = auc_a - auc_b;
    if var <= f64::EPSILON * f64::EPSILON {
        if diff == 0.0 {
            return Ok(DelongResult {
                auc_a,
                auc_b,
                z: 0.0,
                p_value: 1.0,
            });
        }
        return Err(EvalError::DegenerateVariance { auc_a, auc_b });
    }
    let z = diff / var.sqrt();
    let normal = Normal::standard();
    let p_value = (2.0 * normal.sf(z.abs())).min(1.0);
    Ok(DelongResult { auc_a, auc_b, z, p_value })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: Confusion,
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub pauc: f64,
    pub roc: RocCurve,
}

/// Confusion at `threshold`, AUC, pAUC over specificity [0.8, 1] and the ROC.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvaluationReport, EvalError> {
    let confusion = confusion(scores, labels, threshold)?;
    let (pos, neg) = split_by_label(scores, labels)?;
    let roc = RocCurve::new(&pos, &neg)?;
    Ok(EvaluationReport {
        confusion,
        threshold,
        sensitivity: confusion.sensitivity().unwrap_or(0.0),
        specificity: confusion.specificity().unwrap_or(0.0),
        auc: auc(&pos, &neg)?,
        pauc: roc.area_between(1.0 - PAUC_SPEC_HI, 1.0 - PAUC_SPEC_LO),
        roc,
    })
}
