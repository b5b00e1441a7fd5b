//! Binary classification by dot product with an attribute vector ("AtDot"),
//! with threshold fitting, ROC/AUC and reporting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attributes::{attribute_vector, balanced_attribute_vector, AttributeVector};
use crate::error::{Error, Result};
use crate::latent::{check_dims, dot, LatentDataset, LatentVector};

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

pub fn atdot_score(z: &LatentVector, v: &AttributeVector) -> Result<f64> {
    check_dims(z, &v.direction)?;
    Ok(dot(z.as_slice(), v.direction.as_slice()))
}

fn require_both_classes(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Midpoint that lies strictly below `hi` whenever `lo < hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Threshold maximizing balanced accuracy under the rule `score > t ⇒ positive`.
///
/// Candidates are −∞, the midpoints between consecutive distinct scores,
/// and +∞; the smallest candidate wins ties.
pub fn fit_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = require_both_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Below every score: everything predicted positive.
    let (mut fn_, mut tn) = (0usize, 0usize);
    let balanced =
        |fn_: usize, tn: usize| ((pos - fn_) as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0;
    let mut best_t = f64::NEG_INFINITY;
    let mut best = balanced(0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                fn_ += 1;
            } else {
                tn += 1;
            }
            k += 1;
        }
        let t = if k < order.len() {
            midpoint(s, scores[order[k]])
        } else {
            f64::INFINITY
        };
        let ba = balanced(fn_, tn);
        if ba > best {
            best = ba;
            best_t = t;
        }
    }
    Ok(best_t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores ≥ this value are predicted positive at this point.
    #[serde(with = "extended_f64")]
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC sweep over distinct scores in descending order; a group of tied
/// scores is one (diagonal) step. AUC is the trapezoid area, accumulated
/// in integer counts so it matches the Mann–Whitney statistic.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    check_lengths(scores, labels)?;
    let (pos, neg) = require_both_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of 1 / (pos · neg).
    let mut area2: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        });
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(Roc { points, auc })
}

/// Trapezoid area under a list of ROC points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub positive: Vec<u64>,
    pub negative: Vec<u64>,
}

/// Per-class counts over `bins` uniform bins spanning the combined range.
pub fn histogram(scores: &[f64], labels: &[bool], bins: usize) -> Result<Histogram> {
    check_lengths(scores, labels)?;
    if bins == 0 || scores.is_empty() {
        return Err(Error::InsufficientData(
            "histogram needs bins and scores".into(),
        ));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut positive = vec![0; bins];
    let mut negative = vec![0; bins];
    for (&s, &l) in scores.iter().zip(labels) {
        let b = (((s - lo) / width).floor() as usize).min(bins - 1);
        if l {
            positive[b] += 1;
        } else {
            negative[b] += 1;
        }
    }
    Ok(Histogram {
        edges,
        positive,
        negative,
    })
}

/// How the attribute vector is obtained from the training split.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum VectorSource {
    Naive,
    Balanced {
        confound: String,
    },
    /// A vector derived elsewhere (e.g. a synthetic vector from training features).
    Precomputed(AttributeVector),
}

impl VectorSource {
    pub fn label(&self) -> String {
        match self {
            VectorSource::Naive => "naive".into(),
            VectorSource::Balanced { confound } => format!("balanced({confound})"),
            VectorSource::Precomputed(v) => v.method.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvaluateOptions {
    /// Subtract the training mean from every latent before scoring.
    pub centered: bool,
    pub bins: usize,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            centered: false,
            bins: DEFAULT_HISTOGRAM_BINS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub attribute: String,
    pub method: String,
    pub centered: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub vector: AttributeVector,
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
    pub histogram: Histogram,
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ClassifierReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.roc {
            let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let h = &self.histogram;
        let mut out = String::from("bin_lo,bin_hi,positive,negative\n");
        for i in 0..h.positive.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                h.edges[i],
                h.edges[i + 1],
                h.positive[i],
                h.negative[i]
            );
        }
        out
    }
}

/// Labelled rows of `ds` for `attr` as (row index, label), missing skipped.
fn known_rows(ds: &LatentDataset, attr: &str) -> Result<Vec<(usize, bool)>> {
    Ok(ds
        .attribute(attr)?
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.known().map(|b| (i, b)))
        .collect())
}

fn dataset_mean(ds: &LatentDataset) -> Vec<f64> {
    let mut m = vec![0.0; ds.dim()];
    for row in ds.rows() {
        m.iter_mut().zip(row).for_each(|(a, x)| *a += x);
    }
    m.iter_mut().for_each(|a| *a /= ds.len() as f64);
    m
}

fn scores_for(
    ds: &LatentDataset,
    rows: &[(usize, bool)],
    dir: &[f64],
    center: Option<&[f64]>,
) -> Vec<f64> {
    rows.iter()
        .map(|&(i, _)| match center {
            None => dot(ds.row(i), dir),
            Some(c) => ds
                .row(i)
                .iter()
                .zip(c)
                .zip(dir)
                .map(|((x, m), d)| (x - m) * d)
                .sum(),
        })
        .collect()
}

/// Derives the vector and threshold on `train`, then scores `test`.
pub fn evaluate_attribute(
    train: &LatentDataset,
    test: &LatentDataset,
    attr: &str,
    source: &VectorSource,
    options: EvaluateOptions,
) -> Result<ClassifierReport> {
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    let vector = match source {
        VectorSource::Naive => attribute_vector(train, attr)?,
        VectorSource::Balanced { confound } => balanced_attribute_vector(train, attr, confound)?,
        VectorSource::Precomputed(v) => {
            if v.dim() != train.dim() {
                return Err(Error::DimensionMismatch {
                    expected: train.dim(),
                    found: v.dim(),
                });
            }
            v.clone()
        }
    };
    let dir = vector.direction.as_slice();
    let center = options.centered.then(|| dataset_mean(train));

    let train_rows = known_rows(train, attr)?;
    let train_labels: Vec<bool> = train_rows.iter().map(|r| r.1).collect();
    let train_scores = scores_for(train, &train_rows, dir, center.as_deref());
    let threshold = fit_threshold(&train_scores, &train_labels)?;

    let test_rows = known_rows(test, attr)?;
    let labels: Vec<bool> = test_rows.iter().map(|r| r.1).collect();
    let scores = scores_for(test, &test_rows, dir, center.as_deref());
    let (pos, neg) = require_both_classes(&labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&s, &l) in scores.iter().zip(&labels) {
        match (s > threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = labels.len() as f64;
    let roc = roc_auc(&scores, &labels)?;
    let histogram = histogram(&scores, &labels, options.bins)?;
    Ok(ClassifierReport {
        attribute: attr.into(),
        method: source.label(),
        centered: options.centered,
        n_train: train_rows.len(),
        n_test: test_rows.len(),
        vector,
        threshold,
        tp,
        fp,
        tn,
        fn_,
        accuracy: (tp + tn) as f64 / n,
        balanced_accuracy: (tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0,
        auc: roc.auc,
        roc: roc.points,
        histogram,
        ids: test_rows
            .iter()
            .map(|&(i, _)| test.ids()[i].clone())
            .collect(),
        scores,
        labels,
    })
}

/// Accuracy table with one row per attribute and one column per method,
/// values in whole percent, followed by a column-wise average.
pub fn accuracy_table(reports: &[ClassifierReport]) -> String {
    let mut attributes: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !attributes.contains(&r.attribute.as_str()) {
            attributes.push(&r.attribute);
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let lookup = |a: &str, m: &str| {
        reports
            .iter()
            .find(|r| r.attribute == a && r.method == m)
            .map(|r| r.accuracy)
    };
    let head = "Approach / Attribute";
    let w0 = attributes
        .iter()
        .map(|a| a.len())
        .max()
        .unwrap_or(0)
        .max(head.len());
    let widths: Vec<usize> = methods.iter().map(|m| m.len().max(5)).collect();
    let mut out = String::new();
    let _ = write!(out, "{head:<w0$}");
    for (m, w) in methods.iter().zip(&widths) {
        let _ = write!(out, " | {m:>w$}");
    }
    out.push('\n');
    let rule = w0 + widths.iter().map(|w| w + 3).sum::<usize>();
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    let mut sums = vec![(0.0, 0usize); methods.len()];
    for a in &attributes {
        let _ = write!(out, "{a:<w0$}");
        for (k, (m, w)) in methods.iter().zip(&widths).enumerate() {
            match lookup(a, m) {
                Some(acc) => {
                    sums[k].0 += acc;
                    sums[k].1 += 1;
                    let _ = write!(out, " | {:>w$}", (acc * 100.0).round() as i64);
                }
                None => {
                    let _ = write!(out, " | {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    let _ = write!(out, "{:<w0$}", "Average");
    for ((sum, count), w) in sums.iter().zip(&widths) {
        if *count == 0 {
            let _ = write!(out, " | {:>w$}", "-");
        } else {
            let _ = write!(
                out,
                " | {:>w$}",
                (sum / *count as f64 * 100.0).round() as i64
            );
        }
    }
    out.push('\n');
    out
}

/// Serializes ±∞ as the strings "inf" / "-inf"; finite values as numbers.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("invalid number `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::attributes::{AttributeMeta, Method};
    use crate::latent::{Label, Prior};

    fn vector(xs: &[f64]) -> AttributeVector {
        AttributeVector {
            name: "smile".into(),
            direction: LatentVector::new(xs.to_vec()).unwrap(),
            method: Method::Naive,
            meta: AttributeMeta::default(),
        }
    }

    #[test]
    fn score_basics() {
        let z = LatentVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(atdot_score(&z, &vector(&[3.0, -1.0])).unwrap(), 1.0);
        assert_eq!(atdot_score(&z, &vector(&[2.0, -1.0])).unwrap(), 0.0);
        assert!(atdot_score(&z, &vector(&[1.0])).is_err());
    }

    #[test]
    fn threshold_two_points() {
        assert_eq!(fit_threshold(&[-1.0, 1.0], &[false, true]).unwrap(), 0.0);
        assert!(matches!(
            fit_threshold(&[1.0, 2.0], &[true, true]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn threshold_inverted_labels_prefers_smallest() {
        // Every cut is worse than or equal to predicting all positive.
        let t = fit_threshold(&[1.0, 2.0], &[true, false]).unwrap();
        assert_eq!(t, f64::NEG_INFINITY);
    }

    #[test]
    fn midpoint_never_reaches_upper() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert!(midpoint(lo, hi) < hi);
        assert_eq!(midpoint(-1.0, 1.0), 0.0);
    }

    #[test]
    fn roc_perfect_and_degenerate() {
        let r = roc_auc(&[2.0, 3.0, 0.0, 1.0], &[true, true, false, false]).unwrap();
        assert_eq!(r.auc, 1.0);
        let first = r.points.first().unwrap();
        let last = r.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        let flat = roc_auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points.len(), 2);
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[0.0, 1.0, 2.0, 2.0], &[true, false, true, false], 2).unwrap();
        assert_eq!(h.edges, vec![0.0, 1.0, 2.0]);
        assert_eq!(h.positive, vec![1, 1]);
        assert_eq!(h.negative, vec![0, 2]);
        let flat = histogram(&[3.0, 3.0], &[true, false], 4).unwrap();
        assert_eq!(flat.positive.iter().sum::<u64>(), 1);
    }

    #[test]
    fn single_pair_is_perfect() {
        let ds = LatentDataset::new(
            vec![
                LatentVector::new(vec![1.0, 0.5]).unwrap(),
                LatentVector::new(vec![-0.5, 0.2]).unwrap(),
            ],
            None,
            BTreeMap::from([("smile".to_string(), vec![Label::Positive, Label::Negative])]),
            Prior::Gaussian,
        )
        .unwrap();
        let r = evaluate_attribute(
            &ds,
            &ds,
            "smile",
            &VectorSource::Naive,
            EvaluateOptions::default(),
        )
        .unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.tp + r.tn, 2);
        assert_eq!(r.auc, 1.0);
    }

    #[test]
    fn report_json_handles_infinite_threshold() {
        let p = RocPoint {
            fpr: 0.0,
            tpr: 0.0,
            threshold: f64::INFINITY,
        };
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<RocPoint>(&s).unwrap(), p);
    }

    #[test]
    fn table_layout() {
        let ds = LatentDataset::new(
            vec![
                LatentVector::new(vec![1.0]).unwrap(),
                LatentVector::new(vec![-1.0]).unwrap(),
            ],
            None,
            BTreeMap::from([("smile".to_string(), vec![Label::Positive, Label::Negative])]),
            Prior::Gaussian,
        )
        .unwrap();
        let r = evaluate_attribute(
            &ds,
            &ds,
            "smile",
            &VectorSource::Naive,
            EvaluateOptions::default(),
        )
        .unwrap();
        let table = accuracy_table(&[r]);
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[0].starts_with("Approach / Attribute"));
        assert!(lines[0].ends_with("naive"));
        assert!(lines[2].starts_with("smile"));
        assert!(lines[2].ends_with("100"));
        assert!(lines[4].starts_with("Average"));
    }
}
