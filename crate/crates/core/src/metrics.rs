//! Confusion accounting and the open-set evaluation metrics: accuracy, macro
//! F1 over all M+1 classes, macro F1 over the known classes, and F1 of the
//! open class.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class counts for classes `1..=num_classes` (stored at index `c - 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
    pub total: usize,
}

impl ConfusionCounts {
    pub fn num_classes(&self) -> usize {
        self.tp.len()
    }

    pub fn correct(&self) -> usize {
        self.tp.iter().sum()
    }
}

pub fn confusion(preds: &[usize], golds: &[usize], num_classes: usize) -> Result<ConfusionCounts> {
    if preds.len() != golds.len() {
        return Err(Error::Shape(format!("{} predictions for {} gold labels", preds.len(), golds.len())));
    }
    let mut c = ConfusionCounts {
        tp: vec![0; num_classes],
        fp: vec![0; num_classes],
        fn_: vec![0; num_classes],
        total: preds.len(),
    };
    for (&p, &g) in preds.iter().zip(golds) {
        for id in [p, g] {
            if id < 1 || id > num_classes {
                return Err(Error::ClassOutOfRange { id, max: num_classes });
            }
        }
        if p == g {
            c.tp[p - 1] += 1;
        } else {
            c.fp[p - 1] += 1;
            c.fn_[g - 1] += 1;
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision and recall of `class` (1-based); zero denominators give 0.
pub fn precision_recall(c: &ConfusionCounts, class: usize) -> (f64, f64) {
    let i = class - 1;
    (ratio(c.tp[i], c.tp[i] + c.fp[i]), ratio(c.tp[i], c.tp[i] + c.fn_[i]))
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn class_f1(c: &ConfusionCounts, class: usize) -> f64 {
    let (p, r) = precision_recall(c, class);
    f1_score(p, r)
}

/// Unweighted mean F1 over all M+1 classes.
pub fn f1_all(c: &ConfusionCounts) -> f64 {
    let n = c.num_classes();
    (1..=n).map(|k| class_f1(c, k)).sum::<f64>() / n as f64
}

/// Mean F1 over the known classes `1..=M` (the open class is the last one).
pub fn f1_known(c: &ConfusionCounts) -> f64 {
    let m = c.num_classes() - 1;
    (1..=m).map(|k| class_f1(c, k)).sum::<f64>() / m as f64
}

/// F1 of the open class M+1.
pub fn f1_open(c: &ConfusionCounts) -> f64 {
    class_f1(c, c.num_classes())
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    ratio(c.correct(), c.total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1_all: f64,
    pub f1_known: f64,
    pub f1_open: f64,
    pub per_class: Vec<ClassScores>,
    #[serde(rename = "M")]
    pub num_known: usize,
    pub examples: usize,
}

impl MetricsReport {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let per_class = (1..=c.num_classes())
            .map(|class| {
                let (precision, recall) = precision_recall(c, class);
                ClassScores {
                    class,
                    precision,
                    recall,
                    f1: f1_score(precision, recall),
                    tp: c.tp[class - 1],
                    fp: c.fp[class - 1],
                    fn_: c.fn_[class - 1],
                }
            })
            .collect();
        Self {
            accuracy: accuracy(c),
            f1_all: f1_all(c),
            f1_known: f1_known(c),
            f1_open: f1_open(c),
            per_class,
            num_known: c.num_classes() - 1,
            examples: c.total,
        }
    }

    /// Scores predictions over classes `1..=num_known + 1`.
    pub fn evaluate(preds: &[usize], golds: &[usize], num_known: usize) -> Result<Self> {
        Ok(Self::from_counts(&confusion(preds, golds, num_known + 1)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let g = [1, 2, 3, 3];
        let c = confusion(&g, &g, 3).unwrap();
        assert!(c.fp.iter().chain(&c.fn_).all(|&v| v == 0));
        let r = MetricsReport::from_counts(&c);
        assert_eq!((r.accuracy, r.f1_all, r.f1_known, r.f1_open), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_counted_confusion() {
        let c = confusion(&[1, 2, 2, 3], &[1, 1, 2, 3], 3).unwrap();
        assert_eq!((c.tp.clone(), c.fp.clone(), c.fn_.clone()), (vec![1, 1, 1], vec![0, 1, 0], vec![1, 0, 0]));
        let r = MetricsReport::from_counts(&c);
        assert!((r.f1_all - 7.0 / 9.0).abs() < 1e-15);
        assert!((r.f1_known - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.f1_open, 1.0);
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn empty_and_errors() {
        let c = confusion(&[], &[], 3).unwrap();
        assert_eq!(c.tp, vec![0, 0, 0]);
        assert_eq!(accuracy(&c), 0.0);
        assert!(confusion(&[1], &[], 3).is_err());
        assert!(matches!(confusion(&[4], &[1], 3), Err(Error::ClassOutOfRange { id: 4, .. })));
        assert!(confusion(&[0], &[1], 3).is_err());
    }

    #[test]
    fn precision_recall_conventions() {
        let c = ConfusionCounts { tp: vec![1, 0], fp: vec![1, 0], fn_: vec![1, 0], total: 3 };
        assert_eq!(precision_recall(&c, 1), (0.5, 0.5));
        assert_eq!(precision_recall(&c, 2), (0.0, 0.0));
        assert_eq!(class_f1(&c, 2), 0.0);
    }

    #[test]
    fn single_known_class_average() {
        let c = confusion(&[1, 2, 2], &[1, 1, 2], 2).unwrap();
        assert_eq!(f1_all(&c), (class_f1(&c, 1) + f1_open(&c)) / 2.0);
    }
}
