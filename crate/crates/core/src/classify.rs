//! Three-class error classification and scoring against ground-truth classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rpe::ErrorSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Low,
    Medium,
    High,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 3] = [ErrorClass::Low, ErrorClass::Medium, ErrorClass::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Low => "low",
            ErrorClass::Medium => "medium",
            ErrorClass::High => "high",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which class a value exactly on a boundary belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// `e >= c` moves up a class.
    #[default]
    PromoteUp,
    /// `e > c` moves up a class.
    KeepLow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct ClassBoundaries {
    c1: f64,
    c2: f64,
}

impl ClassBoundaries {
    pub const FIVE_TEN: ClassBoundaries = ClassBoundaries { c1: 0.05, c2: 0.10 };
    pub const TWO_TEN: ClassBoundaries = ClassBoundaries { c1: 0.02, c2: 0.10 };
    pub const TWO_FIVE: ClassBoundaries = ClassBoundaries { c1: 0.02, c2: 0.05 };

    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1 < c2 && c2.is_finite()) {
            return Err(Error::validation(format!(
                "class boundaries must satisfy 0 < c1 < c2, got ({c1}, {c2})"
            )));
        }
        Ok(ClassBoundaries { c1, c2 })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn class_of(&self, e: f64, rule: BoundaryRule) -> ErrorClass {
        let above = |c: f64| match rule {
            BoundaryRule::PromoteUp => e >= c,
            BoundaryRule::KeepLow => e > c,
        };
        if above(self.c2) {
            ErrorClass::High
        } else if above(self.c1) {
            ErrorClass::Medium
        } else {
            ErrorClass::Low
        }
    }
}

impl Default for ClassBoundaries {
    fn default() -> Self {
        Self::FIVE_TEN
    }
}

impl TryFrom<[f64; 2]> for ClassBoundaries {
    type Error = Error;

    fn try_from([c1, c2]: [f64; 2]) -> Result<Self> {
        ClassBoundaries::new(c1, c2)
    }
}

impl From<ClassBoundaries> for [f64; 2] {
    fn from(b: ClassBoundaries) -> Self {
        [b.c1, b.c2]
    }
}

impl FromStr for ClassBoundaries {
    type Err = Error;

    /// `"0.05,0.10"` in meters.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("expected 'c1,c2' in meters, got '{s}'"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let c1 = a.trim().parse().map_err(|_| bad())?;
        let c2 = b.trim().parse().map_err(|_| bad())?;
        ClassBoundaries::new(c1, c2)
    }
}

pub fn classify(series: &ErrorSeries, bounds: &ClassBoundaries) -> Vec<ErrorClass> {
    classify_with(series, bounds, BoundaryRule::default())
}

pub fn classify_with(series: &ErrorSeries, bounds: &ClassBoundaries, rule: BoundaryRule) -> Vec<ErrorClass> {
    series.values.iter().map(|&e| bounds.class_of(e, rule)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Averaging {
    /// Unweighted mean over classes present in the ground truth.
    #[default]
    Macro,
    /// Mean weighted by each class's ground-truth support.
    Weighted,
}

/// Counts indexed `[actual][predicted]`.
pub type ConfusionMatrix = [[u64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub sensitivity_avg: f64,
    pub specificity_avg: f64,
    pub confusion: ConfusionMatrix,
}

fn mean_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Scores `predicted` against `actual` per class (one-vs-rest) and averages.
///
/// Recall and F1 are averaged over classes that occur in `actual`;
/// specificity over classes that have at least one actual negative.
pub fn score(predicted: &[ErrorClass], actual: &[ErrorClass]) -> Result<ScoreReport> {
    score_with(predicted, actual, F1Averaging::default())
}

pub fn score_with(predicted: &[ErrorClass], actual: &[ErrorClass], averaging: F1Averaging) -> Result<ScoreReport> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions vs {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut confusion: ConfusionMatrix = [[0; 3]; 3];
    for (p, a) in predicted.iter().zip(actual) {
        confusion[a.index()][p.index()] += 1;
    }
    Ok(report_from_confusion(confusion, averaging))
}

#[allow(clippy::needless_range_loop)]
pub fn report_from_confusion(confusion: ConfusionMatrix, averaging: F1Averaging) -> ScoreReport {
    let total: u64 = confusion.iter().flatten().sum();
    let correct: u64 = (0..3).map(|c| confusion[c][c]).sum();

    let mut recalls = Vec::new();
    let mut specificities = Vec::new();
    let mut f1s = Vec::new();
    let mut supports = Vec::new();
    for c in 0..3 {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = (0..3).map(|a| confusion[a][c]).sum();
        let fn_ = support - tp;
        let fp = predicted - tp;
        let tn = total - support - fp;
        if support > 0 {
            recalls.push(tp as f64 / support as f64);
            f1s.push(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
            supports.push(support as f64);
        }
        if tn + fp > 0 {
            specificities.push(tn as f64 / (tn + fp) as f64);
        }
    }
    let f1 = match averaging {
        F1Averaging::Macro => mean_of(&f1s),
        F1Averaging::Weighted => {
            f1s.iter().zip(&supports).map(|(f, s)| f * s).sum::<f64>() / supports.iter().sum::<f64>()
        }
    };
    ScoreReport {
        accuracy: correct as f64 / total as f64,
        f1_macro: f1,
        sensitivity_avg: mean_of(&recalls),
        specificity_avg: mean_of(&specificities),
        confusion,
    }
}

/// Unweighted mean of every metric across sequences; confusions are summed.
pub fn score_sequences(reports: &[ScoreReport]) -> Result<ScoreReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    let avg = |f: fn(&ScoreReport) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
    let mut confusion: ConfusionMatrix = [[0; 3]; 3];
    for r in reports {
        for (row, add) in confusion.iter_mut().zip(&r.confusion) {
            for (cell, v) in row.iter_mut().zip(add) {
                *cell += v;
            }
        }
    }
    Ok(ScoreReport {
        accuracy: avg(|r| r.accuracy),
        f1_macro: avg(|r| r.f1_macro),
        sensitivity_avg: avg(|r| r.sensitivity_avg),
        specificity_avg: avg(|r| r.specificity_avg),
        confusion,
    })
}
