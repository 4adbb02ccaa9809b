//! Classification and clustering scores.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    #[default]
    Macro,
    Micro,
}

/// Per-class F1 = 2·tp / (2·tp + fp + fn). A class with no true and no
/// predicted members scores 0.
pub fn per_class_f1(predictions: &[usize], truth: &[usize], k: usize) -> Result<Vec<f64>> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predictions.len() });
    }
    if truth.is_empty() {
        return Err(Error::Empty("f1 input"));
    }
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::InvalidParameter(format!("class index outside 0..{k}")));
        }
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    Ok((0..k)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                warn!("class {c} absent from both truth and predictions; F1 taken as 0");
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .collect())
}

/// Unweighted mean of per-class F1.
pub fn macro_f1(predictions: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    let f = per_class_f1(predictions, truth, k)?;
    Ok(f.iter().sum::<f64>() / k as f64)
}

/// Micro-averaged F1; for single-label classification this equals accuracy.
pub fn micro_f1(predictions: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    per_class_f1(predictions, truth, k)?;
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

pub fn f1(predictions: &[usize], truth: &[usize], k: usize, average: F1Average) -> Result<f64> {
    match average {
        F1Average::Macro => macro_f1(predictions, truth, k),
        F1Average::Micro => micro_f1(predictions, truth, k),
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let total = choose2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
