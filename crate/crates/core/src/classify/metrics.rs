use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub f1: f64,
}

/// Accuracy and F1 of the positive class (label 1). F1 is 0 when precision
/// and recall are both 0.
pub fn f1_and_accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<Scores> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("no labels to score"));
    }
    if y_true.iter().chain(y_pred).any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        correct += usize::from(t == p);
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => {}
        }
    }
    // 2PR/(P+R) = 2TP/(2TP+FP+FN)
    let denom = 2 * tp + fp + fn_;
    let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    Ok(Scores {
        accuracy: correct as f64 / y_true.len() as f64,
        f1,
    })
}
