use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy and macro-F1 over three classes.
///
/// A class absent from both predictions and labels scores F1 = 0 and still
/// counts toward the mean.
pub fn metrics(predictions: &[usize], labels: &[usize]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::dim("metrics", &[predictions.len()], &[labels.len()]));
    }
    if labels.is_empty() {
        return Err(Error::contract("metrics", "no examples"));
    }
    let mut tp = [0usize; NUM_CLASSES];
    let mut fp = [0usize; NUM_CLASSES];
    let mut fn_ = [0usize; NUM_CLASSES];
    let mut correct = 0;
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= NUM_CLASSES || y >= NUM_CLASSES {
            return Err(Error::contract("metrics", format!("class index out of range: ({p}, {y})")));
        }
        if p == y {
            tp[p] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    let f1_sum: f64 = (0..NUM_CLASSES)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(Metrics {
        accuracy: correct as f64 / labels.len() as f64,
        macro_f1: f1_sum / NUM_CLASSES as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = metrics(&[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        assert_eq!((m.accuracy, m.macro_f1), (1.0, 1.0));
    }

    #[test]
    fn constant_prediction_worked_example() {
        let m = metrics(&[0, 0, 0], &[0, 1, 2]).unwrap();
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
        // Class 0: P = 1/3, R = 1, F1 = 0.5; the others score 0.
        assert!((m.macro_f1 - 0.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let m = metrics(&[0, 1], &[0, 1]).unwrap();
        assert!((m.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(metrics(&[], &[]).is_err());
        assert!(metrics(&[0], &[0, 1]).is_err());
        assert!(metrics(&[3], &[0]).is_err());
    }
}
