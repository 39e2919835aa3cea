//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use legalnli::Label;

pub struct OracleClass {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

pub struct OracleMetrics {
    pub accuracy: f64,
    pub classes: Vec<OracleClass>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

/// Counts true/false positives per class straight from the pairs, without a
/// confusion matrix. F1 uses 2tp / (2tp + fp + fn); empty denominators give 0.
pub fn oracle_metrics(gold: &[Label], pred: &[Label]) -> OracleMetrics {
    assert_eq!(gold.len(), pred.len());
    let n = gold.len();
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let classes: Vec<OracleClass> = Label::ALL
        .iter()
        .map(|&c| {
            let (mut tp, mut fp, mut fne) = (0, 0, 0);
            for i in 0..n {
                match (gold[i] == c, pred[i] == c) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fne += 1,
                    (false, false) => {}
                }
            }
            OracleClass {
                precision: div(tp, tp + fp),
                recall: div(tp, tp + fne),
                f1: div(2 * tp, 2 * tp + fp + fne),
                support: tp + fne,
            }
        })
        .collect();
    let mean = |f: &dyn Fn(&OracleClass) -> f64| classes.iter().map(f).sum::<f64>() / 3.0;
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    OracleMetrics {
        accuracy: div(correct, n),
        macro_precision: mean(&|c| c.precision),
        macro_recall: mean(&|c| c.recall),
        macro_f1: mean(&|c| c.f1),
        weighted_f1: if n == 0 {
            0.0
        } else {
            classes.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / n as f64
        },
        classes,
    }
}
