//! Classification metrics: accuracy, support-weighted precision and F1,
//! macro recall, and support-weighted one-vs-rest ROC-AUC.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Instance;
use crate::error::{Error, Result};
use crate::losses::{cross_entropy, softmax};
use crate::model::MultimodalModel;
use crate::numkit::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_macro: f64,
    pub f1_weighted: f64,
    pub auc_weighted: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub n_eval: usize,
}

/// Mann-Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counted one half.
pub fn roc_auc_binary(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::Shape {
            context: "auc labels",
            expected: scores.len(),
            actual: positives.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auc scores"));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput(
            "auc needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // 1-based average ranks over tie groups
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if positives[k] {
                pos_rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Accuracy, weighted precision, macro recall and weighted F1 from a
/// confusion matrix. Classes without support carry no weight; an empty
/// predicted column has precision 0.
pub fn confusion_metrics(confusion: &[Vec<usize>]) -> (f64, f64, f64, f64) {
    let j = confusion.len();
    let n: usize = confusion.iter().flatten().sum();
    if n == 0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let correct: usize = (0..j).map(|c| confusion[c][c]).sum();
    let mut prec_w = 0.0;
    let mut f1_w = 0.0;
    let mut recall_sum = 0.0;
    let mut supported = 0;
    for c in 0..j {
        let support: usize = confusion[c].iter().sum();
        if support == 0 {
            continue;
        }
        supported += 1;
        let predicted: usize = (0..j).map(|r| confusion[r][c]).sum();
        let tp = confusion[c][c] as f64;
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = tp / support as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let w = support as f64 / n as f64;
        prec_w += w * precision;
        f1_w += w * f1;
        recall_sum += recall;
    }
    (
        correct as f64 / n as f64,
        prec_w,
        recall_sum / supported as f64,
        f1_w,
    )
}

/// Metrics from per-class scores (`probs[i][k]`) and true labels.
pub fn score_predictions(probs: &Matrix, labels: &[usize]) -> Result<EvalResult> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    if probs.rows() != labels.len() {
        return Err(Error::Shape {
            context: "evaluation labels",
            expected: probs.rows(),
            actual: labels.len(),
        });
    }
    let j = probs.cols();
    let mut confusion = vec![vec![0usize; j]; j];
    for (r, &y) in labels.iter().enumerate() {
        if y >= j {
            return Err(Error::InvalidInput(alloc::format!("label {y} outside 0..{j}")));
        }
        confusion[y][argmax(probs.row(r))] += 1;
    }
    let (accuracy, precision_weighted, recall_macro, f1_weighted) = confusion_metrics(&confusion);

    let n = labels.len();
    let mut auc_sum = 0.0;
    let mut auc_weight = 0usize;
    for c in 0..j {
        let support = labels.iter().filter(|&&y| y == c).count();
        if support == 0 || support == n {
            continue;
        }
        let scores: Vec<f64> = (0..n).map(|r| probs.get(r, c)).collect();
        let pos: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        auc_sum += support as f64 * roc_auc_binary(&scores, &pos)?;
        auc_weight += support;
    }
    let auc_weighted = if auc_weight == 0 {
        0.5
    } else {
        auc_sum / auc_weight as f64
    };
    Ok(EvalResult {
        accuracy,
        precision_weighted,
        recall_macro,
        f1_weighted,
        auc_weighted,
        confusion,
        n_eval: n,
    })
}

/// Zero-fill inference on `test`; also returns the mean cross-entropy.
pub fn evaluate_with_loss(model: &MultimodalModel, test: &[Instance]) -> Result<(EvalResult, f64)> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let logits = model.predict_batch(test)?;
    let labels: Vec<usize> = test.iter().map(|i| i.label).collect();
    let (loss, _) = cross_entropy(&logits, &labels)?;
    Ok((score_predictions(&softmax(&logits), &labels)?, loss))
}

pub fn evaluate(model: &MultimodalModel, test: &[Instance]) -> Result<EvalResult> {
    evaluate_with_loss(model, test).map(|(r, _)| r)
}
