//! ROC AUC from raw scores and F1 from hard predictions.

use crate::error::{invalid, mismatch, Result, RgpError};
use crate::Label;

/// Which label counts as positive for precision/recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositiveClass {
    #[default]
    Abnormal,
    Normal,
}

impl PositiveClass {
    fn is_positive(self, l: Label) -> bool {
        match self {
            PositiveClass::Abnormal => l.is_abnormal(),
            PositiveClass::Normal => !l.is_abnormal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub auc: Option<f64>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl EvalResult {
    /// Fixed-order `key=value` lines.
    pub fn to_report(&self) -> String {
        let auc = self.auc.map_or_else(|| "nan".to_string(), |a| format!("{a:.6}"));
        format!(
            "auc={auc}\nf1={:.6}\nprecision={:.6}\nrecall={:.6}\ntp={}\nfp={}\ntn={}\nfn={}\n",
            self.f1, self.precision, self.recall, self.tp, self.fp, self.tn, self.fn_
        )
    }
}

/// Probability that a random abnormal row outscores a random normal row,
/// ties counting one half. Computed from mid-ranks in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(mismatch(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(RgpError::Numerical("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|l| l.is_abnormal()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(invalid("AUC needs both normal and abnormal labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += mid * order[i..=j].iter().filter(|&&r| labels[r].is_abnormal()).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Confusion counts, precision, recall and F1 with abnormal as positive.
pub fn f1(predictions: &[Label], labels: &[Label]) -> Result<EvalResult> {
    f1_with(predictions, labels, PositiveClass::Abnormal)
}

pub fn f1_with(predictions: &[Label], labels: &[Label], positive: PositiveClass) -> Result<EvalResult> {
    if predictions.len() != labels.len() {
        return Err(mismatch(format!("{} predictions but {} labels", predictions.len(), labels.len())));
    }
    if predictions.is_empty() {
        return Err(invalid("F1 needs at least one row"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (positive.is_positive(p), positive.is_positive(l)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    // Same as 2pr/(p+r), but exact in the counts.
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(EvalResult { auc: None, f1, precision, recall, tp, fp, tn, fn_ })
}

/// F1 of the predictions plus AUC of the raw scores (absent when only one
/// class is present).
pub fn evaluate(scores: &[f64], predictions: &[Label], labels: &[Label]) -> Result<EvalResult> {
    let mut r = f1(predictions, labels)?;
    r.auc = match auc(scores, labels) {
        Ok(a) => Some(a),
        Err(RgpError::InvalidArgument(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(r)
}
