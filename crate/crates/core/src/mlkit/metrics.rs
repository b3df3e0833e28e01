use super::{MlError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(MlError::LengthMismatch(predicted.len(), truth.len()));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                (0, 0) => c.tn += 1,
                (p, t) => return Err(MlError::InvalidLabel(p.max(t))),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn false_negative_rate(&self) -> Option<f64> {
        ratio(self.fn_, self.tp + self.fn_)
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }
}

/// `None` marks an undefined value (zero denominator).
fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

pub fn binary_metrics(c: &Confusion) -> BinaryMetrics {
    BinaryMetrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        ppv: ratio(c.tp, c.tp + c.fp),
        npv: ratio(c.tn, c.tn + c.fn_),
    }
}

/// The six reported columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub auroc: Option<f64>,
}

impl MetricSet {
    pub const NAMES: [&'static str; 6] = ["Accuracy", "Sensitivity", "Specificity", "PPV", "NPV", "AUROC"];

    pub fn new(m: BinaryMetrics, auroc: Option<f64>) -> Self {
        Self { accuracy: m.accuracy, sensitivity: m.sensitivity, specificity: m.specificity, ppv: m.ppv, npv: m.npv, auroc }
    }

    pub fn values(&self) -> [Option<f64>; 6] {
        [self.accuracy, self.sensitivity, self.specificity, self.ppv, self.npv, self.auroc]
    }

    fn from_values(v: [Option<f64>; 6]) -> Self {
        Self { accuracy: v[0], sensitivity: v[1], specificity: v[2], ppv: v[3], npv: v[4], auroc: v[5] }
    }

    /// Column means over the defined entries; `None` when a column has none.
    pub fn mean_of(sets: &[MetricSet]) -> Self {
        let mut out = [None; 6];
        for (j, o) in out.iter_mut().enumerate() {
            let vals: Vec<f64> = sets.iter().filter_map(|s| s.values()[j]).collect();
            if !vals.is_empty() {
                *o = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        Self::from_values(out)
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Computed from average ranks (Mann-Whitney U).
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(MlError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(MlError::NonFinite(i));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(MlError::InvalidLabel(l));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(MlError::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}
