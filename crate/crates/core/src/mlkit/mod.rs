//! Classical learning and evaluation: CART trees, random forests, k-fold
//! cross-validation, grid search, binary metrics, AUROC, two-way ANOVA and
//! population impact arithmetic.

mod anova;
mod cv;
mod forest;
mod impact;
mod metrics;
mod tree;

pub use anova::{anova_two_way, AnovaEffect, AnovaTable};
pub use cv::{fold_indices, grid_search, kfold_cv, report_table, EvalReport, FoldReport, GridRow, GridSearch, ParamGrid};
pub use forest::{fit_forest, predict_proba, Forest, ForestConfig};
pub use impact::{impact_extrapolation, implied_prevalences, Impact, ImpliedPrevalences};
pub use metrics::{auroc, binary_metrics, BinaryMetrics, Confusion, MetricSet};
pub use tree::{fit_tree, predict_tree, ClassWeight, Criterion, Node, Tree, TreeConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("dataset is empty")]
    EmptyData,
    #[error("row {row} has {found} features, expected {expected}")]
    InconsistentDims { row: usize, expected: usize, found: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("non-finite feature value at row {0}")]
    NonFinite(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("k = {k} folds exceeds {n} samples")]
    KTooLarge { k: usize, n: usize },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("AUROC needs both classes present")]
    OneClassOnly,
    #[error("unbalanced design: {0}")]
    UnbalancedDesign(String),
    #[error("invalid rates: {0}")]
    InvalidRates(String),
}

pub type Result<T> = std::result::Result<T, MlError>;

/// Feature rows with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    /// Column-major copy of `x`.
    cols: Vec<Vec<f64>>,
    /// Dense per-column ranks: equal values share a rank.
    ranks: Vec<Vec<u32>>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>) -> Result<Self> {
        if x.is_empty() {
            return Err(MlError::EmptyData);
        }
        if x.len() != y.len() {
            return Err(MlError::LengthMismatch(x.len(), y.len()));
        }
        let d = x[0].len();
        if d == 0 {
            return Err(MlError::InconsistentDims { row: 0, expected: 1, found: 0 });
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(MlError::InconsistentDims { row: i, expected: d, found: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MlError::NonFinite(i));
            }
        }
        if let Some(&bad) = y.iter().find(|&&l| l > 1) {
            return Err(MlError::InvalidLabel(bad));
        }
        let cols: Vec<Vec<f64>> = (0..d).map(|j| x.iter().map(|r| r[j]).collect()).collect();
        let ranks = cols.iter().map(|c| dense_ranks(c)).collect();
        Ok(Self { x, y, cols, ranks })
    }

    pub(crate) fn col(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub(crate) fn ranks(&self, j: usize) -> &[u32] {
        &self.ranks[j]
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i]
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.x[i].clone()).collect(), indices.iter().map(|&i| self.y[i]).collect())
    }

    /// Keeps only the listed feature columns.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.dim()) {
            return Err(MlError::InvalidConfig(format!("feature column {c} out of range")));
        }
        Self::new(self.x.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect(), self.y.clone())
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }
}

fn dense_ranks(v: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_unstable_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0; v.len()];
    let mut rank = 0;
    for (k, &i) in order.iter().enumerate() {
        if k > 0 && v[i] != v[order[k - 1]] {
            rank += 1;
        }
        out[i] = rank;
    }
    out
}
