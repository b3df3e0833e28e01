use super::forest::{fit_forest, ForestConfig};
use super::metrics::{auroc, binary_metrics, Confusion, MetricSet};
use super::tree::{ClassWeight, Criterion};
use super::{Dataset, MlError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Shuffled partition of `0..n` into `k` folds; the first `n % k` folds get
/// one extra sample. Indices within a fold are sorted.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(MlError::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(MlError::KTooLarge { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub test_indices: Vec<usize>,
    pub confusion: Confusion,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    /// Means over folds where each metric is defined.
    pub mean: MetricSet,
}

impl EvalReport {
    /// Per metric, how many folds left it undefined.
    pub fn undefined_counts(&self) -> [usize; 6] {
        let mut out = [0; 6];
        for f in &self.folds {
            for (o, v) in out.iter_mut().zip(f.metrics.values()) {
                *o += usize::from(v.is_none());
            }
        }
        out
    }

    /// Per-fold values of each metric, or `None` if any fold left one
    /// undefined.
    pub fn replicates(&self) -> Option<Vec<Vec<f64>>> {
        (0..6).map(|j| self.folds.iter().map(|f| f.metrics.values()[j]).collect()).collect()
    }

    /// One line per fold with confusion counts and metrics.
    pub fn fold_table(&self) -> String {
        let mut s = String::from("Fold,TP,FP,FN,TN");
        for n in MetricSet::NAMES {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (i, f) in self.folds.iter().enumerate() {
            let c = f.confusion;
            s.push_str(&format!("{},{},{},{},{}", i + 1, c.tp, c.fp, c.fn_, c.tn));
            for v in f.metrics.values() {
                s.push(',');
                s.push_str(&fmt_metric(v));
            }
            s.push('\n');
        }
        s
    }
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Mean-metric table, one row per model; undefined means print as `NA`.
pub fn report_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut s = String::from("Model");
    for n in MetricSet::NAMES {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (name, r) in rows {
        s.push_str(name);
        for v in r.mean.values() {
            s.push(',');
            s.push_str(&fmt_metric(v));
        }
        s.push('\n');
    }
    s
}

/// Trains `config` on k−1 folds and scores the held-out fold, k times.
/// Class 1 is predicted when the forest probability exceeds 0.5.
pub fn kfold_cv(data: &Dataset, config: &ForestConfig, k: usize, seed: u64) -> Result<EvalReport> {
    config.validate()?;
    let folds = fold_indices(data.len(), k, seed)?;
    Ok(cv_tree_counts(data, &folds, seed, config, &[config.n_estimators])?.remove(0))
}

/// Reports for forests that differ from `config` only in tree count. Tree
/// seeds are drawn in sequence, so a smaller forest is a prefix of the
/// largest one and its probabilities are prefix means.
fn cv_tree_counts(data: &Dataset, folds: &[Vec<usize>], seed: u64, config: &ForestConfig, counts: &[usize]) -> Result<Vec<EvalReport>> {
    let largest = ForestConfig { n_estimators: *counts.iter().max().unwrap(), ..config.clone() };
    let mut per_count: Vec<Vec<FoldReport>> = vec![Vec::with_capacity(folds.len()); counts.len()];
    for (fi, test) in folds.iter().enumerate() {
        let mut train: Vec<usize> = folds.iter().enumerate().filter(|&(j, _)| j != fi).flat_map(|(_, f)| f.iter().copied()).collect();
        train.sort_unstable();
        let forest = fit_forest(&data.subset(&train)?, &largest)?;
        let truth: Vec<u8> = test.iter().map(|&i| data.y()[i]).collect();
        // running sums of tree probabilities, per test sample
        let sums: Vec<Vec<f64>> = test
            .iter()
            .map(|&i| {
                let x = data.row(i);
                let mut acc = 0.0;
                forest.trees.iter().map(|t| {
                    acc += t.p1(x);
                    acc
                }).collect()
            })
            .collect();
        for (ci, &n) in counts.iter().enumerate() {
            let scores: Vec<f64> = sums.iter().map(|s| s[n - 1] / n as f64).collect();
            per_count[ci].push(fold_report(test, &scores, &truth)?);
        }
    }
    Ok(per_count
        .into_iter()
        .map(|folds| {
            let mean = MetricSet::mean_of(&folds.iter().map(|r| r.metrics).collect::<Vec<_>>());
            EvalReport { k: folds.len(), seed, folds, mean }
        })
        .collect())
}

fn fold_report(test: &[usize], scores: &[f64], truth: &[u8]) -> Result<FoldReport> {
    let pred: Vec<u8> = scores.iter().map(|&p| u8::from(p > 0.5)).collect();
    let confusion = Confusion::from_predictions(&pred, truth)?;
    let area = match auroc(scores, truth) {
        Ok(a) => Some(a),
        Err(MlError::OneClassOnly) => None,
        Err(e) => return Err(e),
    };
    Ok(FoldReport { test_indices: test.to_vec(), confusion, metrics: MetricSet::new(binary_metrics(&confusion), area) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub n_estimators: Vec<usize>,
    pub criterion: Vec<Criterion>,
    pub max_depth: Vec<Option<usize>>,
    pub max_leaf_nodes: Vec<Option<usize>>,
    pub class_weight: Vec<ClassWeight>,
    pub min_samples_split: Vec<usize>,
}

impl ParamGrid {
    /// The full tuning grid (4320 points).
    pub fn full() -> Self {
        Self {
            n_estimators: vec![50, 150, 200, 250, 300],
            criterion: vec![Criterion::Gini, Criterion::Entropy],
            max_depth: (10..=50).step_by(5).map(Some).collect(),
            max_leaf_nodes: vec![Some(5), Some(10), Some(15), Some(20), Some(30), None],
            class_weight: vec![ClassWeight::Balanced, ClassWeight::None],
            min_samples_split: vec![2, 4, 6, 8],
        }
    }

    /// Grid with one value per axis, taken from `c`.
    pub fn single(c: &ForestConfig) -> Self {
        Self {
            n_estimators: vec![c.n_estimators],
            criterion: vec![c.criterion],
            max_depth: vec![c.max_depth],
            max_leaf_nodes: vec![c.max_leaf_nodes],
            class_weight: vec![c.class_weight],
            min_samples_split: vec![c.min_samples_split],
        }
    }

    pub fn len(&self) -> usize {
        self.n_estimators.len()
            * self.criterion.len()
            * self.max_depth.len()
            * self.max_leaf_nodes.len()
            * self.class_weight.len()
            * self.min_samples_split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in order, `n_estimators` outermost and
    /// `min_samples_split` innermost; bootstrap and seed come from `base`.
    pub fn configs(&self, base: &ForestConfig) -> Vec<ForestConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &n_estimators in &self.n_estimators {
            for &criterion in &self.criterion {
                for &max_depth in &self.max_depth {
                    for &max_leaf_nodes in &self.max_leaf_nodes {
                        for &class_weight in &self.class_weight {
                            for &min_samples_split in &self.min_samples_split {
                                out.push(ForestConfig {
                                    n_estimators,
                                    criterion,
                                    max_depth,
                                    max_leaf_nodes,
                                    class_weight,
                                    min_samples_split,
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub config: ForestConfig,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

impl GridSearch {
    pub fn best(&self) -> &ForestConfig {
        &self.rows[self.best_index].config
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or_else(|| "None".to_string(), |x| x.to_string());
        let mut s = String::from("index,n_estimators,criterion,max_depth,max_leaf_nodes,class_weight,min_samples_split,mean_accuracy,best\n");
        for (i, r) in self.rows.iter().enumerate() {
            let c = &r.config;
            s.push_str(&format!(
                "{i},{},{},{},{},{},{},{},{}\n",
                c.n_estimators,
                c.criterion,
                opt(c.max_depth),
                opt(c.max_leaf_nodes),
                c.class_weight,
                c.min_samples_split,
                r.mean_accuracy,
                u8::from(i == self.best_index)
            ));
        }
        s
    }
}

/// Scores every grid point by k-fold mean accuracy over the same folds and
/// keeps the first best in grid order. Points that differ only in
/// `n_estimators` share one fitted forest per fold.
pub fn grid_search(data: &Dataset, grid: &ParamGrid, base: &ForestConfig, k: usize, seed: u64) -> Result<GridSearch> {
    if grid.is_empty() {
        return Err(MlError::EmptyGrid);
    }
    let configs = grid.configs(base);
    for c in &configs {
        c.validate()?;
    }
    let folds = fold_indices(data.len(), k, seed)?;
    // n_estimators is the outermost axis, so point i of group g sits at g + i·stride
    let stride = configs.len() / grid.n_estimators.len();
    let groups = (0..stride)
        .into_par_iter()
        .map(|g| cv_tree_counts(data, &folds, seed, &configs[g], &grid.n_estimators))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<GridRow> = configs
        .into_iter()
        .enumerate()
        .map(|(p, config)| {
            let r = &groups[p % stride][p / stride];
            // accuracy has the fold size as denominator, so it is always defined
            GridRow { mean_accuracy: r.mean.accuracy.unwrap_or(0.0), config }
        })
        .collect();
    let mut best_index = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean_accuracy > rows[best_index].mean_accuracy {
            best_index = i;
        }
    }
    Ok(GridSearch { best_index, rows })
}
