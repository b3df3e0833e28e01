use super::tree::{grow, ClassWeight, Criterion, Tree, TreeConfig};
use super::{Dataset, MlError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Defaults are the bolded optimum of the tuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub max_leaf_nodes: Option<usize>,
    pub class_weight: ClassWeight,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            criterion: Criterion::Gini,
            max_depth: Some(10),
            max_leaf_nodes: None,
            class_weight: ClassWeight::None,
            min_samples_split: 6,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(MlError::InvalidConfig("n_estimators must be >= 1".into()));
        }
        self.tree_config(1, 0).validate()
    }

    /// `floor(sqrt(d))`, at least 1.
    pub fn features_per_split(d: usize) -> usize {
        ((d as f64).sqrt().floor() as usize).max(1)
    }

    /// Per-tree seeds, drawn in order from the forest seed so they do not
    /// depend on how trees are scheduled.
    pub fn tree_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n_estimators).map(|_| rng.random()).collect()
    }

    /// Settings of one member tree for `d` features.
    pub fn tree_config(&self, d: usize, seed: u64) -> TreeConfig {
        TreeConfig {
            criterion: self.criterion,
            max_depth: self.max_depth,
            max_leaf_nodes: self.max_leaf_nodes,
            min_samples_split: self.min_samples_split,
            class_weight: self.class_weight,
            max_features: Some(Self::features_per_split(d)),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(predict_proba(self, x)? > 0.5))
    }
}

/// Class weights come from the full training labels; bootstrap draws then
/// multiply each sample's weight by its draw count.
pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    let cw = config.class_weight.weights(data.y());
    let base: Vec<f64> = data.y().iter().map(|&l| cw[l as usize]).collect();
    let n = data.len();
    let trees = config
        .tree_seeds()
        .into_par_iter()
        .map(|seed| {
            let tc = config.tree_config(data.dim(), seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if config.bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                let w: Vec<f64> = base.iter().zip(&counts).map(|(&b, &c)| b * c as f64).collect();
                grow(data, &w, &tc, &mut rng)
            } else {
                grow(data, &base, &tc, &mut rng)
            }
        })
        .collect();
    Ok(Forest { config: config.clone(), trees })
}

/// Mean of the trees' class-1 probabilities.
pub fn predict_proba(forest: &Forest, x: &[f64]) -> Result<f64> {
    let d = forest.n_features();
    if x.len() != d {
        return Err(MlError::InconsistentDims { row: 0, expected: d, found: x.len() });
    }
    Ok(forest.trees.iter().map(|t| t.p1(x)).sum::<f64>() / forest.trees.len() as f64)
}
