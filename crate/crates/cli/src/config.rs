//! Plain-text `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated; `none` stands for an absent optional value. Unknown keys
//! are rejected so typos surface immediately.
//!
//! | key | default |
//! |---|---|
//! | `seed` | 0 |
//! | `phantom.shape` | 32,64,64 |
//! | `phantom.blobs` | 6 |
//! | `phantom.spacing` | 1,1,1 |
//! | `phantom.orientation` | axial |
//! | `isgen.lambda` | 0.03 |
//! | `isgen.off_epochs`, `isgen.on_epochs`, `isgen.cycles` | 5, 5, 10 |
//! | `isgen.warmup_epochs` | 0 |
//! | `isgen.d_max` | 4 |
//! | `isgen.lr` | 2e-4 |
//! | `isgen.image_size` | 64 |
//! | `isgen.triplets`, `isgen.val_triplets` | 200, 20 |
//! | `normalize.target` | 128 |
//! | `select.window` | 64 |
//! | `cv.k` | 5 |
//! | `rf.n_estimators`, `rf.criterion`, `rf.max_depth`, `rf.max_leaf_nodes`, `rf.class_weight`, `rf.min_samples_split` | 50, gini, 10, none, none, 6 |
//! | `grid.n_estimators` | 50,150,200,250,300 |
//! | `grid.criterion` | gini,entropy |
//! | `grid.max_depth` | 10,15,20,25,30,35,40,45,50 |
//! | `grid.max_leaf_nodes` | 5,10,15,20,30,none |
//! | `grid.class_weight` | balanced,none |
//! | `grid.min_samples_split` | 2,4,6,8 |

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use volnorm::isgen::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
use volnorm::mlkit::{ClassWeight, Criterion, ForestConfig, ParamGrid};
use volnorm::tensorkit::AdamConfig;
use volnorm::volume::{Orientation, PhantomConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub phantom: PhantomConfig,
    pub train: TrainConfig,
    pub image_size: usize,
    pub triplets: usize,
    pub val_triplets: usize,
    pub target: usize,
    pub window: usize,
    pub k: usize,
    pub forest: ForestConfig,
    pub grid: ParamGrid,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            phantom: PhantomConfig { shape: [32, 64, 64], ..PhantomConfig::default() },
            train: TrainConfig::default(),
            image_size: 64,
            triplets: 200,
            val_triplets: 20,
            target: 128,
            window: 64,
            k: 5,
            forest: ForestConfig::default(),
            grid: ParamGrid::full(),
        }
    }
}

fn one<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn optional<T: FromStr>(key: &str, v: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if v.trim().eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        one(key, v).map(Some)
    }
}

fn list<T>(key: &str, v: &str, item: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    let out: Vec<T> = v.split(',').map(|s| item(key, s)).collect::<Result<_>>()?;
    if out.is_empty() {
        bail!("{key}: empty list");
    }
    Ok(out)
}

fn triple<T: FromStr + Copy>(key: &str, v: &str) -> Result<[T; 3]>
where
    T::Err: std::fmt::Display,
{
    let items = list(key, v, one::<T>)?;
    items.try_into().map_err(|items: Vec<T>| anyhow!("{key}: expected 3 values, got {}", items.len()))
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Config::parse(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            if entries.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {:?}", i + 1, k.trim());
            }
        }
        let mut c = Config::default();
        for (k, v) in &entries {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = one(key, v)?,
            "phantom.shape" => self.phantom.shape = triple(key, v)?,
            "phantom.blobs" => self.phantom.n_blobs = one(key, v)?,
            "phantom.spacing" => self.phantom.spacing = triple(key, v)?,
            "phantom.orientation" => self.phantom.orientation = one::<Orientation>(key, v)?,
            "isgen.lambda" => self.train.lambda = one(key, v)?,
            "isgen.off_epochs" => self.train.off_epochs = one(key, v)?,
            "isgen.on_epochs" => self.train.on_epochs = one(key, v)?,
            "isgen.cycles" => self.train.cycles = one(key, v)?,
            "isgen.warmup_epochs" => self.train.warmup_epochs = one(key, v)?,
            "isgen.d_max" => self.train.d_max = one(key, v)?,
            "isgen.lr" => self.train.adam = AdamConfig { lr: one(key, v)?, ..self.train.adam },
            "isgen.image_size" => self.image_size = one(key, v)?,
            "isgen.triplets" => self.triplets = one(key, v)?,
            "isgen.val_triplets" => self.val_triplets = one(key, v)?,
            "normalize.target" => self.target = one(key, v)?,
            "select.window" => self.window = one(key, v)?,
            "cv.k" => self.k = one(key, v)?,
            "rf.n_estimators" => self.forest.n_estimators = one(key, v)?,
            "rf.criterion" => self.forest.criterion = one::<Criterion>(key, v)?,
            "rf.max_depth" => self.forest.max_depth = optional(key, v)?,
            "rf.max_leaf_nodes" => self.forest.max_leaf_nodes = optional(key, v)?,
            "rf.class_weight" => self.forest.class_weight = one::<ClassWeight>(key, v)?,
            "rf.min_samples_split" => self.forest.min_samples_split = one(key, v)?,
            "grid.n_estimators" => self.grid.n_estimators = list(key, v, one)?,
            "grid.criterion" => self.grid.criterion = list(key, v, one)?,
            "grid.max_depth" => self.grid.max_depth = list(key, v, optional)?,
            "grid.max_leaf_nodes" => self.grid.max_leaf_nodes = list(key, v, optional)?,
            "grid.class_weight" => self.grid.class_weight = list(key, v, one)?,
            "grid.min_samples_split" => self.grid.min_samples_split = list(key, v, one)?,
            other => bail!("unknown key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        self.train.validate()?;
        self.generator_config().validate()?;
        self.discriminator_config().validate()?;
        self.forest.validate()?;
        for c in self.grid.configs(&self.forest) {
            c.validate()?;
        }
        if self.target < 2 {
            bail!("normalize.target must be >= 2");
        }
        if self.window == 0 || self.window > self.target {
            bail!("select.window must lie in 1..={}", self.target);
        }
        if self.k < 2 {
            bail!("cv.k must be >= 2");
        }
        if self.triplets == 0 {
            bail!("isgen.triplets must be >= 1");
        }
        Ok(())
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig { image_size: self.image_size, ..GeneratorConfig::default() }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig { image_size: self.image_size, ..DiscriminatorConfig::default() }
    }

    /// Forest settings with the configured seed.
    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig { seed: self.seed, ..self.forest.clone() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_table() {
        let c = Config::parse("# nothing set\n\n").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.train.lambda, 0.03);
        assert_eq!((c.target, c.window, c.k), (128, 64, 5));
        assert_eq!(c.grid.len(), 4320);
    }

    #[test]
    fn keys_override_defaults() {
        let c = Config::parse(
            "seed = 9\nphantom.shape = 16, 24, 24\nphantom.orientation = sagittal\nisgen.lr = 1e-3\nrf.max_depth = none\ngrid.max_leaf_nodes = 5, none\ngrid.criterion = entropy\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.phantom.shape, [16, 24, 24]);
        assert_eq!(c.phantom.orientation, Orientation::Sagittal);
        assert_eq!(c.train.adam.lr, 1e-3);
        assert_eq!(c.forest.max_depth, None);
        assert_eq!(c.grid.max_leaf_nodes, vec![Some(5), None]);
        assert_eq!(c.grid.criterion, vec![Criterion::Entropy]);
        assert_eq!(c.forest_config().seed, 9);
    }

    #[test]
    fn bad_input_is_rejected() {
        assert!(Config::parse("seed 3").is_err());
        assert!(Config::parse("sed = 3").is_err());
        assert!(Config::parse("seed = 1\nseed = 2").is_err());
        assert!(Config::parse("phantom.shape = 16,16").is_err());
        assert!(Config::parse("isgen.on_epochs = 0").is_err());
        assert!(Config::parse("rf.min_samples_split = 1").is_err());
        assert!(Config::parse("isgen.image_size = 20").is_err());
    }
}
