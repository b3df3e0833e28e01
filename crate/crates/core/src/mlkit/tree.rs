use super::{Dataset, MlError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    fn impurity(self, w0: f64, w1: f64) -> f64 {
        let w = w0 + w1;
        if w <= 0.0 {
            return 0.0;
        }
        let (p0, p1) = (w0 / w, w1 / w);
        match self {
            Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
            Criterion::Entropy => -[p0, p1].iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>(),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = MlError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            _ => Err(MlError::InvalidConfig(format!("unknown criterion {s:?}"))),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    None,
    /// `w_c = n / (2 n_c)`
    Balanced,
}

impl ClassWeight {
    pub(crate) fn weights(self, y: &[u8]) -> [f64; 2] {
        match self {
            ClassWeight::None => [1.0, 1.0],
            ClassWeight::Balanced => {
                let n1 = y.iter().filter(|&&l| l == 1).count();
                let counts = [y.len() - n1, n1];
                counts.map(|c| if c == 0 { 0.0 } else { y.len() as f64 / (2.0 * c as f64) })
            }
        }
    }
}

impl std::str::FromStr for ClassWeight {
    type Err = MlError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "None" => Ok(ClassWeight::None),
            "balanced" => Ok(ClassWeight::Balanced),
            _ => Err(MlError::InvalidConfig(format!("unknown class weight {s:?}"))),
        }
    }
}

impl std::fmt::Display for ClassWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassWeight::None => "none",
            ClassWeight::Balanced => "balanced",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    /// Switches to best-first growth when set.
    pub max_leaf_nodes: Option<usize>,
    pub min_samples_split: usize,
    pub class_weight: ClassWeight,
    /// Features examined per split; all when `None`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_depth: None,
            max_leaf_nodes: None,
            min_samples_split: 2,
            class_weight: ClassWeight::None,
            max_features: None,
            seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(MlError::InvalidConfig("min_samples_split must be >= 2".into()));
        }
        if self.max_depth == Some(0) {
            return Err(MlError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.max_leaf_nodes.is_some_and(|m| m < 2) {
            return Err(MlError::InvalidConfig("max_leaf_nodes must be >= 2".into()));
        }
        if self.max_features == Some(0) {
            return Err(MlError::InvalidConfig("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `p1` is the (weighted) fraction of class 1.
    Leaf { p1: f64, samples: usize },
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Class-1 probability; `x` must have `n_features` entries.
    pub(crate) fn p1(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { p1, .. } => return p1,
                Node::Split { feature, threshold, left, right } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Predicted class and the probability assigned to that class. Class 1 wins
/// only on a strict majority.
pub fn predict_tree(tree: &Tree, x: &[f64]) -> Result<(u8, f64)> {
    if x.len() != tree.n_features {
        return Err(MlError::InconsistentDims { row: 0, expected: tree.n_features, found: x.len() });
    }
    let p1 = tree.p1(x);
    Ok(if p1 > 0.5 { (1, p1) } else { (0, 1.0 - p1) })
}

pub fn fit_tree(data: &Dataset, config: &TreeConfig) -> Result<Tree> {
    config.validate()?;
    let cw = config.class_weight.weights(data.y());
    let weights: Vec<f64> = data.y().iter().map(|&l| cw[l as usize]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(grow(data, &weights, config, &mut rng))
}

struct Split {
    feature: usize,
    threshold: f64,
    improvement: f64,
}

struct Pending {
    node: usize,
    idx: Vec<usize>,
    depth: usize,
    split: Option<Split>,
}

struct Grower<'a> {
    data: &'a Dataset,
    weights: &'a [f64],
    config: &'a TreeConfig,
    buf: Vec<u64>,
    order: Vec<usize>,
}

impl Grower<'_> {
    fn class_weights(&self, idx: &[usize]) -> (f64, f64) {
        let y = self.data.y();
        idx.iter().fold((0.0, 0.0), |(w0, w1), &i| if y[i] == 1 { (w0, w1 + self.weights[i]) } else { (w0 + self.weights[i], w1) })
    }

    fn pending(&mut self, node: usize, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> Pending {
        let (w0, w1) = self.class_weights(&idx);
        let splittable = idx.len() >= self.config.min_samples_split
            && self.config.max_depth.is_none_or(|m| depth < m)
            && w0 > 0.0
            && w1 > 0.0;
        let split = if splittable { self.best_split(&idx, w0, w1, rng) } else { None };
        Pending { node, idx, depth, split }
    }

    /// Scans features in random order until `max_features` have been looked
    /// at and at least one of them was non-constant in this node.
    fn best_split(&mut self, idx: &[usize], w0: f64, w1: f64, rng: &mut ChaCha8Rng) -> Option<Split> {
        let d = self.data.dim();
        let k = self.config.max_features.unwrap_or(d).min(d);
        if k < d {
            self.order.shuffle(rng);
        }
        let crit = self.config.criterion;
        let parent = (w0 + w1) * crit.impurity(w0, w1);
        let y = self.data.y();
        let mut best: Option<Split> = None;
        let mut visited = 0;
        let mut found = false;
        for oi in 0..d {
            if visited >= k && found {
                break;
            }
            visited += 1;
            let f = self.order[oi];
            let (col, ranks) = (self.data.col(f), self.data.ranks(f));
            // sort by (rank, index) packed into one key
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (u64::from(ranks[i]) << 32) | i as u64));
            self.buf.sort_unstable();
            let key = |k: u64| (k >> 32) as u32;
            if key(self.buf[0]) == key(self.buf[self.buf.len() - 1]) {
                continue;
            }
            found = true;
            let (mut l0, mut l1) = (0.0, 0.0);
            for j in 0..self.buf.len() - 1 {
                let i = (self.buf[j] & 0xffff_ffff) as usize;
                if y[i] == 1 {
                    l1 += self.weights[i];
                } else {
                    l0 += self.weights[i];
                }
                if key(self.buf[j + 1]) == key(self.buf[j]) {
                    continue;
                }
                let (r0, r1) = (w0 - l0, w1 - l1);
                let child = (l0 + l1) * crit.impurity(l0, l1) + (r0 + r1) * crit.impurity(r0, r1);
                let improvement = parent - child;
                if best.as_ref().is_none_or(|b| improvement > b.improvement) {
                    let (v, next) = (col[i], col[(self.buf[j + 1] & 0xffff_ffff) as usize]);
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(Split { feature: f, threshold, improvement });
                }
            }
        }
        best
    }
}

/// CART growth over samples with positive weight. Depth-first, or best-first
/// by weighted impurity decrease when `max_leaf_nodes` is set.
pub(crate) fn grow(data: &Dataset, weights: &[f64], config: &TreeConfig, rng: &mut ChaCha8Rng) -> Tree {
    let mut g = Grower { data, weights, config, buf: Vec::with_capacity(data.len()), order: (0..data.dim()).collect() };
    let root: Vec<usize> = (0..data.len()).filter(|&i| weights[i] > 0.0).collect();
    let leaf = |g: &Grower, idx: &[usize]| {
        let (w0, w1) = g.class_weights(idx);
        Node::Leaf { p1: if w0 + w1 > 0.0 { w1 / (w0 + w1) } else { 0.0 }, samples: idx.len() }
    };
    let mut nodes = vec![leaf(&g, &root)];
    let mut frontier = vec![g.pending(0, root, 0, rng)];
    let mut leaves = 1;
    loop {
        if config.max_leaf_nodes.is_some_and(|m| leaves >= m) {
            break;
        }
        let pick = if config.max_leaf_nodes.is_some() {
            // best-first: largest improvement, earliest node on ties
            let mut pick: Option<usize> = None;
            for (j, p) in frontier.iter().enumerate() {
                let Some(s) = &p.split else { continue };
                let better = |b: usize| {
                    let bi = frontier[b].split.as_ref().unwrap().improvement;
                    s.improvement > bi || (s.improvement == bi && p.node < frontier[b].node)
                };
                if pick.is_none_or(better) {
                    pick = Some(j);
                }
            }
            pick.map(|j| frontier.swap_remove(j))
        } else {
            frontier.pop()
        };
        let Some(p) = pick else { break };
        let Some(split) = p.split else { continue };
        let (x, f) = (data.x(), split.feature);
        let (li, ri): (Vec<usize>, Vec<usize>) = p.idx.iter().partition(|&&i| x[i][f] <= split.threshold);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(leaf(&g, &li));
        nodes.push(leaf(&g, &ri));
        nodes[p.node] = Node::Split { feature: f, threshold: split.threshold, left: l, right: r };
        leaves += 1;
        // right is pushed first so depth-first pops the left child next
        let right = g.pending(r, ri, p.depth + 1, rng);
        let left = g.pending(l, li, p.depth + 1, rng);
        if config.max_leaf_nodes.is_some() {
            frontier.push(left);
            frontier.push(right);
        } else {
            frontier.push(right);
            frontier.push(left);
        }
    }
    Tree { nodes, n_features: data.dim() }
}
