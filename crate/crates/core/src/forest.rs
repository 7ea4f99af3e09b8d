//! Bagged CART trees grown to purity, with per-tree out-of-bag masks.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{hex_digest, Dataset, FeatureMatrix, SplitSpec};
use crate::error::{Error, Result};

/// Splits whose Gini gain does not exceed this are treated as no-gain.
pub const GAIN_TOLERANCE: f64 = 1e-12;

/// Hard cap on the node count of a single tree.
pub const MAX_NODES: usize = 1_000_000;

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: usize,
    },
}

/// Binary decision tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Routes every row of `x` from the root to a leaf.
pub fn predict_tree(tree: &Tree, x: &FeatureMatrix) -> Result<Vec<usize>> {
    if x.cols() != tree.n_features {
        return Err(Error::DimensionMismatch {
            expected: tree.n_features,
            found: x.cols(),
        });
    }
    Ok((0..x.rows()).map(|i| tree.predict_row(x.row(i))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaggingMode {
    /// `n` draws with replacement.
    Full,
    /// `ceil(n/2)` draws with replacement.
    Reduced,
}

impl BaggingMode {
    pub fn draw_count(self, n: usize) -> usize {
        match self {
            BaggingMode::Full => n,
            BaggingMode::Reduced => n.div_ceil(2),
        }
    }
}

impl std::str::FromStr for BaggingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(BaggingMode::Full),
            "reduced" => Ok(BaggingMode::Reduced),
            other => Err(Error::InvalidParameter(format!("unknown bagging mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for BaggingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaggingMode::Full => "full",
            BaggingMode::Reduced => "reduced",
        })
    }
}

/// Draws `draw_count` indices uniformly with replacement from `0..n`.
/// Returns the in-bag multiset and the mask of never-drawn indices.
pub fn bootstrap_sample(n: usize, draw_count: usize, seed: u64) -> (Vec<usize>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bootstrap_with(&mut rng, n, draw_count)
}

fn bootstrap_with(rng: &mut ChaCha8Rng, n: usize, draw_count: usize) -> (Vec<usize>, Vec<bool>) {
    assert!(n >= 1 && draw_count >= 1, "bootstrap needs n >= 1 and draw_count >= 1");
    let in_bag: Vec<usize> = (0..draw_count).map(|_| rng.gen_range(0..n)).collect();
    let mut oob = vec![true; n];
    for &i in &in_bag {
        oob[i] = false;
    }
    (in_bag, oob)
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Best split of `samples` on one feature; thresholds sit at midpoints of
/// consecutive distinct values and ties keep the lowest threshold.
fn best_split_on(
    x: &FeatureMatrix,
    labels: &[usize],
    samples: &[usize],
    feature: usize,
    n_classes: usize,
    parent_counts: &[usize],
    parent_gini: f64,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<Candidate> {
    scratch.clear();
    scratch.extend(samples.iter().map(|&i| (x.get(i, feature), labels[i])));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len();
    let mut left = vec![0usize; n_classes];
    let mut best: Option<Candidate> = None;
    for pos in 0..n - 1 {
        left[scratch[pos].1] += 1;
        let (v, next) = (scratch[pos].0, scratch[pos + 1].0);
        if v == next {
            continue;
        }
        let n_left = pos + 1;
        let n_right = n - n_left;
        let right: Vec<usize> = parent_counts.iter().zip(&left).map(|(p, l)| p - l).collect();
        let weighted = (n_left as f64 * gini(&left, n_left) + n_right as f64 * gini(&right, n_right)) / n as f64;
        let gain = parent_gini - weighted;
        if best.is_none_or(|b| gain > b.gain) {
            let mut threshold = v + (next - v) / 2.0;
            if threshold >= next {
                threshold = v;
            }
            best = Some(Candidate {
                gain,
                feature,
                threshold,
            });
        }
    }
    best
}

/// Grows a CART tree on the in-bag multiset (duplicates count as weights).
///
/// At each node `max_features` features are sampled without replacement and
/// the best Gini split among them is taken (ties: lowest feature, then
/// lowest threshold). When none of them gives a gain above
/// [`GAIN_TOLERANCE`] the remaining features are tried in ascending order
/// before the node is closed as a majority leaf (ties to the lowest label).
pub fn train_tree(data: &Dataset, in_bag: &[usize], max_features: usize, seed: u64) -> Result<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grow_tree(data, in_bag, max_features, &mut rng)
}

fn grow_tree(data: &Dataset, in_bag: &[usize], max_features: usize, rng: &mut ChaCha8Rng) -> Result<Tree> {
    let d = data.feature_count();
    if in_bag.is_empty() {
        return Err(Error::InvalidParameter("in-bag sample is empty".into()));
    }
    if max_features == 0 || max_features > d {
        return Err(Error::InvalidParameter(format!(
            "max_features must lie in 1..={d}, got {max_features}"
        )));
    }
    let c = data.n_classes;
    let x = &data.features;
    let y = &data.labels;

    let mut nodes: Vec<Node> = vec![Node::Leaf { label: 0 }];
    // (node slot, samples at that node)
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, in_bag.to_vec())];
    let mut scratch = Vec::with_capacity(in_bag.len());

    while let Some((slot, samples)) = stack.pop() {
        let mut counts = vec![0usize; c];
        for &i in &samples {
            counts[y[i]] += 1;
        }
        let label = majority(&counts);
        if counts[label] == samples.len() {
            nodes[slot] = Node::Leaf { label };
            continue;
        }
        let parent_gini = gini(&counts, samples.len());

        let mut sampled: Vec<usize> = index::sample(rng, d, max_features).into_vec();
        sampled.sort_unstable();
        let search = |features: &[usize], scratch: &mut Vec<(f64, usize)>| {
            let mut best: Option<Candidate> = None;
            for &f in features {
                if let Some(cand) = best_split_on(x, y, &samples, f, c, &counts, parent_gini, scratch) {
                    if best.is_none_or(|b| cand.gain > b.gain) {
                        best = Some(cand);
                    }
                }
            }
            best.filter(|b| b.gain > GAIN_TOLERANCE)
        };
        let mut best = search(&sampled, &mut scratch);
        if best.is_none() && max_features < d {
            let rest: Vec<usize> = (0..d).filter(|f| sampled.binary_search(f).is_err()).collect();
            best = search(&rest, &mut scratch);
        }
        let Some(split) = best else {
            nodes[slot] = Node::Leaf { label };
            continue;
        };

        if nodes.len() + 2 > MAX_NODES {
            return Err(Error::TooManyNodes(MAX_NODES));
        }
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { label });
        nodes.push(Node::Leaf { label });
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, right_samples));
        stack.push((left, left_samples));
    }
    Ok(Tree { nodes, n_features: d })
}

/// Default number of features considered per split: `ceil(sqrt(d))`.
pub fn default_max_features(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1))
}

/// Per-tree seeds derived from the master seed.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.gen()).collect()
}

/// Bagged forest with out-of-bag bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub trees: Vec<Tree>,
    /// `oob_masks[h][i]` is true iff sample `i` was never drawn for tree `h`.
    pub oob_masks: Vec<Vec<bool>>,
    pub tree_seeds: Vec<u64>,
    pub bagging: BaggingMode,
    pub seed: u64,
    pub max_features: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_train: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub bagging: BaggingMode,
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(trees: usize, bagging: BaggingMode, seed: u64) -> Self {
        Self {
            trees,
            bagging,
            max_features: None,
            seed,
        }
    }
}

/// Trains `params.trees` trees on bootstrap draws of `data`.
///
/// Tree seeds are derived up front, so the result does not depend on how
/// trees are scheduled across threads.
pub fn train_forest(data: &Dataset, params: &ForestParams) -> Result<Ensemble> {
    if params.trees < 2 {
        return Err(Error::InvalidParameter(format!(
            "a forest needs at least 2 trees, got {}",
            params.trees
        )));
    }
    let n = data.len();
    let d = data.feature_count();
    let max_features = params.max_features.unwrap_or_else(|| default_max_features(d));
    let draws = params.bagging.draw_count(n);
    let seeds = derive_seeds(params.seed, params.trees);

    let build = |&seed: &u64| -> Result<(Tree, Vec<bool>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (in_bag, oob) = bootstrap_with(&mut rng, n, draws);
        let tree = grow_tree(data, &in_bag, max_features, &mut rng)?;
        Ok((tree, oob))
    };
    #[cfg(feature = "parallel")]
    let built: Vec<Result<(Tree, Vec<bool>)>> = {
        use rayon::prelude::*;
        seeds.par_iter().map(build).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let built: Vec<Result<(Tree, Vec<bool>)>> = seeds.iter().map(build).collect();

    let mut trees = Vec::with_capacity(params.trees);
    let mut oob_masks = Vec::with_capacity(params.trees);
    for (h, item) in built.into_iter().enumerate() {
        let (tree, mask) = item?;
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptyOob { tree: h });
        }
        trees.push(tree);
        oob_masks.push(mask);
    }
    Ok(Ensemble {
        trees,
        oob_masks,
        tree_seeds: seeds,
        bagging: params.bagging,
        seed: params.seed,
        max_features,
        n_classes: data.n_classes,
        n_features: d,
        n_train: n,
    })
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn oob_sizes(&self) -> Vec<usize> {
        self.oob_masks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn mean_oob_fraction(&self) -> f64 {
        let total: usize = self.oob_sizes().iter().sum();
        total as f64 / (self.len() * self.n_train) as f64
    }

    pub fn to_document(&self, dataset_hash: Option<String>) -> EnsembleDocument {
        EnsembleDocument {
            version: ENSEMBLE_FORMAT_VERSION,
            bagging: self.bagging,
            seed: self.seed,
            max_features: self.max_features,
            n_classes: self.n_classes,
            n_features: self.n_features,
            n_train: self.n_train,
            dataset_hash,
            split: None,
            trees: self
                .trees
                .iter()
                .zip(&self.oob_masks)
                .zip(&self.tree_seeds)
                .map(|((tree, mask), &seed)| TreeDocument {
                    seed,
                    oob: mask.iter().map(|&b| if b { '1' } else { '0' }).collect(),
                    nodes: tree.nodes.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self, dataset_hash: Option<String>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(dataset_hash))?)
    }

    pub fn from_json(text: &str) -> Result<(Ensemble, Option<String>)> {
        let doc: EnsembleDocument = serde_json::from_str(text)?;
        doc.into_ensemble()
    }
}

/// Versioned on-disk form of an [`Ensemble`]. Masks are `'0'/'1'` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDocument {
    pub version: u32,
    pub bagging: BaggingMode,
    pub seed: u64,
    pub max_features: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub dataset_hash: Option<String>,
    /// How the training set was carved out of the hashed dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    pub trees: Vec<TreeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub seed: u64,
    pub oob: String,
    pub nodes: Vec<Node>,
}

impl EnsembleDocument {
    pub fn into_ensemble(self) -> Result<(Ensemble, Option<String>)> {
        if self.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(self.version));
        }
        let mut trees = Vec::with_capacity(self.trees.len());
        let mut masks = Vec::with_capacity(self.trees.len());
        let mut seeds = Vec::with_capacity(self.trees.len());
        for (h, t) in self.trees.into_iter().enumerate() {
            if t.oob.len() != self.n_train {
                return Err(Error::InvalidParameter(format!(
                    "tree {h}: mask length {} differs from n_train {}",
                    t.oob.len(),
                    self.n_train
                )));
            }
            let mask = t
                .oob
                .chars()
                .map(|ch| match ch {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    other => Err(Error::InvalidParameter(format!(
                        "tree {h}: bad mask character `{other}`"
                    ))),
                })
                .collect::<Result<Vec<bool>>>()?;
            validate_nodes(&t.nodes, self.n_features, self.n_classes)
                .map_err(|m| Error::InvalidParameter(format!("tree {h}: {m}")))?;
            trees.push(Tree {
                nodes: t.nodes,
                n_features: self.n_features,
            });
            masks.push(mask);
            seeds.push(t.seed);
        }
        Ok((
            Ensemble {
                trees,
                oob_masks: masks,
                tree_seeds: seeds,
                bagging: self.bagging,
                seed: self.seed,
                max_features: self.max_features,
                n_classes: self.n_classes,
                n_features: self.n_features,
                n_train: self.n_train,
            },
            self.dataset_hash,
        ))
    }
}

fn validate_nodes(nodes: &[Node], d: usize, c: usize) -> std::result::Result<(), String> {
    if nodes.is_empty() {
        return Err("no nodes".into());
    }
    for (i, node) in nodes.iter().enumerate() {
        match *node {
            Node::Leaf { label } if label >= c => return Err(format!("node {i}: label {label} out of range")),
            Node::Split {
                feature, left, right, ..
            } => {
                if feature >= d {
                    return Err(format!("node {i}: feature {feature} out of range"));
                }
                // Children always come after their parent, which rules out cycles.
                if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                    return Err(format!("node {i}: bad child index"));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// SHA-256 of the canonical JSON form (dataset hash excluded).
pub fn ensemble_hash(ensemble: &Ensemble) -> String {
    let json = serde_json::to_vec(&ensemble.to_document(None)).expect("ensemble serializes");
    hex_digest(&Sha256::digest(&json))
}
