//! End-to-end runs: split, train, evaluate bounds at uniform weights,
//! optimize weights and score every posterior on held-out data.

use serde::{Deserialize, Serialize};

use crate::bounds::{empirical_bounds, BoundKind, BoundReport, Form};
use crate::data::{split_unlabeled, stratified_split, Dataset, FeatureMatrix, SplitSpec};
use crate::error::{Error, Result};
use crate::forest::{derive_seeds, ensemble_hash, train_forest, BaggingMode, Ensemble, ForestParams};
use crate::losses::{compute_loss_stats, mv_loss, prediction_matrix, LossStats, Posterior};
use crate::optimize::{minimize, OptimizeResult};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Train/test split plus the optional unlabeled pool carved out of the
/// training part.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub train: Dataset,
    pub test: Dataset,
    pub unlabeled: Option<FeatureMatrix>,
}

pub fn partition(data: &Dataset, spec: &SplitSpec) -> Result<Partition> {
    let (train, test) = stratified_split(data, spec)?;
    if spec.labeled_fraction >= 1.0 {
        return Ok(Partition {
            train,
            test,
            unlabeled: None,
        });
    }
    let seed = derive_seeds(spec.seed, 2)[1];
    let (labeled, pool) = split_unlabeled(&train, spec.labeled_fraction, seed)?;
    Ok(Partition {
        train: labeled,
        test,
        unlabeled: Some(pool),
    })
}

/// Loss statistics of `ensemble` on its training set (and unlabeled pool),
/// with the test-set prediction matrix kept for scoring posteriors.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub stats: LossStats,
    pub test_predictions: crate::losses::PredictionMatrix,
}

pub fn evaluate(ensemble: &Ensemble, part: &Partition) -> Result<Evaluation> {
    if ensemble.n_train != part.train.len() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.n_train,
            found: part.train.len(),
        });
    }
    let pm = prediction_matrix(ensemble, &part.train.features, Some(&part.train.labels))?;
    let pool = match &part.unlabeled {
        Some(x) if x.rows() > 0 => Some(prediction_matrix(ensemble, x, None)?),
        _ => None,
    };
    let stats = compute_loss_stats(&pm, &ensemble.oob_masks, pool.as_ref())?;
    let test_predictions = prediction_matrix(ensemble, &part.test.features, Some(&part.test.labels))?;
    Ok(Evaluation {
        stats,
        test_predictions,
    })
}

/// Bounds in the default set that are defined for the task.
pub fn default_bounds(binary: bool) -> Vec<BoundKind> {
    BoundKind::ALL
        .into_iter()
        .filter(|k| binary || !k.binary_only())
        .collect()
}

pub fn check_bounds_for(data: &Dataset, kinds: &[BoundKind]) -> Result<()> {
    match kinds.iter().find(|k| k.binary_only()) {
        Some(k) if !data.is_binary() => Err(Error::RequiresBinary(k.name())),
        _ => Ok(()),
    }
}

pub fn check_optimizable(kinds: &[BoundKind]) -> Result<()> {
    match kinds
        .iter()
        .find(|k| !matches!(k, BoundKind::Fo | BoundKind::Tnd | BoundKind::Dis))
    {
        Some(k) => Err(Error::InvalidParameter(format!("{k} cannot be optimized"))),
        None => Ok(()),
    }
}

/// An optimized posterior and its test-set majority-vote loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    pub result: OptimizeResult,
    pub test_mv_loss: f64,
}

pub fn optimize_and_score(kind: BoundKind, eval: &Evaluation, delta: f64) -> Result<Optimized> {
    let m = eval.stats.n_hypotheses();
    let result = minimize(kind, &eval.stats, &Posterior::uniform(m), delta)?;
    let test_mv_loss = mv_loss(&eval.test_predictions, &result.rho_star)?;
    Ok(Optimized { result, test_mv_loss })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trees: usize,
    pub bagging: Vec<BaggingMode>,
    pub max_features: Option<usize>,
    pub seeds: Vec<u64>,
    pub reps: usize,
    pub delta: f64,
    pub test_fraction: f64,
    pub bounds: Vec<BoundKind>,
    pub optimize: Vec<BoundKind>,
    /// Labeled fractions of the training part; empty means fully labeled.
    pub unlabeled_r: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            bagging: vec![BaggingMode::Full],
            max_features: None,
            seeds: vec![0],
            reps: 1,
            delta: 0.05,
            test_fraction: 0.2,
            bounds: Vec::new(),
            optimize: Vec::new(),
            unlabeled_r: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.reps == 0 || self.seeds.is_empty() || self.bagging.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one repetition, seed and bagging mode".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        for &r in &self.unlabeled_r {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "labeled fraction r must lie in (0,1], got {r}"
                )));
            }
        }
        SplitSpec::new(self.test_fraction, 1.0, 0)?;
        check_bounds_for(data, &self.bounds)?;
        check_bounds_for(data, &self.optimize)?;
        check_optimizable(&self.optimize)
    }
}

/// Outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub rep: usize,
    pub bagging: BaggingMode,
    pub labeled_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_unlabeled: usize,
    pub ensemble_hash: String,
    pub mean_oob_fraction: f64,
    pub test_mv_loss: f64,
    pub bounds: BoundReport,
    pub optimized: Vec<Optimized>,
}

/// Splits with `split_seed`, trains with `forest_seed`, then evaluates.
pub fn run_once(
    data: &Dataset,
    cfg: &ExperimentConfig,
    bagging: BaggingMode,
    labeled_fraction: f64,
    run_seed: u64,
) -> Result<RunOutcome> {
    let seeds = derive_seeds(run_seed, 2);
    let spec = SplitSpec::new(cfg.test_fraction, labeled_fraction, seeds[0])?;
    let part = partition(data, &spec)?;
    let params = ForestParams {
        trees: cfg.trees,
        bagging,
        max_features: cfg.max_features,
        seed: seeds[1],
    };
    let ensemble = train_forest(&part.train, &params)?;
    let eval = evaluate(&ensemble, &part)?;
    let m = ensemble.len();
    let uniform = Posterior::uniform(m);
    let kinds = if cfg.bounds.is_empty() {
        default_bounds(data.is_binary())
    } else {
        cfg.bounds.clone()
    };
    let bounds = empirical_bounds(&eval.stats, &uniform, cfg.delta, &kinds, Form::Kl)?;
    let optimized = cfg
        .optimize
        .iter()
        .map(|&k| optimize_and_score(k, &eval, cfg.delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutcome {
        seed: run_seed,
        rep: 0,
        bagging,
        labeled_fraction,
        n_train: part.train.len(),
        n_test: part.test.len(),
        n_unlabeled: part.unlabeled.as_ref().map_or(0, |x| x.rows()),
        ensemble_hash: ensemble_hash(&ensemble),
        mean_oob_fraction: ensemble.mean_oob_fraction(),
        test_mv_loss: mv_loss(&eval.test_predictions, &uniform)?,
        bounds,
        optimized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    if count == 0 {
        return Summary {
            mean: f64::NAN,
            std: f64::NAN,
            count,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let std = if count > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary { mean, std, count }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Aggregates over all runs sharing a bagging mode and labeled fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub bagging: BaggingMode,
    pub labeled_fraction: f64,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub dataset_hash: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunOutcome>,
    pub groups: Vec<GroupSummary>,
}

fn group_summary(bagging: BaggingMode, labeled_fraction: f64, runs: &[&RunOutcome]) -> GroupSummary {
    let mut metrics = Vec::new();
    let mut push = |name: String, values: Vec<f64>| {
        metrics.push(MetricSummary {
            metric: name,
            summary: summarize(&values),
        })
    };
    push("test_mv_loss".into(), runs.iter().map(|r| r.test_mv_loss).collect());
    if let Some(first) = runs.first() {
        for entry in &first.bounds.entries {
            let kind = entry.bound;
            push(
                kind.name().to_string(),
                runs.iter().filter_map(|r| r.bounds.value(kind)).collect(),
            );
        }
        for (i, o) in first.optimized.iter().enumerate() {
            let name = o.result.bound.name();
            push(
                format!("{name}*"),
                runs.iter().map(|r| r.optimized[i].result.kl_bound).collect(),
            );
            push(
                format!("test_mv_loss[{name}*]"),
                runs.iter().map(|r| r.optimized[i].test_mv_loss).collect(),
            );
        }
    }
    GroupSummary {
        bagging,
        labeled_fraction,
        metrics,
    }
}

/// Runs every (bagging mode, labeled fraction, seed, repetition)
/// combination in a fixed order.
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate(data)?;
    let fractions = if cfg.unlabeled_r.is_empty() {
        vec![1.0]
    } else {
        cfg.unlabeled_r.clone()
    };
    let mut runs = Vec::new();
    let mut groups = Vec::new();
    for &bagging in &cfg.bagging {
        for &r in &fractions {
            let start = runs.len();
            for &seed in &cfg.seeds {
                for (rep, run_seed) in derive_seeds(seed, cfg.reps).into_iter().enumerate() {
                    let mut outcome = run_once(data, cfg, bagging, r, run_seed)?;
                    outcome.rep = rep;
                    runs.push(outcome);
                }
            }
            let group: Vec<&RunOutcome> = runs[start..].iter().collect();
            groups.push(group_summary(bagging, r, &group));
        }
    }
    Ok(ExperimentReport {
        version: ARTIFACT_VERSION.to_string(),
        dataset_hash: data.content_hash(),
        config: cfg.clone(),
        runs,
        groups,
    })
}
