//! Plain-Rust side of the browser demo; `lib.rs` only wraps these for JS.

use mvbound_core::bounds::{
    complexity_numerator, empirical_bounds, kl_inv_upper, lambda_upper, oracle_bounds, BoundKind, Form,
};
use mvbound_core::data::SplitSpec;
use mvbound_core::experiment::{default_bounds, evaluate, optimize_and_score, partition, Evaluation};
use mvbound_core::forest::{derive_seeds, train_forest, BaggingMode, ForestParams};
use mvbound_core::losses::{mv_loss, Posterior};
use mvbound_core::optimize::optimal_lambda;
use mvbound_core::synth::{generate_dataset, DatasetSpec, ErrorPopulation};
use mvbound_core::{Error, Result};
use serde::Serialize;

/// Values per row of [`regime_curves`].
pub const REGIME_COLUMNS: usize = 8;

fn population(regime: &str, m: usize, risk: f64) -> Result<ErrorPopulation> {
    match regime {
        "independent" => Ok(ErrorPopulation::independent(m, risk)),
        "identical" => Ok(ErrorPopulation::identical(m, risk)),
        other => Err(Error::InvalidParameter(format!("unknown regime `{other}`"))),
    }
}

/// Oracle bounds for `m` equally accurate voters as their common risk
/// sweeps `(0, 1/2)`. Rows are `[risk, L(MV), FO, C1, C2, CTD, TND, DIS]`.
pub fn regime_curves(regime: &str, m: usize, points: usize) -> Result<Vec<f64>> {
    if !(2..=16).contains(&m) || points < 2 {
        return Err(Error::InvalidParameter(
            "need 2 <= m <= 16 and at least 2 points".into(),
        ));
    }
    let uniform = Posterior::uniform(m);
    let mut out = Vec::with_capacity(points * REGIME_COLUMNS);
    for i in 0..points {
        let risk = 0.005 + 0.49 * i as f64 / (points - 1) as f64;
        let pop = population(regime, m, risk)?;
        let b = oracle_bounds(&pop.oracle()?, &uniform)?;
        out.extend([risk, pop.mv_risk(&uniform)?, b.fo, b.c1, b.c2, b.ctd, b.tnd, b.dis]);
    }
    Ok(out)
}

/// Upper confidence bounds on a loss estimated from `n` samples as the
/// empirical loss sweeps `[0, 1]`. Rows are `[loss, kl form, λ form]`,
/// the λ form using its best λ.
pub fn loss_bound_curves(n: usize, kl: f64, delta: f64, points: usize) -> Result<Vec<f64>> {
    if n == 0 || points < 2 || kl.is_nan() || kl < 0.0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(
            "need n >= 1, KL >= 0, delta in (0,1), points >= 2".into(),
        ));
    }
    let num = complexity_numerator(1.0, kl, n, delta, 1);
    let mut out = Vec::with_capacity(points * 3);
    for i in 0..points {
        let loss = i as f64 / (points - 1) as f64;
        let lambda = optimal_lambda(loss, n, num);
        out.extend([
            loss,
            kl_inv_upper(loss, num / n as f64),
            lambda_upper(loss, num, n, lambda).min(1.0),
        ]);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct DemoBound {
    pub bound: BoundKind,
    pub value: f64,
    pub display: String,
}

#[derive(Debug, Serialize)]
pub struct DemoBounds {
    pub test_mv_loss: f64,
    pub n_train: usize,
    pub n_min_pair: usize,
    pub bounds: Vec<DemoBound>,
}

#[derive(Debug, Serialize)]
pub struct DemoOptimized {
    pub bound: BoundKind,
    pub kl_bound: f64,
    pub test_mv_loss: f64,
    pub trace: Vec<f64>,
    /// Weights sorted in decreasing order.
    pub weights: Vec<f64>,
}

/// A small forest trained on a synthetic problem.
pub struct Demo {
    eval: Evaluation,
    n_train: usize,
    trees: usize,
}

impl Demo {
    pub fn new(problem: &str, n: usize, trees: usize, reduced: bool, seed: u64) -> Result<Demo> {
        let spec = match problem {
            "blobs" => DatasetSpec::Blobs {
                classes: 2,
                dim: 5,
                separation: 2.0,
                label_noise: 0.1,
            },
            "blobs3" => DatasetSpec::Blobs {
                classes: 3,
                dim: 5,
                separation: 3.0,
                label_noise: 0.05,
            },
            "xor" => DatasetSpec::Xor {
                dim: 4,
                label_noise: 0.05,
            },
            other => return Err(Error::InvalidParameter(format!("unknown problem `{other}`"))),
        };
        let seeds = derive_seeds(seed, 3);
        let data = generate_dataset(&spec, n, seeds[0])?;
        let part = partition(&data, &SplitSpec::new(0.2, 1.0, seeds[1])?)?;
        let bagging = if reduced {
            BaggingMode::Reduced
        } else {
            BaggingMode::Full
        };
        let ensemble = train_forest(&part.train, &ForestParams::new(trees, bagging, seeds[2]))?;
        Ok(Demo {
            eval: evaluate(&ensemble, &part)?,
            n_train: part.train.len(),
            trees,
        })
    }

    pub fn bounds(&self, delta: f64) -> Result<DemoBounds> {
        let uniform = Posterior::uniform(self.trees);
        let kinds = default_bounds(self.eval.stats.is_binary());
        let report = empirical_bounds(&self.eval.stats, &uniform, delta, &kinds, Form::Kl)?;
        Ok(DemoBounds {
            test_mv_loss: mv_loss(&self.eval.test_predictions, &uniform)?,
            n_train: self.n_train,
            n_min_pair: self.eval.stats.n_min_pair,
            bounds: report
                .entries
                .iter()
                .map(|e| DemoBound {
                    bound: e.bound,
                    value: e.value,
                    display: e.display(),
                })
                .collect(),
        })
    }

    pub fn optimize(&self, kind: &str, delta: f64) -> Result<DemoOptimized> {
        let kind: BoundKind = kind.parse()?;
        if kind.binary_only() && !self.eval.stats.is_binary() {
            return Err(Error::RequiresBinary(kind.name()));
        }
        let o = optimize_and_score(kind, &self.eval, delta)?;
        let mut weights = o.result.rho_star.rho.clone();
        weights.sort_by(|a, b| b.total_cmp(a));
        Ok(DemoOptimized {
            bound: kind,
            kl_bound: o.result.kl_bound,
            test_mv_loss: o.test_mv_loss,
            trace: o.result.trace,
            weights,
        })
    }
}
