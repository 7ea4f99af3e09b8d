//! Minimization of the FO, TND and DIS bounds over the posterior.
//!
//! TND and DIS alternate iRProp+ on softmax logits with closed-form updates
//! of λ (and γ). FO alternates λ with the exact Gibbs-posterior update.

use serde::{Deserialize, Serialize};

use crate::bounds::{complexity_numerator, dis_bound, fo_bound, gamma_lower, lambda_upper, tnd_bound, BoundKind, Form};
use crate::error::{Error, Result};
use crate::losses::{bilinear, kl_divergence, LossStats, Posterior, SquareMatrix};

pub const ETA_PLUS: f64 = 1.2;
pub const ETA_MINUS: f64 = 0.5;
pub const DELTA_INIT: f64 = 0.1;
pub const DELTA_MIN: f64 = 1e-6;
pub const DELTA_MAX: f64 = 50.0;

/// Inner iRProp+ iterations without strict improvement before stopping.
pub const STALL_LIMIT: usize = 10;
pub const OUTER_TOLERANCE: f64 = 1e-9;
pub const MAX_OUTER: usize = 10_000;
const MAX_INNER: usize = 100_000;

/// `λ = 2 / (sqrt(2 n loss / kl_term + 1) + 1)`, the minimizer over
/// `(0,2)` of `loss/(1-λ/2) + kl_term/(λ(1-λ/2)n)`.
pub fn optimal_lambda(loss_hat: f64, n: usize, kl_term: f64) -> f64 {
    2.0 / ((2.0 * n as f64 * loss_hat / kl_term + 1.0).sqrt() + 1.0)
}

/// `γ = sqrt((4 KL + ln(16 m / δ²)) / (m dis))`, the minimizer of the
/// disagreement lower-bound term. Undefined for `dis_hat = 0`.
pub fn optimal_gamma(dis_hat: f64, m: usize, kl_rho_pi: f64, delta: f64) -> f64 {
    let m = m as f64;
    ((4.0 * kl_rho_pi + (16.0 * m / (delta * delta)).ln()) / (m * dis_hat)).sqrt()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Chain rule through softmax: `∂/∂ρ̃_j = ρ_j (g_j - ρ·g)`.
pub fn softmax_compose(rho: &[f64], grad: &[f64]) -> Vec<f64> {
    let mean: f64 = rho.iter().zip(grad).map(|(r, g)| r * g).sum();
    rho.iter().zip(grad).map(|(r, g)| r * (g - mean)).collect()
}

fn log_ratio(rho: f64, pi: f64) -> f64 {
    (rho.max(f64::MIN_POSITIVE) / pi).ln()
}

/// `ρᵀ T ρ + (2/(λn)) KL(ρ‖π)`.
pub fn tnd_objective(rho: &[f64], tandem: &SquareMatrix, lambda: f64, n: usize, pi: &[f64]) -> Result<f64> {
    Ok(bilinear(tandem, rho)? + 2.0 / (lambda * n as f64) * kl_divergence(rho, pi))
}

/// Gradient of [`tnd_objective`] with respect to ρ:
/// `2 (T ρ + (1/(λn)) (1 + ln(ρ/π)))`.
pub fn grad_tnd(rho: &[f64], tandem: &SquareMatrix, lambda: f64, n: usize, pi: &[f64]) -> Vec<f64> {
    let c = 1.0 / (lambda * n as f64);
    tandem
        .mul_vec(rho)
        .iter()
        .zip(rho.iter().zip(pi))
        .map(|(t, (&r, &p))| 2.0 * (t + c * (1.0 + log_ratio(r, p))))
        .collect()
}

/// Coefficients `(a, b, c)` of the DIS objective.
pub fn dis_coefficients(lambda: f64, gamma: f64, n: usize, m: usize) -> (f64, f64, f64) {
    let half = 1.0 - lambda / 2.0;
    (
        1.0 / half,
        1.0 - gamma / 2.0,
        1.0 / (lambda * half * n as f64) + 1.0 / (gamma * m as f64),
    )
}

/// `2a E_ρ[L] - b ρᵀDρ + 2c KL(ρ‖π)`.
#[allow(clippy::too_many_arguments)]
pub fn dis_objective(
    rho: &[f64],
    gibbs: &[f64],
    dis: &SquareMatrix,
    lambda: f64,
    gamma: f64,
    n: usize,
    m: usize,
    pi: &[f64],
) -> Result<f64> {
    let (a, b, c) = dis_coefficients(lambda, gamma, n, m);
    let first: f64 = rho.iter().zip(gibbs).map(|(r, l)| r * l).sum();
    Ok(2.0 * a * first - b * bilinear(dis, rho)? + 2.0 * c * kl_divergence(rho, pi))
}

/// Gradient of [`dis_objective`]: `2 (a L - b D ρ + c (1 + ln(ρ/π)))`.
#[allow(clippy::too_many_arguments)]
pub fn grad_dis(
    rho: &[f64],
    gibbs: &[f64],
    dis: &SquareMatrix,
    lambda: f64,
    gamma: f64,
    n: usize,
    m: usize,
    pi: &[f64],
) -> Vec<f64> {
    let (a, b, c) = dis_coefficients(lambda, gamma, n, m);
    dis.mul_vec(rho)
        .iter()
        .zip(gibbs)
        .zip(rho.iter().zip(pi))
        .map(|((d, l), (&r, &p))| 2.0 * (a * l - b * d + c * (1.0 + log_ratio(r, p))))
        .collect()
}

/// iRProp+ state over the logits ρ̃.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub rho_tilde: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub prev_grad: Vec<f64>,
    pub prev_step: Vec<f64>,
    pub prev_objective: f64,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub best_bound: f64,
    pub stall_counter: usize,
}

impl OptimizerState {
    pub fn new(rho_tilde: Vec<f64>, lambda: f64, gamma: Option<f64>) -> Self {
        let m = rho_tilde.len();
        Self {
            rho_tilde,
            step_sizes: vec![DELTA_INIT; m],
            prev_grad: vec![0.0; m],
            prev_step: vec![0.0; m],
            prev_objective: f64::INFINITY,
            lambda,
            gamma,
            best_bound: f64::INFINITY,
            stall_counter: 0,
        }
    }

    /// Clears step sizes and gradient memory, keeping position and
    /// bookkeeping.
    pub fn reset_steps(&mut self) {
        self.step_sizes.fill(DELTA_INIT);
        self.prev_grad.fill(0.0);
        self.prev_step.fill(0.0);
        self.prev_objective = f64::INFINITY;
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One iRProp+ update. `objective` is the value at the current `rho_tilde`,
/// used to decide whether a sign flip reverts the previous step.
pub fn irprop_step(state: &mut OptimizerState, grad: &[f64], objective: f64) {
    let worsened = objective > state.prev_objective;
    for i in 0..grad.len() {
        let g = grad[i];
        let product = state.prev_grad[i] * g;
        if product > 0.0 {
            state.step_sizes[i] = (state.step_sizes[i] * ETA_PLUS).min(DELTA_MAX);
            let step = -sign(g) * state.step_sizes[i];
            state.rho_tilde[i] += step;
            state.prev_step[i] = step;
            state.prev_grad[i] = g;
        } else if product < 0.0 {
            state.step_sizes[i] = (state.step_sizes[i] * ETA_MINUS).max(DELTA_MIN);
            if worsened {
                state.rho_tilde[i] -= state.prev_step[i];
            }
            state.prev_step[i] = 0.0;
            state.prev_grad[i] = 0.0;
        } else {
            let step = -sign(g) * state.step_sizes[i];
            state.rho_tilde[i] += step;
            state.prev_step[i] = step;
            state.prev_grad[i] = g;
        }
    }
    state.prev_objective = objective;
}

/// Runs iRProp+ from `state` until `STALL_LIMIT` consecutive iterations
/// fail to strictly improve `objective`, then moves to the best point seen.
/// Returns the number of iterations.
pub fn irprop_minimize(state: &mut OptimizerState, mut objective: impl FnMut(&[f64]) -> (f64, Vec<f64>)) -> usize {
    state.reset_steps();
    state.stall_counter = 0;
    let mut best = state.rho_tilde.clone();
    let mut best_value = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_INNER {
        let (value, grad) = objective(&state.rho_tilde);
        iterations += 1;
        if value < best_value {
            best_value = value;
            best.copy_from_slice(&state.rho_tilde);
            state.stall_counter = 0;
        } else {
            state.stall_counter += 1;
            if state.stall_counter >= STALL_LIMIT {
                break;
            }
        }
        irprop_step(state, &grad, value);
    }
    state.rho_tilde = best;
    state.best_bound = best_value;
    iterations
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub bound: BoundKind,
    pub rho_star: Posterior,
    pub lambda: f64,
    pub gamma: Option<f64>,
    /// Accepted λ-form bound after each outer iteration; `trace[0]` is the
    /// starting point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub initial_lambda_bound: f64,
    pub lambda_bound: f64,
    pub kl_bound: f64,
}

fn check_prior(stats: &LossStats, pi: &Posterior, delta: f64) -> Result<()> {
    if pi.len() != stats.n_hypotheses() {
        return Err(Error::DimensionMismatch {
            expected: stats.n_hypotheses(),
            found: pi.len(),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(())
}

fn first_moment(rho: &[f64], values: &[f64]) -> f64 {
    rho.iter().zip(values).map(|(r, v)| r * v).sum()
}

/// Minimizes the λ-form TND bound over ρ, starting from ρ = π.
pub fn minimize_tnd(stats: &LossStats, pi: &Posterior) -> Result<OptimizeResult> {
    minimize_tnd_with(stats, pi, 0.05)
}

/// [`minimize_tnd`] at confidence `delta`.
pub fn minimize_tnd_with(stats: &LossStats, pi: &Posterior, delta: f64) -> Result<OptimizeResult> {
    check_prior(stats, pi, delta)?;
    let n = stats.n_min_pair;
    if n == 0 {
        return Err(Error::InvalidParameter("n_min_pair must be positive".into()));
    }
    let prior = &pi.pi;
    let bound_at = |rho: &[f64], lambda: f64| -> Result<f64> {
        let kl = kl_divergence(rho, prior);
        let num = complexity_numerator(2.0, kl, n, delta, 1);
        Ok(4.0 * lambda_upper(bilinear(&stats.tandem, rho)?, num, n, lambda))
    };
    let best_lambda = |rho: &[f64]| -> Result<f64> {
        let kl = kl_divergence(rho, prior);
        Ok(optimal_lambda(
            bilinear(&stats.tandem, rho)?,
            n,
            complexity_numerator(2.0, kl, n, delta, 1),
        ))
    };

    let logits0 = log_prior(prior);
    let rho0 = softmax(&logits0);
    let mut state = OptimizerState::new(logits0, best_lambda(&rho0)?, None);
    let initial = bound_at(&rho0, state.lambda)?;
    let mut trace = vec![initial];
    let mut inner_total = 0;
    let mut converged = false;
    let mut outer = 0;
    while outer < MAX_OUTER {
        outer += 1;
        let lambda = state.lambda;
        let scale = 4.0 / (1.0 - lambda / 2.0);
        inner_total += irprop_minimize(&mut state, |logits| {
            let rho = softmax(logits);
            let value = bound_at(&rho, lambda).unwrap_or(f64::INFINITY);
            let g: Vec<f64> = grad_tnd(&rho, &stats.tandem, lambda, n, prior)
                .into_iter()
                .map(|x| scale * x)
                .collect();
            (value, softmax_compose(&rho, &g))
        });
        let rho = softmax(&state.rho_tilde);
        state.lambda = best_lambda(&rho)?;
        let accepted = bound_at(&rho, state.lambda)?.min(*trace.last().unwrap());
        let change = trace.last().unwrap() - accepted;
        trace.push(accepted);
        if change < OUTER_TOLERANCE {
            converged = true;
            break;
        }
    }
    let rho = softmax(&state.rho_tilde);
    let kl = kl_divergence(&rho, prior);
    let t = bilinear(&stats.tandem, &rho)?;
    let kl_bound = tnd_bound(t, kl, n, delta, Form::Kl)?.value;
    Ok(OptimizeResult {
        bound: BoundKind::Tnd,
        rho_star: Posterior { rho, pi: prior.clone() },
        lambda: state.lambda,
        gamma: None,
        lambda_bound: *trace.last().unwrap(),
        initial_lambda_bound: initial,
        trace,
        iterations: outer,
        inner_iterations: inner_total,
        converged,
        kl_bound,
    })
}

fn log_prior(prior: &[f64]) -> Vec<f64> {
    // Logits reproducing π; zero for a uniform prior.
    let logs: Vec<f64> = prior.iter().map(|&p| p.max(f64::MIN_POSITIVE).ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - mean).collect()
}

/// Minimizes the λ-form DIS bound over ρ (binary only), alternating
/// iRProp+ with closed-form λ and γ. Disagreements come from the unlabeled
/// pool when the statistics were computed with one.
pub fn minimize_dis(stats: &LossStats, pi: &Posterior) -> Result<OptimizeResult> {
    minimize_dis_with(stats, pi, 0.05)
}

/// [`minimize_dis`] at confidence `delta`.
pub fn minimize_dis_with(stats: &LossStats, pi: &Posterior, delta: f64) -> Result<OptimizeResult> {
    check_prior(stats, pi, delta)?;
    if !stats.is_binary() {
        return Err(Error::RequiresBinary("DIS"));
    }
    let (n, m) = (stats.n_min_first, stats.m_min);
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("n_min_first and m_min must be positive".into()));
    }
    let prior = &pi.pi;
    let bound_at = |rho: &[f64], lambda: f64, gamma: f64| -> Result<f64> {
        let kl = kl_divergence(rho, prior);
        let upper = lambda_upper(
            first_moment(rho, &stats.gibbs),
            complexity_numerator(1.0, kl, n, delta, 2),
            n,
            lambda,
        );
        let lower = gamma_lower(
            bilinear(&stats.disagreement, rho)?,
            complexity_numerator(2.0, kl, m, delta, 2),
            m,
            gamma,
        );
        Ok(4.0 * upper - 2.0 * lower)
    };
    let update = |rho: &[f64], gamma: f64| -> Result<(f64, f64)> {
        let kl = kl_divergence(rho, prior);
        let lambda = optimal_lambda(
            first_moment(rho, &stats.gibbs),
            n,
            complexity_numerator(1.0, kl, n, delta, 2),
        );
        let d = bilinear(&stats.disagreement, rho)?;
        let gamma = if d > 0.0 { optimal_gamma(d, m, kl, delta) } else { gamma };
        Ok((lambda, gamma))
    };

    let logits0 = log_prior(prior);
    let rho0 = softmax(&logits0);
    // γ = 2 switches the disagreement term off when no disagreement is seen.
    let (lambda0, gamma0) = update(&rho0, 2.0)?;
    let mut state = OptimizerState::new(logits0, lambda0, Some(gamma0));
    let initial = bound_at(&rho0, lambda0, gamma0)?;
    let mut trace = vec![initial];
    let mut inner_total = 0;
    let mut converged = false;
    let mut outer = 0;
    while outer < MAX_OUTER {
        outer += 1;
        let (lambda, gamma) = (state.lambda, state.gamma.unwrap());
        inner_total += irprop_minimize(&mut state, |logits| {
            let rho = softmax(logits);
            let value = bound_at(&rho, lambda, gamma).unwrap_or(f64::INFINITY);
            let g: Vec<f64> = grad_dis(&rho, &stats.gibbs, &stats.disagreement, lambda, gamma, n, m, prior)
                .into_iter()
                .map(|x| 2.0 * x)
                .collect();
            (value, softmax_compose(&rho, &g))
        });
        let rho = softmax(&state.rho_tilde);
        let (lambda, gamma) = update(&rho, gamma)?;
        state.lambda = lambda;
        state.gamma = Some(gamma);
        let accepted = bound_at(&rho, lambda, gamma)?.min(*trace.last().unwrap());
        let change = trace.last().unwrap() - accepted;
        trace.push(accepted);
        if change < OUTER_TOLERANCE {
            converged = true;
            break;
        }
    }
    let rho = softmax(&state.rho_tilde);
    let kl = kl_divergence(&rho, prior);
    let kl_bound = dis_bound(
        first_moment(&rho, &stats.gibbs),
        bilinear(&stats.disagreement, &rho)?,
        kl,
        n,
        m,
        delta,
        Form::Kl,
    )?
    .value;
    Ok(OptimizeResult {
        bound: BoundKind::Dis,
        rho_star: Posterior { rho, pi: prior.clone() },
        lambda: state.lambda,
        gamma: state.gamma,
        lambda_bound: *trace.last().unwrap(),
        initial_lambda_bound: initial,
        trace,
        iterations: outer,
        inner_iterations: inner_total,
        converged,
        kl_bound,
    })
}

/// Minimizes the λ-form FO bound by alternating closed-form λ with the
/// exact ρ-block minimizer `ρ(h) ∝ π(h) exp(-λ n L(h))`.
pub fn minimize_fo(stats: &LossStats, pi: &Posterior) -> Result<OptimizeResult> {
    minimize_fo_with(stats, pi, 0.05)
}

/// [`minimize_fo`] at confidence `delta`.
pub fn minimize_fo_with(stats: &LossStats, pi: &Posterior, delta: f64) -> Result<OptimizeResult> {
    check_prior(stats, pi, delta)?;
    let n = stats.n_min_first;
    if n == 0 {
        return Err(Error::InvalidParameter("n_min_first must be positive".into()));
    }
    let prior = &pi.pi;
    let bound_at = |rho: &[f64], lambda: f64| {
        let kl = kl_divergence(rho, prior);
        2.0 * lambda_upper(
            first_moment(rho, &stats.gibbs),
            complexity_numerator(1.0, kl, n, delta, 1),
            n,
            lambda,
        )
    };
    let best_lambda = |rho: &[f64]| {
        let kl = kl_divergence(rho, prior);
        optimal_lambda(
            first_moment(rho, &stats.gibbs),
            n,
            complexity_numerator(1.0, kl, n, delta, 1),
        )
    };
    let gibbs_posterior = |lambda: f64| {
        let logits: Vec<f64> = prior
            .iter()
            .zip(&stats.gibbs)
            .map(|(&p, &l)| p.max(f64::MIN_POSITIVE).ln() - lambda * n as f64 * l)
            .collect();
        softmax(&logits)
    };

    let mut rho = prior.clone();
    let mut lambda = best_lambda(&rho);
    let initial = bound_at(&rho, lambda);
    let mut trace = vec![initial];
    let mut converged = false;
    let mut outer = 0;
    while outer < MAX_OUTER {
        outer += 1;
        let candidate = gibbs_posterior(lambda);
        if bound_at(&candidate, lambda) <= bound_at(&rho, lambda) {
            rho = candidate;
        }
        lambda = best_lambda(&rho);
        let accepted = bound_at(&rho, lambda).min(*trace.last().unwrap());
        let change = trace.last().unwrap() - accepted;
        trace.push(accepted);
        if change < OUTER_TOLERANCE {
            converged = true;
            break;
        }
    }
    let kl = kl_divergence(&rho, prior);
    let kl_bound = fo_bound(first_moment(&rho, &stats.gibbs), kl, n, delta, Form::Kl)?.value;
    Ok(OptimizeResult {
        bound: BoundKind::Fo,
        rho_star: Posterior { rho, pi: prior.clone() },
        lambda,
        gamma: None,
        lambda_bound: *trace.last().unwrap(),
        initial_lambda_bound: initial,
        trace,
        iterations: outer,
        inner_iterations: 0,
        converged,
        kl_bound,
    })
}

/// Dispatches to the optimizer for `kind` (FO, TND or DIS).
pub fn minimize(kind: BoundKind, stats: &LossStats, pi: &Posterior, delta: f64) -> Result<OptimizeResult> {
    match kind {
        BoundKind::Fo => minimize_fo_with(stats, pi, delta),
        BoundKind::Tnd => minimize_tnd_with(stats, pi, delta),
        BoundKind::Dis => minimize_dis_with(stats, pi, delta),
        other => Err(Error::InvalidParameter(format!("{other} cannot be optimized"))),
    }
}
