//! Constrained maximum-likelihood estimation via projected Adam ascent.
//!
//! The weighted fit maximizes the aggregated log-likelihood over `(s, alpha)`
//! subject to `sum(s) = 0`, `sum(alpha) = 0`; each Adam step is followed by a
//! Euclidean projection onto the constraint set. The unweighted baseline
//! freezes `alpha` at zero (standard BTL with homogeneous judges).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{triples_connected, TripleStats};
use crate::error::{Error, Result};
use crate::model::{self, Params};

/// `|z|` beyond which the fit is treated as separated.
const SEPARATION_Z: f64 = 30.0;

/// Optimizer configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_iters: usize,
    /// Threshold on the max-norm of the projected gradient scaled by `1/T`.
    pub grad_tol: f64,
    /// Threshold on the max-norm of the per-step parameter change.
    pub param_tol: f64,
    pub seed: u64,
    /// Half-width of the uniform initialization; 0 gives a deterministic
    /// all-zeros start.
    pub init_scale: f64,
    /// Record the log-likelihood at every iteration.
    pub track_loglik: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_iters: 20_000,
            grad_tol: 1e-7,
            param_tol: 1e-9,
            seed: 0,
            init_scale: 0.01,
            track_loglik: false,
        }
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    ParamTol,
    MaxIters,
    SeparationDetected,
}

/// Fitted parameters plus optimizer diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Params,
    pub final_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_iteration_loglik: Option<Vec<f64>>,
}

/// Which parameters the fit updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    Weighted,
    Unweighted,
}

/// Fit the judge-aware model (scores and log-discriminations).
pub fn fit_weighted(
    triples: &[TripleStats],
    n_candidates: usize,
    n_judges: usize,
    config: &FitConfig,
) -> Result<FitResult> {
    fit(triples, n_candidates, n_judges, config, ModelKind::Weighted)
}

/// Fit the unweighted BTL baseline: `alpha` frozen at zero.
pub fn fit_unweighted(
    triples: &[TripleStats],
    n_candidates: usize,
    n_judges: usize,
    config: &FitConfig,
) -> Result<FitResult> {
    fit(
        triples,
        n_candidates,
        n_judges,
        config,
        ModelKind::Unweighted,
    )
}

fn fit(
    triples: &[TripleStats],
    n_candidates: usize,
    n_judges: usize,
    config: &FitConfig,
    kind: ModelKind,
) -> Result<FitResult> {
    if triples.is_empty() {
        return Err(Error::EmptyData);
    }
    for t in triples {
        if t.i >= n_candidates || t.j >= n_candidates {
            return Err(Error::IndexOutOfBounds {
                what: "candidates",
                index: t.i.max(t.j),
                size: n_candidates,
            });
        }
        if t.k >= n_judges {
            return Err(Error::IndexOutOfBounds {
                what: "judges",
                index: t.k,
                size: n_judges,
            });
        }
    }
    if !triples_connected(triples, n_candidates) {
        let report = {
            let records = triples
                .iter()
                .map(|t| crate::data::ComparisonRecord {
                    i: t.i,
                    j: t.j,
                    k: t.k,
                    y: 0.5,
                })
                .collect();
            let ds = crate::data::Dataset::new(n_candidates, n_judges, records)?;
            crate::data::check_connectivity(&ds)
        };
        return Err(Error::Disconnected {
            n_components: report.components.len(),
        });
    }

    let total: u64 = triples.iter().map(|t| t.n).sum();
    let total_f = total as f64;
    let dim = n_candidates + n_judges;

    let mut params = initial_params(n_candidates, n_judges, config);
    if kind == ModelKind::Unweighted {
        params.alpha.iter_mut().for_each(|a| *a = 0.0);
    }

    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut trace = config.track_loglik.then(Vec::new);

    let mut iterations = 0;
    let mut stop_reason = StopReason::MaxIters;
    let mut converged = false;

    for iter in 1..=config.max_iters {
        iterations = iter;
        let mut grad = model::grad_log_likelihood(&params, triples)?;
        mask_and_project_grad(&mut grad, n_candidates, kind);

        let grad_scaled_max = max_abs(&grad) / total_f;
        if grad_scaled_max < config.grad_tol {
            stop_reason = StopReason::GradTol;
            converged = true;
            break;
        }
        if model::max_abs_z(&params, triples) > SEPARATION_Z {
            stop_reason = StopReason::SeparationDetected;
            converged = false;
            break;
        }

        // Adam ascent step with bias correction.
        let b1 = config.adam_beta1;
        let b2 = config.adam_beta2;
        let bc1 = 1.0 - b1.powi(iter as i32);
        let bc2 = 1.0 - b2.powi(iter as i32);
        let mut max_step = 0.0f64;
        let mut flat = params.to_flat();
        for d in 0..dim {
            m[d] = b1 * m[d] + (1.0 - b1) * grad[d];
            v[d] = b2 * v[d] + (1.0 - b2) * grad[d] * grad[d];
            let step =
                config.learning_rate * (m[d] / bc1) / ((v[d] / bc2).sqrt() + config.adam_epsilon);
            flat[d] += step;
            max_step = max_step.max(step.abs());
        }
        let mut next = Params::from_flat(&flat, n_candidates);
        match kind {
            ModelKind::Weighted => next = model::project_to_constraints(&next),
            ModelKind::Unweighted => {
                model::center(&mut next.s);
                next.alpha.iter_mut().for_each(|a| *a = 0.0);
            }
        }
        let delta = params
            .to_flat()
            .iter()
            .zip(next.to_flat().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        params = next;

        if let Some(trace) = trace.as_mut() {
            trace.push(model::log_likelihood(&params, triples)?);
        }

        if delta < config.param_tol {
            stop_reason = StopReason::ParamTol;
            converged = true;
            break;
        }
    }

    if !params.is_finite() {
        return Err(Error::NonFinite);
    }
    let final_loglik = model::log_likelihood(&params, triples)?;
    Ok(FitResult {
        params,
        final_loglik,
        iterations,
        converged,
        stop_reason,
        per_iteration_loglik: trace,
    })
}

fn initial_params(n_candidates: usize, n_judges: usize, config: &FitConfig) -> Params {
    if config.init_scale == 0.0 {
        return Params::zeros(n_candidates, n_judges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let w = config.init_scale;
    let params = Params {
        s: (0..n_candidates).map(|_| rng.random_range(-w..w)).collect(),
        alpha: (0..n_judges).map(|_| rng.random_range(-w..w)).collect(),
    };
    model::project_to_constraints(&params)
}

/// Project the gradient onto the constraint tangent space (center each
/// active block); zero out the alpha block for the unweighted model.
fn mask_and_project_grad(grad: &mut [f64], n_candidates: usize, kind: ModelKind) {
    let (gs, ga) = grad.split_at_mut(n_candidates);
    model::center(gs);
    match kind {
        ModelKind::Weighted => model::center(ga),
        ModelKind::Unweighted => ga.iter_mut().for_each(|g| *g = 0.0),
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
