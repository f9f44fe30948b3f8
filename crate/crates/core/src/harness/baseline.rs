//! Private retraining from scratch after every update, the reference point
//! for the cost of unlearning.
//!
//! Round `i` runs `T` projected GD steps from the origin on `𝒟_i` and adds
//! Gaussian noise calibrated to the sensitivity of that output,
//! `Δ_b(T) = 2L/(mn_i) + 2γ^T·r` (optimizer sensitivity plus the unconverged
//! residual of both runs). `T` is the least value whose expected excess-risk
//! bound `(M/2)((γ^T·r)² + d·σ_b(T)²)` is at most α.

use crate::linalg::dist;
use crate::losses::LossModel;
use crate::mechanism::gaussian_mechanism_sigma;
use crate::optimizer::{pgd, GdConfig};
use crate::rng::StreamKind;
use crate::unlearn::{publish, Privacy, UnlearnConfig};
use crate::{Error, Result};

use super::chain::{MetricsRecord, Reference};
use super::config::{ChainConfig, Prepared};

const MAX_BASELINE_ITERATIONS: usize = 1_000_000;

/// Calibration of the retraining baseline for one dataset size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselinePlan {
    pub iterations: usize,
    pub sigma: f64,
    /// Expected excess-risk bound at `iterations`.
    pub accuracy: f64,
}

fn baseline_sigma(loss: &LossModel, n: usize, t: usize, privacy: Privacy) -> Result<f64> {
    let c = loss.constants();
    let gamma = c.contraction()?;
    let r = c.diameter / 2.0;
    let sens = 2.0 * c.lipschitz / (c.strong_convexity * n as f64) + 2.0 * gamma.powi(t.min(i32::MAX as usize) as i32) * r;
    Ok(gaussian_mechanism_sigma(sens, privacy.epsilon, privacy.delta))
}

/// Expected excess-risk bound of the baseline after `t` iterations on `n` points.
pub fn baseline_accuracy(loss: &LossModel, n: usize, t: usize, privacy: Privacy) -> Result<f64> {
    let c = loss.constants();
    let gamma = c.contraction()?;
    let resid = gamma.powi(t.min(i32::MAX as usize) as i32) * c.diameter / 2.0;
    let sigma = baseline_sigma(loss, n, t, privacy)?;
    Ok(0.5 * c.smoothness * (resid * resid + loss.dim() as f64 * sigma * sigma))
}

/// Least `T` certifying expected excess risk ≤ α.
pub fn plan_baseline(loss: &LossModel, n: usize, alpha: f64, privacy: Privacy) -> Result<BaselinePlan> {
    let c = loss.constants();
    if c.strong_convexity <= 0.0 {
        return Err(Error::RequiresStrongConvexity);
    }
    let floor_sigma = gaussian_mechanism_sigma(2.0 * c.lipschitz / (c.strong_convexity * n as f64), privacy.epsilon, privacy.delta);
    let floor = 0.5 * c.smoothness * loss.dim() as f64 * floor_sigma * floor_sigma;
    if !(alpha > floor) {
        return Err(Error::Unreachable { alpha, floor });
    }
    for t in 0..=MAX_BASELINE_ITERATIONS {
        let accuracy = baseline_accuracy(loss, n, t, privacy)?;
        if accuracy <= alpha {
            return Ok(BaselinePlan { iterations: t, sigma: baseline_sigma(loss, n, t, privacy)?, accuracy });
        }
    }
    Err(Error::Unreachable { alpha, floor })
}

/// Expected excess-risk bound of an unlearning chain, `(M/2)(ρ² + dσ²)` with ρ its residual bound.
pub fn unlearn_accuracy_bound(cfg: &UnlearnConfig) -> f64 {
    let c = cfg.loss.constants();
    let rho = cfg.residual_bound();
    0.5 * c.smoothness * (rho * rho + cfg.d as f64 * cfg.sigma * cfg.sigma)
}

fn baseline_trial(p: &Prepared, cfg: &UnlearnConfig, alpha: f64, trial: usize) -> Result<Vec<MetricsRecord>> {
    let inputs = p.trial(trial)?;
    let privacy = cfg.params.privacy;
    let loss = &cfg.loss;
    let mut noise = inputs.seeds.stream(StreamKind::Noise, 1);
    let mut data = inputs.dataset;
    let mut cumulative = 0u64;
    let mut out = Vec::with_capacity(inputs.updates.len() + 1);
    let rounds = std::iter::once(None).chain(inputs.updates.updates.iter().map(Some));
    for (i, u) in rounds.enumerate() {
        let mut run = || -> Result<MetricsRecord> {
            if let Some(u) = u {
                data.apply(u)?;
            }
            let plan = plan_baseline(loss, data.len(), alpha, privacy)?;
            let trace = pgd(loss, data.points(), &loss.space().origin(), &GdConfig::strongly_convex(loss, plan.iterations)?)?;
            let published = publish(&trace.theta, plan.sigma, &mut noise)?;
            cumulative += trace.gradient_evaluations;
            let reference = Reference::compute(loss, data.points(), 10 * cfg.train_iterations_for(data.len())?)?;
            Ok(MetricsRecord {
                trial,
                round: i,
                dataset_size: data.len(),
                excess_risk: reference.excess(loss, data.points(), &published)?,
                drift: dist(&trace.theta, &reference.theta),
                gap: None,
                iterations: plan.iterations,
                gradients: trace.gradient_evaluations,
                cumulative_gradients: cumulative,
                reference_tolerance: reference.tolerance,
                wall_ms: None,
            })
        };
        out.push(run().map_err(|e| e.at_round(i))?);
    }
    Ok(out)
}

/// Retrains privately after every update of every trial to accuracy α.
pub fn run_retrain_baseline(p: &Prepared, alpha: f64) -> Result<Vec<MetricsRecord>> {
    let ChainConfig::Single(cfg) = &p.chain else {
        return Err(Error::Config("the retraining baseline needs a single-model mode".into()));
    };
    let per_trial = p.config.execution.try_map(p.config.trials, |t| baseline_trial(p, cfg, alpha, t))?;
    Ok(per_trial.into_iter().flatten().collect())
}
