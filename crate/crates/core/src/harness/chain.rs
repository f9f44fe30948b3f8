use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distributed::dist_learn;
use crate::linalg::{dist, dot};
use crate::losses::{DataPoint, LossKind, LossModel};
use crate::optimizer::{pgd, GdConfig};
use crate::rng::StreamKind;
use crate::unlearn::{learn, UnlearnConfig};
use crate::{Error, Result};

use super::config::{ChainConfig, Prepared};

/// Metrics of one round (round 0 is the initial `learn`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub trial: usize,
    pub round: usize,
    pub dataset_size: usize,
    /// `f(θ̃_i) − min f` on the current dataset, for the optimized loss.
    pub excess_risk: f64,
    /// `‖θ̂_i − θ*_i‖`; for the distributed chain θ̂ is the best copy's average.
    pub drift: f64,
    /// `‖θ̂_i − θ̂'_i‖` against a fresh retrain, when measured.
    pub gap: Option<f64>,
    /// Iterations per model this round (largest over copies when distributed).
    pub iterations: usize,
    pub gradients: u64,
    pub cumulative_gradients: u64,
    /// Distance bound of the reference minimizer; 0 for the closed-form oracle.
    pub reference_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
}

/// Minimizer of `loss` over Θ on `data`: closed form for interior ridge
/// problems, otherwise projected GD for `iterations` steps from the origin.
pub struct Reference {
    pub theta: Vec<f64>,
    pub tolerance: f64,
    exact_ridge: bool,
}

impl Reference {
    pub fn compute(loss: &LossModel, data: &[DataPoint], iterations: usize) -> Result<Self> {
        if loss.kind() == LossKind::Ridge {
            match loss.ridge_oracle(data) {
                Ok(theta) => return Ok(Reference { theta, tolerance: 0.0, exact_ridge: true }),
                Err(Error::OracleOutsideDomain { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let gamma = loss.constants().contraction()?;
        let trace = pgd(loss, data, &loss.space().origin(), &GdConfig::strongly_convex(loss, iterations)?)?;
        let tolerance = gamma.powi(iterations.min(i32::MAX as usize) as i32) * loss.constants().diameter;
        Ok(Reference { theta: trace.theta, tolerance, exact_ridge: false })
    }

    /// `f(θ) − f(θ*)`; for interior ridge the exact form `½ vᵀ(XᵀX/n + λI)v` with `v = θ − θ*`.
    pub fn excess(&self, loss: &LossModel, data: &[DataPoint], theta: &[f64]) -> Result<f64> {
        if !self.exact_ridge {
            return Ok(loss.empirical_loss(data, theta)? - loss.empirical_loss(data, &self.theta)?);
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let v: Vec<f64> = theta.iter().zip(&self.theta).map(|(a, b)| a - b).collect();
        let quad: f64 = data.iter().map(|z| dot(&z.x, &v).powi(2)).sum::<f64>() / data.len() as f64;
        Ok(0.5 * (quad + loss.l2() * dot(&v, &v)))
    }
}

/// Pre-noise parameter a fresh `learn` reaches on `data`.
pub fn retrain(cfg: &UnlearnConfig, data: &Dataset) -> Result<Vec<f64>> {
    let t = cfg.train_iterations_for(data.len())?;
    let gd = GdConfig::strongly_convex(&cfg.loss, t)?;
    Ok(pgd(&cfg.loss, data.points(), &cfg.loss.space().origin(), &gd)?.theta)
}

struct RoundData<'a> {
    round: usize,
    data: &'a Dataset,
    secret: &'a [f64],
    published: &'a [f64],
    iterations: usize,
    gradients: u64,
    wall: Option<f64>,
}

fn record(p: &Prepared, trial: usize, cumulative: u64, r: RoundData<'_>, gap: Option<f64>) -> Result<MetricsRecord> {
    let loss = p.chain.loss();
    let reference = Reference::compute(loss, r.data.points(), reference_iterations(p, r.data.len())?)?;
    Ok(MetricsRecord {
        trial,
        round: r.round,
        dataset_size: r.data.len(),
        excess_risk: reference.excess(loss, r.data.points(), r.published)?,
        drift: dist(r.secret, &reference.theta),
        gap,
        iterations: r.iterations,
        gradients: r.gradients,
        cumulative_gradients: cumulative,
        reference_tolerance: reference.tolerance,
        wall_ms: r.wall,
    })
}

/// Ten times the training iterations of the chain.
fn reference_iterations(p: &Prepared, len: usize) -> Result<usize> {
    let t = match &p.chain {
        ChainConfig::Single(c) => c.train_iterations_for(len)?,
        ChainConfig::Distributed(c) => c.train_iterations,
    };
    Ok(10 * t)
}

fn elapsed(start: Option<Instant>) -> Option<f64> {
    start.map(|s| s.elapsed().as_secs_f64() * 1e3)
}

/// Learns and then absorbs the trial's update stream, one record per round.
pub fn run_chain(p: &Prepared, trial: usize) -> Result<Vec<MetricsRecord>> {
    let inputs = p.trial(trial)?;
    let timing = p.config.record_timing;
    let clock = || timing.then(Instant::now);
    let mut out = Vec::with_capacity(inputs.updates.len() + 1);
    match &p.chain {
        ChainConfig::Single(cfg) => {
            let start = clock();
            let mut state = learn(inputs.dataset, cfg, inputs.seeds.stream(StreamKind::Noise, 0))?;
            let wall = elapsed(start);
            let t0 = cfg.train_iterations_for(state.dataset().len())?;
            let secret = state.secret().expect("fresh state keeps its secret").to_vec();
            let gap = p.config.measure_gap.then_some(0.0);
            let rd = RoundData { round: 0, data: state.dataset(), secret: &secret, published: state.published(), iterations: t0, gradients: state.ledger(), wall };
            out.push(record(p, trial, state.ledger(), rd, gap)?);
            for u in &inputs.updates.updates {
                let start = clock();
                let outcome = state.unlearn(u, cfg)?;
                let wall = elapsed(start);
                let i = outcome.round;
                let secret = state.secret().expect("secret kept between rounds").to_vec();
                let gap = if p.config.measure_gap {
                    Some(dist(&secret, &retrain(cfg, state.dataset()).map_err(|e| e.at_round(i))?))
                } else {
                    None
                };
                let rd = RoundData {
                    round: i,
                    data: state.dataset(),
                    secret: &secret,
                    published: state.published(),
                    iterations: outcome.iterations,
                    gradients: outcome.gradients,
                    wall,
                };
                out.push(record(p, trial, state.ledger(), rd, gap).map_err(|e| e.at_round(i))?);
            }
        }
        ChainConfig::Distributed(cfg) => {
            let start = clock();
            let mut state = dist_learn(inputs.dataset, cfg, &inputs.seeds)?;
            let wall = elapsed(start);
            let secret = state.average(state.best());
            let rd = RoundData {
                round: 0,
                data: state.dataset(),
                secret: &secret,
                published: state.published(),
                iterations: cfg.train_iterations,
                gradients: state.ledger(),
                wall,
            };
            out.push(record(p, trial, state.ledger(), rd, None)?);
            for u in &inputs.updates.updates {
                let start = clock();
                let round = state.unlearn(u, cfg)?;
                let wall = elapsed(start);
                let secret = state.average(state.best());
                let rd = RoundData {
                    round: round.round,
                    data: state.dataset(),
                    secret: &secret,
                    published: state.published(),
                    iterations: round.copies.iter().map(|c| c.iterations).max().unwrap_or(0),
                    gradients: round.gradients(),
                    wall,
                };
                out.push(record(p, trial, state.ledger(), rd, None).map_err(|e| e.at_round(round.round))?);
            }
        }
    }
    Ok(out)
}

/// Runs every trial, in parallel when enabled, and concatenates records in trial order.
pub fn run_experiment(p: &Prepared) -> Result<Vec<MetricsRecord>> {
    let per_trial = p.config.execution.try_map(p.config.trials, |t| run_chain(p, t))?;
    Ok(per_trial.into_iter().flatten().collect())
}
