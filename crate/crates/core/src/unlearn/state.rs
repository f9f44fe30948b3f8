use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Update, UpdateEffect};
use crate::losses::DataPoint;
use crate::optimizer::{pgd, GdConfig, Regime};
use crate::rng::{NamedRng, RngPosition};
use crate::{Error, Result};

use super::{Mode, UnlearnConfig};

pub const SNAPSHOT_FORMAT: &str = "unlearn-state/1";

/// θ̃ = θ̂ + N(0, σ²I), drawn from `noise`.
pub fn publish(theta: &[f64], sigma: f64, noise: &mut NamedRng) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
    }
    Ok(theta.iter().map(|t| t + sigma * noise.rng.sample::<f64, _>(StandardNormal)).collect())
}

/// State of a learn/unlearn chain after `round` updates.
#[derive(Clone, Debug)]
pub struct UnlearnState {
    round: usize,
    /// θ̂; absent after restoring a perfect-mode snapshot.
    secret: Option<Vec<f64>>,
    published: Vec<f64>,
    dataset: Dataset,
    ledger: u64,
    noise: NamedRng,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundOutcome {
    pub round: usize,
    pub iterations: usize,
    pub gradients: u64,
    pub effect: UpdateEffect,
}

fn gd(cfg: &UnlearnConfig, iterations: usize) -> GdConfig {
    GdConfig { step_size: cfg.step_size(), iterations, regime: Regime::StronglyConvexSmooth }
}

/// Trains from the origin and publishes the first model.
pub fn learn(data: Dataset, cfg: &UnlearnConfig, mut noise: NamedRng) -> Result<UnlearnState> {
    if data.len() < 2 {
        return Err(Error::invalid("dataset", "learning needs at least two points"));
    }
    if data.dim() != cfg.d {
        return Err(Error::Dimension { expected: cfg.d, found: data.dim() });
    }
    let t = cfg.train_iterations_for(data.len())?;
    let trace = pgd(&cfg.loss, data.points(), &cfg.loss.space().origin(), &gd(cfg, t))?;
    let published = publish(&trace.theta, cfg.sigma, &mut noise)?;
    Ok(UnlearnState {
        round: 0,
        secret: Some(trace.theta),
        published,
        dataset: data,
        ledger: trace.gradient_evaluations,
        noise,
    })
}

impl UnlearnState {
    /// Applies one update, descends from the warm start and republishes.
    pub fn unlearn(&mut self, u: &Update, cfg: &UnlearnConfig) -> Result<RoundOutcome> {
        let i = self.round + 1;
        self.step(u, cfg).map_err(|e| e.at_round(i))
    }

    fn step(&mut self, u: &Update, cfg: &UnlearnConfig) -> Result<RoundOutcome> {
        let i = self.round + 1;
        let mut next = self.dataset.clone();
        let effect = next.apply(u)?;
        let warm = if cfg.warm_starts_from_published() {
            &self.published
        } else {
            self.secret.as_ref().ok_or_else(|| Error::invalid("state", "secret parameter missing"))?
        };
        let iterations = cfg.round_iterations(i);
        let trace = pgd(&cfg.loss, next.points(), warm, &gd(cfg, iterations))?;
        self.published = publish(&trace.theta, cfg.sigma, &mut self.noise)?;
        self.secret = Some(trace.theta);
        self.dataset = next;
        self.ledger += trace.gradient_evaluations;
        self.round = i;
        Ok(RoundOutcome { round: i, iterations, gradients: trace.gradient_evaluations, effect })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn secret(&self) -> Option<&[f64]> {
        self.secret.as_deref()
    }

    pub fn published(&self) -> &[f64] {
        &self.published
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// Cumulative point-gradient computations.
    pub fn ledger(&self) -> u64 {
        self.ledger
    }

    /// Persistable state. In perfect mode the secret parameter is left out.
    pub fn snapshot(&self, mode: Mode) -> Snapshot {
        Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            mode,
            round: self.round,
            secret: if mode == Mode::StrongPerfect { None } else { self.secret.clone() },
            published: self.published.clone(),
            ledger: self.ledger,
            noise: self.noise.position(),
            dim: self.dataset.dim(),
            initial_len: self.dataset.initial_len(),
            points: self.dataset.points().to_vec(),
        }
    }

    pub fn restore(snap: Snapshot) -> Result<Self> {
        if snap.format != SNAPSHOT_FORMAT {
            return Err(Error::Config(format!("unsupported snapshot format `{}`", snap.format)));
        }
        if snap.mode != Mode::StrongPerfect && snap.secret.is_none() {
            return Err(Error::Config("snapshot lacks the secret parameter its mode needs".into()));
        }
        Ok(UnlearnState {
            round: snap.round,
            secret: snap.secret,
            published: snap.published,
            dataset: Dataset::with_initial_len(snap.points, snap.dim, snap.initial_len)?,
            ledger: snap.ledger,
            noise: NamedRng::restore(&snap.noise)?,
        })
    }
}

/// Versioned JSON state document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub mode: Mode,
    pub round: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub secret: Option<Vec<f64>>,
    pub published: Vec<f64>,
    pub ledger: u64,
    pub noise: RngPosition,
    pub dim: usize,
    pub initial_len: usize,
    pub points: Vec<DataPoint>,
}
