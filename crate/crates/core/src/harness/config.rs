use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::{gen_adversarial_sequence, gen_synthetic_dataset, Dataset, LabelKind, Model, Strategy, UpdateSequence, UpdateSpec};
use crate::distributed::{dist_params, DistConfig, DEFAULT_BOOTSTRAP_CEILING};
use crate::exec::Execution;
use crate::losses::{DataBounds, LossKind, LossModel, ParamSpace};
use crate::rng::{Seeds, StreamKind};
use crate::unlearn::{Mode, Privacy, UnlearnConfig, UnlearnParams};
use crate::{Error, Result};

/// Environment variable that overrides the `output` key.
pub const OUTPUT_DIR_ENV: &str = "UNLEARN_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum ChainMode {
    Single(Mode),
    Distributed,
}

impl From<ChainMode> for String {
    fn from(m: ChainMode) -> String {
        match m {
            ChainMode::Single(mode) => mode.name().to_string(),
            ChainMode::Distributed => "distributed".to_string(),
        }
    }
}

impl std::str::FromStr for ChainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distributed" => Ok(ChainMode::Distributed),
            other => other.parse().map(ChainMode::Single),
        }
    }
}

/// Flat experiment description. Every field is addressable as `key = value`
/// in the config file and through [`ExperimentConfig::set`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    /// CSV dataset; when absent a synthetic one is drawn per trial.
    pub data_path: Option<PathBuf>,
    pub n: usize,
    pub d: usize,
    /// `linear` or `logistic`.
    pub model: String,
    /// Label noise of the linear model.
    pub noise: f64,
    pub feature_radius: f64,
    pub label_bound: f64,
    pub radius: f64,
    pub loss: LossKind,
    pub lambda: f64,
    pub mode: ChainMode,
    pub epsilon: f64,
    pub delta: f64,
    /// 𝓘
    pub iterations: u32,
    pub xi: f64,
    pub beta: f64,
    /// JSONL update stream; when absent one is generated per trial.
    pub updates_path: Option<PathBuf>,
    pub update_strategy: Strategy,
    pub update_length: usize,
    pub b_ceiling: usize,
    pub output: PathBuf,
    /// Retrain from scratch every round to measure the unlearn-vs-retrain gap.
    pub measure_gap: bool,
    /// Record wall time per round; makes reports non-reproducible.
    pub record_timing: bool,
    /// Target accuracy of the retraining baseline.
    pub alpha: Option<f64>,
    /// Multiplies σ; values below 1 give an under-noised negative control.
    pub sigma_scale: f64,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            trials: 1,
            data_path: None,
            n: 500,
            d: 5,
            model: "linear".into(),
            noise: 0.1,
            feature_radius: 1.0,
            label_bound: 1.0,
            radius: 4.0,
            loss: LossKind::Ridge,
            lambda: 0.1,
            mode: ChainMode::Single(Mode::StrongSecret),
            epsilon: 1.0,
            delta: 1e-5,
            iterations: 5,
            xi: 1.0,
            beta: 0.1,
            updates_path: None,
            update_strategy: Strategy::Churn,
            update_length: 100,
            b_ceiling: DEFAULT_BOOTSTRAP_CEILING,
            output: PathBuf::from("out"),
            measure_gap: true,
            record_timing: false,
            alpha: None,
            sigma_scale: 1.0,
            execution: Execution::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("`{key}`: expected a boolean, got `{other}`"))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl ExperimentConfig {
    /// Parses a flat TOML document on top of the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut cfg = ExperimentConfig::default();
        for (key, value) in &table {
            let v = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                _ => return Err(Error::Config(format!("`{key}`: nested values are not supported"))),
            };
            cfg.set(key, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "data_path" => self.data_path = optional_path(value),
            "n" => self.n = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "model" => self.model = value.trim().to_string(),
            "noise" => self.noise = parse(key, value)?,
            "feature_radius" => self.feature_radius = parse(key, value)?,
            "label_bound" => self.label_bound = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "loss" => self.loss = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "xi" => self.xi = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "updates_path" => self.updates_path = optional_path(value),
            "update_strategy" => self.update_strategy = parse(key, value)?,
            "update_length" => self.update_length = parse(key, value)?,
            "b_ceiling" => self.b_ceiling = parse(key, value)?,
            "output" => self.output = PathBuf::from(value.trim()),
            "measure_gap" => self.measure_gap = parse_bool(key, value)?,
            "record_timing" => self.record_timing = parse_bool(key, value)?,
            "alpha" => self.alpha = if value.trim().is_empty() { None } else { Some(parse(key, value)?) },
            "sigma_scale" => self.sigma_scale = parse(key, value)?,
            "execution" => {
                self.execution = match value.trim() {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    other => return Err(Error::Config(format!("`execution`: unknown value `{other}`"))),
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Output directory, honoring [`OUTPUT_DIR_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output.clone(),
        }
    }

    pub fn bounds(&self) -> Result<DataBounds> {
        DataBounds::new(self.feature_radius, self.label_bound)
    }

    fn generator(&self) -> Result<Model> {
        match self.model.as_str() {
            "linear" => Ok(Model::Linear { noise: self.noise }),
            "logistic" => Ok(Model::Logistic),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }

    fn labels(&self) -> LabelKind {
        match self.loss {
            LossKind::Ridge => LabelKind::Real,
            LossKind::Logistic | LossKind::LogisticRidge => LabelKind::Binary,
        }
    }

    pub fn update_spec(&self) -> Result<UpdateSpec> {
        Ok(UpdateSpec { length: self.update_length, strategy: self.update_strategy, bounds: self.bounds()?, labels: self.labels() })
    }

    /// Validates every precondition and derives the chain parameters.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.trials == 0 {
            return Err(Error::Config("`trials` must be at least 1".into()));
        }
        if !(self.sigma_scale > 0.0 && self.sigma_scale.is_finite()) {
            return Err(Error::Config("`sigma_scale` must be positive".into()));
        }
        let bounds = self.bounds()?;
        let data = match &self.data_path {
            Some(p) => Some(Dataset::read_csv(p, &bounds)?),
            None => {
                self.generator()?;
                None
            }
        };
        let (n, d) = data.as_ref().map_or((self.n, self.d), |ds| (ds.len(), ds.dim()));
        let space = ParamSpace::new(d, self.radius)?;
        let loss = LossModel::from_kind(self.loss, space, bounds, self.lambda)?;
        if let Some(ds) = &data {
            ds.points().iter().try_for_each(|z| loss.check_point(z))?;
        }
        let replay = match &self.updates_path {
            Some(p) => {
                let seq = UpdateSequence::read_jsonl(p)?;
                seq.updates.iter().try_for_each(|u| loss.check_point(&u.point))?;
                Some(seq)
            }
            None => None,
        };
        let privacy = Privacy::new(self.epsilon, self.delta)?;
        let chain = match self.mode {
            ChainMode::Single(mode) => {
                let params = UnlearnParams { mode, privacy, budget: self.iterations, xi: self.xi };
                let cfg = UnlearnConfig::new(params, &loss, n)?;
                let sigma = cfg.sigma * self.sigma_scale;
                ChainConfig::Single(cfg.with_sigma(sigma))
            }
            ChainMode::Distributed => {
                let mut cfg = dist_params(n, &loss, self.xi, self.iterations, privacy, self.beta, self.b_ceiling)?;
                cfg.sigma *= self.sigma_scale;
                ChainConfig::Distributed(cfg.with_execution(self.execution))
            }
        };
        Ok(Prepared { config: self.clone(), loss, data, replay, chain })
    }
}

/// Derived parameters of the configured chain.
#[derive(Clone, Debug)]
pub enum ChainConfig {
    Single(UnlearnConfig),
    Distributed(DistConfig),
}

impl ChainConfig {
    pub fn sigma(&self) -> f64 {
        match self {
            ChainConfig::Single(c) => c.sigma,
            ChainConfig::Distributed(c) => c.sigma,
        }
    }

    /// Loss that the chain optimizes.
    pub fn loss(&self) -> &LossModel {
        match self {
            ChainConfig::Single(c) => &c.loss,
            ChainConfig::Distributed(c) => &c.loss,
        }
    }

    pub fn gap_bound(&self) -> f64 {
        match self {
            ChainConfig::Single(c) => c.gap_bound(),
            ChainConfig::Distributed(c) => c.gap_bound(),
        }
    }
}

/// A validated experiment ready to produce per-trial inputs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    /// Loss as configured, before any mode regularization.
    pub loss: LossModel,
    pub data: Option<Dataset>,
    pub replay: Option<UpdateSequence>,
    pub chain: ChainConfig,
}

pub struct TrialInputs {
    pub seeds: Seeds,
    pub dataset: Dataset,
    pub updates: UpdateSequence,
}

impl Prepared {
    /// Dataset and update stream of trial `t`, drawn from that trial's own streams.
    pub fn trial(&self, t: usize) -> Result<TrialInputs> {
        let cfg = &self.config;
        let seeds = Seeds::new(cfg.seed).trial(t as u64);
        let dataset = match &self.data {
            Some(ds) => ds.clone(),
            None => {
                let mut rng = seeds.stream(StreamKind::Data, 0);
                gen_synthetic_dataset(cfg.n, cfg.d, cfg.generator()?, &cfg.bounds()?, &mut rng)?.dataset
            }
        };
        let updates = match &self.replay {
            Some(seq) => {
                seq.validate_against(&dataset)?;
                seq.clone()
            }
            None => gen_adversarial_sequence(&dataset, &cfg.update_spec()?, &mut seeds.stream(StreamKind::Updates, 0))?,
        };
        Ok(TrialInputs { seeds, dataset, updates })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_toml_and_overrides() {
        let mut cfg = ExperimentConfig::from_toml_str("seed = 7\nn = 40\nmode = \"strong_perfect\"\nepsilon = 0.5\nmeasure_gap = false\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n, 40);
        assert_eq!(cfg.mode, ChainMode::Single(Mode::StrongPerfect));
        assert!(!cfg.measure_gap);
        cfg.apply_overrides(&["n=60", "mode=distributed"]).unwrap();
        assert_eq!(cfg.n, 60);
        assert_eq!(cfg.mode, ChainMode::Distributed);
    }

    #[test]
    fn rejects_unknown_and_nested_keys() {
        assert!(matches!(ExperimentConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml_str("[t]\na = 1"), Err(Error::Config(_))));
        assert!(ExperimentConfig::default().apply_overrides(&["n"]).is_err());
    }

    #[test]
    fn preconditions_checked_at_prepare() {
        let mut cfg = ExperimentConfig::default();
        cfg.epsilon = 20.0;
        cfg.delta = 1e-3;
        assert!(cfg.prepare().is_err());

        let mut cfg = ExperimentConfig { mode: ChainMode::Distributed, n: 100, delta: 0.05, ..Default::default() };
        assert!(cfg.prepare().is_err());
        cfg.delta = 1e-3;
        assert!(cfg.prepare().is_ok());

        let cfg = ExperimentConfig { mode: ChainMode::Single(Mode::StrongPerfect), iterations: 1, ..Default::default() };
        assert!(matches!(cfg.prepare().unwrap_err(), Error::InsufficientIterations { .. }));
    }

    #[test]
    fn trials_are_reproducible_and_distinct() {
        let cfg = ExperimentConfig { n: 30, update_length: 10, ..Default::default() };
        let p = cfg.prepare().unwrap();
        let (a, b, c) = (p.trial(0).unwrap(), p.trial(0).unwrap(), p.trial(1).unwrap());
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.updates, b.updates);
        assert_ne!(a.dataset, c.dataset);
    }
}
