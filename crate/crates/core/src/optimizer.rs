//! Full-batch projected gradient descent with fixed step sizes.

use serde::{Deserialize, Serialize};

use crate::losses::{DataPoint, LossModel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// η = 2/(M + m)
    StronglyConvexSmooth,
    /// η = 1/M
    ConvexSmooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub regime: Regime,
}

impl GdConfig {
    pub fn strongly_convex(loss: &LossModel, iterations: usize) -> Result<Self> {
        let c = loss.constants();
        if c.strong_convexity <= 0.0 {
            return Err(Error::RequiresStrongConvexity);
        }
        Ok(GdConfig {
            step_size: 2.0 / (c.smoothness + c.strong_convexity),
            iterations,
            regime: Regime::StronglyConvexSmooth,
        })
    }

    pub fn convex(loss: &LossModel, iterations: usize) -> Self {
        GdConfig { step_size: 1.0 / loss.constants().smoothness, iterations, regime: Regime::ConvexSmooth }
    }

    /// Strongly convex regime when available, otherwise the convex one.
    pub fn best_for(loss: &LossModel, iterations: usize) -> Self {
        Self::strongly_convex(loss, iterations).unwrap_or_else(|_| Self::convex(loss, iterations))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdTrace {
    pub theta: Vec<f64>,
    /// Point-gradient computations: `T × |D|`.
    pub gradient_evaluations: u64,
}

/// Runs `cfg.iterations` projected gradient steps from `theta0`.
pub fn pgd(loss: &LossModel, data: &[DataPoint], theta0: &[f64], cfg: &GdConfig) -> Result<GdTrace> {
    pgd_observed(loss, data, theta0, cfg, |_, _| {})
}

/// [`pgd`] that reports every iterate `(t, θ_t)` for `t = 1..=T`.
pub fn pgd_observed<F>(loss: &LossModel, data: &[DataPoint], theta0: &[f64], cfg: &GdConfig, mut observe: F) -> Result<GdTrace>
where
    F: FnMut(usize, &[f64]),
{
    if theta0.len() != loss.dim() {
        return Err(Error::Dimension { expected: loss.dim(), found: theta0.len() });
    }
    let mut theta = theta0.to_vec();
    if cfg.iterations == 0 {
        return Ok(GdTrace { theta, gradient_evaluations: 0 });
    }
    let mut grad = vec![0.0; theta.len()];
    for t in 1..=cfg.iterations {
        loss.empirical_gradient_into(data, &theta, &mut grad)?;
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= cfg.step_size * g;
        }
        loss.space().project_in_place(&mut theta);
        observe(t, &theta);
    }
    Ok(GdTrace { theta, gradient_evaluations: (cfg.iterations * data.len()) as u64 })
}

/// γ = (M − m)/(M + m) of the loss.
pub fn contraction_factor(loss: &LossModel) -> Result<f64> {
    loss.constants().contraction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{DataBounds, ParamSpace};

    #[test]
    fn zero_iterations_return_start() {
        let f = LossModel::ridge(ParamSpace::new(2, 1.0).unwrap(), DataBounds::new(1.0, 1.0).unwrap(), 1.0).unwrap();
        let data = [DataPoint::new(vec![0.1, 0.2], 0.3)];
        let cfg = GdConfig::strongly_convex(&f, 0).unwrap();
        let tr = pgd(&f, &data, &[0.2, -0.1], &cfg).unwrap();
        assert_eq!(tr.theta, vec![0.2, -0.1]);
        assert_eq!(tr.gradient_evaluations, 0);
    }

    #[test]
    fn gradient_budget_counts_points_times_iterations() {
        let f = LossModel::ridge(ParamSpace::new(1, 1.0).unwrap(), DataBounds::new(1.0, 1.0).unwrap(), 1.0).unwrap();
        let data = vec![DataPoint::new(vec![0.5], 0.1); 7];
        let cfg = GdConfig::strongly_convex(&f, 11).unwrap();
        assert_eq!(pgd(&f, &data, &[0.0], &cfg).unwrap().gradient_evaluations, 77);
    }

    #[test]
    fn step_sizes_follow_regime() {
        let f = LossModel::ridge(ParamSpace::new(1, 1.0).unwrap(), DataBounds::new(1.0, 1.0).unwrap(), 1.0).unwrap();
        // m = 1, M = 2
        assert_eq!(GdConfig::strongly_convex(&f, 1).unwrap().step_size, 2.0 / 3.0);
        assert_eq!(GdConfig::convex(&f, 1).step_size, 0.5);
        let g = LossModel::ridge(*f.space(), *f.bounds(), 0.0).unwrap();
        assert!(matches!(GdConfig::strongly_convex(&g, 1), Err(Error::RequiresStrongConvexity)));
        assert_eq!(GdConfig::best_for(&g, 3).regime, Regime::ConvexSmooth);
    }
}
