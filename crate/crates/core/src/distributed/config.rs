use serde::Serialize;

use crate::exec::Execution;
use crate::losses::LossModel;
use crate::mechanism::{boosting_copies, gaussian_mechanism_epsilon};
use crate::unlearn::Privacy;
use crate::{Error, Result};

/// Default cap on the bootstrap size B.
pub const DEFAULT_BOOTSTRAP_CEILING: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistConfig {
    pub n: usize,
    pub d: usize,
    pub xi: f64,
    /// B
    pub bootstrap: usize,
    /// K
    pub partitions: usize,
    /// C
    pub copies: usize,
    /// 𝓘
    pub budget: u32,
    pub privacy: Privacy,
    pub gamma: f64,
    /// `a = K·n²·𝓘/B²`, the exponent of γ in the noise and residual bounds.
    pub exponent: f64,
    pub sigma: f64,
    /// T, iterations per partition at learning time.
    pub train_iterations: usize,
    #[serde(skip)]
    pub loss: LossModel,
    #[serde(skip)]
    pub execution: Execution,
}

/// Derives B, K, C, T, σ and the update schedule.
///
/// `B = K·⌈⌈n^ξ⌉/K⌉` with `K = max(1, ⌊√⌈n^ξ⌉⌋)`, so K divides B and B ≥ n.
pub fn dist_params(
    n: usize,
    loss: &LossModel,
    xi: f64,
    budget: u32,
    privacy: Privacy,
    beta: f64,
    bootstrap_ceiling: usize,
) -> Result<DistConfig> {
    if !(1.0..=4.0 / 3.0).contains(&xi) {
        return Err(Error::invalid("xi", format!("{xi} must lie in [1, 4/3]")));
    }
    if n < 2 {
        return Err(Error::invalid("n", "need at least two points"));
    }
    if budget == 0 {
        return Err(Error::invalid("budget", "must be at least 1"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", format!("{beta} must lie in (0, 1)")));
    }
    let c = loss.constants();
    let gamma = c.contraction()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must lie in (0, 1)")));
    }
    let raw = (n as f64).powf(xi).ceil();
    if raw > bootstrap_ceiling as f64 {
        return Err(Error::BudgetExceeded { size: raw as usize, ceiling: bootstrap_ceiling });
    }
    let raw = raw as usize;
    let partitions = ((raw as f64).sqrt().floor() as usize).max(1);
    let bootstrap = partitions * raw.div_ceil(partitions);
    if bootstrap != raw {
        log::info!("bootstrap size rounded from {raw} to {bootstrap} so that {partitions} partitions divide it");
    }
    if bootstrap > bootstrap_ceiling {
        return Err(Error::BudgetExceeded { size: bootstrap, ceiling: bootstrap_ceiling });
    }
    if privacy.delta > 1.0 / bootstrap as f64 {
        return Err(Error::invalid("delta", format!("{} exceeds 1/B = {}", privacy.delta, 1.0 / bootstrap as f64)));
    }
    let (nf, bf, kf) = (n as f64, bootstrap as f64, partitions as f64);
    let exponent = kf * nf * nf * budget as f64 / (bf * bf);
    let g = gamma.powf(exponent);
    let a = (2.0 / privacy.delta).ln();
    let gap = privacy.epsilon / ((a + privacy.epsilon).sqrt() + a.sqrt());
    let sigma = 4.0 * 2f64.sqrt() * c.lipschitz * g / (c.strong_convexity * nf * (1.0 - g) * gap);
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("budget", format!("noise scale {sigma:e} is not representable; lower the budget")));
    }
    let log_term = (c.diameter * c.strong_convexity * bf * (1.0 + 10.0 * a) / c.lipschitz).ln() / (1.0 / gamma).ln();
    let train_iterations = (exponent + log_term.max(0.0)).ceil().max(1.0) as usize;
    Ok(DistConfig {
        n,
        d: loss.dim(),
        xi,
        bootstrap,
        partitions,
        copies: boosting_copies(beta),
        budget,
        privacy,
        gamma,
        exponent,
        sigma,
        train_iterations,
        loss: loss.clone(),
        execution: Execution::default(),
    })
}

impl DistConfig {
    pub fn partition_size(&self) -> usize {
        self.bootstrap / self.partitions
    }

    /// `T_i = 10 ln(2i/δ)·(𝓘 + (B²/(Kn²))·ln(1 + 10i·ln(2i/δ))/ln(1/γ))`, per copy, real-valued.
    pub fn round_budget(&self, i: usize) -> f64 {
        let l = (2.0 * i as f64 / self.privacy.delta).ln();
        let (nf, bf, kf) = (self.n as f64, self.bootstrap as f64, self.partitions as f64);
        let ratio = bf * bf / (kf * nf * nf);
        10.0 * l * (self.budget as f64 + ratio * (1.0 + 10.0 * i as f64 * l).ln() / (1.0 / self.gamma).ln())
    }

    /// Iterations for each of `affected` partitions: `⌈K·n·T_i/(B·|ind|)⌉`.
    pub fn partition_iterations(&self, i: usize, affected: usize) -> usize {
        if affected == 0 {
            return 0;
        }
        let t = self.partitions as f64 * self.n as f64 * self.round_budget(i) / (self.bootstrap as f64 * affected as f64);
        t.ceil() as usize
    }

    /// Allowed per-copy gradient computations in round `i`: `n·T_i` plus the
    /// rounding slack of one partition pass per affected partition.
    pub fn round_gradient_cap(&self, i: usize, affected: usize) -> f64 {
        self.n as f64 * self.round_budget(i) + (affected * self.partition_size()) as f64
    }

    fn g(&self) -> f64 {
        self.gamma.powf(self.exponent)
    }

    /// Bound on each partition's residual after learning:
    /// `4L/(mB(1 + 10 ln(2/δ)))·γ^a`.
    pub fn learn_residual_bound(&self) -> f64 {
        let c = self.loss.constants();
        let a = (2.0 / self.privacy.delta).ln();
        4.0 * c.lipschitz / (c.strong_convexity * self.bootstrap as f64 * (1.0 + 10.0 * a)) * self.g()
    }

    /// Per-partition residual bound after update `i ≥ 1`, given the total
    /// number of replaced positions in that partition over rounds `1..=i`.
    pub fn residual_recursion_bound(&self, i: usize, replaced: usize) -> f64 {
        let c = self.loss.constants();
        let kf = self.partitions as f64;
        let l = (2.0 * i as f64 / self.privacy.delta).ln();
        let g = self.g();
        4.0 * c.lipschitz * kf * (1.0 / kf + replaced as f64)
            / (c.strong_convexity * self.bootstrap as f64 * (1.0 + 10.0 * i as f64 * l))
            * g
            / (1.0 - g)
    }

    /// Δ = `8L/(mn)·γ^a/(1−γ^a)`.
    pub fn gap_bound(&self) -> f64 {
        let c = self.loss.constants();
        let g = self.g();
        8.0 * c.lipschitz / (c.strong_convexity * self.n as f64) * g / (1.0 - g)
    }

    pub fn mechanism_delta(&self) -> f64 {
        self.privacy.delta / 2.0
    }

    pub fn certified_epsilon(&self) -> f64 {
        gaussian_mechanism_epsilon(self.gap_bound(), self.sigma, self.mechanism_delta())
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}
