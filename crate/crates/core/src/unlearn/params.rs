use serde::{Deserialize, Serialize};

use crate::losses::{Constants, LossModel};
use crate::mechanism::gaussian_mechanism_epsilon;
use crate::{Error, Result};

/// Target (ε, δ), with ε ≤ ln(1/δ) enforced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Privacy {
    pub epsilon: f64,
    pub delta: f64,
}

impl Privacy {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("{epsilon} must be positive")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", format!("{delta} must lie in (0, 1)")));
        }
        let cap = (1.0 / delta).ln();
        if epsilon > cap * (1.0 + 1e-12) {
            return Err(Error::invalid("epsilon", format!("{epsilon} exceeds ln(1/delta) = {cap}")));
        }
        Ok(Privacy { epsilon, delta })
    }

    fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }
}

/// `√(a + ε) − √a`, evaluated without cancellation.
fn sqrt_gap(a: f64, eps: f64) -> f64 {
    eps / ((a + eps).sqrt() + a.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    StrongSecret,
    StrongPerfect,
    RegularizedStrong,
    RegularizedWeak,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::StrongSecret => "strong_secret",
            Mode::StrongPerfect => "strong_perfect",
            Mode::RegularizedStrong => "regularized_strong",
            Mode::RegularizedWeak => "regularized_weak",
        }
    }

    pub fn is_regularized(self) -> bool {
        matches!(self, Mode::RegularizedStrong | Mode::RegularizedWeak)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong_secret" => Ok(Mode::StrongSecret),
            "strong_perfect" => Ok(Mode::StrongPerfect),
            "regularized_strong" => Ok(Mode::RegularizedStrong),
            "regularized_weak" => Ok(Mode::RegularizedWeak),
            other => Err(Error::invalid("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnlearnParams {
    pub mode: Mode,
    pub privacy: Privacy,
    /// 𝓘: iterations per update in strong modes, iterations at the first update in weak mode.
    pub budget: u32,
    /// Growth exponent of the weak schedule; ignored by the other modes.
    pub xi: f64,
}

/// Training iterations `⌈𝓘 + ln(Dmn/2L)/ln(1/γ)⌉`, never fewer than 𝓘.
pub fn train_iterations(c: &Constants, gamma: f64, n: usize, budget: u32) -> Result<usize> {
    let ratio = c.diameter * c.strong_convexity * n as f64 / (2.0 * c.lipschitz);
    let extra = if gamma == 0.0 { 0.0 } else { ratio.ln() / (1.0 / gamma).ln() };
    if extra.is_nan() {
        return Err(Error::invalid("constants", "degenerate training iteration count"));
    }
    if extra < 0.0 {
        log::warn!("Dmn/2L = {ratio:.3e} < 1: training for the budget alone ({budget} iterations)");
    }
    let t = (budget as f64 + extra.max(0.0)).ceil();
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::invalid("budget", "training iteration count is not positive"));
    }
    Ok(t as usize)
}

fn contraction_open(c: &Constants) -> Result<f64> {
    let gamma = c.contraction()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must lie in (0, 1)")));
    }
    Ok(gamma)
}

/// Noise for secret-state strong unlearning:
/// `4√2·L·γ^𝓘 / (mn(1−γ^𝓘)(√(ln(1/δ)+ε) − √ln(1/δ)))`.
pub fn sigma_strong(c: &Constants, n: usize, budget: u32, privacy: Privacy) -> Result<f64> {
    let gamma = contraction_open(c)?;
    let q = gamma.powi(budget as i32);
    let gap = sqrt_gap(privacy.log_inv_delta(), privacy.epsilon);
    Ok(4.0 * 2f64.sqrt() * c.lipschitz * q / (c.strong_convexity * n as f64 * (1.0 - q) * gap))
}

/// Smallest 𝓘 (real-valued) accepted by perfect mode.
pub fn perfect_iteration_floor(gamma: f64, d: usize, privacy: Privacy) -> f64 {
    let a = 2.0 * (2.0 / privacy.delta).ln();
    let arg = (2.0 * d as f64).sqrt() / (1.0 - gamma) / sqrt_gap(a, privacy.epsilon);
    arg.ln() / (1.0 / gamma).ln()
}

/// Noise for perfect unlearning:
/// `8Lγ^𝓘(1−γ^𝓘)⁻¹ / (mn(√(2ln(2/δ)+3ε) − √(2ln(2/δ)+2ε)))`.
pub fn sigma_perfect(c: &Constants, n: usize, d: usize, budget: u32, privacy: Privacy) -> Result<f64> {
    let gamma = contraction_open(c)?;
    let required = perfect_iteration_floor(gamma, d, privacy);
    if (budget as f64) < required - 1e-9 {
        return Err(Error::InsufficientIterations { budget, required });
    }
    let q = gamma.powi(budget as i32);
    let a = 2.0 * (2.0 / privacy.delta).ln() + 2.0 * privacy.epsilon;
    let gap = sqrt_gap(a, privacy.epsilon);
    Ok(8.0 * c.lipschitz * q / (1.0 - q) / (c.strong_convexity * n as f64 * gap))
}

/// Perfect-mode iterations for update `i`: `⌈𝓘 + ln(ln(4di/δ))/ln(1/γ)⌉`.
pub fn perfect_schedule(i: usize, budget: u32, d: usize, delta: f64, gamma: f64) -> usize {
    let extra = (4.0 * d as f64 * i as f64 / delta).ln().ln() / (1.0 / gamma).ln();
    (budget as f64 + extra.max(0.0)).ceil() as usize
}

/// Regularization strength and noise for the strong regularized mode.
///
/// `m = (L·M^{3/2}·√(d ln(1/δ)) / (D ε n 𝓘))^{2/5}`; σ is [`sigma_strong`]
/// evaluated on the regularized constants.
pub fn params_regularized_strong(base: &Constants, n: usize, d: usize, budget: u32, privacy: Privacy) -> Result<(f64, f64)> {
    let num = base.lipschitz * base.smoothness.powf(1.5) * (d as f64 * privacy.log_inv_delta()).sqrt();
    let den = base.diameter * privacy.epsilon * n as f64 * budget as f64;
    let m_reg = (num / den).powf(0.4);
    if !(m_reg > 0.0 && m_reg.is_finite()) {
        return Err(Error::invalid("m_reg", format!("{m_reg} is not positive")));
    }
    let sigma = sigma_strong(&regularized(base, m_reg), n, budget, privacy)?;
    Ok((m_reg, sigma))
}

fn regularized(c: &Constants, m_reg: f64) -> Constants {
    Constants {
        strong_convexity: c.strong_convexity + m_reg,
        smoothness: c.smoothness + m_reg,
        lipschitz: c.lipschitz + m_reg * c.diameter,
        diameter: c.diameter,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakParams {
    pub m_reg: f64,
    pub sigma: f64,
    pub xi: f64,
    pub budget: u32,
}

impl WeakParams {
    pub fn iterations(&self, i: usize) -> usize {
        weak_schedule(i, self.xi, self.budget)
    }
}

/// Weak-mode iterations for update `i`: `⌈i^{2ξ}·𝓘⌉`, exact when 2ξ is an integer.
pub fn weak_schedule(i: usize, xi: f64, budget: u32) -> usize {
    let two_xi = 2.0 * xi;
    if two_xi.fract() == 0.0 {
        if let Some(p) = (i as u64).checked_pow(two_xi as u32) {
            return (p * budget as u64) as usize;
        }
    }
    ((i as f64).powf(two_xi) * budget as f64).ceil() as usize
}

/// Regularization and noise for weak unlearning with growth exponent ξ:
///
/// `m = (L²·M^{(1+ξ)/ξ}·d·ln(1/δ) / (D²ε²n²𝓘^{1/ξ}))^{ξ/(3ξ+1)}`,
/// `σ = 2√2·M^{1/(2ξ)}(L+mD) / (m(m𝓘)^{1/(2ξ)}·n·(√(ln(1/δ)+ε) − √ln(1/δ)))`.
pub fn params_weak(base: &Constants, n: usize, d: usize, budget: u32, xi: f64, privacy: Privacy) -> Result<WeakParams> {
    if !(xi >= 1.0 && xi.is_finite()) {
        return Err(Error::invalid("xi", format!("{xi} must be at least 1")));
    }
    let (l, big_m, diam) = (base.lipschitz, base.smoothness, base.diameter);
    let (eps, nf, bud) = (privacy.epsilon, n as f64, budget as f64);
    let num = l * l * big_m.powf((1.0 + xi) / xi) * d as f64 * privacy.log_inv_delta();
    let den = diam * diam * eps * eps * nf * nf * bud.powf(1.0 / xi);
    let m_reg = (num / den).powf(xi / (3.0 * xi + 1.0));
    if !(m_reg > 0.0 && m_reg.is_finite()) {
        return Err(Error::invalid("m_reg", format!("{m_reg} is not positive")));
    }
    let gap = sqrt_gap(privacy.log_inv_delta(), eps);
    let root = 1.0 / (2.0 * xi);
    let sigma = 2.0 * 2f64.sqrt() * big_m.powf(root) * (l + m_reg * diam) / (m_reg * (m_reg * bud).powf(root) * nf * gap);
    Ok(WeakParams { m_reg, sigma, xi, budget })
}

/// Fully derived configuration of a single-model unlearning chain.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlearnConfig {
    pub params: UnlearnParams,
    /// Size of the initial dataset.
    pub n: usize,
    pub d: usize,
    /// Loss as supplied.
    pub base: LossModel,
    /// Loss actually optimized; regularized in the regularized modes.
    pub loss: LossModel,
    pub gamma: f64,
    pub sigma: f64,
    pub m_reg: Option<f64>,
}

impl UnlearnConfig {
    pub fn new(params: UnlearnParams, base: &LossModel, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", "need at least two points"));
        }
        if params.budget == 0 {
            return Err(Error::invalid("budget", "must be at least 1"));
        }
        let d = base.dim();
        let c = base.constants();
        let (loss, sigma, m_reg) = match params.mode {
            Mode::StrongSecret => (base.clone(), sigma_strong(&c, n, params.budget, params.privacy)?, None),
            Mode::StrongPerfect => (base.clone(), sigma_perfect(&c, n, d, params.budget, params.privacy)?, None),
            Mode::RegularizedStrong => {
                let (m_reg, sigma) = params_regularized_strong(&c, n, d, params.budget, params.privacy)?;
                (base.regularize(m_reg)?, sigma, Some(m_reg))
            }
            Mode::RegularizedWeak => {
                let w = params_weak(&c, n, d, params.budget, params.xi, params.privacy)?;
                (base.regularize(w.m_reg)?, w.sigma, Some(w.m_reg))
            }
        };
        let gamma = contraction_open(&loss.constants())?;
        Ok(UnlearnConfig { params, n, d, base: base.clone(), loss, gamma, sigma, m_reg })
    }

    pub fn mode(&self) -> Mode {
        self.params.mode
    }

    /// η = 2/(M + m) of the optimized loss.
    pub fn step_size(&self) -> f64 {
        let c = self.loss.constants();
        2.0 / (c.smoothness + c.strong_convexity)
    }

    /// Iterations used by `learn` on a dataset of `len` points.
    pub fn train_iterations_for(&self, len: usize) -> Result<usize> {
        train_iterations(&self.loss.constants(), self.gamma, len, self.params.budget)
    }

    /// T_i for update `i ≥ 1`.
    pub fn round_iterations(&self, i: usize) -> usize {
        let p = &self.params;
        match p.mode {
            Mode::StrongSecret | Mode::RegularizedStrong => p.budget as usize,
            Mode::StrongPerfect => perfect_schedule(i, p.budget, self.d, p.privacy.delta, self.gamma),
            Mode::RegularizedWeak => weak_schedule(i, p.xi, p.budget),
        }
    }

    /// Updates warm-start from the published model instead of the secret one.
    pub fn warm_starts_from_published(&self) -> bool {
        self.params.mode == Mode::StrongPerfect
    }

    fn q(&self) -> f64 {
        let q = self.gamma.powi(self.params.budget as i32);
        q / (1.0 - q)
    }

    /// `(M/(m𝓘))^{1/(2ξ)}`, the weak-mode stand-in for γ^{T_i}.
    fn weak_rate(&self) -> f64 {
        let m_reg = self.m_reg.unwrap_or(0.0);
        let big_m = self.base.constants().smoothness;
        (big_m / (m_reg * self.params.budget as f64)).powf(1.0 / (2.0 * self.params.xi))
    }

    /// Bound on `‖θ̂_i − θ*_i‖` for the optimized loss after any update.
    pub fn residual_bound(&self) -> f64 {
        let c = self.loss.constants();
        let base = 4.0 * c.lipschitz / (c.strong_convexity * self.n as f64);
        match self.params.mode {
            Mode::StrongSecret | Mode::RegularizedStrong => base * self.q(),
            Mode::StrongPerfect => self.q() * (base + self.sigma * (2.0 * self.d as f64).sqrt()),
            Mode::RegularizedWeak => base * self.weak_rate(),
        }
    }

    /// Δ: bound on the distance between the pre-noise means of the update
    /// chain and of retraining from scratch.
    pub fn gap_bound(&self) -> f64 {
        2.0 * self.residual_bound()
    }

    /// δ at which the Gaussian mechanism is evaluated (perfect mode spends δ/2 elsewhere).
    pub fn mechanism_delta(&self) -> f64 {
        match self.params.mode {
            Mode::StrongPerfect => self.params.privacy.delta / 2.0,
            _ => self.params.privacy.delta,
        }
    }

    /// ε implied by the configured σ for mean gaps up to [`Self::gap_bound`].
    pub fn certified_epsilon(&self) -> f64 {
        gaussian_mechanism_epsilon(self.gap_bound(), self.sigma, self.mechanism_delta())
    }

    /// Replaces σ, e.g. to run a deliberately under-noised negative control.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}
