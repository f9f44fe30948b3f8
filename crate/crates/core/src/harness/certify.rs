use serde::{Deserialize, Serialize};

use crate::losses::LossKind;
use crate::mechanism::gaussian_mechanism_epsilon;
use crate::unlearn::Mode;
use crate::{Error, Result};

use super::chain::{run_chain, MetricsRecord};
use super::config::{ChainConfig, Prepared};

pub const CERTIFICATE_SCHEMA: &str = "unlearn-certificate/1";

/// Relative slack on every bound comparison.
const SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundCertificate {
    pub round: usize,
    pub trials: usize,
    pub max_gap: f64,
    pub max_drift: f64,
    /// ε implied by σ at `max_gap`.
    pub epsilon_at_gap: f64,
    pub gap_violations: usize,
    pub drift_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub schema: String,
    pub mode: Mode,
    pub trials: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: f64,
    pub mechanism_delta: f64,
    /// Δ
    pub gap_bound: f64,
    pub residual_bound: f64,
    /// ε implied by σ at Δ.
    pub certified_epsilon: f64,
    pub max_gap: f64,
    pub epsilon_at_max_gap: f64,
    pub rounds: Vec<RoundCertificate>,
    pub failed_rounds: Vec<usize>,
    pub passed: bool,
}

/// Runs `trials` chains, compares every round's secret parameter with a fresh
/// retrain on the same data, and checks the gap and residual bounds and the
/// mechanism calculus at Δ.
pub fn verify_unlearning_certificate(p: &Prepared, trials: usize) -> Result<CertificateReport> {
    let ChainConfig::Single(cfg) = &p.chain else {
        return Err(Error::Config("certification needs a single-model mode".into()));
    };
    if p.loss.kind() != LossKind::Ridge {
        return Err(Error::Config("certification needs the ridge loss".into()));
    }
    if trials == 0 {
        return Err(Error::Config("certification needs at least one trial".into()));
    }
    let mut p = p.clone();
    p.config.measure_gap = true;
    let p = &p;
    let per_trial: Vec<Vec<MetricsRecord>> = p.config.execution.try_map(trials, |t| run_chain(p, t))?;

    let gap_bound = cfg.gap_bound();
    let residual_bound = cfg.residual_bound();
    let mech_delta = cfg.mechanism_delta();
    let rounds_len = per_trial.iter().map(Vec::len).max().unwrap_or(0);
    let mut rounds = Vec::with_capacity(rounds_len);
    for i in 0..rounds_len {
        let recs: Vec<&MetricsRecord> = per_trial.iter().filter_map(|r| r.get(i)).collect();
        let gaps: Vec<f64> = recs.iter().map(|r| r.gap.expect("gap measured")).collect();
        let max_gap = gaps.iter().copied().fold(0.0, f64::max);
        let max_drift = recs.iter().map(|r| r.drift).fold(0.0, f64::max);
        let gap_violations = gaps.iter().filter(|&&g| !(g <= gap_bound * (1.0 + SLACK))).count();
        let drift_violations = recs.iter().filter(|r| !(r.drift <= residual_bound * (1.0 + SLACK))).count();
        if gap_violations + drift_violations > 0 {
            log::error!("round {i}: {gap_violations} gap and {drift_violations} residual violations (max gap {max_gap:e}, bound {gap_bound:e})");
        }
        rounds.push(RoundCertificate {
            round: i,
            trials: recs.len(),
            max_gap,
            max_drift,
            epsilon_at_gap: gaussian_mechanism_epsilon(max_gap, cfg.sigma, mech_delta),
            gap_violations,
            drift_violations,
        });
    }
    let failed_rounds: Vec<usize> = rounds.iter().filter(|r| r.gap_violations + r.drift_violations > 0).map(|r| r.round).collect();
    let max_gap = rounds.iter().map(|r| r.max_gap).fold(0.0, f64::max);
    let certified_epsilon = cfg.certified_epsilon();
    let epsilon = cfg.params.privacy.epsilon;
    let calculus_ok = certified_epsilon <= epsilon * (1.0 + SLACK);
    if !calculus_ok {
        log::error!("σ = {:e} certifies only ε = {certified_epsilon} at Δ = {gap_bound:e}, above the target {epsilon}", cfg.sigma);
    }
    Ok(CertificateReport {
        schema: CERTIFICATE_SCHEMA.to_string(),
        mode: cfg.mode(),
        trials,
        epsilon,
        delta: cfg.params.privacy.delta,
        sigma: cfg.sigma,
        mechanism_delta: mech_delta,
        gap_bound,
        residual_bound,
        certified_epsilon,
        max_gap,
        epsilon_at_max_gap: gaussian_mechanism_epsilon(max_gap, cfg.sigma, mech_delta),
        passed: calculus_ok && failed_rounds.is_empty(),
        failed_rounds,
        rounds,
    })
}
