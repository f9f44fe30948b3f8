//! Probabilistic tools used to calibrate and audit the publishing noise.

/// ε of the Gaussian mechanism with ℓ2 sensitivity `delta_sens` and noise `sigma`:
/// `Δ²/(2σ²) + (Δ/σ)·√(2 ln(1/δ))`.
pub fn gaussian_mechanism_epsilon(delta_sens: f64, sigma: f64, delta: f64) -> f64 {
    let r = delta_sens / sigma;
    0.5 * r * r + r * (2.0 * (1.0 / delta).ln()).sqrt()
}

/// Smallest σ whose [`gaussian_mechanism_epsilon`] at sensitivity `delta_sens` equals `epsilon`.
pub fn gaussian_mechanism_sigma(delta_sens: f64, epsilon: f64, delta: f64) -> f64 {
    let s = (2.0 * (1.0 / delta).ln()).sqrt();
    let r = 2.0 * epsilon / (s + (s * s + 2.0 * epsilon).sqrt());
    delta_sens / r
}

/// Largest movement `2L/(mn)` of the empirical minimizer under one add or delete.
pub fn sensitivity_bound(lipschitz: f64, strong_convexity: f64, n: usize) -> f64 {
    2.0 * lipschitz / (strong_convexity * n as f64)
}

/// Radius `σ√(2d)·ln(2d/β)` exceeded by `‖N(0, σ²I_d)‖` with probability at most β.
pub fn gaussian_tail_radius(sigma: f64, d: usize, beta: f64) -> f64 {
    let d = d as f64;
    sigma * (2.0 * d).sqrt() * (2.0 * d / beta).ln()
}

/// Number of independent copies `⌈log₂(2/β)⌉` for best-of-copies boosting.
pub fn boosting_copies(beta: f64) -> usize {
    ((2.0 / beta).ln() / 2f64.ln()).ceil().max(1.0) as usize
}

/// Chernoff upper tail `P(X ≥ (1+t)μ) ≤ exp(−μt²/(2+t))`.
pub fn chernoff_upper(mean: f64, t: f64) -> f64 {
    (-mean * t * t / (2.0 + t)).exp()
}

/// High-probability cap `(10B/n)·ln(1/δ')` on positions replaced per update.
pub fn modified_count_bound(bootstrap: usize, n: usize, delta_prime: f64) -> f64 {
    10.0 * bootstrap as f64 / n as f64 * (1.0 / delta_prime).ln()
}
