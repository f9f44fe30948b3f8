//! Loss families on an origin-centred ball, their certified constants, and a
//! closed-form ridge oracle.
//!
//! Constants are derived once from the feature radius `R_x`, the label bound
//! `R_y`, the ball radius `r = D/2` and the quadratic coefficient `λ`:
//!
//! | loss | m | M | L |
//! |------|---|---|---|
//! | ridge `½(θᵀx−y)² + λ/2‖θ‖²` | λ | R_x² + λ | R_x(R_x·r + R_y) + λ·r |
//! | logistic `log(1+e^{−yθᵀx}) + λ/2‖θ‖²` | λ | R_x²/4 + λ | R_x + λ·r |
//!
//! The ridge Hessian is `xxᵀ + λI`, whose spectrum lies in `[λ, ‖x‖² + λ]`.
//! Its gradient `(θᵀx − y)x + λθ` is bounded on the ball by the triangle
//! inequality. The logistic Hessian is `s(1−s)xxᵀ + λI` with `s(1−s) ≤ 1/4`,
//! and its data gradient has norm at most `‖x‖`.
//!
//! [`LossModel::regularize`] adds `m_reg/2 ‖θ‖²` and moves the constants to
//! `(m + m_reg, M + m_reg, L + m_reg·D)`. The Lipschitz increment uses the
//! diameter rather than the radius, which is looser but keeps the published
//! transform.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, norm};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

impl DataPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        DataPoint { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Θ: the closed Euclidean ball of the given radius around the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub dim: usize,
    pub radius: f64,
}

impl ParamSpace {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("{radius} is not a positive finite number")));
        }
        Ok(ParamSpace { dim, radius })
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn origin(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        norm(theta) <= self.radius
    }

    /// Euclidean projection onto the ball, in place. The result always
    /// satisfies [`ParamSpace::contains`], even after rounding.
    pub fn project_in_place(&self, theta: &mut [f64]) {
        let n = norm(theta);
        if n > self.radius {
            let s = self.radius / n;
            theta.iter_mut().for_each(|v| *v *= s);
            while norm(theta) > self.radius {
                theta.iter_mut().for_each(|v| *v *= 1.0 - 2.0 * f64::EPSILON);
            }
        }
    }

    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        self.project_in_place(&mut out);
        out
    }
}

/// Declared bounds on the data domain: `‖x‖ ≤ feature_radius`, `|y| ≤ label_bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataBounds {
    pub feature_radius: f64,
    pub label_bound: f64,
}

impl DataBounds {
    pub fn new(feature_radius: f64, label_bound: f64) -> Result<Self> {
        if !(feature_radius > 0.0 && feature_radius.is_finite()) {
            return Err(Error::invalid("feature_radius", format!("{feature_radius}")));
        }
        if !(label_bound >= 0.0 && label_bound.is_finite()) {
            return Err(Error::invalid("label_bound", format!("{label_bound}")));
        }
        Ok(DataBounds { feature_radius, label_bound })
    }

    pub fn check(&self, z: &DataPoint) -> Result<()> {
        let nx = norm(&z.x);
        if !z.y.is_finite() || z.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfBounds("non-finite value".into()));
        }
        if nx > self.feature_radius {
            return Err(Error::OutOfBounds(format!("|x| = {nx} > {}", self.feature_radius)));
        }
        if z.y.abs() > self.label_bound {
            return Err(Error::OutOfBounds(format!("|y| = {} > {}", z.y.abs(), self.label_bound)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Ridge,
    Logistic,
    LogisticRidge,
}

impl LossKind {
    fn squared(self) -> bool {
        matches!(self, LossKind::Ridge)
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge" => Ok(LossKind::Ridge),
            "logistic" => Ok(LossKind::Logistic),
            "logistic_ridge" | "logistic+ridge" => Ok(LossKind::LogisticRidge),
            other => Err(Error::invalid("loss", format!("unknown loss `{other}`"))),
        }
    }
}

/// Certified regularity constants of a per-point loss on Θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// m
    pub strong_convexity: f64,
    /// M
    pub smoothness: f64,
    /// L
    pub lipschitz: f64,
    /// D
    pub diameter: f64,
}

impl Constants {
    /// γ = (M − m)/(M + m), the per-step contraction of projected GD with η = 2/(M + m).
    pub fn contraction(&self) -> Result<f64> {
        let (m, big_m) = (self.strong_convexity, self.smoothness);
        if m <= 0.0 {
            return Err(Error::RequiresStrongConvexity);
        }
        Ok((big_m - m) / (big_m + m))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    kind: LossKind,
    space: ParamSpace,
    bounds: DataBounds,
    /// Total coefficient of the `½‖θ‖²` term, including any added by `regularize`.
    l2: f64,
    constants: Constants,
}

impl LossModel {
    pub fn ridge(space: ParamSpace, bounds: DataBounds, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let (rx, ry, r) = (bounds.feature_radius, bounds.label_bound, space.radius);
        let constants = Constants {
            strong_convexity: lambda,
            smoothness: rx * rx + lambda,
            lipschitz: rx * (rx * r + ry) + lambda * r,
            diameter: space.diameter(),
        };
        Ok(LossModel { kind: LossKind::Ridge, space, bounds, l2: lambda, constants })
    }

    pub fn logistic(space: ParamSpace, bounds: DataBounds) -> Result<Self> {
        Self::logistic_with(LossKind::Logistic, space, bounds, 0.0)
    }

    pub fn logistic_ridge(space: ParamSpace, bounds: DataBounds, lambda: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::invalid("lambda", "logistic+ridge needs lambda > 0"));
        }
        Self::logistic_with(LossKind::LogisticRidge, space, bounds, lambda)
    }

    fn logistic_with(kind: LossKind, space: ParamSpace, bounds: DataBounds, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let rx = bounds.feature_radius;
        let constants = Constants {
            strong_convexity: lambda,
            smoothness: rx * rx / 4.0 + lambda,
            lipschitz: rx + lambda * space.radius,
            diameter: space.diameter(),
        };
        let bounds = DataBounds { label_bound: 1.0, ..bounds };
        Ok(LossModel { kind, space, bounds, l2: lambda, constants })
    }

    /// Builds a loss of the given kind; `lambda` is ignored for plain logistic.
    pub fn from_kind(kind: LossKind, space: ParamSpace, bounds: DataBounds, lambda: f64) -> Result<Self> {
        match kind {
            LossKind::Ridge => Self::ridge(space, bounds, lambda),
            LossKind::Logistic => Self::logistic(space, bounds),
            LossKind::LogisticRidge => Self::logistic_ridge(space, bounds, lambda),
        }
    }

    /// Adds `m_reg/2 ‖θ‖²` to every per-point loss.
    pub fn regularize(&self, m_reg: f64) -> Result<Self> {
        if !(m_reg > 0.0 && m_reg.is_finite()) {
            return Err(Error::invalid("m_reg", format!("{m_reg} must be positive")));
        }
        let c = self.constants;
        let kind = match self.kind {
            LossKind::Logistic => LossKind::LogisticRidge,
            k => k,
        };
        Ok(LossModel {
            kind,
            l2: self.l2 + m_reg,
            constants: Constants {
                strong_convexity: c.strong_convexity + m_reg,
                smoothness: c.smoothness + m_reg,
                lipschitz: c.lipschitz + m_reg * c.diameter,
                diameter: c.diameter,
            },
            ..self.clone()
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn bounds(&self) -> &DataBounds {
        &self.bounds
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    /// Validates a point against the declared data domain of this loss.
    pub fn check_point(&self, z: &DataPoint) -> Result<()> {
        if z.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: z.dim() });
        }
        self.bounds.check(z)?;
        if !self.kind.squared() && z.y != 1.0 && z.y != -1.0 {
            return Err(Error::OutOfBounds(format!("logistic label {} not in {{-1, +1}}", z.y)));
        }
        Ok(())
    }

    pub fn point_loss(&self, z: &DataPoint, theta: &[f64]) -> f64 {
        self.data_term(z, theta) + 0.5 * self.l2 * dot(theta, theta)
    }

    fn data_term(&self, z: &DataPoint, theta: &[f64]) -> f64 {
        let t = dot(theta, &z.x);
        if self.kind.squared() {
            0.5 * (t - z.y) * (t - z.y)
        } else {
            softplus(-z.y * t)
        }
    }

    /// Derivative of the data term with respect to `θᵀx`.
    #[inline]
    fn data_slope(&self, z: &DataPoint, theta: &[f64]) -> f64 {
        let t = dot(theta, &z.x);
        if self.kind.squared() {
            t - z.y
        } else {
            -z.y * sigmoid(-z.y * t)
        }
    }

    pub fn point_gradient(&self, z: &DataPoint, theta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = theta.iter().map(|v| self.l2 * v).collect();
        axpy(self.data_slope(z, theta), &z.x, &mut g);
        g
    }

    /// (1/n) Σ f_z(θ), counting multiplicity.
    pub fn empirical_loss(&self, data: &[DataPoint], theta: &[f64]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let sum: f64 = data.iter().map(|z| self.data_term(z, theta)).sum();
        Ok(sum / data.len() as f64 + 0.5 * self.l2 * dot(theta, theta))
    }

    pub fn empirical_gradient(&self, data: &[DataPoint], theta: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; theta.len()];
        self.empirical_gradient_into(data, theta, &mut g)?;
        Ok(g)
    }

    /// Writes the empirical gradient into `out` without allocating.
    pub fn empirical_gradient_into(&self, data: &[DataPoint], theta: &[f64], out: &mut [f64]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for z in data {
            axpy(self.data_slope(z, theta), &z.x, out);
        }
        let inv_n = 1.0 / data.len() as f64;
        for (o, t) in out.iter_mut().zip(theta) {
            *o = *o * inv_n + self.l2 * t;
        }
        Ok(())
    }

    /// Exact minimizer for ridge losses (including regularized ridge).
    pub fn ridge_oracle(&self, data: &[DataPoint]) -> Result<Vec<f64>> {
        if !self.kind.squared() {
            return Err(Error::invalid("loss", "closed-form oracle exists only for ridge"));
        }
        closed_form_ridge_optimizer(data, self.l2, &self.space)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("lambda", format!("{lambda} must be finite and non-negative")))
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Solves `(XᵀX/n + λI) θ = Xᵀy/n` and checks the answer lies strictly inside Θ.
pub fn closed_form_ridge_optimizer(data: &[DataPoint], lambda: f64, space: &ParamSpace) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = space.dim;
    let n = data.len() as f64;
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for z in data {
        if z.dim() != d {
            return Err(Error::Dimension { expected: d, found: z.dim() });
        }
        let x = DVector::from_column_slice(&z.x);
        a.ger(1.0 / n, &x, &x, 1.0);
        b.axpy(z.y / n, &x, 1.0);
    }
    for i in 0..d {
        a[(i, i)] += lambda;
    }
    let scale = a.diagonal().amax().max(f64::MIN_POSITIVE);
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot <= 1e-13 * scale {
        return Err(Error::SingularSystem);
    }
    let theta: Vec<f64> = chol.solve(&b).iter().copied().collect();
    let nt = norm(&theta);
    if nt >= space.radius {
        return Err(Error::OracleOutsideDomain { norm: nt, radius: space.radius });
    }
    Ok(theta)
}
