//! Online learning of sensor precision (inverse noise covariance).
//!
//! Three learners are provided:
//!
//! - [`GammaBelief`]: conjugate posterior over a scalar precision ω for a
//!   Gaussian with known mean. Each observation adds ½ to the shape and
//!   `(y - C)² / 2` to the rate, so the rate accumulates squared prediction
//!   error and is what the beta residual reads out.
//! - [`WishartBelief`]: the matrix-valued analogue for vector sensors.
//! - [`PointPrecision`]: a point estimate moved along `-∂F/∂P` of the
//!   Gaussian free-energy term, projected back onto an eigenvalue floor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, floor_eigenvalues, inverse_spd, ln_det_spd};
use crate::special::{ln_gamma, ln_multivariate_gamma};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBelief {
    /// Shape `a`.
    pub alpha: f64,
    /// Rate `b`.
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMoments {
    pub mean: f64,
    /// `None` when `a <= 1` (the density has no interior maximum).
    pub mode: Option<f64>,
    pub variance: f64,
}

impl Default for GammaBelief {
    /// `Γ(2, 2)`: unit expected precision with a well-defined mode.
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 2.0,
        }
    }
}

impl GammaBelief {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::config(format!(
                "Gamma parameters must be positive, got a = {alpha}, b = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Posterior after observing `y` from `N(C, 1/ω)`.
    #[must_use]
    pub fn update(&self, y: f64, known_mean: f64) -> Self {
        let r = y - known_mean;
        Self {
            alpha: self.alpha + 0.5,
            beta: self.beta + 0.5 * r * r,
        }
    }

    /// Exponential forgetting towards `prior`: `(a, b) ← λ(a, b) + (1-λ)(a₀, b₀)`.
    pub fn forget(&self, lambda: f64, prior: &GammaBelief) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::config(format!("forgetting factor {lambda} not in (0, 1]")));
        }
        Ok(self.forget_unchecked(lambda, prior))
    }

    pub(crate) fn forget_unchecked(&self, lambda: f64, prior: &GammaBelief) -> Self {
        Self {
            alpha: lambda * self.alpha + (1.0 - lambda) * prior.alpha,
            beta: lambda * self.beta + (1.0 - lambda) * prior.beta,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn mode(&self) -> Result<f64> {
        if self.alpha <= 1.0 {
            return Err(Error::ModeUndefined { alpha: self.alpha });
        }
        Ok((self.alpha - 1.0) / self.beta)
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }

    pub fn moments(&self) -> GammaMoments {
        GammaMoments {
            mean: self.mean(),
            mode: self.mode().ok(),
            variance: self.variance(),
        }
    }

    /// `ln Γ(ω; a, b)` with the rate parameterisation.
    pub fn ln_pdf(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.alpha * self.beta.ln() - ln_gamma(self.alpha) + (self.alpha - 1.0) * omega.ln()
            - self.beta * omega
    }

    pub fn pdf(&self, omega: f64) -> f64 {
        self.ln_pdf(omega).exp()
    }
}

/// Expected precision `a / b`, the weight a controller gives the sensor.
pub fn expected_precision(belief: &GammaBelief) -> f64 {
    belief.mean()
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WishartBelief {
    /// Degrees of freedom `n`.
    pub dof: f64,
    /// Scale matrix `V` (SPD).
    pub scale: DMatrix<f64>,
}

impl WishartBelief {
    pub fn new(dof: f64, scale: DMatrix<f64>) -> Result<Self> {
        cholesky(&scale, "Wishart scale")?;
        let p = scale.nrows() as f64;
        if !(dof >= p) {
            return Err(Error::config(format!(
                "Wishart dof {dof} must be >= dimension {p}"
            )));
        }
        Ok(Self { dof, scale })
    }

    pub fn dim(&self) -> usize {
        self.scale.nrows()
    }

    /// Log density at the SPD matrix `x`.
    pub fn ln_density(&self, x: &DMatrix<f64>) -> Result<f64> {
        let k = self.dim();
        if x.nrows() != k || x.ncols() != k {
            return Err(Error::Dimension(format!(
                "Wishart argument must be {k}x{k}, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let ln_det_x = ln_det_spd(x, "Wishart argument")?;
        let ln_det_v = ln_det_spd(&self.scale, "Wishart scale")?;
        let v_inv = inverse_spd(&self.scale, "Wishart scale")?;
        let n = self.dof;
        let kf = k as f64;
        let trace = (v_inv * x).trace();
        Ok((n - kf - 1.0) / 2.0 * ln_det_x
            - 0.5 * trace
            - n * kf / 2.0 * 2f64.ln()
            - n / 2.0 * ln_det_v
            - ln_multivariate_gamma(k, n / 2.0))
    }

    pub fn density(&self, x: &DMatrix<f64>) -> Result<f64> {
        Ok(self.ln_density(x)?.exp())
    }

    /// Posterior after observing `y` from `N(C, Λ⁻¹)` with `Λ ~ W(n, V)`:
    /// `n ← n + 1`, `V⁻¹ ← V⁻¹ + (y - C)(y - C)ᵀ`.
    pub fn update(&self, y: &DVector<f64>, known_mean: &DVector<f64>) -> Result<Self> {
        if y.len() != self.dim() || known_mean.len() != self.dim() {
            return Err(Error::Dimension("Wishart update vector size".into()));
        }
        let r = y - known_mean;
        let v_inv = inverse_spd(&self.scale, "Wishart scale")? + &r * r.transpose();
        Ok(Self {
            dof: self.dof + 1.0,
            scale: inverse_spd(&v_inv, "updated Wishart scale inverse")?,
        })
    }

    /// `E[Λ] = n V`.
    pub fn mean(&self) -> DMatrix<f64> {
        &self.scale * self.dof
    }
}

pub fn wishart_density(x: &DMatrix<f64>, belief: &WishartBelief) -> Result<f64> {
    belief.density(x)
}

// ---------------------------------------------------------------------------

/// How a point precision follows the free-energy gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRule {
    /// `P ← P - κ·½(εεᵀ - P⁻¹)`.
    #[default]
    Euclidean,
    /// The same gradient preconditioned by the Fisher metric of the precision,
    /// `P ← P - κ·½ P(εεᵀ - P⁻¹)P`. Step sizes become scale free, so sensors
    /// whose precisions differ by orders of magnitude share one `κ`.
    Natural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPrecision {
    pub value: DMatrix<f64>,
    pub learning_rate: f64,
    pub floor: f64,
    #[serde(default)]
    pub rule: PointRule,
}

impl PointPrecision {
    pub fn new(value: DMatrix<f64>, learning_rate: f64, floor: f64) -> Result<Self> {
        cholesky(&value, "point precision")?;
        if !(floor > 0.0) {
            return Err(Error::config("precision floor must be > 0"));
        }
        if !(learning_rate >= 0.0) {
            return Err(Error::config("precision learning rate must be >= 0"));
        }
        Ok(Self {
            value,
            learning_rate,
            floor,
            rule: PointRule::Euclidean,
        })
    }

    pub fn scalar(value: f64, learning_rate: f64, floor: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, value), learning_rate, floor)
    }

    pub fn with_rule(mut self, rule: PointRule) -> Self {
        self.rule = rule;
        self
    }

    /// `∂/∂P` of `½(εᵀPε - ln|P|)`.
    pub fn gradient(&self, residual: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p_inv = inverse_spd(&self.value, "point precision")?;
        Ok((residual * residual.transpose() - p_inv) * 0.5)
    }

    /// One learning step on prediction error `residual`, then projection onto
    /// `λ_min >= floor`.
    pub fn update(&self, residual: &DVector<f64>) -> Result<Self> {
        if residual.len() != self.value.nrows() {
            return Err(Error::Dimension("precision residual size".into()));
        }
        let grad = self.gradient(residual)?;
        let step = match self.rule {
            PointRule::Euclidean => grad,
            PointRule::Natural => &self.value * grad * &self.value,
        };
        let raw = &self.value - step * self.learning_rate;
        Ok(Self {
            value: floor_eigenvalues(&raw, self.floor),
            ..self.clone()
        })
    }
}

pub fn point_update(pp: &PointPrecision, residual: &DVector<f64>) -> Result<PointPrecision> {
    pp.update(residual)
}
