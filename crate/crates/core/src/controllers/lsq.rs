//! Weighted quadratic terms `rᵀ W r` over a stacked decision vector, shared
//! by the free-energy and NLL objectives.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub(crate) struct Term {
    pub residual: DVector<f64>,
    /// `∂r/∂z`.
    pub jacobian: DMatrix<f64>,
    pub weight: DMatrix<f64>,
}

pub(crate) fn weighted_sum(terms: &[Term]) -> f64 {
    terms
        .iter()
        .map(|t| t.residual.dot(&(&t.weight * &t.residual)))
        .sum()
}

/// `Σ Jᵀ W r`, i.e. half the gradient of [`weighted_sum`].
pub(crate) fn half_gradient(terms: &[Term], n: usize) -> DVector<f64> {
    let mut g = DVector::zeros(n);
    for t in terms {
        g += t.jacobian.transpose() * (&t.weight * &t.residual);
    }
    g
}

/// `Σ Jᵀ W J`, half the Gauss-Newton Hessian.
pub(crate) fn half_hessian(terms: &[Term], n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n, n);
    for t in terms {
        h += t.jacobian.transpose() * &t.weight * &t.jacobian;
    }
    h
}

/// Gauss-Newton step `-H⁻¹ g`. When `H` is singular (a direction the
/// objective does not constrain), a Levenberg term `λ·max diag H·I` is added,
/// starting from `damping` and growing until the system factorises.
pub(crate) fn gauss_newton_step(terms: &[Term], n: usize, damping: f64) -> Result<DVector<f64>> {
    let h = half_hessian(terms, n);
    let g = half_gradient(terms, n);
    if damping == 0.0 {
        if let Some(ch) = h.clone().cholesky() {
            return Ok(-ch.solve(&g));
        }
    }
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut lambda = damping.max(1e-14);
    for _ in 0..8 {
        let mut hd = h.clone();
        for i in 0..n {
            hd[(i, i)] += lambda * scale;
        }
        if let Some(ch) = hd.cholesky() {
            return Ok(-ch.solve(&g));
        }
        lambda *= 100.0;
    }
    Err(Error::Degenerate("Gauss-Newton system is not positive definite".into()))
}

pub(crate) enum Method<'a> {
    /// Fixed-step descent with a per-coordinate step size.
    Gradient {
        steps: &'a DVector<f64>,
        iterations: usize,
        tolerance: f64,
    },
    GaussNewton {
        iterations: usize,
        tolerance: f64,
        damping: f64,
    },
}

pub(crate) struct Outcome {
    pub z: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimises `scale · Σ rᵀWr + constant` over `z`.
///
/// Fails with [`Error::Unstable`] when the objective leaves the finite range
/// or climbs more than tenfold above the best value seen.
pub(crate) fn minimize<F>(z0: DVector<f64>, build: F, scale: f64, constant: f64, method: Method) -> Result<Outcome>
where
    F: Fn(&DVector<f64>) -> Result<Vec<Term>>,
{
    let n = z0.len();
    let eval = |terms: &[Term]| scale * weighted_sum(terms) + constant;
    let mut z = z0;
    let mut terms = build(&z)?;
    let mut value = eval(&terms);
    let mut best = value;
    let guard = |v: f64, best: f64| -> Result<()> {
        if !v.is_finite() || v - best > 10.0 * best.abs().max(1.0) {
            return Err(Error::Unstable(format!(
                "objective went from {best:.6e} to {v:.6e}"
            )));
        }
        Ok(())
    };
    guard(value, best)?;
    let (iterations, tolerance) = match method {
        Method::Gradient { iterations, tolerance, .. } | Method::GaussNewton { iterations, tolerance, .. } => {
            (iterations, tolerance)
        }
    };
    for k in 0..iterations {
        let next_z = match method {
            Method::Gradient { steps, .. } => {
                let g = half_gradient(&terms, n) * (2.0 * scale);
                &z - steps.component_mul(&g)
            }
            Method::GaussNewton { damping, .. } => {
                let delta = gauss_newton_step(&terms, n, damping)?;
                // backtrack only when the local model overshoots (nonlinear g)
                let mut step = 1.0;
                let mut cand = &z + &delta;
                for _ in 0..20 {
                    let v = eval(&build(&cand)?);
                    if v <= value + 1e-12 * value.abs().max(1.0) {
                        break;
                    }
                    step *= 0.5;
                    cand = &z + &delta * step;
                }
                cand
            }
        };
        let next_terms = build(&next_z)?;
        let next_value = eval(&next_terms);
        guard(next_value, best)?;
        best = best.min(next_value);
        let change = (value - next_value).abs();
        z = next_z;
        terms = next_terms;
        value = next_value;
        if change < tolerance {
            return Ok(Outcome {
                z,
                value,
                iterations: k + 1,
                converged: true,
            });
        }
    }
    Ok(Outcome {
        z,
        value,
        iterations,
        converged: false,
    })
}
