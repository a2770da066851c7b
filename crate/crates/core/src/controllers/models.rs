//! Generative-model pieces shared by both controllers: sensor maps `g_i`
//! and transition maps `f`, each with its Jacobian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::plants::barrel_distort;

pub trait ObservationModel: Send + Sync + std::fmt::Debug {
    fn predict(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `∂g/∂x`, shape `(output dim, state dim)`.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn output_dim(&self) -> usize;
}

/// `g(x) = C x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearObservation {
    pub c: DMatrix<f64>,
}

impl LinearObservation {
    pub fn new(c: DMatrix<f64>) -> Self {
        Self { c }
    }

    /// Identity on a scalar state.
    pub fn scalar() -> Self {
        Self::new(DMatrix::identity(1, 1))
    }

    /// Picks `len` consecutive state entries starting at `offset`.
    pub fn select(state_dim: usize, offset: usize, len: usize) -> Self {
        let mut c = DMatrix::zeros(len, state_dim);
        for i in 0..len {
            c[(i, offset + i)] = 1.0;
        }
        Self::new(c)
    }
}

impl ObservationModel for LinearObservation {
    fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }

    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.c.clone()
    }

    fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// `g(x) = distort(S x)`: a selection followed by radial barrel distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortedObservation {
    pub select: DMatrix<f64>,
    pub coefficients: [f64; 3],
}

impl ObservationModel for DistortedObservation {
    fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        let [k1, k2, k3] = self.coefficients;
        barrel_distort(&(&self.select * x), k1, k2, k3)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        // d/dv [v s(ρ)] = s(ρ) I + 2 s'(ρ) v vᵀ with ρ = |v|²
        let [k1, k2, k3] = self.coefficients;
        let v = &self.select * x;
        let rho = v.norm_squared();
        let s = 1.0 + k1 * rho + k2 * rho * rho + k3 * rho * rho * rho;
        let ds = k1 + 2.0 * k2 * rho + 3.0 * k3 * rho * rho;
        let n = v.len();
        let inner = DMatrix::identity(n, n) * s + &v * v.transpose() * (2.0 * ds);
        inner * &self.select
    }

    fn output_dim(&self) -> usize {
        self.select.nrows()
    }
}

/// `f(x, u) = A x + B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        Self { a, b }
    }

    pub fn scalar(a: f64, b: f64) -> Self {
        Self::new(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, b))
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// The Euler-discretised damped double integrator used by the manipulator.
    pub fn damped_double_integrator(n_joints: usize, damping: f64, dt: f64) -> Self {
        let n = 2 * n_joints;
        let mut a = DMatrix::identity(n, n);
        let mut b = DMatrix::zeros(n, n_joints);
        for j in 0..n_joints {
            a[(j, n_joints + j)] = dt;
            a[(n_joints + j, n_joints + j)] = 1.0 - damping * dt;
            b[(n_joints + j, j)] = dt;
        }
        Self::new(a, b)
    }
}
