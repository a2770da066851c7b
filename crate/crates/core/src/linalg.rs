//! Small dense-matrix helpers shared by the controllers and precision learners.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    check_square(m, what)?;
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::NotSpd(format!("{what} is not symmetric")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSpd(format!("{what} has non-finite entries")));
    }
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd(what.to_string()))
}

/// `ln |m|` for an SPD matrix.
pub fn ln_det_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = cholesky(m, what)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inverse_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(cholesky(m, what)?.inverse())
}

/// Projects a symmetric matrix onto `{ P : λ_min(P) >= floor }`.
pub fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    if sym.nrows() == 1 {
        return DMatrix::from_element(1, 1, sym[(0, 0)].max(floor));
    }
    let eig = SymmetricEigen::new(sym);
    let clamped = eig.eigenvalues.map(|l| if l.is_finite() { l.max(floor) } else { floor });
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

/// `rᵀ W r`.
pub fn quad_form(r: &DVector<f64>, w: &DMatrix<f64>) -> f64 {
    r.dot(&(w * r))
}

pub fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((ln_det_spd(&m, "m").unwrap() - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&indefinite, "m"), Err(Error::NotSpd(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(cholesky(&asym, "m"), Err(Error::NotSpd(_))));
    }

    #[test]
    fn eigen_floor_lifts_small_directions_only() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let p = floor_eigenvalues(&m, 0.5);
        assert!((p[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((p[(1, 1)] - 0.5).abs() < 1e-12);
    }
}
