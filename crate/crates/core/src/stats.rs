//! Sample statistics and Welch's unequal-variance t-test.

use serde::{Deserialize, Serialize};

use crate::special::student_t_two_sided_p;
use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator); 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    /// `(mean_a - mean_b) / se`.
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub dof: f64,
    pub p_value: f64,
    pub significant: bool,
}

pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::EmptySample(format!(
            "Welch test needs two values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("significance level {alpha} not in (0, 1)")));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let diff = mean(a) - mean(b);
    if va + vb == 0.0 {
        if diff == 0.0 {
            // identical constant samples: no evidence of a difference
            return Ok(WelchTest {
                t: 0.0,
                dof: na + nb - 2.0,
                p_value: 1.0,
                significant: false,
            });
        }
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let t = diff / (va + vb).sqrt();
    let dof = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p_value = student_t_two_sided_p(t, dof);
    Ok(WelchTest {
        t,
        dof,
        p_value,
        significant: p_value < alpha,
    })
}
