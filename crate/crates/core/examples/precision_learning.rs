//! Conjugate sensor-precision learning: a Gamma belief tracking a sensor whose
//! noise jumps mid-stream, and a Wishart belief over a 2-D precision matrix.

use bayes_ftc::precision::{GammaBelief, WishartBelief};
use bayes_ftc::rng::stream;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

fn main() -> bayes_ftc::Result<()> {
    let mut rng = stream(3, 0, 0);
    let prior = GammaBelief::default();
    let mut belief = prior;
    for k in 0..400 {
        let sigma = if k < 200 { 0.5 } else { 3.0 };
        let y = Normal::new(0.0, sigma).expect("sigma > 0").sample(&mut rng);
        belief = belief.update(y, 0.0).forget(0.95, &prior)?;
        if k % 50 == 49 {
            let m = belief.moments();
            println!(
                "k = {:3}  true precision {:6.3}  E[ω] = {:6.3}  β = {:7.3}",
                k + 1,
                1.0 / (sigma * sigma),
                m.mean,
                belief.beta
            );
        }
    }

    let truth = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
    let chol = truth.clone().try_inverse().expect("invertible").cholesky().expect("SPD");
    let mut w = WishartBelief::new(3.0, DMatrix::identity(2, 2) / 3.0)?;
    let zero = DVector::zeros(2);
    let std_normal = Normal::new(0.0, 1.0).expect("unit");
    for _ in 0..2000 {
        let z = DVector::from_fn(2, |_, _| std_normal.sample(&mut rng));
        w = w.update(&(chol.l() * z), &zero)?;
    }
    println!("true precision\n{truth}Wishart mean after 2000 samples\n{}", w.mean());
    Ok(())
}
