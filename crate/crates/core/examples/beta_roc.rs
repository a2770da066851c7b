//! Residual corpus under Poisson faults and the test-split AUC of each
//! residual when used as a logistic fault classifier.

use bayes_ftc::detection::ResidualKind;
use bayes_ftc::harness::{evaluate_residuals, generate_corpus, ScenarioConfig};

fn main() -> bayes_ftc::Result<()> {
    let cfg = ScenarioConfig::default();
    let corpus = generate_corpus(&cfg)?;
    let info = corpus.info();
    println!(
        "{} steps, {} faults, {:.1}% faulty samples, split at t = {}",
        info.steps,
        info.n_faults,
        100.0 * info.fault_fraction,
        info.split_time
    );
    let eval = evaluate_residuals(&corpus)?;
    for kind in [ResidualKind::Ser, ResidualKind::EfFdi, ResidualKind::Beta] {
        let score = &eval.scores[kind.name()];
        println!(
            "{:<5} AUC {:.4}  slope {:+.4}  intercept {:+.4}",
            kind.name(),
            score.roc.auc,
            score.model.slope,
            score.model.intercept
        );
    }
    Ok(())
}
