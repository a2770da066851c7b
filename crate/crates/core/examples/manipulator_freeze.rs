//! Two-joint manipulator with a frozen position encoder: the unbiased
//! active-inference controller with and without learned sensor precisions.

use bayes_ftc::faults::FaultType;
use bayes_ftc::harness::{run_ensemble, FtTechnique, ScenarioConfig};

fn main() -> bayes_ftc::Result<()> {
    let mut cfg = ScenarioConfig::manipulator();
    cfg.faults = Some(cfg.default_fault(FaultType::Freeze));
    println!("{:<12} {:>14} {:>14}", "technique", "mse joint 1", "mse joint 2");
    for ft in [FtTechnique::NoFt, FtTechnique::PlImplicit, FtTechnique::PlExplicit] {
        cfg.ft = ft;
        let e = run_ensemble(&cfg, 5)?;
        println!(
            "{:<12} {:>14.6e} {:>14.6e}",
            ft.label(),
            e.mean_mse_belief[0],
            e.mean_mse_belief[1]
        );
    }
    Ok(())
}
