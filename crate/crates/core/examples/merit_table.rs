//! Pairwise Welch-test merit table of four fault-tolerance techniques over
//! the nine cruise-control fault scenarios.

use bayes_ftc::faults::FaultType;
use bayes_ftc::harness::{run_merit, ScenarioConfig, TrajectoryKind, MERIT_TECHNIQUES};

fn main() -> bayes_ftc::Result<()> {
    let report = run_merit(&ScenarioConfig::default(), &FaultType::ALL, &TrajectoryKind::ALL, &MERIT_TECHNIQUES)?;
    let t = &report.table;
    print!("{:<18}", "scenario");
    for ft in &t.techniques {
        print!("{ft:>12}");
    }
    println!();
    for (s, name) in t.scenarios.iter().enumerate() {
        print!("{name:<18}");
        for rmse in &t.mean_rmse[s] {
            print!("{rmse:>12.4}");
        }
        println!();
    }
    print!("{:<18}", "total merit");
    for m in &t.total_merit {
        print!("{m:>12}");
    }
    println!();
    Ok(())
}
