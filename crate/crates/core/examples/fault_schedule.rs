//! Poisson fault schedule for two sensors and its effect on a clean signal.

use bayes_ftc::faults::{corrupt, generate_schedule, FaultProfile};
use bayes_ftc::plants::Observation;
use bayes_ftc::rng::{stream, FAULT_CHANNEL};
use nalgebra::DVector;

fn main() -> bayes_ftc::Result<()> {
    let mut rng = stream(11, 0, FAULT_CHANNEL);
    let schedule = generate_schedule(2.8, 0.4, 20.0, 2, &FaultProfile::default(), &mut rng)?;
    for ev in &schedule.events {
        println!(
            "sensor {}  {:<9}  [{:6.3}, {:6.3})",
            ev.sensor_id,
            ev.kind.name(),
            ev.start,
            ev.end()
        );
    }

    let dt = 0.5;
    let mut last_healthy = Observation {
        sensor_id: 0,
        value: DVector::from_element(1, 0.0),
        t: 0.0,
    };
    println!("\n   t   clean  sensor 0");
    for k in 0..40 {
        let t = k as f64 * dt;
        let clean = Observation {
            sensor_id: 0,
            value: DVector::from_element(1, t.sin()),
            t,
        };
        let event = schedule.active(0, t);
        let seen = corrupt(&clean, event, &last_healthy, t);
        if event.is_none() {
            last_healthy = clean.clone();
        }
        println!("{t:5.1} {:7.3} {:9.3}{}", clean.value[0], seen.value[0], if event.is_some() { "  *" } else { "" });
    }
    Ok(())
}
