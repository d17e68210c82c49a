//! Known-parameter PI control: start-up from (40 V, 10 A, 30 V), 40 V then 50 V.

use fcpbc::{run_scenario, Scenario};

fn main() -> fcpbc::Result<()> {
    let s = Scenario::scenario1();
    let trace = run_scenario(&s)?;
    for t in [0.0, 0.001, 0.01, 0.05, 0.1, 0.249, 0.251, 0.26, 0.3, 0.5] {
        let smp = trace
            .samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .unwrap();
        println!(
            "t = {:.3} s  x = ({:7.3} V, {:7.3} A, {:7.3} V)  u = {:.4}{}",
            smp.t,
            smp.x.x1,
            smp.x.x2,
            smp.x.x3,
            smp.u_sat,
            if smp.saturated() { " (saturated)" } else { "" }
        );
    }
    let sat = trace.samples.iter().filter(|s| s.saturated()).count();
    println!("{sat} of {} samples saturated", trace.len());
    Ok(())
}
