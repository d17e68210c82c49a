//! Unannounced load step with a frozen equilibrium: the output voltage sags.

use fcpbc::{run_scenario, Scenario};

fn main() -> fcpbc::Result<()> {
    let s = Scenario::scenario2();
    let trace = run_scenario(&s)?;
    let before = trace.window(0.19, 0.2).last().unwrap();
    let after = trace.last().unwrap();
    println!(
        "load {} Ohm -> {} Ohm at t = {} s",
        1.0 / before.g_load,
        s.loads[0].1,
        s.loads[0].0
    );
    println!(
        "x3 before: {:.3} V, at t = {} s: {:.3} V",
        before.x.x3, after.t, after.x.x3
    );
    println!("controller still targets x* = {:?}", after.x_star);
    Ok(())
}
