//! Adaptive control with the resistance estimator for several estimator gains.

use fcpbc::{run_scenario, Scenario};

fn main() -> fcpbc::Result<()> {
    for k in [10.0, 1.0, 0.01] {
        let trace = run_scenario(&Scenario::scenario3(k))?;
        println!("estimator gain {k}:");
        for t in [0.001, 0.05, 0.249, 0.26, 0.5] {
            let smp = trace
                .samples
                .iter()
                .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
                .unwrap();
            let a = smp.adaptive.unwrap();
            println!(
                "  t = {:.3} s  R_p_hat = {:.4} ({})  1/R_L_hat = {:.4} ({:.4})  x3 = {:.3} V",
                smp.t, a.theta1_hat, smp.r_p, a.theta2_hat, smp.g_load, smp.x.x3
            );
        }
    }
    Ok(())
}
