//! K_P x K_I grid on the set-point change, runs in parallel.

use fcpbc::sim::run_sweep;
use fcpbc::{PiGains, Scenario};

fn main() -> fcpbc::Result<()> {
    let mut runs = Vec::new();
    for k_p in [0.1, 1.0, 10.0] {
        for k_i in [1e-4, 1e-3, 1e-2] {
            let mut s = Scenario::scenario1();
            s.gains = PiGains::new(k_p, k_i)?;
            runs.push(s);
        }
    }
    println!(
        "{:>6} {:>8} {:>12} {:>12}",
        "K_P", "K_I", "x3(0.25-)", "x3(0.5)"
    );
    for (s, r) in runs.iter().zip(run_sweep(&runs)) {
        let trace = r?;
        let pre = trace.window(0.0, 0.25).last().unwrap().x.x3;
        let end = trace.last().unwrap().x.x3;
        println!(
            "{:>6} {:>8} {:>12.4} {:>12.4}",
            s.gains.k_p, s.gains.k_i, pre, end
        );
    }
    Ok(())
}
