//! Assignable equilibria: exact solve, grid estimate from a resistance guess,
//! and an infeasible setpoint.

use fcpbc::equilibrium::estimate_equilibrium;
use fcpbc::{EquilibriumGrid, PlantParams, Theta};

fn main() -> fcpbc::Result<()> {
    let plant = PlantParams::table1();
    let k_i = 0.001;
    for x3 in [40.0, 45.0, 50.0] {
        println!("x3* = {x3} V: {}", plant.equilibrium(x3, k_i)?);
    }

    let grid = EquilibriumGrid::standard(&plant.pol)?;
    let lighter = plant.with_load(0.85 * PlantParams::NOMINAL_LOAD);
    let (x1, x2) = estimate_equilibrium(lighter.theta(), 40.0, &grid);
    println!("grid estimate after 85 % load: x1 = {x1:.2} V, x2 = {x2:.3} A");
    let (x1, x2) = estimate_equilibrium(Theta::new(0.05, 0.2), 40.0, &grid);
    println!("grid estimate with a wrong guess: x1 = {x1:.2} V, x2 = {x2:.3} A");

    match plant.equilibrium(200.0, k_i) {
        Ok(e) => println!("unexpected: {e}"),
        Err(e) => println!("200 V: {e} (exit code {})", e.exit_code()),
    }
    Ok(())
}
