//! Polarization curve, its inverse, and a least-squares refit from samples.

use fcpbc::pemfc::{fit_polarization, rms_residual};
use fcpbc::{CurveSample, PolarizationParams};

fn main() -> fcpbc::Result<()> {
    let p = PolarizationParams::TABLE1;
    println!("{:>8} {:>10} {:>12}", "i [A]", "v [V]", "dv/di [Ohm]");
    for i in [0.5, 2.0, 5.0, 12.38, 23.31, 40.0, 60.0] {
        println!("{i:>8.2} {:>10.4} {:>12.5}", p.voltage(i)?, p.slope(i)?);
    }

    for v in [29.28, 25.60] {
        let i = p.current(v)?;
        println!("d1({v} V) = {i:.4} A, back to {:.9} V", p.voltage(i)?);
    }

    let data: Vec<CurveSample> = (1..=60)
        .map(|k| {
            let i = k as f64;
            CurveSample {
                i_fc: i,
                v_fc: p.voltage(i).unwrap(),
            }
        })
        .collect();
    let fit = fit_polarization(&data)?;
    println!("refit from {} samples:", data.len());
    for ((name, got), (_, want)) in fit.named().iter().zip(p.named()) {
        println!("  {name} = {got:.6} (true {want})");
    }
    println!("  rms residual {:.2e} V", rms_residual(&data, &fit)?);
    Ok(())
}
