//! Write a scenario file, read it back, run it, export CSV and SVG figures.

use fcpbc::config::{parse_config, to_config_string};
use fcpbc::plot::write_plots;
use fcpbc::{run_scenario, Scenario};

fn main() -> fcpbc::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fcpbc-example"));
    std::fs::create_dir_all(&out)?;

    let mut s = Scenario::scenario3(1.0);
    s.duration = 0.05;
    s.loads = vec![(0.02, 4.0)];
    let text = to_config_string(&s);
    std::fs::write(out.join("scenario.txt"), &text)?;
    let back = parse_config(&text)?;
    assert_eq!(back, s);

    let trace = run_scenario(&back)?;
    let csv = out.join("trace.csv");
    trace.write_csv(std::fs::File::create(&csv)?)?;
    println!("{} ({} rows)", csv.display(), trace.len());
    for p in write_plots(&trace, &out)? {
        println!("{}", p.display());
    }
    Ok(())
}
