//! Command-line front end shared by the `fcpbc` binary and the tests.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 numeric failure,
//! 4 infeasible equilibrium. Failures print one `key=value` line on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, parse_schedule, to_config_string, write_config};
use crate::error::{Error, Result};
use crate::pemfc::{fit_polarization, read_curve_csv, rms_residual};
use crate::plot::write_plots;
use crate::sim::{run_scenario, run_sweep, Integrator, Scenario, SimTrace, PRESET_NAMES};
use crate::{PiGains, PlantParams};

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "FCPBC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "fcpbc",
    version,
    about = "Fuel-cell boost converter under PI passivity-based control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a preset or scenario file and write trace.csv.
    Simulate(Box<SimulateArgs>),
    /// Fit polarization constants to an i_fc_A,v_fc_V CSV file.
    Fit { csv: PathBuf },
    /// Print the assignable equilibrium for an output-voltage setpoint.
    Equilibrium {
        x3_star: f64,
        /// Take plant and polarization parameters from this scenario file.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Integral gain used for x_c* (defaults to the scenario's).
        #[arg(long)]
        ki: Option<f64>,
    },
    /// List presets, or print one as a scenario file.
    Presets {
        #[arg(long, value_name = "NAME")]
        dump: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "scenario")]
    pub preset: Option<String>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub kp: Option<f64>,
    #[arg(long)]
    pub ki: Option<f64>,
    /// Estimator gain for both k1 and k2.
    #[arg(long)]
    pub k_est: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Setpoint schedule, e.g. "0:40,0.25:50".
    #[arg(long)]
    pub setpoints: Option<String>,
    /// Load schedule in ohms, e.g. "0.2:3.9168".
    #[arg(long)]
    pub loads: Option<String>,
    #[arg(long)]
    pub decimation: Option<usize>,
    /// Record every integration step.
    #[arg(long)]
    pub full_rate: bool,
    /// sdirk3 (default) or rk4.
    #[arg(long)]
    pub integrator: Option<String>,
    /// Also write SVG figures.
    #[arg(long)]
    pub plot: bool,
    /// Run the scenario over a K_P x K_I grid in parallel, one subdirectory per run.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
    pub kp_values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-3, 1e-2])]
    pub ki_values: Vec<f64>,
}

impl SimulateArgs {
    /// Base scenario with command-line overrides applied and checked.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = match (&self.preset, &self.scenario) {
            (Some(name), None) => Scenario::preset(name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset '{name}' (available: {})",
                    PRESET_NAMES.join(", ")
                ))
            })?,
            (None, Some(path)) => load_config(path)?,
            (None, None) => {
                return Err(Error::Config(
                    "simulate needs --preset or --scenario".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "--preset and --scenario are exclusive".into(),
                ))
            }
        };
        if let Some(v) = self.kp {
            s.gains.k_p = v;
        }
        if let Some(v) = self.ki {
            s.gains.k_i = v;
        }
        if let Some(k) = self.k_est {
            s.estimator.k1 = k;
            s.estimator.k2 = k;
        }
        if let Some(v) = self.step {
            s.step = v;
        }
        if let Some(v) = self.duration {
            s.duration = v;
        }
        if let Some(v) = &self.setpoints {
            s.setpoints = parse_schedule(v)?;
        }
        if let Some(v) = &self.loads {
            s.loads = parse_schedule(v)?;
        }
        if let Some(v) = self.decimation {
            s.decimation = v;
        }
        if self.full_rate {
            s.decimation = 1;
        }
        if let Some(name) = &self.integrator {
            s.integrator = Integrator::from_name(name)
                .ok_or_else(|| Error::Config(format!("unknown integrator '{name}'")))?;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Parse `args` (program name first) and run; returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(
                err,
                "{}",
                error_line(&Error::Config(
                    first.trim_start_matches("error: ").to_string()
                ))
            );
            return 2;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", error_line(&e));
            e.exit_code()
        }
    }
}

/// `error kind=<kind> code=<n> [time=<s>] message="<text>"`
pub fn error_line(e: &Error) -> String {
    let msg = e
        .to_string()
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', " ");
    match e.time() {
        Some(t) => format!(
            "error kind={} code={} time={t} message=\"{msg}\"",
            e.kind(),
            e.exit_code()
        ),
        None => format!(
            "error kind={} code={} message=\"{msg}\"",
            e.kind(),
            e.exit_code()
        ),
    }
}

fn execute(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Simulate(args) => simulate(args, out, err),
        Command::Fit { csv } => {
            let data = read_curve_csv(csv)?;
            let p = fit_polarization(&data)?;
            for (name, v) in p.named() {
                writeln!(out, "{name} = {v:.6}")?;
            }
            writeln!(out, "rms_residual_V = {:.3e}", rms_residual(&data, &p)?)?;
            Ok(())
        }
        Command::Equilibrium {
            x3_star,
            scenario,
            ki,
        } => {
            let (plant, k_i) = match scenario {
                Some(path) => {
                    let s = load_config(path)?;
                    (s.plant, s.gains.k_i)
                }
                None => (PlantParams::table1(), PiGains::TABLE1.k_i),
            };
            let k_i = ki.unwrap_or(k_i);
            PiGains::new(1.0, k_i)?;
            let eq = plant.equilibrium(*x3_star, k_i)?;
            writeln!(out, "{eq}")?;
            Ok(())
        }
        Command::Presets { dump } => {
            match dump {
                Some(name) => {
                    let s = Scenario::preset(name)
                        .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
                    write!(out, "{}", to_config_string(&s))?;
                }
                None => {
                    for name in PRESET_NAMES {
                        writeln!(out, "{name:<16} {}", preset_summary(name))?;
                    }
                }
            }
            Ok(())
        }
    }
}

fn preset_summary(name: &str) -> &'static str {
    match name {
        "scenario1" => "known parameters, 40 V then 50 V at 0.25 s",
        "scenario2" => "known parameters at rest on 40 V, unannounced load step at 0.2 s",
        "scenario3" => "adaptive, estimator gain 10, load to 85 % at 0.25 s",
        "scenario3-k1" => "adaptive, estimator gain 1",
        "scenario3-k0.01" => "adaptive, estimator gain 0.01",
        _ => "",
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn emit(
    s: &Scenario,
    trace: &SimTrace,
    dir: &Path,
    plot: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    create_dir(dir)?;
    write_config(dir.join("effective_config.txt"), s)?;
    let f = std::fs::File::create(dir.join("trace.csv"))?;
    trace.write_csv(std::io::BufWriter::new(f))?;
    if let Some(last) = trace.last() {
        writeln!(
            out,
            "{}: {} samples, t_end = {} s, x = ({:.4} V, {:.4} A, {:.4} V)",
            dir.join("trace.csv").display(),
            trace.len(),
            last.t,
            last.x.x1,
            last.x.x2,
            last.x.x3
        )?;
    }
    if plot {
        // figures are a convenience: report and carry on
        match write_plots(trace, dir) {
            Ok(paths) => {
                for p in paths {
                    writeln!(out, "{}", p.display())?;
                }
            }
            Err(e) => {
                writeln!(err, "warning: plots skipped: {e}")?;
            }
        }
    }
    Ok(())
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let base = args.scenario()?;
    if !args.sweep {
        let trace = run_scenario(&base)?;
        return emit(&base, &trace, &args.out, args.plot, out, err);
    }
    let mut runs = Vec::new();
    for &kp in &args.kp_values {
        for &ki in &args.ki_values {
            let mut s = base.clone();
            s.gains = PiGains::new(kp, ki)?;
            runs.push(s);
        }
    }
    let traces = run_sweep(&runs);
    let mut first_err = None;
    for (s, r) in runs.iter().zip(traces) {
        let dir = args
            .out
            .join(format!("kp{}_ki{}", s.gains.k_p, s.gains.k_i));
        match r {
            Ok(trace) => emit(s, &trace, &dir, args.plot, out, err)?,
            Err(e) => {
                writeln!(err, "{}: {}", dir.display(), error_line(&e))?;
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}
