//! Scenario files: `key = value` lines under `[section]` headers.
//!
//! ```text
//! [run]
//! preset = scenario2        # optional starting point, other keys override it
//! duration = 0.5
//! step = 1e-6
//!
//! [schedule]
//! setpoints = 0:40, 0.25:50
//! loads = 0.2:3.9168
//! ```
//!
//! Every key is optional. [`to_config_string`] writes all of them, and
//! parsing its output gives back the same scenario bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::plant::PlantState;
use crate::sim::{ControlMode, EquilibriumPolicy, InitialCondition, Integrator, Scenario};

fn mode_name(m: ControlMode) -> &'static str {
    match m {
        ControlMode::Known => "known",
        ControlMode::Adaptive => "adaptive",
    }
}

fn policy_name(p: EquilibriumPolicy) -> &'static str {
    match p {
        EquilibriumPolicy::RecomputeOnSetpointChange => "recompute",
        EquilibriumPolicy::Frozen => "frozen",
        EquilibriumPolicy::AdaptiveGrid => "adaptive-grid",
    }
}

/// `t:value` pairs separated by commas.
pub fn format_schedule(s: &[(f64, f64)]) -> String {
    s.iter()
        .map(|(t, v)| format!("{t}:{v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn parse_schedule(text: &str) -> Result<Vec<(f64, f64)>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|item| {
            let (t, v) = item.split_once(':').ok_or_else(|| {
                Error::Config(format!("schedule entry '{}' is not t:value", item.trim()))
            })?;
            Ok((parse_f64(t)?, parse_f64(v)?))
        })
        .collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("'{}' is not a number", s.trim())))
}

/// Serialize every field of `s`.
pub fn to_config_string(s: &Scenario) -> String {
    let mut o = String::new();
    let p = &s.plant;
    // writes to a String cannot fail
    let _ = writeln!(o, "[run]");
    let _ = writeln!(o, "duration = {}", s.duration);
    let _ = writeln!(o, "step = {}", s.step);
    let _ = writeln!(o, "integrator = {}", s.integrator.name());
    let _ = writeln!(o, "decimation = {}", s.decimation);
    let _ = writeln!(o, "mode = {}", mode_name(s.mode));
    let _ = writeln!(o, "policy = {}", policy_name(s.policy));
    let _ = writeln!(o, "estimate_period = {}", s.estimate_period);
    let _ = writeln!(o, "\n[initial]");
    match s.initial {
        InitialCondition::AtEquilibrium => {
            let _ = writeln!(o, "state = equilibrium");
        }
        InitialCondition::Explicit { x, x_c } => {
            let _ = writeln!(o, "state = explicit");
            let _ = writeln!(
                o,
                "x1 = {}\nx2 = {}\nx3 = {}\nxc = {}",
                x.x1, x.x2, x.x3, x_c
            );
        }
    }
    let _ = writeln!(
        o,
        "theta1_hat = {}\ntheta2_hat = {}",
        s.theta_hat0.r_p, s.theta_hat0.g_load
    );
    let _ = writeln!(o, "\n[plant]");
    let _ = writeln!(
        o,
        "c_fc = {}\nl = {}\nc = {}\nr_p = {}",
        p.c_fc, p.l, p.c, p.theta1
    );
    let _ = writeln!(o, "# R_L = {} Ohm", 1.0 / p.theta2);
    let _ = writeln!(o, "g_load = {}", p.theta2);
    let _ = writeln!(o, "\n[polarization]");
    for (name, v) in p.pol.named() {
        let _ = writeln!(o, "{name} = {v}");
    }
    let _ = writeln!(o, "\n[controller]");
    let _ = writeln!(o, "k_p = {}\nk_i = {}", s.gains.k_p, s.gains.k_i);
    let _ = writeln!(
        o,
        "u_min = {}\nu_max = {}",
        s.saturation.u_min, s.saturation.u_max
    );
    let _ = writeln!(o, "\n[estimator]");
    let _ = writeln!(o, "k1 = {}\nk2 = {}", s.estimator.k1, s.estimator.k2);
    let _ = writeln!(o, "\n[schedule]");
    let _ = writeln!(o, "setpoints = {}", format_schedule(&s.setpoints));
    let _ = writeln!(o, "loads = {}", format_schedule(&s.loads));
    o
}

struct Entry<'a> {
    line: usize,
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

fn entries(text: &str) -> Result<Vec<Entry<'_>>> {
    let mut section = "";
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        out.push(Entry {
            line: n + 1,
            section,
            key: key.trim(),
            value: value.trim(),
        });
    }
    Ok(out)
}

/// Parse a scenario file. Keys left out keep the preset's (or default) value.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let entries = entries(text)?;
    let mut s = match entries
        .iter()
        .find(|e| e.section == "run" && e.key == "preset")
    {
        Some(e) => Scenario::preset(e.value)
            .ok_or_else(|| Error::Config(format!("unknown preset '{}'", e.value)))?,
        None => Scenario::default(),
    };
    // explicit initial state fields, applied after the loop
    let (mut init_kind, mut x, mut x_c) = match s.initial {
        InitialCondition::Explicit { x, x_c } => ("explicit", x, x_c),
        InitialCondition::AtEquilibrium => ("equilibrium", PlantState::default(), 0.0),
    };
    let mut explicit_fields = false;

    for e in &entries {
        let ctx = |err: Error| match err {
            Error::Config(m) => {
                Error::Config(format!("line {}: {}.{}: {m}", e.line, e.section, e.key))
            }
            other => other,
        };
        let num = || parse_f64(e.value).map_err(ctx);
        let p = &mut s.plant;
        match (e.section, e.key) {
            ("run", "preset") => {}
            ("run", "duration") => s.duration = num()?,
            ("run", "step") => s.step = num()?,
            ("run", "integrator") => {
                s.integrator = Integrator::from_name(e.value).ok_or_else(|| {
                    ctx(Error::Config(format!("unknown integrator '{}'", e.value)))
                })?
            }
            ("run", "decimation") => {
                s.decimation = e.value.parse().map_err(|_| {
                    ctx(Error::Config(format!(
                        "'{}' is not a positive integer",
                        e.value
                    )))
                })?
            }
            ("run", "mode") => {
                s.mode = match e.value {
                    "known" => ControlMode::Known,
                    "adaptive" => ControlMode::Adaptive,
                    v => return Err(ctx(Error::Config(format!("unknown mode '{v}'")))),
                }
            }
            ("run", "policy") => {
                s.policy = match e.value {
                    "recompute" => EquilibriumPolicy::RecomputeOnSetpointChange,
                    "frozen" => EquilibriumPolicy::Frozen,
                    "adaptive-grid" => EquilibriumPolicy::AdaptiveGrid,
                    v => return Err(ctx(Error::Config(format!("unknown policy '{v}'")))),
                }
            }
            ("run", "estimate_period") => s.estimate_period = num()?,
            ("initial", "state") => {
                init_kind = match e.value {
                    "explicit" => "explicit",
                    "equilibrium" => "equilibrium",
                    v => return Err(ctx(Error::Config(format!("unknown initial state '{v}'")))),
                }
            }
            ("initial", k @ ("x1" | "x2" | "x3" | "xc")) => {
                let v = num()?;
                match k {
                    "x1" => x.x1 = v,
                    "x2" => x.x2 = v,
                    "x3" => x.x3 = v,
                    _ => x_c = v,
                }
                explicit_fields = true;
            }
            ("initial", "theta1_hat") => s.theta_hat0.r_p = num()?,
            ("initial", "theta2_hat") => s.theta_hat0.g_load = num()?,
            ("plant", "c_fc") => p.c_fc = num()?,
            ("plant", "l") => p.l = num()?,
            ("plant", "c") => p.c = num()?,
            ("plant", "r_p") => p.theta1 = num()?,
            ("plant", "g_load") => p.theta2 = num()?,
            ("plant", "r_load") => p.theta2 = 1.0 / num()?,
            ("polarization", "c1") => p.pol.c1 = num()?,
            ("polarization", "c2") => p.pol.c2 = num()?,
            ("polarization", "c3") => p.pol.c3 = num()?,
            ("polarization", "c4") => p.pol.c4 = num()?,
            ("polarization", "c5") => p.pol.c5 = num()?,
            ("controller", "k_p") => s.gains.k_p = num()?,
            ("controller", "k_i") => s.gains.k_i = num()?,
            ("controller", "u_min") => s.saturation.u_min = num()?,
            ("controller", "u_max") => s.saturation.u_max = num()?,
            ("estimator", "k1") => s.estimator.k1 = num()?,
            ("estimator", "k2") => s.estimator.k2 = num()?,
            ("estimator", "k") => {
                let k = num()?;
                s.estimator.k1 = k;
                s.estimator.k2 = k;
            }
            ("schedule", "setpoints") => s.setpoints = parse_schedule(e.value).map_err(ctx)?,
            ("schedule", "loads") => s.loads = parse_schedule(e.value).map_err(ctx)?,
            (sec, key) => {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{key}' in section [{sec}]",
                    e.line
                )));
            }
        }
    }

    if init_kind == "explicit" {
        s.initial = InitialCondition::Explicit { x, x_c };
    } else if explicit_fields {
        return Err(Error::Config(
            "initial x1/x2/x3/xc given but state = equilibrium".into(),
        ));
    } else {
        s.initial = InitialCondition::AtEquilibrium;
    }
    s.validate()?;
    Ok(s)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn write_config(path: impl AsRef<Path>, s: &Scenario) -> Result<()> {
    std::fs::write(path, to_config_string(s))?;
    Ok(())
}
