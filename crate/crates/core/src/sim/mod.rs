//! Closed-loop simulation of plant, PI-PBC and estimator.
//!
//! The state bundle `(x1, x2, x3, x_c, z1, z2)` is advanced with a fixed
//! step. The PI law is part of the right-hand side; the estimated
//! equilibrium is computed at the start of every step and held through it.

mod closed_loop;
mod ode;
mod scenario;
mod trace;

pub use ode::{rk4_step, sdirk3_step, NewtonOptions, StepError};
pub use scenario::{
    ControlMode, EquilibriumPolicy, InitialCondition, Integrator, Scenario, PRESET_NAMES,
};
pub use trace::{AdaptiveSample, SimTrace, TraceSample, CSV_HEADER};

use rayon::prelude::*;

use closed_loop::{Bundle, ClosedLoop};

use crate::controller::{adaptive_pipbc_output, pipbc_output, ControllerState, PiOutput};
use crate::equilibrium::{solve_equilibrium, Equilibrium, EquilibriumGrid};
use crate::error::{Error, Result};
use crate::estimator::{theta_for_equilibrium, theta_hat, EstimatorState};
use crate::plant::{lyapunov, passive_output, PlantState, Theta};

#[derive(Debug, Clone, Copy)]
enum Event {
    Load(f64),
    Setpoint(f64),
}

/// Controller values at the start of a step.
#[derive(Debug, Clone, Copy)]
struct Hold {
    pi: PiOutput,
    x2_hat_star: f64,
    adaptive: Option<AdaptiveSample>,
}

/// Integrate a scenario and return its decimated trace.
pub fn run_scenario(s: &Scenario) -> Result<SimTrace> {
    s.validate()?;
    let h = s.step;
    let n_steps = s.steps();
    let k_i = s.gains.k_i;
    let adaptive = s.mode == ControlMode::Adaptive;

    // Loads before setpoints at a shared index, so a recomputed x* sees the new load.
    let mut events: Vec<(usize, Event)> = s
        .loads
        .iter()
        .map(|&(t, r)| (s.event_index(t), Event::Load(r)))
        .chain(
            s.setpoints
                .iter()
                .map(|&(t, v)| (s.event_index(t), Event::Setpoint(v))),
        )
        .collect();
    events.sort_by_key(|&(n, e)| (n, matches!(e, Event::Setpoint(_))));
    let mut next_event = 0;

    let mut plant = s.plant;
    let theta_known = plant.theta();
    let mut x3_star = s.setpoints[0].1;
    let grid = if adaptive {
        Some(EquilibriumGrid::standard(&plant.pol)?)
    } else {
        None
    };

    // Reference equilibrium: the controller's x* in known mode, the true
    // equilibrium of the current plant in adaptive mode.
    let pol = plant.pol;
    let reference = |plant_theta: Theta, x3: f64| -> Result<Equilibrium> {
        let theta = match s.policy {
            EquilibriumPolicy::Frozen => theta_known,
            _ => plant_theta,
        };
        solve_equilibrium(x3, theta, &pol, k_i)
    };

    let mut apply_events =
        |n: usize, plant: &mut crate::plant::PlantParams, x3_star: &mut f64| -> (bool, bool) {
            let (mut load, mut sp) = (false, false);
            while next_event < events.len() && events[next_event].0 == n {
                match events[next_event].1 {
                    Event::Load(r) => {
                        *plant = plant.with_load(r);
                        load = true;
                    }
                    Event::Setpoint(v) => {
                        *x3_star = v;
                        sp = true;
                    }
                }
                next_event += 1;
            }
            (load, sp)
        };

    apply_events(0, &mut plant, &mut x3_star);
    let mut eq = reference(plant.theta(), x3_star)?;

    let (x0, xc0) = match s.initial {
        InitialCondition::Explicit { x, x_c } => (x, x_c),
        InitialCondition::AtEquilibrium => (eq.state(), eq.xc_star),
    };
    let z0 = EstimatorState::from_estimate(s.theta_hat0, &x0, &s.estimator, plant.l, plant.c);
    let mut y: Bundle = [x0.x1, x0.x2, x0.x3, xc0, z0.z1, z0.z2];

    let mut trace = SimTrace {
        samples: Vec::with_capacity(n_steps / s.decimation + 1),
    };
    // (refresh slot, x1_hat*, x2_hat*) of the sampled equilibrium estimate
    let mut estimate: Option<(u64, f64, f64)> = None;

    for n in 0..=n_steps {
        let t = n as f64 * h;
        if n > 0 {
            let (load, sp) = apply_events(n, &mut plant, &mut x3_star);
            let recompute = match s.policy {
                EquilibriumPolicy::AdaptiveGrid => load || sp,
                _ => sp,
            };
            if recompute {
                eq = reference(plant.theta(), x3_star)?;
            }
            if sp {
                estimate = None;
            }
        }

        let x = PlantState::new(y[0], y[1], y[2]);
        let xc = ControllerState { x_c: y[3] };
        let hold = if let Some(grid) = &grid {
            let z = EstimatorState { z1: y[4], z2: y[5] };
            let th = theta_hat(&z, &x, &s.estimator, plant.l, plant.c);
            let th_eq = theta_for_equilibrium(th);
            // small offset keeps slot boundaries off rounding noise in n * h
            let slot = (t / s.estimate_period + 1e-6).floor() as u64;
            let (x1_hat, x2_hat) = match estimate {
                Some((k, a, b)) if k == slot => (a, b),
                _ => {
                    let (a, b) = grid.estimate(th_eq, x3_star);
                    estimate = Some((slot, a, b));
                    (a, b)
                }
            };
            let pi = adaptive_pipbc_output(&x, xc, x2_hat, x3_star, &s.gains, &s.saturation);
            let u_bar = th_eq.g_load * x3_star / x2_hat;
            let y_true = passive_output(&x, &eq.state());
            let xi = -(pi.u.0 - u_bar) * pi.xc_dot + (pi.u.0 - eq.u_star) * y_true;
            Hold {
                pi,
                x2_hat_star: x2_hat,
                adaptive: Some(AdaptiveSample {
                    theta1_hat: th.r_p,
                    theta2_hat: th.g_load,
                    x1_star_hat: x1_hat,
                    x2_star_hat: x2_hat,
                    xi,
                }),
            }
        } else {
            Hold {
                pi: pipbc_output(&x, xc, &eq.state(), &s.gains, &s.saturation),
                x2_hat_star: eq.x2_star,
                adaptive: None,
            }
        };

        if n % s.decimation == 0 {
            let x_star = eq.state();
            trace.samples.push(TraceSample {
                t,
                x,
                x_c: xc.x_c,
                u_raw: hold.pi.u_raw,
                u_sat: hold.pi.u.0,
                y_n: hold.pi.xc_dot,
                v_lyap: lyapunov(&(x - x_star), xc.x_c - eq.xc_star, &plant, k_i),
                adaptive: hold.adaptive,
                x_star,
                xc_star: eq.xc_star,
                r_p: plant.theta1,
                g_load: plant.theta2,
            });
        }
        if n == n_steps {
            break;
        }

        let cl = ClosedLoop {
            plant,
            gains: s.gains,
            saturation: s.saturation,
            estimator: if adaptive { Some(s.estimator) } else { None },
            x2_ref: hold.x2_hat_star,
            x3_star,
        };
        y = match s.integrator {
            Integrator::Rk4 => {
                rk4_step(&y, t, h, |ts, ys| cl.rhs(ts, ys)).map_err(|e| match e {
                    Error::Integration { reason, .. } => Error::Integration { time: t, reason },
                    e => e,
                })?
            }
            Integrator::Sdirk3 => implicit_step(&cl, &y, t, h).map_err(|e| match e {
                Error::Integration { reason, .. } => Error::Integration { time: t, reason },
                e => e,
            })?,
        };
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Integration {
                time: t + h,
                reason: "state became non-finite".into(),
            });
        }
    }
    Ok(trace)
}

fn sdirk(cl: &ClosedLoop, y: &Bundle, t: f64, h: f64) -> Result<Bundle> {
    sdirk3_step(y, t, h, NewtonOptions::default(), |ts, ys| {
        cl.rhs_jacobian(ts, ys)
    })
    .map_err(|e| match e {
        StepError::Rhs(e) => e,
        StepError::Newton { iterations } => Error::Integration {
            time: t,
            reason: format!("stage equations did not converge in {iterations} iterations"),
        },
        StepError::Singular => Error::Integration {
            time: t,
            reason: "singular Newton matrix".into(),
        },
    })
}

/// One implicit step that splits at the first saturation switch inside it.
///
/// The clamp makes the right-hand side non-smooth; stepping across the kink
/// of the fast current loop costs accuracy, so the switch is bracketed by
/// bisection on the sub-step length and the step restarts just before it.
fn implicit_step(cl: &ClosedLoop, y: &Bundle, t: f64, h: f64) -> Result<Bundle> {
    let full = sdirk(cl, y, t, h)?;
    let b0 = cl.branch(y);
    if cl.branch(&full) == b0 {
        return Ok(full);
    }
    let (mut lo, mut hi) = (0.0, h);
    let mut y_lo = *y;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let y_mid = sdirk(cl, y, t, mid)?;
        if cl.branch(&y_mid) == b0 {
            lo = mid;
            y_lo = y_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * h {
            break;
        }
    }
    if lo == 0.0 {
        return Ok(full);
    }
    sdirk(cl, &y_lo, t + lo, h - lo)
}

/// Run independent scenarios in parallel; results keep the input order.
pub fn run_sweep(scenarios: &[Scenario]) -> Vec<Result<SimTrace>> {
    scenarios.par_iter().map(run_scenario).collect()
}
