use crate::controller::{PiGains, SaturationLimits};
use crate::error::{Error, Result};
use crate::estimator::EstimatorGains;
use crate::plant::{PlantParams, PlantState, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// Controller uses the known-parameter equilibrium.
    Known,
    /// Controller uses the estimator and the grid argmin.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumPolicy {
    /// Recompute `x*` from the plant's current resistances on each setpoint change.
    RecomputeOnSetpointChange,
    /// Keep the resistances known at `t = 0`; load events are invisible to the controller.
    Frozen,
    /// Estimate `x*` every step from the online estimate.
    AdaptiveGrid,
}

/// Time-stepping scheme for the closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// L-stable implicit Runge-Kutta; handles the fast current loop at `h = 1e-6`.
    #[default]
    Sdirk3,
    /// Explicit RK4. Stable only for `h` well below `L / (K_P x3*^2)`.
    Rk4,
}

impl Integrator {
    pub fn name(&self) -> &'static str {
        match self {
            Integrator::Sdirk3 => "sdirk3",
            Integrator::Rk4 => "rk4",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sdirk3" => Some(Integrator::Sdirk3),
            "rk4" => Some(Integrator::Rk4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Explicit {
        x: PlantState,
        x_c: f64,
    },
    /// Start at rest on the equilibrium of the first setpoint, with the
    /// integrator at its equilibrium value.
    AtEquilibrium,
}

/// A timed closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration: f64,
    pub step: f64,
    pub integrator: Integrator,
    /// Refresh period of the adaptive loop's equilibrium estimate, in seconds.
    /// Refreshes fall on the first step at or after each multiple.
    pub estimate_period: f64,
    /// Record every `decimation`-th integration step.
    pub decimation: usize,
    pub initial: InitialCondition,
    /// Initial resistance estimate (adaptive mode only).
    pub theta_hat0: Theta,
    pub plant: PlantParams,
    pub gains: PiGains,
    pub estimator: EstimatorGains,
    pub saturation: SaturationLimits,
    pub mode: ControlMode,
    pub policy: EquilibriumPolicy,
    /// `(time, x3*)`, the first entry at `t = 0`.
    pub setpoints: Vec<(f64, f64)>,
    /// `(time, R_L)` load changes.
    pub loads: Vec<(f64, f64)>,
}

pub const PRESET_NAMES: [&str; 5] = [
    "scenario1",
    "scenario2",
    "scenario3",
    "scenario3-k1",
    "scenario3-k0.01",
];

impl Default for Scenario {
    /// Table 1 bench, known parameters, 40 V from `(40 V, 10 A, 30 V)`.
    fn default() -> Self {
        Self::base()
    }
}

impl Scenario {
    fn base() -> Self {
        Scenario {
            duration: 0.5,
            step: 1e-6,
            integrator: Integrator::Sdirk3,
            estimate_period: 1e-6,
            decimation: 100,
            initial: InitialCondition::Explicit {
                x: PlantState::new(40.0, 10.0, 30.0),
                x_c: 0.0,
            },
            theta_hat0: Theta::new(0.0, 0.0),
            plant: PlantParams::table1(),
            gains: PiGains::TABLE1,
            estimator: EstimatorGains::uniform(10.0),
            saturation: SaturationLimits::default(),
            mode: ControlMode::Known,
            policy: EquilibriumPolicy::RecomputeOnSetpointChange,
            setpoints: vec![(0.0, 40.0)],
            loads: Vec::new(),
        }
    }

    /// Known parameters, 40 V stepping to 50 V at 0.25 s.
    pub fn scenario1() -> Self {
        Scenario {
            setpoints: vec![(0.0, 40.0), (0.25, 50.0)],
            ..Self::base()
        }
    }

    /// Known parameters at rest on 40 V; unannounced load step to 3.9168 Ohm at 0.2 s.
    pub fn scenario2() -> Self {
        Scenario {
            initial: InitialCondition::AtEquilibrium,
            policy: EquilibriumPolicy::Frozen,
            loads: vec![(0.2, 3.9168)],
            ..Self::base()
        }
    }

    /// Adaptive controller with estimator gain `k`; load drops to 85 % of nominal at 0.25 s.
    pub fn scenario3(k: f64) -> Self {
        Scenario {
            mode: ControlMode::Adaptive,
            policy: EquilibriumPolicy::AdaptiveGrid,
            estimator: EstimatorGains::uniform(k),
            loads: vec![(0.25, 0.85 * PlantParams::NOMINAL_LOAD)],
            ..Self::base()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "scenario1" => Some(Self::scenario1()),
            "scenario2" => Some(Self::scenario2()),
            "scenario3" => Some(Self::scenario3(10.0)),
            "scenario3-k1" => Some(Self::scenario3(1.0)),
            "scenario3-k0.01" => Some(Self::scenario3(0.01)),
            _ => None,
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    /// Integration step index at which an event at time `t` is applied.
    pub fn event_index(&self, t: f64) -> usize {
        (t / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad(format!("step must be > 0, got {}", self.step));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        if !(self.estimate_period.is_finite() && self.estimate_period > 0.0) {
            return bad(format!(
                "estimate_period must be > 0, got {}",
                self.estimate_period
            ));
        }
        if self.decimation == 0 {
            return bad("decimation must be >= 1".into());
        }
        self.plant.validate()?;
        self.gains.validate()?;
        self.saturation.validate()?;
        if self.mode == ControlMode::Adaptive {
            self.estimator.validate()?;
        }
        match (self.mode, self.policy) {
            (ControlMode::Adaptive, EquilibriumPolicy::AdaptiveGrid) => {}
            (ControlMode::Known, EquilibriumPolicy::AdaptiveGrid) | (ControlMode::Adaptive, _) => {
                return bad(format!(
                    "equilibrium policy {:?} does not match control mode {:?}",
                    self.policy, self.mode
                ))
            }
            _ => {}
        }
        match self.setpoints.first() {
            Some(&(0.0, _)) => {}
            _ => return bad("setpoint schedule must start at t = 0".into()),
        }
        check_schedule("setpoint", &self.setpoints, self.duration)?;
        check_schedule("load", &self.loads, self.duration)?;
        if let InitialCondition::Explicit { x, x_c } = self.initial {
            if !x.is_finite() || !x_c.is_finite() {
                return bad("initial state must be finite".into());
            }
        }
        Ok(())
    }
}

fn check_schedule(what: &str, s: &[(f64, f64)], duration: f64) -> Result<()> {
    for &(t, v) in s {
        if !(t >= 0.0 && t <= duration) {
            return Err(Error::Config(format!(
                "{what} event at t = {t} outside [0, {duration}]"
            )));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("{what} value must be > 0, got {v}")));
        }
    }
    if s.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::Config(format!(
            "{what} schedule must be time-sorted"
        )));
    }
    Ok(())
}
