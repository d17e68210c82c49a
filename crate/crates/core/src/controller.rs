//! PI control on the passive output, with and without parameter adaptation.
//!
//! The integrator always sees the unsaturated loop; saturation only clamps
//! what reaches the converter.

use crate::error::{Error, Result};
use crate::plant::{passive_output, ControlInput, PlantState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub k_p: f64,
    pub k_i: f64,
}

impl PiGains {
    pub const TABLE1: PiGains = PiGains {
        k_p: 1.0,
        k_i: 0.001,
    };

    pub fn new(k_p: f64, k_i: f64) -> Result<Self> {
        let g = PiGains { k_p, k_i };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_p > 0.0 && self.k_i > 0.0 && self.k_p.is_finite() && self.k_i.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "PI gains must be positive, got K_P={} K_I={}",
                self.k_p, self.k_i
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub x_c: f64,
}

/// Clamp applied to `u = 1 - D` before it reaches the converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationLimits {
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for SaturationLimits {
    fn default() -> Self {
        SaturationLimits {
            u_min: 0.05,
            u_max: 0.99,
        }
    }
}

impl SaturationLimits {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        let s = SaturationLimits { u_min, u_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.u_min && self.u_min < self.u_max && self.u_max < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "saturation limits need 0 < u_min < u_max < 1, got [{}, {}]",
                self.u_min, self.u_max
            )))
        }
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }

    pub fn is_active(&self, raw: f64) -> bool {
        raw < self.u_min || raw > self.u_max
    }
}

/// One evaluation of the PI law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutput {
    /// Unsaturated `-K_P y - K_I x_c`.
    pub u_raw: f64,
    /// Input applied to the plant.
    pub u: ControlInput,
    /// Integrator derivative, equal to the passive output.
    pub xc_dot: f64,
}

impl PiOutput {
    pub fn saturated(&self) -> bool {
        self.u_raw != self.u.0
    }
}

fn pi_law(y: f64, xc: ControllerState, g: &PiGains, sat: &SaturationLimits) -> PiOutput {
    let u_raw = -g.k_p * y - g.k_i * xc.x_c;
    PiOutput {
        u_raw,
        u: ControlInput(sat.clamp(u_raw)),
        xc_dot: y,
    }
}

/// Known-parameter PI-PBC around the equilibrium state `x_star`.
pub fn pipbc_output(
    x: &PlantState,
    xc: ControllerState,
    x_star: &PlantState,
    g: &PiGains,
    sat: &SaturationLimits,
) -> PiOutput {
    pi_law(passive_output(x, x_star), xc, g, sat)
}

/// Estimated passive output `x2_hat* x3 - x3* x2`.
pub fn estimated_passive_output(x: &PlantState, x2_hat_star: f64, x3_star: f64) -> f64 {
    x2_hat_star * x.x3 - x3_star * x.x2
}

/// Adaptive PI-PBC, driven by the estimated equilibrium current.
pub fn adaptive_pipbc_output(
    x: &PlantState,
    xc: ControllerState,
    x2_hat_star: f64,
    x3_star: f64,
    g: &PiGains,
    sat: &SaturationLimits,
) -> PiOutput {
    pi_law(
        estimated_passive_output(x, x2_hat_star, x3_star),
        xc,
        g,
        sat,
    )
}
