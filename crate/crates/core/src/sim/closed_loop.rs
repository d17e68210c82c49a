//! Right-hand side of the closed loop over the bundle `(x1, x2, x3, x_c, z1, z2)`.
//!
//! The PI law is evaluated at every stage point; only the estimated
//! equilibrium current `x2_ref` is frozen over a step.

use nalgebra::SMatrix;

use crate::controller::{adaptive_pipbc_output, ControllerState, PiGains, SaturationLimits};
use crate::error::{Error, Result};
use crate::estimator::{estimator_derivatives, EstimatorGains, EstimatorState};
use crate::plant::{dynamics_with_current, PlantParams, PlantState};

pub(crate) type Bundle = [f64; 6];
pub(crate) type Jacobian = SMatrix<f64, 6, 6>;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ClosedLoop {
    pub plant: PlantParams,
    pub gains: PiGains,
    pub saturation: SaturationLimits,
    pub estimator: Option<EstimatorGains>,
    /// `x2*` (known mode) or `x2_hat*` (adaptive mode).
    pub x2_ref: f64,
    pub x3_star: f64,
}

impl ClosedLoop {
    fn current(&self, t: f64, x1: f64) -> Result<f64> {
        self.plant.pol.current(x1).map_err(|e| Error::Integration {
            time: t,
            reason: e.to_string(),
        })
    }

    /// -1, 0 or 1 as the PI output is clamped low, passes, or is clamped high.
    pub fn branch(&self, y: &Bundle) -> i8 {
        let u_raw =
            -self.gains.k_p * (self.x2_ref * y[2] - self.x3_star * y[1]) - self.gains.k_i * y[3];
        if u_raw < self.saturation.u_min {
            -1
        } else if u_raw > self.saturation.u_max {
            1
        } else {
            0
        }
    }

    pub fn rhs(&self, t: f64, y: &Bundle) -> Result<Bundle> {
        let i_fc = self.current(t, y[0])?;
        Ok(self.rhs_with_current(y, i_fc))
    }

    fn rhs_with_current(&self, y: &Bundle, i_fc: f64) -> Bundle {
        let x = PlantState::new(y[0], y[1], y[2]);
        let pi = adaptive_pipbc_output(
            &x,
            ControllerState { x_c: y[3] },
            self.x2_ref,
            self.x3_star,
            &self.gains,
            &self.saturation,
        );
        let dx = dynamics_with_current(&x, pi.u, &self.plant, i_fc);
        let dz = match &self.estimator {
            Some(k) => estimator_derivatives(
                &EstimatorState { z1: y[4], z2: y[5] },
                &x,
                pi.u,
                k,
                self.plant.l,
                self.plant.c,
            ),
            None => (0.0, 0.0),
        };
        [dx[0], dx[1], dx[2], pi.xc_dot, dz.0, dz.1]
    }

    pub fn rhs_jacobian(&self, t: f64, y: &Bundle) -> Result<(Bundle, Jacobian)> {
        let i_fc = self.current(t, y[0])?;
        let f = self.rhs_with_current(y, i_fc);
        let p = &self.plant;
        let (x1, x2, x3) = (y[0], y[1], y[2]);
        let y_n = self.x2_ref * x3 - self.x3_star * x2;
        let u_raw = -self.gains.k_p * y_n - self.gains.k_i * y[3];
        let u = self.saturation.clamp(u_raw);

        // du/dy, zero while the clamp is active
        let mut du = [0.0; 6];
        if u == u_raw {
            du[1] = self.gains.k_p * self.x3_star;
            du[2] = -self.gains.k_p * self.x2_ref;
            du[3] = -self.gains.k_i;
        }
        // dd1/dx1 = 1 / (dV/di)
        let slope = -p.pol.c2 / i_fc - p.pol.c3 - p.pol.c5 * p.pol.c4 * (p.pol.c4 * i_fc).exp();
        let mut j = Jacobian::zeros();
        j[(0, 0)] = 1.0 / (slope * p.c_fc);
        j[(0, 1)] = -1.0 / p.c_fc;
        j[(1, 0)] = 1.0 / p.l;
        j[(1, 1)] = -p.theta1 / p.l;
        j[(1, 2)] = -u / p.l;
        j[(2, 1)] = u / p.c;
        j[(2, 2)] = -p.theta2 / p.c;
        j[(3, 1)] = -self.x3_star;
        j[(3, 2)] = self.x2_ref;
        for m in 0..6 {
            j[(1, m)] -= x3 / p.l * du[m];
            j[(2, m)] += x2 / p.c * du[m];
        }
        if let Some(k) = &self.estimator {
            let (k1, k2) = (k.k1, k.k2);
            let (z1, z2) = (y[4], y[5]);
            j[(4, 0)] = k1 * x2;
            j[(4, 1)] = k1 * (x1 - 2.0 * z1 * x2 + 2.0 * k1 * p.l * x2.powi(3) - x3 * u);
            j[(4, 2)] = -k1 * x2 * u;
            j[(4, 4)] = -k1 * x2 * x2;
            j[(5, 1)] = k2 * x3 * u;
            j[(5, 2)] = k2 * (x2 * u - 2.0 * z2 * x3 + 2.0 * k2 * p.c * x3.powi(3));
            j[(5, 5)] = -k2 * x3 * x3;
            for m in 0..6 {
                j[(4, m)] -= k1 * x2 * x3 * du[m];
                j[(5, m)] += k2 * x3 * x2 * du[m];
            }
        }
        Ok((f, j))
    }
}
