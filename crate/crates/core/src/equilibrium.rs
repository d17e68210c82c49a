//! Assignable equilibria for a desired output voltage.
//!
//! Eliminating `u` from the steady-state equations leaves the power balance
//!
//! ```text
//! p(x1, x3, theta) = d1(x1) x1 - theta2 x3^2 - theta1 d1(x1)^2 = 0
//! ```
//!
//! with `x2 = d1(x1)`. Only the polarization curve and the resistive
//! parameters enter; the storage elements do not.

use crate::error::{Error, Result};
use crate::pemfc::PolarizationParams;
use crate::plant::{PlantParams, PlantState, Theta};

/// Fuel-cell voltage window searched for equilibria, V.
pub const X1_RANGE: (f64, f64) = (21.0, 48.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub x1_star: f64,
    pub x2_star: f64,
    pub x3_star: f64,
    pub u_star: f64,
    pub xc_star: f64,
}

impl Equilibrium {
    pub fn state(&self) -> PlantState {
        PlantState::new(self.x1_star, self.x2_star, self.x3_star)
    }
}

impl std::fmt::Display for Equilibrium {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({:.2} V, {:.2} A, {} V), u*={:.4}, x_c*={:.4}",
            self.x1_star, self.x2_star, self.x3_star, self.u_star, self.xc_star
        )
    }
}

/// Power-balance residual, W.
pub fn p_residual(x1: f64, x3: f64, theta: Theta, pol: &PolarizationParams) -> Result<f64> {
    let i = pol.current(x1)?;
    Ok(power_balance(x1, i, x3, theta))
}

#[inline]
fn power_balance(x1: f64, i_fc: f64, x3: f64, theta: Theta) -> f64 {
    i_fc * x1 - theta.g_load * x3 * x3 - theta.r_p * i_fc * i_fc
}

/// Root search settings for [`solve_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSolver {
    pub x1_low: f64,
    pub x1_high: f64,
    pub scan_step: f64,
    /// Accept a root once |p| is at most this, W.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EquilibriumSolver {
    fn default() -> Self {
        EquilibriumSolver {
            x1_low: X1_RANGE.0,
            x1_high: X1_RANGE.1,
            scan_step: 0.25,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

impl EquilibriumSolver {
    /// Equilibrium on the high-voltage (low-current) branch for `x3_star`.
    pub fn solve(
        &self,
        x3_star: f64,
        theta: Theta,
        pol: &PolarizationParams,
        k_i: f64,
    ) -> Result<Equilibrium> {
        if !(x3_star.is_finite() && x3_star > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "x3* must be > 0, got {x3_star}"
            )));
        }
        if !(k_i.is_finite() && k_i > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "K_I must be > 0, got {k_i}"
            )));
        }
        let infeasible = || Error::InfeasibleSetpoint {
            x3_star,
            low: self.x1_low,
            high: self.x1_high,
        };
        let p = |x1: f64| p_residual(x1, x3_star, theta, pol);

        // Scan downward so the first sign change found is the largest root.
        let n = ((self.x1_high - self.x1_low) / self.scan_step).round() as usize;
        let grid = |k: usize| (self.x1_low + k as f64 * self.scan_step).min(self.x1_high);
        let mut bracket = None;
        let mut hi_x = grid(n);
        let mut hi_p = p(hi_x)?;
        for k in (0..n).rev() {
            let lo_x = grid(k);
            let lo_p = p(lo_x)?;
            if hi_p == 0.0 {
                bracket = Some((hi_x, hi_x, 0.0));
                break;
            }
            if lo_p.signum() != hi_p.signum() {
                bracket = Some((lo_x, hi_x, lo_p));
                break;
            }
            hi_x = lo_x;
            hi_p = lo_p;
        }
        let (mut a, mut b, mut pa) = bracket.ok_or_else(infeasible)?;

        let mut x1 = a;
        let mut converged = pa == 0.0;
        for _ in 0..self.max_iterations {
            if converged {
                break;
            }
            x1 = 0.5 * (a + b);
            let pm = p(x1)?;
            if pm.abs() <= self.tolerance || b - a <= f64::EPSILON * x1 {
                converged = pm.abs() <= self.tolerance;
                break;
            }
            if pm.signum() == pa.signum() {
                a = x1;
                pa = pm;
            } else {
                b = x1;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "equilibrium bisection",
                iterations: self.max_iterations,
            });
        }

        let x2 = pol.current(x1)?;
        if x2 < 0.0 {
            return Err(infeasible());
        }
        let u_star = steady_control(&PlantState::new(x1, x2, x3_star), theta, pol)?;
        let u_check = theta.g_load * x3_star / x2;
        if (u_star - u_check).abs() > 1e-6 {
            return Err(Error::Inconsistent(format!(
                "equilibrium control mismatch: projection {u_star} vs load balance {u_check}"
            )));
        }
        if !(u_star > 0.0 && u_star < 1.0) {
            return Err(infeasible());
        }
        Ok(Equilibrium {
            x1_star: x1,
            x2_star: x2,
            x3_star,
            u_star,
            xc_star: -u_star / k_i,
        })
    }
}

/// Constant control holding `x` at rest: `u = -(g^T g)^{-1} g^T f` for the
/// affine split `xdot = f(x) + g(x) u`.
pub fn steady_control(x: &PlantState, theta: Theta, pol: &PolarizationParams) -> Result<f64> {
    let f = [
        pol.current(x.x1)? - x.x2,
        x.x1 - theta.r_p * x.x2,
        -theta.g_load * x.x3,
    ];
    let g = [0.0, -x.x3, x.x2];
    let gtg: f64 = g.iter().map(|v| v * v).sum();
    if gtg == 0.0 {
        return Err(Error::InvalidParameter(
            "input vector field vanishes at x".into(),
        ));
    }
    let gtf: f64 = g.iter().zip(&f).map(|(a, b)| a * b).sum();
    Ok(-gtf / gtg)
}

/// Equilibrium for `x3_star` with the default solver.
pub fn solve_equilibrium(
    x3_star: f64,
    theta: Theta,
    pol: &PolarizationParams,
    k_i: f64,
) -> Result<Equilibrium> {
    EquilibriumSolver::default().solve(x3_star, theta, pol, k_i)
}

impl PlantParams {
    /// Equilibrium for `x3_star` under this plant's own resistances.
    pub fn equilibrium(&self, x3_star: f64, k_i: f64) -> Result<Equilibrium> {
        solve_equilibrium(x3_star, self.theta(), &self.pol, k_i)
    }
}

/// Fuel-cell voltages with their precomputed currents, used for the
/// argmin search of the adaptive controller.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumGrid {
    x1: Vec<f64>,
    current: Vec<f64>,
}

impl EquilibriumGrid {
    pub fn new(pol: &PolarizationParams, low: f64, high: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && high >= low) {
            return Err(Error::InvalidParameter(format!(
                "bad grid [{low}, {high}] step {step}"
            )));
        }
        let n = ((high - low) / step).round() as usize;
        let x1: Vec<f64> = (0..=n).map(|k| low + k as f64 * step).collect();
        Self::from_points(pol, x1)
    }

    /// `[21, 48]` V at 0.01 V.
    pub fn standard(pol: &PolarizationParams) -> Result<Self> {
        Self::new(pol, X1_RANGE.0, X1_RANGE.1, 0.01)
    }

    pub fn from_points(pol: &PolarizationParams, x1: Vec<f64>) -> Result<Self> {
        if x1.is_empty() {
            return Err(Error::InvalidParameter("empty equilibrium grid".into()));
        }
        if x1.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "equilibrium grid must be ascending".into(),
            ));
        }
        let current = x1
            .iter()
            .map(|&v| pol.current(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(EquilibriumGrid { x1, current })
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.x1
    }

    /// Grid point minimizing `|p(x1, x3_star, theta_hat)|` and its current.
    /// Ties go to the larger voltage.
    pub fn estimate(&self, theta_hat: Theta, x3_star: f64) -> (f64, f64) {
        let mut best = 0;
        let mut best_abs = f64::INFINITY;
        for (k, (&x1, &i)) in self.x1.iter().zip(&self.current).enumerate() {
            let r = power_balance(x1, i, x3_star, theta_hat).abs();
            if r <= best_abs {
                best_abs = r;
                best = k;
            }
        }
        (self.x1[best], self.current[best])
    }
}

/// Estimated equilibrium `(x1_hat*, x2_hat*)` by grid argmin.
pub fn estimate_equilibrium(theta_hat: Theta, x3_star: f64, grid: &EquilibriumGrid) -> (f64, f64) {
    grid.estimate(theta_hat, x3_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{dynamics, ControlInput};
    use approx::assert_abs_diff_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn table1_theta() -> Theta {
        PlantParams::table1().theta()
    }
    const POL: PolarizationParams = PolarizationParams::TABLE1;

    #[test]
    fn residual_near_reported_points() {
        let th = Theta::new(0.1, 1.0 / 4.608);
        assert!(p_residual(29.28, 40.0, th, &POL).unwrap().abs() < 0.5);
        assert!(p_residual(25.6, 50.0, th, &POL).unwrap().abs() < 0.5);
        let lossless = Theta::new(0.0, 0.0);
        for x1 in [22.0, 30.0, 45.0] {
            assert!(p_residual(x1, 40.0, lossless, &POL).unwrap() > 0.0);
        }
    }

    #[test]
    fn reported_equilibria() {
        let e40 = solve_equilibrium(40.0, table1_theta(), &POL, 0.001).unwrap();
        assert_abs_diff_eq!(e40.x1_star, 29.28, epsilon = 0.01);
        assert_abs_diff_eq!(e40.x2_star, 12.38, epsilon = 0.01);
        assert_eq!(e40.x3_star, 40.0);
        let e50 = solve_equilibrium(50.0, table1_theta(), &POL, 0.001).unwrap();
        assert_abs_diff_eq!(e50.x1_star, 25.60, epsilon = 0.01);
        assert_abs_diff_eq!(e50.x2_star, 23.31, epsilon = 0.01);
    }

    #[test]
    fn steady_control_two_routes() {
        let e = solve_equilibrium(40.0, table1_theta(), &POL, 0.001).unwrap();
        let by_load = (40.0 / 4.608) / e.x2_star;
        assert_abs_diff_eq!(e.u_star, by_load, epsilon = 1e-6);
        assert_abs_diff_eq!(e.u_star, 0.7011, epsilon = 1e-4);
        assert_abs_diff_eq!(e.xc_star, -e.u_star / 0.001, epsilon = 1e-9);
        assert_abs_diff_eq!(e.xc_star, -701.1, epsilon = 0.1);
    }

    #[test]
    fn infeasible_setpoint() {
        let err = solve_equilibrium(200.0, table1_theta(), &POL, 0.001).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSetpoint { .. }));
        // independent confirmation: p keeps one sign on the whole window
        let mut x1 = 21.0;
        while x1 <= 48.0 {
            assert!(p_residual(x1, 200.0, table1_theta(), &POL).unwrap() < 0.0);
            x1 += 0.05;
        }
        assert!(solve_equilibrium(-1.0, table1_theta(), &POL, 0.001).is_err());
        assert!(solve_equilibrium(40.0, table1_theta(), &POL, 0.0).is_err());
    }

    #[test]
    fn equilibrium_is_a_rest_point_with_power_balance() {
        let p = PlantParams::table1();
        for x3 in [35.0, 40.0, 45.0, 50.0, 55.0] {
            let e = p.equilibrium(x3, 0.001).unwrap();
            let d = dynamics(&e.state(), ControlInput(e.u_star), &p).unwrap();
            for v in d {
                assert!(v.abs() < 1e-2, "x3={x3}: {d:?}");
            }
            let lhs = e.x1_star * e.x2_star;
            let rhs = p.theta2 * x3 * x3 + p.theta1 * e.x2_star * e.x2_star;
            assert!(((lhs - rhs) / lhs).abs() < 1e-6);
        }
    }

    #[test]
    fn independent_of_storage_elements() {
        let base = PlantParams::table1();
        let e0 = base.equilibrium(40.0, 0.001).unwrap();
        let mut p = base;
        p.c_fc *= 3.7;
        p.l *= 0.2;
        p.c *= 11.0;
        assert_eq!(p.equilibrium(40.0, 0.001).unwrap(), e0);
    }

    #[test]
    fn grid_argmin_matches_continuous_root() {
        let grid = EquilibriumGrid::standard(&POL).unwrap();
        assert_eq!(grid.len(), 2701);
        let th = table1_theta();
        for x3 in [40.0, 50.0] {
            let e = solve_equilibrium(x3, th, &POL, 0.001).unwrap();
            let (x1, x2) = estimate_equilibrium(th, x3, &grid);
            assert!((x1 - e.x1_star).abs() <= 0.01 + 1e-12);
            assert_abs_diff_eq!(x2, POL.current(x1).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_argmin_after_load_change() {
        let grid = EquilibriumGrid::standard(&POL).unwrap();
        let th = Theta::new(0.1, 1.0 / 3.9168);
        let (x1, _) = estimate_equilibrium(th, 40.0, &grid);
        let e = solve_equilibrium(40.0, th, &POL, 0.001).unwrap();
        assert!((x1 - e.x1_star).abs() <= 0.01 + 1e-12);
        let slope = {
            let h = 1e-4;
            (p_residual(x1 + h, 40.0, th, &POL).unwrap()
                - p_residual(x1 - h, 40.0, th, &POL).unwrap())
                / (2.0 * h)
        };
        assert!(p_residual(x1, 40.0, th, &POL).unwrap().abs() <= slope.abs() * 0.01);
    }

    #[test]
    fn grid_refinement_converges() {
        let th = table1_theta();
        let e = solve_equilibrium(40.0, th, &POL, 0.001).unwrap();
        for step in [0.1, 0.01, 0.001] {
            let grid = EquilibriumGrid::new(&POL, 21.0, 48.0, step).unwrap();
            let (x1, _) = grid.estimate(th, 40.0);
            assert!((x1 - e.x1_star).abs() <= step + 1e-12, "step {step}");
        }
    }

    #[test]
    fn single_point_grid() {
        let grid = EquilibriumGrid::from_points(&POL, vec![33.0]).unwrap();
        assert_eq!(grid.estimate(table1_theta(), 40.0).0, 33.0);
        assert!(EquilibriumGrid::from_points(&POL, vec![]).is_err());
        assert!(EquilibriumGrid::from_points(&POL, vec![30.0, 29.0]).is_err());
    }

    #[test]
    fn steady_control_formulas_agree_on_random_setpoints() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut next = || rng.gen::<f64>();
        let mut checked = 0;
        while checked < 100 {
            let th = Theta::new(0.02 + 0.2 * next(), 1.0 / (3.0 + 10.0 * next()));
            let x3 = 30.0 + 30.0 * next();
            let Ok(e) = solve_equilibrium(x3, th, &POL, 0.01) else {
                continue;
            };
            assert_abs_diff_eq!(e.u_star, th.g_load * x3 / e.x2_star, epsilon = 1e-6);
            checked += 1;
        }
    }
}
