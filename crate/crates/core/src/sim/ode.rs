//! Fixed-step integrators.
//!
//! [`rk4_step`] is the classical explicit scheme. [`sdirk3_step`] is a
//! three-stage, third-order, L-stable singly diagonally implicit Runge-Kutta
//! method; it needs the Jacobian of the right-hand side and is meant for the
//! closed loop, whose passive-output feedback puts an eigenvalue near
//! `-K_P x3*^2 / L` (about `-4e7 1/s` for the nominal bench).

use nalgebra::{Const, DimMin, SMatrix};

/// One RK4 step of `y' = f(t, y)` from `t` to `t + h`.
///
/// A failing stage aborts the step and its error is returned unchanged.
pub fn rk4_step<const N: usize, E>(
    y: &[f64; N],
    t: f64,
    h: f64,
    mut f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
) -> Result<[f64; N], E> {
    let shifted = |k: &[f64; N], scale: f64| -> [f64; N] {
        let mut out = *y;
        for (o, d) in out.iter_mut().zip(k) {
            *o += scale * d;
        }
        out
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &shifted(&k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &shifted(&k2, 0.5 * h))?;
    let k4 = f(t + h, &shifted(&k3, h))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepError<E> {
    /// The right-hand side failed at a stage point.
    Rhs(E),
    /// Stage equations did not converge.
    Newton { iterations: usize },
    /// Newton matrix `I - h gamma J` was singular.
    Singular,
}

// Alexander (1977), three-stage SDIRK of order 3, stiffly accurate.
const GAMMA: f64 = 0.435_866_521_508_459;

fn tableau() -> ([[f64; 3]; 3], [f64; 3]) {
    let g = GAMMA;
    let b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
    let b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
    (
        [[g, 0.0, 0.0], [(1.0 - g) / 2.0, g, 0.0], [b1, b2, g]],
        [g, (1.0 + g) / 2.0, 1.0],
    )
}

/// Newton settings for [`sdirk3_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Converged once every `|dY_i| <= tol * (1 + |Y_i|)`.
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 25,
            tolerance: 1e-11,
        }
    }
}

/// One implicit step of `y' = f(t, y)`; `f` returns the derivative and its Jacobian.
pub fn sdirk3_step<const N: usize, E>(
    y: &[f64; N],
    t: f64,
    h: f64,
    opts: NewtonOptions,
    mut f: impl FnMut(f64, &[f64; N]) -> Result<([f64; N], SMatrix<f64, N, N>), E>,
) -> Result<[f64; N], StepError<E>>
where
    Const<N>: DimMin<Const<N>, Output = Const<N>>,
{
    let (a, c) = tableau();
    let mut k: [[f64; N]; 3] = [[0.0; N]; 3];
    let mut stage = *y;
    for i in 0..3 {
        // Y = base + h gamma f(Y)
        let mut base = *y;
        for j in 0..i {
            for m in 0..N {
                base[m] += h * a[i][j] * k[j][m];
            }
        }
        let ts = t + c[i] * h;
        // Newton with backtracking: the saturated PI law makes f only
        // piecewise smooth, and plain Newton can cycle across the kink.
        let residual = |stage: &[f64; N], fy: &[f64; N]| {
            let mut g = nalgebra::SVector::<f64, N>::zeros();
            let mut norm = 0.0f64;
            for m in 0..N {
                g[m] = stage[m] - base[m] - h * GAMMA * fy[m];
                norm = norm.max(g[m].abs() / (1.0 + stage[m].abs()));
            }
            (g, norm)
        };
        let (mut fy, mut jac) = f(ts, &stage).map_err(StepError::Rhs)?;
        let mut converged = false;
        for _ in 0..opts.max_iterations {
            let (g, norm) = residual(&stage, &fy);
            let lhs = SMatrix::<f64, N, N>::identity() - jac * (h * GAMMA);
            let delta = lhs.lu().solve(&g).ok_or(StepError::Singular)?;
            let small = (0..N).all(|m| delta[m].abs() <= opts.tolerance * (1.0 + stage[m].abs()));
            let mut alpha = 1.0;
            loop {
                let mut trial = stage;
                for m in 0..N {
                    trial[m] -= alpha * delta[m];
                }
                let (ft, jt) = f(ts, &trial).map_err(StepError::Rhs)?;
                let (_, trial_norm) = residual(&trial, &ft);
                if small || trial_norm < (1.0 - 1e-4 * alpha) * norm || alpha < 1e-3 {
                    stage = trial;
                    fy = ft;
                    jac = jt;
                    break;
                }
                alpha *= 0.5;
            }
            if small {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(StepError::Newton {
                iterations: opts.max_iterations,
            });
        }
        // k_i from the stage equation avoids one more evaluation of f
        for m in 0..N {
            k[i][m] = (stage[m] - base[m]) / (h * GAMMA);
        }
    }
    Ok(stage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn decay(h: f64, steps: usize) -> f64 {
        let mut y = [1.0];
        for n in 0..steps {
            y = rk4_step(&y, n as f64 * h, h, |_, y| Ok::<_, Infallible>([-y[0]])).unwrap();
        }
        y[0]
    }

    #[test]
    fn exponential_decay_accuracy() {
        // For y' = -y one RK4 step multiplies by the degree-4 Taylor polynomial of exp(-h).
        let h = 0.1f64;
        let amp = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((decay(h, 10) - amp.powi(10)).abs() < 1e-15);
        assert!((decay(h, 10) - (-1f64).exp()).abs() < 5e-7);
    }

    #[test]
    fn fourth_order_convergence() {
        let e1 = (decay(0.1, 10) - (-1f64).exp()).abs();
        let e2 = (decay(0.05, 20) - (-1f64).exp()).abs();
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn stage_error_propagates() {
        let r = rk4_step(&[1.0, 2.0], 0.0, 0.1, |t, _| {
            if t > 0.0 {
                Err(t)
            } else {
                Ok([0.0, 0.0])
            }
        });
        assert_eq!(r, Err(0.05));
    }

    #[test]
    fn time_dependent_rhs() {
        let y = rk4_step(&[0.0], 1.0, 0.5, |t, _| Ok::<_, Infallible>([t])).unwrap();
        assert!((y[0] - (1.5f64.powi(2) - 1.0) / 2.0).abs() < 1e-15);
    }

    fn sdirk_decay(lambda: f64, h: f64, steps: usize) -> f64 {
        let mut y = [1.0];
        for n in 0..steps {
            y = sdirk3_step(&y, n as f64 * h, h, NewtonOptions::default(), |_, y| {
                Ok::<_, Infallible>(([lambda * y[0]], SMatrix::<f64, 1, 1>::new(lambda)))
            })
            .unwrap();
        }
        y[0]
    }

    #[test]
    fn sdirk_is_third_order() {
        let exact = (-1f64).exp();
        let e1 = (sdirk_decay(-1.0, 0.1, 10) - exact).abs();
        let e2 = (sdirk_decay(-1.0, 0.05, 20) - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 8.0).abs() < 1.0, "ratio {ratio}");
        assert!(e1 < 1e-4);
    }

    #[test]
    fn sdirk_damps_stiff_modes() {
        // h * lambda = -1e4: explicit RK4 would blow up, an L-stable step nearly annihilates the mode
        let y = sdirk_decay(-1e7, 1e-3, 1);
        assert!(y.abs() < 1e-3, "{y}");
        let y = sdirk_decay(-1e7, 1e-3, 5);
        assert!(y.abs() < 1e-12);
    }

    #[test]
    fn sdirk_tableau_consistency() {
        let (a, c) = tableau();
        for i in 0..3 {
            let row: f64 = a[i].iter().sum();
            assert!((row - c[i]).abs() < 1e-14);
        }
        // order conditions up to three for the weights (last row)
        let b = a[2];
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((b.iter().zip(&c).map(|(b, c)| b * c).sum::<f64>() - 0.5).abs() < 1e-14);
        assert!((b.iter().zip(&c).map(|(b, c)| b * c * c).sum::<f64>() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sdirk_nonlinear_logistic() {
        // y' = y (1 - y), y(0) = 0.1
        let mut y = [0.1];
        let h = 0.01;
        for n in 0..100 {
            y = sdirk3_step(&y, n as f64 * h, h, NewtonOptions::default(), |_, y| {
                Ok::<_, Infallible>((
                    [y[0] * (1.0 - y[0])],
                    SMatrix::<f64, 1, 1>::new(1.0 - 2.0 * y[0]),
                ))
            })
            .unwrap();
        }
        let exact = 0.1 * 1f64.exp() / (1.0 - 0.1 + 0.1 * 1f64.exp());
        assert!((y[0] - exact).abs() < 1e-8);
    }
}
