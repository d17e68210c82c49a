//! SVG figures of a trace: state errors, control input and estimation errors.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::sim::SimTrace;

struct Series<'a> {
    label: &'a str,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

fn render(title: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let err = |e: &dyn std::fmt::Display| Error::Io(format!("plot '{title}': {e}"));
    let (mut t0, mut t1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for s in series {
        for &(t, y) in &s.points {
            if y.is_finite() {
                t0 = t0.min(t);
                t1 = t1.max(t);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        }
    }
    if !(t0.is_finite() && y0.is_finite()) {
        return Err(Error::Io(format!("plot '{title}': nothing to draw")));
    }
    if t1 <= t0 {
        t1 = t0 + 1e-6;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 420)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(t0..t1, y0..y1)
            .map_err(|e| err(&e))?;
        chart
            .configure_mesh()
            .x_desc("t [s]")
            .y_desc(y_label)
            .draw()
            .map_err(|e| err(&e))?;
        for s in series {
            let color = s.color;
            chart
                .draw_series(LineSeries::new(
                    s.points.iter().copied(),
                    color.stroke_width(2),
                ))
                .map_err(|e| err(&e))?
                .label(s.label)
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                });
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(&e))?;
        root.present().map_err(|e| err(&e))?;
    }
    Ok(svg)
}

const COLORS: [RGBColor; 3] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
];

/// SVG documents keyed by file name: `x_tilde.svg`, `u.svg` and, for
/// adaptive traces, `theta_tilde.svg`.
pub fn render_plots(trace: &SimTrace) -> Result<Vec<(&'static str, String)>> {
    let pts = |f: &dyn Fn(&crate::sim::TraceSample) -> f64| {
        trace
            .samples
            .iter()
            .map(|s| (s.t, f(s)))
            .collect::<Vec<_>>()
    };
    let mut out = Vec::new();

    let x_tilde = [
        Series {
            label: "x1 - x1* [V]",
            color: COLORS[0],
            points: pts(&|s| s.x_tilde().x1),
        },
        Series {
            label: "x2 - x2* [A]",
            color: COLORS[1],
            points: pts(&|s| s.x_tilde().x2),
        },
        Series {
            label: "x3 - x3* [V]",
            color: COLORS[2],
            points: pts(&|s| s.x_tilde().x3),
        },
    ];
    out.push(("x_tilde.svg", render("State errors", "error", &x_tilde)?));

    let u = [Series {
        label: "u (applied)",
        color: COLORS[0],
        points: pts(&|s| s.u_sat),
    }];
    out.push(("u.svg", render("Control input", "u", &u)?));

    if trace.samples.iter().any(|s| s.adaptive.is_some()) {
        let est = |f: fn(&crate::sim::TraceSample) -> Option<f64>| {
            trace
                .samples
                .iter()
                .filter_map(|s| f(s).map(|v| (s.t, v)))
                .collect::<Vec<_>>()
        };
        let theta = [
            Series {
                label: "R_p estimate error [Ohm]",
                color: COLORS[0],
                points: est(|s| s.adaptive.map(|a| a.theta1_hat - s.r_p)),
            },
            Series {
                label: "1/R_L estimate error [S]",
                color: COLORS[1],
                points: est(|s| s.adaptive.map(|a| a.theta2_hat - s.g_load)),
            },
        ];
        out.push((
            "theta_tilde.svg",
            render("Parameter estimation errors", "error", &theta)?,
        ));
    }
    Ok(out)
}

/// Write the figures into `dir` and return their paths.
pub fn write_plots(trace: &SimTrace, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (name, svg) in render_plots(trace)? {
        let path = dir.as_ref().join(name);
        std::fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}
