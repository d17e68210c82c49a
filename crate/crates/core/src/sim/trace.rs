use std::io::Write;

use crate::error::Result;
use crate::plant::PlantState;

pub const CSV_HEADER: [&str; 14] = [
    "t_s",
    "x1_V",
    "x2_A",
    "x3_V",
    "xc",
    "u_raw",
    "u_sat",
    "theta1_hat",
    "theta2_hat",
    "x1_star_hat",
    "x2_star_hat",
    "yN",
    "V_lyap",
    "xi",
];

/// Adaptive-loop quantities, absent in known-parameter runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSample {
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub x1_star_hat: f64,
    pub x2_star_hat: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub x: PlantState,
    pub x_c: f64,
    pub u_raw: f64,
    pub u_sat: f64,
    /// Passive output fed to the PI (estimated in adaptive mode).
    pub y_n: f64,
    pub v_lyap: f64,
    pub adaptive: Option<AdaptiveSample>,
    /// Equilibrium the storage function is measured against.
    pub x_star: PlantState,
    pub xc_star: f64,
    /// Plant resistances in force at this sample.
    pub r_p: f64,
    pub g_load: f64,
}

impl TraceSample {
    pub fn saturated(&self) -> bool {
        self.u_raw != self.u_sat
    }

    pub fn x_tilde(&self) -> PlantState {
        self.x - self.x_star
    }
}

/// Closed-loop trajectory sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub samples: Vec<TraceSample>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&TraceSample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Samples with `from <= t < to`.
    pub fn window(&self, from: f64, to: f64) -> impl Iterator<Item = &TraceSample> {
        self.samples.iter().filter(move |s| s.t >= from && s.t < to)
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|s| {
            let mut v = vec![
                s.t, s.x.x1, s.x.x2, s.x.x3, s.x_c, s.u_raw, s.u_sat, s.y_n, s.v_lyap,
            ];
            if let Some(a) = s.adaptive {
                v.extend([
                    a.theta1_hat,
                    a.theta2_hat,
                    a.x1_star_hat,
                    a.x2_star_hat,
                    a.xi,
                ]);
            }
            v.iter().all(|x| x.is_finite())
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(CSV_HEADER)?;
        for s in &self.samples {
            let opt = |f: fn(&AdaptiveSample) -> f64| {
                s.adaptive
                    .as_ref()
                    .map(|a| f(a).to_string())
                    .unwrap_or_default()
            };
            wtr.write_record([
                s.t.to_string(),
                s.x.x1.to_string(),
                s.x.x2.to_string(),
                s.x.x3.to_string(),
                s.x_c.to_string(),
                s.u_raw.to_string(),
                s.u_sat.to_string(),
                opt(|a| a.theta1_hat),
                opt(|a| a.theta2_hat),
                opt(|a| a.x1_star_hat),
                opt(|a| a.x2_star_hat),
                s.y_n.to_string(),
                s.v_lyap.to_string(),
                opt(|a| a.xi),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
