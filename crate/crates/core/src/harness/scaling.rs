//! Log-log fits of first-order residuals against ε.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::output::fmt_f64;
use crate::stats::ols_slope;

/// One `ε` of a residual study: a measured ratio with its standard error and
/// the first-order prediction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub epsilon: f64,
    pub measured: f64,
    pub stderr: f64,
    pub predicted: f64,
}

impl ResidualPoint {
    pub fn residual(&self) -> f64 {
        (self.measured - self.predicted).abs()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum ScalingFit {
    Fitted { slope: f64, slope_stderr: f64 },
    NoiseLimited,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ResidualPoint>,
    pub fit: ScalingFit,
}

impl ScalingReport {
    pub fn slope(&self) -> Option<f64> {
        match self.fit {
            ScalingFit::Fitted { slope, .. } => Some(slope),
            ScalingFit::NoiseLimited => None,
        }
    }

    /// Plot-ready columns `epsilon, residual, stderr, log_epsilon, log_residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "epsilon",
            "measured",
            "predicted",
            "residual",
            "stderr",
            "log_epsilon",
            "log_residual",
        ])?;
        for p in &self.points {
            w.write_record([
                fmt_f64(p.epsilon),
                fmt_f64(p.measured),
                fmt_f64(p.predicted),
                fmt_f64(p.residual()),
                fmt_f64(p.stderr),
                fmt_f64(p.epsilon.ln()),
                fmt_f64(p.residual().ln()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `ln|measured - predicted|` against `ln ε`.
///
/// Needs at least three ε values spanning a factor 4. When any residual is
/// within two standard errors of zero the slope is not fitted and the report
/// says "noise-limited".
pub fn residual_scaling_report(points: &[ResidualPoint]) -> Result<ScalingReport> {
    let lo = points
        .iter()
        .map(|p| p.epsilon)
        .fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.epsilon).fold(0.0, f64::max);
    if points.len() < 3 || hi < 4.0 * lo || lo <= 0.0 || lo.is_nan() {
        return Err(LabError::InvalidArgument(
            "need at least three positive ε values spanning a factor 4".into(),
        ));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let fit = if pts.iter().any(|p| p.residual() <= 2.0 * p.stderr) {
        ScalingFit::NoiseLimited
    } else {
        let x: Vec<f64> = pts.iter().map(|p| p.epsilon.ln()).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.residual().ln()).collect();
        let (slope, slope_stderr) = ols_slope(&x, &y);
        ScalingFit::Fitted {
            slope,
            slope_stderr,
        }
    };
    Ok(ScalingReport { points: pts, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(f: impl Fn(f64) -> (f64, f64)) -> Vec<ResidualPoint> {
        [0.04, 0.08, 0.16]
            .iter()
            .map(|&e| {
                let (r, se) = f(e);
                ResidualPoint {
                    epsilon: e,
                    measured: 1.0 + r,
                    stderr: se,
                    predicted: 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let r = residual_scaling_report(&pts(|e| (3.0 * e * e, 1e-9))).unwrap();
        let s = r.slope().unwrap();
        assert!((s - 2.0).abs() < 0.01, "{s}");
    }

    #[test]
    fn noise_limited_guard() {
        let r = residual_scaling_report(&pts(|e| (1e-4 * e, 1e-3))).unwrap();
        assert!(r.slope().is_none());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn needs_spread() {
        let mut p = pts(|e| (e * e, 0.0));
        p[2].epsilon = 0.1;
        assert!(residual_scaling_report(&p).is_err());
        assert!(residual_scaling_report(&p[..2]).is_err());
    }
}
