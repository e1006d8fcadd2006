//! Killed Green function tables, exact or Monte Carlo.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::Grid;
use crate::lattice::Point;
use crate::output::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreenMode {
    Exact,
    MonteCarlo,
}

/// One exact row `g_δ^ω(source,·)` on the window grid.
#[derive(Debug, Clone)]
pub struct GreenRow {
    pub source: Point,
    pub(crate) values: Vec<f64>,
    /// Absolute bound on the error of every entry and of the row sum.
    pub error_bound: f64,
    /// `Σ_y g(source,y)` over the window.
    pub row_sum: f64,
    /// Part of the bound caused by window exits and pruning.
    pub lost_mass_weighted: f64,
}

#[derive(Debug, Clone)]
struct McRow {
    source: Point,
    targets: Vec<Point>,
    values: Vec<f64>,
    stderr: Vec<f64>,
}

/// Values `g_δ^ω(x,y)` with per-entry uncertainty.
#[derive(Debug, Clone)]
pub struct KilledGreenTable {
    pub delta: f64,
    pub mode: GreenMode,
    /// Requested accuracy (exact mode).
    pub tol: f64,
    /// Truncation length `L` (exact mode).
    pub steps: usize,
    grid: Option<Grid>,
    rows: Vec<GreenRow>,
    mc: Option<McRow>,
    /// Monte Carlo mode: trajectories, mean killing time and its standard error.
    pub n_traj: u64,
    pub mean_tau: f64,
    pub mean_tau_stderr: f64,
}

impl KilledGreenTable {
    pub(crate) fn exact(
        grid: Grid,
        delta: f64,
        tol: f64,
        steps: usize,
        rows: Vec<GreenRow>,
    ) -> Self {
        KilledGreenTable {
            delta,
            mode: GreenMode::Exact,
            tol,
            steps,
            grid: Some(grid),
            rows,
            mc: None,
            n_traj: 0,
            mean_tau: 1.0 / (1.0 - delta),
            mean_tau_stderr: 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn monte_carlo(
        delta: f64,
        source: Point,
        targets: Vec<Point>,
        values: Vec<f64>,
        stderr: Vec<f64>,
        n_traj: u64,
        mean_tau: f64,
        mean_tau_stderr: f64,
    ) -> Self {
        KilledGreenTable {
            delta,
            mode: GreenMode::MonteCarlo,
            tol: f64::NAN,
            steps: 0,
            grid: None,
            rows: Vec::new(),
            mc: Some(McRow {
                source,
                targets,
                values,
                stderr,
            }),
            n_traj,
            mean_tau,
            mean_tau_stderr,
        }
    }

    pub fn rows(&self) -> &[GreenRow] {
        &self.rows
    }

    pub fn row(&self, x: Point) -> Result<&GreenRow> {
        self.rows
            .iter()
            .find(|r| r.source == x)
            .ok_or_else(|| LabError::MissingRow(format!("{x}")))
    }

    /// Window radius (exact mode; 0 otherwise).
    pub fn radius(&self) -> i64 {
        self.grid.as_ref().map_or(0, |g| g.radius)
    }

    pub fn sources(&self) -> Vec<Point> {
        match &self.mc {
            Some(m) => vec![m.source],
            None => self.rows.iter().map(|r| r.source).collect(),
        }
    }

    /// `g_δ^ω(x,y)`. Exact tables return 0 for `y` outside the window only
    /// up to the row's error bound, so such lookups are rejected.
    pub fn get(&self, x: Point, y: Point) -> Result<f64> {
        if let Some(m) = &self.mc {
            if m.source != x {
                return Err(LabError::MissingRow(format!("{x}")));
            }
            return m
                .targets
                .iter()
                .position(|t| *t == y)
                .map(|i| m.values[i])
                .ok_or_else(|| LabError::OutOfTable(format!("{y}")));
        }
        let grid = self.grid.as_ref().expect("exact tables carry a grid");
        let row = self.row(x)?;
        grid.index(&y)
            .map(|i| row.values[i])
            .ok_or_else(|| LabError::OutOfTable(format!("{y}")))
    }

    /// Standard error (Monte Carlo) or error bound (exact) of an entry.
    pub fn uncertainty(&self, x: Point, y: Point) -> Result<f64> {
        if let Some(m) = &self.mc {
            return m
                .targets
                .iter()
                .position(|t| *t == y)
                .map(|i| m.stderr[i])
                .ok_or_else(|| LabError::OutOfTable(format!("{y}")));
        }
        Ok(self.row(x)?.error_bound)
    }

    /// `(y, g(x,y))` over the window, skipping exact zeros.
    pub fn row_entries(&self, x: Point) -> Result<Vec<(Point, f64)>> {
        if let Some(m) = &self.mc {
            if m.source != x {
                return Err(LabError::MissingRow(format!("{x}")));
            }
            return Ok(m
                .targets
                .iter()
                .copied()
                .zip(m.values.iter().copied())
                .collect());
        }
        let grid = self.grid.as_ref().expect("exact tables carry a grid");
        let row = self.row(x)?;
        let (lo, hi) = grid.interior();
        let mut out = Vec::new();
        grid.for_each_run(&lo, &hi, |s, l| {
            for i in s..s + l {
                if row.values[i] != 0.0 {
                    out.push((grid.point(i), row.values[i]));
                }
            }
        });
        Ok(out)
    }

    /// `|Σ_y g(x,y) - 1/(1-δ)|` against the row's error bound, for every row.
    ///
    /// Returns the worst excess `deviation - bound` (≤ 0 when all rows pass);
    /// a rounding allowance of `1e-12 / (1-δ)` is granted.
    pub fn normalization_excess(&self) -> f64 {
        let target = 1.0 / (1.0 - self.delta);
        self.rows
            .iter()
            .map(|r| (r.row_sum - target).abs() - r.error_bound - 1e-12 * target)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns `x, y, value, stderr` (points written as `(a,b)`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "value", "stderr"])?;
        for x in self.sources() {
            for (y, v) in self.row_entries(x)? {
                w.write_record([
                    x.to_string(),
                    y.to_string(),
                    fmt_f64(v),
                    fmt_f64(self.uncertainty(x, y)?),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
