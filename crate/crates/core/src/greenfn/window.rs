//! Dense environment windows and finite-set perturbations.

use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentField;
use crate::error::{LabError, Result};
use crate::grid::Grid;
use crate::kernels::TransitionKernel;
use crate::lattice::{l1_diameter, Direction, Point};

/// Transition rows `ω(x,·)` materialised on the box `|x - center|_∞ ≤ radius`.
///
/// Rows are stored per direction over a grid with a zero border, so the
/// solver's gathers never leave the allocation. Mass sent across the window
/// boundary is lost and accounted for by the solver.
#[derive(Debug, Clone)]
pub struct EnvWindow {
    pub(crate) grid: Grid,
    pub(crate) omega: Vec<Vec<f64>>,
}

impl EnvWindow {
    /// Builds a window from a row function.
    pub fn from_fn(
        dim: usize,
        center: Point,
        radius: i64,
        mut row: impl FnMut(Point) -> Vec<f64>,
    ) -> Result<Self> {
        if radius < 0 {
            return Err(LabError::InvalidArgument(format!(
                "radius {radius} is negative"
            )));
        }
        let grid = Grid::new(dim, center, radius);
        let mut omega = vec![vec![0.0; grid.len]; 2 * dim];
        let (lo, hi) = grid.interior();
        let mut bad = None;
        grid.for_each_run(&lo, &hi, |s, l| {
            for i in s..s + l {
                let x = grid.point(i);
                let r = row(x);
                if r.len() != 2 * dim || r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    bad.get_or_insert(x);
                }
                for (e, v) in r.iter().enumerate().take(2 * dim) {
                    omega[e][i] = *v;
                }
            }
        });
        if let Some(x) = bad {
            return Err(LabError::InvalidEnvironment(format!(
                "row at {x} is not a probability vector"
            )));
        }
        Ok(EnvWindow { grid, omega })
    }

    /// The quenched environment of `field` around `center`.
    pub fn from_field(field: &EnvironmentField, center: Point, radius: i64) -> Self {
        Self::from_fn(field.dim(), center, radius, |x| {
            field.atom_omega(field.site_atom(x)).to_vec()
        })
        .expect("field rows are probability vectors")
    }

    /// The same kernel at every site.
    pub fn homogeneous(p: &TransitionKernel, center: Point, radius: i64) -> Self {
        Self::from_fn(p.dim(), center, radius, |_| p.probs().to_vec()).expect("valid kernel")
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn center(&self) -> Point {
        self.grid.center
    }

    pub fn radius(&self) -> i64 {
        self.grid.radius
    }

    pub fn contains(&self, x: Point) -> bool {
        self.grid.contains(&x)
    }

    pub fn omega(&self, x: Point) -> Option<Vec<f64>> {
        let i = self.grid.index(&x)?;
        Some(self.omega.iter().map(|col| col[i]).collect())
    }

    #[inline]
    pub fn omega_dir(&self, x: Point, e: Direction) -> Option<f64> {
        self.grid.index(&x).map(|i| self.omega[e.index()][i])
    }

    /// Replaces the row at `x`.
    pub fn set_row(&mut self, x: Point, row: &[f64]) -> Result<()> {
        let i = self
            .grid
            .index(&x)
            .ok_or_else(|| LabError::InvalidArgument(format!("{x} outside the window")))?;
        if row.len() != 2 * self.dim() {
            return Err(LabError::Dimension(format!(
                "row has {} entries",
                row.len()
            )));
        }
        for (e, v) in row.iter().enumerate() {
            self.omega[e][i] = *v;
        }
        Ok(())
    }

    /// Copy with the rows at `sites` replaced by `row` (e.g. the law mean).
    pub fn with_rows(&self, sites: &[Point], row: &[f64]) -> Result<Self> {
        let mut w = self.clone();
        for &x in sites {
            w.set_row(x, row)?;
        }
        Ok(w)
    }

    /// Smallest transition probability in the window.
    pub fn kappa(&self) -> f64 {
        let (lo, hi) = self.grid.interior();
        let mut k = f64::INFINITY;
        self.grid.for_each_run(&lo, &hi, |s, l| {
            for col in &self.omega {
                for v in &col[s..s + l] {
                    k = k.min(*v);
                }
            }
        });
        k
    }
}

/// Row changes `Δ_xω(·)` on a finite set of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePerturbation {
    pub sites: Vec<Point>,
    pub deltas: Vec<Vec<f64>>,
}

impl FinitePerturbation {
    pub fn new(sites: Vec<Point>, deltas: Vec<Vec<f64>>) -> Result<Self> {
        if sites.len() != deltas.len() {
            return Err(LabError::InvalidPerturbation(format!(
                "{} sites but {} delta rows",
                sites.len(),
                deltas.len()
            )));
        }
        for (i, x) in sites.iter().enumerate() {
            if sites[..i].contains(x) {
                return Err(LabError::InvalidPerturbation(format!("site {x} repeated")));
            }
        }
        for (x, d) in sites.iter().zip(&deltas) {
            if d.iter().any(|v| !v.is_finite() || v.abs() >= 1.0) {
                return Err(LabError::InvalidPerturbation(format!(
                    "entry at {x} outside (-1,1)"
                )));
            }
            let s: f64 = d.iter().sum();
            if s.abs() > 1e-12 {
                return Err(LabError::InvalidPerturbation(format!(
                    "row change at {x} sums to {s}"
                )));
            }
        }
        Ok(FinitePerturbation { sites, deltas })
    }

    pub fn empty() -> Self {
        FinitePerturbation {
            sites: Vec::new(),
            deltas: Vec::new(),
        }
    }

    /// `n = |B|`.
    pub fn n(&self) -> usize {
        self.sites.len()
    }

    /// `ρ(B)`, the `l1` diameter.
    pub fn diameter(&self) -> i64 {
        l1_diameter(&self.sites)
    }

    /// `sup_{x∈B, e} |Δ_xω(e)|`.
    pub fn sup_abs(&self) -> f64 {
        self.deltas
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Every change multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        FinitePerturbation {
            sites: self.sites.clone(),
            deltas: self
                .deltas
                .iter()
                .map(|d| d.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    /// `c₃ = (2dn s/κ²) [2d s/κ² + 1]^{n-1}` with `s = sup|Δ|`.
    pub fn c3(&self, dim: usize, kappa: f64) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let s = self.sup_abs();
        let a = 2.0 * dim as f64 * s / (kappa * kappa);
        n as f64 * a * (a + 1.0).powi(n as i32 - 1)
    }
}

/// `ω^B`: rows on `B` shifted by `Δ`, all others unchanged.
pub fn perturb_environment(window: &EnvWindow, pert: &FinitePerturbation) -> Result<EnvWindow> {
    let mut out = window.clone();
    for (x, d) in pert.sites.iter().zip(&pert.deltas) {
        let row = window
            .omega(*x)
            .ok_or_else(|| LabError::InvalidPerturbation(format!("site {x} outside the window")))?;
        if d.len() != row.len() {
            return Err(LabError::Dimension(format!(
                "delta at {x} has {} entries",
                d.len()
            )));
        }
        let new: Vec<f64> = row.iter().zip(d).map(|(a, b)| a + b).collect();
        if new.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(LabError::InvalidPerturbation(format!(
                "perturbed row at {x} leaves [0,1]: {new:?}"
            )));
        }
        out.set_row(*x, &new)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_perturbations() {
        let w = EnvWindow::homogeneous(&TransitionKernel::symmetric(2), Point::origin(), 3);
        let same = perturb_environment(&w, &FinitePerturbation::empty()).unwrap();
        assert_eq!(same.omega, w.omega);
        let zero = FinitePerturbation::new(vec![Point::origin()], vec![vec![0.0; 4]]).unwrap();
        assert_eq!(perturb_environment(&w, &zero).unwrap().omega, w.omega);
    }

    #[test]
    fn single_site_swap() {
        let w = EnvWindow::homogeneous(&TransitionKernel::symmetric(2), Point::origin(), 3);
        let x = Point::new(&[1, 0]);
        let p = FinitePerturbation::new(vec![x], vec![vec![-0.05, 0.05, 0.0, 0.0]]).unwrap();
        let wb = perturb_environment(&w, &p).unwrap();
        let row = wb.omega(x).unwrap();
        assert_eq!(row, vec![0.2, 0.3, 0.25, 0.25]);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(wb.omega(Point::origin()).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn rejects_invalid_changes() {
        assert!(
            FinitePerturbation::new(vec![Point::origin()], vec![vec![0.1, 0.0, 0.0, 0.0]]).is_err()
        );
        assert!(FinitePerturbation::new(
            vec![Point::origin(), Point::origin()],
            vec![vec![0.0; 4]; 2]
        )
        .is_err());
        let w = EnvWindow::homogeneous(&TransitionKernel::symmetric(2), Point::origin(), 1);
        let p = FinitePerturbation::new(vec![Point::origin()], vec![vec![-0.5, 0.5, 0.0, 0.0]])
            .unwrap();
        assert!(perturb_environment(&w, &p).is_err());
        let far = FinitePerturbation::new(vec![Point::new(&[5, 0])], vec![vec![0.0; 4]]).unwrap();
        assert!(perturb_environment(&w, &far).is_err());
    }

    #[test]
    fn c3_singleton_and_diameter() {
        let p = FinitePerturbation::new(
            vec![Point::origin(), Point::new(&[2, -1])],
            vec![vec![0.01, -0.01, 0.0, 0.0], vec![0.0, 0.0, 0.02, -0.02]],
        )
        .unwrap();
        assert_eq!(p.diameter(), 3);
        assert_eq!(p.sup_abs(), 0.02);
        let a = 4.0 * 0.02 / 0.01;
        assert!((p.c3(2, 0.1) - 2.0 * a * (a + 1.0)).abs() < 1e-12);
    }
}
