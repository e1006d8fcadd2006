//! Exact n-step probabilities.
//!
//! Two routes: repeated discrete convolution of the one-step kernel on a
//! window (the full table `p_n(0, ·)`), and an axis decomposition that gives the
//! whole series `k ↦ p_k(0, y)` at a single point without building the table.

use rayon::prelude::*;

use super::TransitionKernel;
use crate::error::{LabError, Result};
use crate::grid::Grid;
use crate::lattice::{Direction, Point};

/// `p_n(0, y)` for `|y|_∞ ≤ radius`.
#[derive(Debug, Clone)]
pub struct NStepTable {
    grid: Grid,
    pub steps: u64,
    values: Vec<f64>,
    /// Probability mass that left the window (zero when `radius ≥ steps`).
    pub lost_mass: f64,
}

impl NStepTable {
    pub fn radius(&self) -> i64 {
        self.grid.radius
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Returns 0 outside the window.
    pub fn get(&self, y: Point) -> f64 {
        self.grid.index(&y).map_or(0.0, |i| self.values[i])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(y, p_n(0,y))` for every window point.
    pub fn entries(&self) -> Vec<(Point, f64)> {
        let (lo, hi) = self.grid.interior();
        let mut out = Vec::new();
        self.grid.for_each_run(&lo, &hi, |s, l| {
            for i in s..s + l {
                out.push((self.grid.point(i), self.values[i]));
            }
        });
        out
    }
}

/// `p_n(0, ·)` by repeated gather-convolution on the window `|y|_∞ ≤ radius`
/// (default `radius = n`, which keeps the table exact).
pub fn nstep_probability(p: &TransitionKernel, n: i64, radius: Option<i64>) -> Result<NStepTable> {
    if n < 0 {
        return Err(LabError::InvalidArgument(format!(
            "step count {n} is negative"
        )));
    }
    let radius = radius.unwrap_or(n);
    if radius < 0 {
        return Err(LabError::InvalidArgument(format!(
            "radius {radius} is negative"
        )));
    }
    let dim = p.dim();
    let grid = Grid::new(dim, Point::origin(), radius);
    let mut cur = vec![0.0; grid.len];
    let mut next = vec![0.0; grid.len];
    cur[grid.index_unchecked(&Point::origin())] = 1.0;
    let dirs: Vec<(isize, f64)> = Direction::all(dim)
        .map(|d| (grid.offset(d), p.prob(d)))
        .collect();

    for k in 1..=n {
        let (lo, hi) = grid.box_around(&Point::origin(), k.min(radius));
        let (starts, run) = grid.runs(&lo, &hi);
        // Each run writes a disjoint slice; results do not depend on scheduling.
        let rows: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&s| {
                let mut row = vec![0.0; run];
                for &(off, w) in &dirs {
                    // mass arriving at y came from y - e
                    let src = (s as isize - off) as usize;
                    for (r, v) in row.iter_mut().zip(&cur[src..src + run]) {
                        *r += w * v;
                    }
                }
                row
            })
            .collect();
        for (&s, row) in starts.iter().zip(rows) {
            next[s..s + run].copy_from_slice(&row);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let total: f64 = cur.iter().sum();
    Ok(NStepTable {
        grid,
        steps: n as u64,
        values: cur,
        lost_mass: (1.0 - total).max(0.0),
    })
}

/// Natural-log factorials `ln k!` for `k = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `count * ln(p)` with the convention `0 * ln 0 = 0`.
#[inline]
fn ln_pow(count: usize, ln_p: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * ln_p
    }
}

/// `ln P(net displacement = y)` for `m` steps of a ±1 walk with up-probability `a`.
fn ln_axis_displacement(lf: &[f64], m: usize, y: i64, ln_a: f64, ln_b: f64) -> f64 {
    let ya = y.unsigned_abs() as usize;
    if ya > m || !(m - ya).is_multiple_of(2) {
        return f64::NEG_INFINITY;
    }
    let up = (m as i64 + y) as usize / 2;
    let down = m - up;
    lf[m] - lf[up] - lf[down] + ln_pow(up, ln_a) + ln_pow(down, ln_b)
}

/// `k ↦ p_k(0, y)` for `k = 0..=n_max`.
///
/// Splits the walk by the number of steps taken along each axis (multinomial)
/// and the net displacement on each axis (binomial); costs `O(d · n_max²)`
/// per point. Independent of the convolution and Fourier routes.
pub fn point_probability_series(p: &TransitionKernel, y: Point, n_max: usize) -> Result<Vec<f64>> {
    if !y.fits_dim(p.dim()) {
        return Err(LabError::Dimension(format!(
            "point {y} not in Z^{}",
            p.dim()
        )));
    }
    let lf = ln_factorials(n_max);
    Ok(axis_series(p, y, 0, &lf, n_max))
}

fn axis_series(p: &TransitionKernel, y: Point, axis: usize, lf: &[f64], n: usize) -> Vec<f64> {
    let dim = p.dim();
    let up = p.probs()[2 * axis];
    let down = p.probs()[2 * axis + 1];
    let q_axis = up + down;
    // ln of the one-axis displacement probability for each step count
    let ln_b: Vec<f64> = if q_axis > 0.0 {
        let (la, lb) = ((up / q_axis).ln(), (down / q_axis).ln());
        (0..=n)
            .map(|m| ln_axis_displacement(lf, m, y.c[axis], la, lb))
            .collect()
    } else {
        (0..=n)
            .map(|m| {
                if m == 0 && y.c[axis] == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    };
    if axis + 1 == dim {
        return ln_b.iter().map(|v| v.exp()).collect();
    }
    let rest_mass: f64 = p.probs()[2 * axis..].iter().sum();
    let q = if rest_mass > 0.0 {
        q_axis / rest_mass
    } else {
        0.0
    };
    let rest = axis_series(p, y, axis + 1, lf, n);
    let (ln_q, ln_1q) = (q.ln(), (1.0 - q).ln());
    // term(k, m) = exp(lf[k] + a[m] + b[k-m]) * rest[k-m]
    let a: Vec<f64> = (0..=n)
        .map(|m| -lf[m] + ln_pow(m, ln_q) + ln_b[m])
        .collect();
    let b: Vec<f64> = (0..=n).map(|r| -lf[r] + ln_pow(r, ln_1q)).collect();
    let first = (0..=n).find(|&m| a[m].is_finite());
    let mut out = vec![0.0; n + 1];
    let Some(first) = first else {
        return out;
    };
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        // a[m] is finite only on one parity class of m
        let mut m = first;
        while m <= k {
            let r = rest[k - m];
            if r > 0.0 {
                acc += (lf[k] + a[m] + b[k - m]).exp() * r;
            }
            m += 2;
        }
        *slot = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::cube_points;
    use proptest::prelude::*;

    #[test]
    fn zero_steps_is_indicator() {
        let t = nstep_probability(&TransitionKernel::symmetric(2), 0, Some(2)).unwrap();
        assert_eq!(t.get(Point::origin()), 1.0);
        assert_eq!(t.total(), 1.0);
    }

    #[test]
    fn rejects_negative_steps() {
        assert!(nstep_probability(&TransitionKernel::symmetric(2), -1, None).is_err());
    }

    #[test]
    fn two_step_return_matches_path_enumeration() {
        // enumerate all 16 two-step paths of the simple symmetric walk in Z^2
        let dirs: Vec<_> = Direction::all(2).collect();
        let mut returns = 0;
        for a in &dirs {
            for b in &dirs {
                if Point::origin().step(*a).step(*b).is_origin() {
                    returns += 1;
                }
            }
        }
        let oracle = returns as f64 / 16.0;
        assert_eq!(oracle, 0.25);
        let t = nstep_probability(&TransitionKernel::symmetric(2), 2, None).unwrap();
        assert!((t.get(Point::origin()) - oracle).abs() < 1e-15);
    }

    #[test]
    fn truncated_window_loses_mass() {
        let t = nstep_probability(&TransitionKernel::symmetric(2), 6, Some(2)).unwrap();
        assert!(t.lost_mass > 0.0);
        assert!(t.total() < 1.0);
    }

    #[test]
    fn axis_series_matches_convolution() {
        let k = TransitionKernel::new(3, vec![0.3, 0.1, 0.2, 0.15, 0.1, 0.15]).unwrap();
        let n = 9;
        let tables: Vec<_> = (0..=n)
            .map(|s| nstep_probability(&k, s as i64, Some(n as i64)).unwrap())
            .collect();
        for y in cube_points(3, 2) {
            let series = point_probability_series(&k, y, n).unwrap();
            for s in 0..=n {
                let conv = tables[s].get(y);
                assert!(
                    (series[s] - conv).abs() < 1e-14,
                    "y={y} k={s}: {} vs {}",
                    series[s],
                    conv
                );
            }
        }
    }

    #[test]
    fn axis_series_handles_degenerate_axes() {
        let k = TransitionKernel::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let s = point_probability_series(&k, Point::new(&[3, 0]), 5).unwrap();
        assert_eq!(s, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn nstep_rows_are_stochastic(w in proptest::collection::vec(0.05f64..1.0, 4), n in 0i64..12) {
            let s: f64 = w.iter().sum();
            let mut probs: Vec<f64> = w.iter().map(|x| x / s).collect();
            let tail: f64 = probs[1..].iter().sum();
            probs[0] = 1.0 - tail;
            let k = TransitionKernel::new(2, probs).unwrap();
            let t = nstep_probability(&k, n, None).unwrap();
            prop_assert!(t.min_value() >= 0.0);
            prop_assert!((t.total() - 1.0).abs() < 1e-12);
        }
    }
}
