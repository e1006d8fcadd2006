//! Truncated Neumann-series solver for `g_δ^ω(x,·)`.

use rayon::prelude::*;

use super::table::{GreenRow, KilledGreenTable};
use super::window::EnvWindow;
use crate::error::{LabError, Result};
use crate::lattice::{Direction, Point};

/// Number of terms `L = ⌈ln(tol (1-δ)) / ln δ⌉`; the neglected tail is at
/// most `δ^{L+1}/(1-δ) ≤ δ·tol`.
pub fn truncation_length(delta: f64, tol: f64) -> usize {
    ((tol * (1.0 - delta)).ln() / delta.ln()).ceil().max(0.0) as usize
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "δ = {delta} outside (0,1)"
        )));
    }
    Ok(())
}

/// Rows `g_δ^ω(x,·)` for every source `x`, to absolute accuracy `tol`.
///
/// Each row is `Σ_{k=0}^{L} δ^k P_ω^k(x,·)` propagated on the window. The
/// active region is the bounding box of the propagated mass: it grows by one
/// cell per step and faces carrying negligible mass are dropped. Mass dropped
/// this way, or sent across the window boundary, is charged to a rigorous
/// per-row error bound together with the series tail. A row whose bound
/// exceeds `tol` fails with [`LabError::WindowTooSmall`].
pub fn killed_green_exact(
    window: &EnvWindow,
    delta: f64,
    sources: &[Point],
    tol: f64,
) -> Result<KilledGreenTable> {
    check_delta(delta)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "tol = {tol} outside (0,1)"
        )));
    }
    for x in sources {
        if !window.contains(*x) {
            return Err(LabError::InvalidArgument(format!(
                "source {x} outside the window"
            )));
        }
    }
    let steps = truncation_length(delta, tol);
    let rows: Vec<GreenRow> = sources
        .par_iter()
        .map(|&x| solve_row(window, delta, x, steps, tol))
        .collect();
    for r in &rows {
        if r.error_bound > tol {
            return Err(LabError::WindowTooSmall(format!(
                "row from {} has error bound {:.3e} > tol {:.1e} (radius {})",
                r.source,
                r.error_bound,
                tol,
                window.radius()
            )));
        }
    }
    Ok(KilledGreenTable::exact(
        window.grid.clone(),
        delta,
        tol,
        steps,
        rows,
    ))
}

/// Solves on windows built by `build(radius)`, doubling the radius from
/// `radius` until the error bound fits (at most `max_radius`).
pub fn killed_green_exact_growing(
    build: impl Fn(i64) -> EnvWindow,
    mut radius: i64,
    max_radius: i64,
    delta: f64,
    sources: &[Point],
    tol: f64,
) -> Result<KilledGreenTable> {
    loop {
        match killed_green_exact(&build(radius), delta, sources, tol) {
            Err(LabError::WindowTooSmall(msg)) if radius < max_radius => {
                log::debug!("{msg}; doubling the window");
                radius = (2 * radius).min(max_radius);
            }
            other => return other,
        }
    }
}

/// Radius that usually contains the walk for `L` steps at speed `speed`.
pub fn suggested_radius(delta: f64, tol: f64, speed: f64) -> i64 {
    let l = truncation_length(delta, tol) as f64;
    (speed * l + 6.0 * l.sqrt() + 4.0).ceil() as i64
}

fn solve_row(w: &EnvWindow, delta: f64, src: Point, steps: usize, tol: f64) -> GreenRow {
    let grid = &w.grid;
    let dim = grid.dim;
    let len = grid.len;
    let dirs: Vec<(usize, isize)> = Direction::all(dim)
        .map(|e| (e.index(), grid.offset(e)))
        .collect();
    let (win_lo, win_hi) = (1usize, grid.side - 2);

    let mut g = vec![0.0; len];
    let mut cur = vec![0.0; len];
    let mut nxt = vec![0.0; len];
    let i0 = grid.index_unchecked(&src);
    cur[i0] = 1.0;
    g[i0] = 1.0;

    let local: Vec<usize> = (0..dim)
        .map(|a| (src.c[a] - grid.center.c[a] + grid.radius + 1) as usize)
        .collect();
    let mut lo = local.clone();
    let mut hi = local;
    // region of `nxt` that may hold stale values
    let mut stale: Option<(Vec<usize>, Vec<usize>)> = None;

    let tail = delta.powi(steps as i32 + 1) / (1.0 - delta);
    let remaining_weight =
        |k: usize| (delta.powi(k as i32) - delta.powi(steps as i32 + 1)) / (1.0 - delta);
    // pruning budget: half of what the tail leaves, spread over steps and faces
    let prune_budget = ((tol - tail).max(0.0) / 2.0) / ((steps.max(1) * 2 * dim) as f64);
    let mut lost_weighted = 0.0;
    let mut dk = 1.0;

    for k in 1..=steps {
        // mass leaving the window this step
        let mut exit = 0.0;
        for a in 0..dim {
            if lo[a] == win_lo {
                exit += face_flux(w, &cur, &lo, &hi, a, lo[a], Direction::neg_axis(a));
            }
            if hi[a] == win_hi {
                exit += face_flux(w, &cur, &lo, &hi, a, hi[a], Direction::pos(a));
            }
        }
        let nlo: Vec<usize> = lo.iter().map(|&v| (v - 1).max(win_lo)).collect();
        let nhi: Vec<usize> = hi.iter().map(|&v| (v + 1).min(win_hi)).collect();

        if let Some((slo, shi)) = stale.take() {
            grid.for_each_run(&slo, &shi, |s, l| nxt[s..s + l].fill(0.0));
        }
        dk *= delta;
        grid.for_each_run(&nlo, &nhi, |s, l| {
            let out = &mut nxt[s..s + l];
            for &(e, off) in &dirs {
                let from = (s as isize - off) as usize;
                let src_vals = &cur[from..from + l];
                let rates = &w.omega[e][from..from + l];
                for ((o, v), r) in out.iter_mut().zip(src_vals).zip(rates) {
                    *o += v * r;
                }
            }
            for (gv, v) in g[s..s + l].iter_mut().zip(out.iter()) {
                *gv += dk * v;
            }
        });
        lost_weighted += exit * remaining_weight(k);
        std::mem::swap(&mut cur, &mut nxt);
        stale = Some((lo.clone(), hi.clone()));
        lo = nlo;
        hi = nhi;

        if k == steps {
            break;
        }
        // drop faces whose remaining influence is below the budget
        let wk = remaining_weight(k + 1);
        for a in 0..dim {
            while lo[a] < hi[a] {
                let m = face_mass(grid, &cur, &lo, &hi, a, lo[a]);
                if m * wk > prune_budget {
                    break;
                }
                zero_face(grid, &mut cur, &lo, &hi, a, lo[a]);
                lost_weighted += m * wk;
                lo[a] += 1;
            }
            while hi[a] > lo[a] {
                let m = face_mass(grid, &cur, &lo, &hi, a, hi[a]);
                if m * wk > prune_budget {
                    break;
                }
                zero_face(grid, &mut cur, &lo, &hi, a, hi[a]);
                lost_weighted += m * wk;
                hi[a] -= 1;
            }
        }
    }
    let row_sum: f64 = g.iter().sum();
    GreenRow {
        source: src,
        values: g,
        error_bound: tail + lost_weighted,
        row_sum,
        lost_mass_weighted: lost_weighted,
    }
}

fn face_bounds(lo: &[usize], hi: &[usize], axis: usize, at: usize) -> (Vec<usize>, Vec<usize>) {
    let mut flo = lo.to_vec();
    let mut fhi = hi.to_vec();
    flo[axis] = at;
    fhi[axis] = at;
    (flo, fhi)
}

fn face_mass(
    grid: &crate::grid::Grid,
    v: &[f64],
    lo: &[usize],
    hi: &[usize],
    axis: usize,
    at: usize,
) -> f64 {
    let (flo, fhi) = face_bounds(lo, hi, axis, at);
    let mut m = 0.0;
    grid.for_each_run(&flo, &fhi, |s, l| m += v[s..s + l].iter().sum::<f64>());
    m
}

fn zero_face(
    grid: &crate::grid::Grid,
    v: &mut [f64],
    lo: &[usize],
    hi: &[usize],
    axis: usize,
    at: usize,
) {
    let (flo, fhi) = face_bounds(lo, hi, axis, at);
    grid.for_each_run(&flo, &fhi, |s, l| v[s..s + l].fill(0.0));
}

fn face_flux(
    w: &EnvWindow,
    v: &[f64],
    lo: &[usize],
    hi: &[usize],
    axis: usize,
    at: usize,
    e: Direction,
) -> f64 {
    let (flo, fhi) = face_bounds(lo, hi, axis, at);
    let rates = &w.omega[e.index()];
    let mut m = 0.0;
    w.grid.for_each_run(&flo, &fhi, |s, l| {
        m += v[s..s + l]
            .iter()
            .zip(&rates[s..s + l])
            .map(|(a, b)| a * b)
            .sum::<f64>();
    });
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{point_probability_series, TransitionKernel};

    #[test]
    fn tiny_delta_keeps_only_the_diagonal() {
        let w = EnvWindow::homogeneous(&TransitionKernel::symmetric(2), Point::origin(), 3);
        let t = killed_green_exact(&w, 1e-6, &[Point::origin()], 1e-9).unwrap();
        assert!((t.get(Point::origin(), Point::origin()).unwrap() - 1.0).abs() < 1e-9);
        assert!(t.get(Point::origin(), Point::new(&[1, 0])).unwrap() < 1e-6);
    }

    #[test]
    fn diagonal_matches_series_oracle() {
        let p = TransitionKernel::symmetric(2);
        let w = EnvWindow::homogeneous(&p, Point::origin(), 60);
        let tol = 1e-10;
        let t = killed_green_exact(&w, 0.5, &[Point::origin()], tol).unwrap();
        let series = point_probability_series(&p, Point::origin(), 60).unwrap();
        let oracle: f64 = series
            .iter()
            .enumerate()
            .map(|(k, v)| 0.5f64.powi(k as i32) * v)
            .sum();
        let got = t.get(Point::origin(), Point::origin()).unwrap();
        assert!((got - oracle).abs() < tol, "{got} vs {oracle}");
    }

    #[test]
    fn row_sum_and_bound() {
        let p = TransitionKernel::new(2, vec![0.35, 0.15, 0.25, 0.25]).unwrap();
        let w = EnvWindow::homogeneous(&p, Point::origin(), 80);
        let t = killed_green_exact(&w, 0.9, &[Point::origin(), Point::new(&[2, 1])], 1e-8).unwrap();
        for r in t.rows() {
            assert!(r.error_bound <= 1e-8);
            assert!((r.row_sum - 10.0).abs() <= r.error_bound + 1e-11);
            assert!(r.row_sum <= 10.0 + 1e-11);
        }
    }

    #[test]
    fn small_window_is_rejected_and_growth_recovers() {
        let p = TransitionKernel::new(2, vec![0.4, 0.1, 0.25, 0.25]).unwrap();
        let build = |r| EnvWindow::homogeneous(&p, Point::origin(), r);
        let err = killed_green_exact(&build(3), 0.9, &[Point::origin()], 1e-8);
        assert!(matches!(err, Err(LabError::WindowTooSmall(_))));
        let t = killed_green_exact_growing(build, 3, 400, 0.9, &[Point::origin()], 1e-8).unwrap();
        assert!(t.radius() > 3);
    }

    #[test]
    fn rejects_bad_delta() {
        let w = EnvWindow::homogeneous(&TransitionKernel::symmetric(2), Point::origin(), 3);
        assert!(killed_green_exact(&w, 1.0, &[Point::origin()], 1e-6).is_err());
        assert!(killed_green_exact(&w, 0.0, &[Point::origin()], 1e-6).is_err());
    }
}
