//! Empirical check of the polynomial ballisticity condition.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentField;
use crate::error::{LabError, Result};
use crate::lattice::{Direction, Point};
use crate::seeds::{derive_seed, stream, walk_rng};

/// The two readings of the constant `c₀ = 2^{3(d-1)} ∧ exp{2(ln 90 + Σ_j ln j / 2^j)}`:
/// as a minimum and as a maximum.
pub fn c0_readings(dim: usize) -> (f64, f64) {
    let series: f64 = (1..200).map(|j| (j as f64).ln() / 2f64.powi(j)).sum();
    let a = 2f64.powi(3 * (dim as i32 - 1));
    let b = (2.0 * (90f64.ln() + series)).exp();
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallisticityReport {
    pub direction: Direction,
    pub big_l: f64,
    pub m: f64,
    pub n_traj: u64,
    /// Exits with `X_T · l < L`.
    pub back_exits: u64,
    pub front_exits: u64,
    /// Trajectories still inside the box after `step_cap` steps.
    pub capped: u64,
    /// `back_exits / (n_traj - capped)`.
    pub back_exit_probability: f64,
    pub stderr: f64,
    /// Treats every capped trajectory as a back exit.
    pub back_exit_upper: f64,
    /// `L^{-M}`.
    pub bound: f64,
    pub holds: bool,
    pub c0_min: f64,
    pub c0_max: f64,
    pub l_at_least_c0_min: bool,
    pub l_at_least_c0_max: bool,
    /// Every exit site lies outside `B_L` and its predecessor inside.
    pub exit_membership_ok: bool,
    pub mean_exit_time: f64,
}

fn in_box(x: Point, l: Direction, big_l: f64, dim: usize) -> bool {
    let along = x.dot_dir(l) as f64;
    if along < -big_l / 2.0 || along > big_l {
        return false;
    }
    let lateral = 25.0 * big_l.powi(3);
    (0..dim)
        .filter(|a| *a != l.axis())
        .all(|a| (x.c[a].abs() as f64) <= lateral)
}

/// Estimates `P₀(X_{T_{B_L}} · l < L)` for
/// `B_L = {x : -L/2 ≤ x·l ≤ L, |π_l x|_∞ ≤ 25 L³}` over `n_traj` annealed
/// trajectories, each in a fresh environment, and compares it with `L^{-M}`.
pub fn polynomial_condition_check(
    field: &EnvironmentField,
    l: Direction,
    big_l: f64,
    m: f64,
    n_traj: u64,
    seed: u64,
    step_cap: u64,
) -> Result<BallisticityReport> {
    let dim = field.dim();
    if l.axis() >= dim {
        return Err(LabError::Dimension(format!(
            "direction {l:?} not in Z^{dim}"
        )));
    }
    if !(big_l >= 1.0) || n_traj == 0 {
        return Err(LabError::InvalidArgument(
            "need L ≥ 1 and at least one trajectory".into(),
        ));
    }
    // (back, front, capped, membership ok, exit time)
    let runs: Vec<(bool, bool, bool, bool, u64)> = (0..n_traj)
        .into_par_iter()
        .map(|t| {
            let env = field.with_seed(derive_seed(seed, stream::ENVIRONMENT, t));
            let mut rng = walk_rng(seed, stream::WALK, t);
            let mut x = Point::origin();
            let mut n = 0u64;
            while in_box(x, l, big_l, dim) {
                if n == step_cap {
                    return (false, false, true, true, n);
                }
                let prev = x;
                x = x.step(env.step_direction(env.site_atom(x), rng.random::<f64>()));
                n += 1;
                if !in_box(x, l, big_l, dim) {
                    let ok = in_box(prev, l, big_l, dim);
                    let back = (x.dot_dir(l) as f64) < big_l;
                    return (back, !back, false, ok, n);
                }
            }
            // the origin is always inside B_L
            (false, false, false, false, 0)
        })
        .collect();
    let back = runs.iter().filter(|r| r.0).count() as u64;
    let front = runs.iter().filter(|r| r.1).count() as u64;
    let capped = runs.iter().filter(|r| r.2).count() as u64;
    let done = n_traj - capped;
    let p = if done > 0 {
        back as f64 / done as f64
    } else {
        f64::NAN
    };
    let stderr = if done > 0 {
        (p * (1.0 - p) / done as f64).sqrt()
    } else {
        f64::NAN
    };
    if capped > 0 {
        log::warn!("{capped} of {n_traj} trajectories hit the step cap {step_cap}");
    }
    let bound = big_l.powf(-m);
    let (c0_min, c0_max) = c0_readings(dim);
    Ok(BallisticityReport {
        direction: l,
        big_l,
        m,
        n_traj,
        back_exits: back,
        front_exits: front,
        capped,
        back_exit_probability: p,
        stderr,
        back_exit_upper: (back + capped) as f64 / n_traj as f64,
        bound,
        holds: p <= bound,
        c0_min,
        c0_max,
        l_at_least_c0_min: big_l >= c0_min,
        l_at_least_c0_max: big_l >= c0_max,
        exit_membership_ok: runs.iter().all(|r| r.3),
        mean_exit_time: runs
            .iter()
            .filter(|r| !r.2)
            .map(|r| r.4 as f64)
            .sum::<f64>()
            / done.max(1) as f64,
    })
}
