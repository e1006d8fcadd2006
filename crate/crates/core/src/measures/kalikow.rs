//! Monte Carlo estimate of the Kalikow quantity `J_e^δ(y,z)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentField;
use crate::error::{LabError, Result};
use crate::greenfn::{killed_green_exact_growing, suggested_radius, EnvWindow};
use crate::lattice::{Direction, Point};
use crate::seeds::{derive_seed, stream};
use crate::stats::ratio_of_means;

/// Denominators `E[g(0, z+y)]` below this are flagged.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KalikowEstimate {
    pub delta: f64,
    pub y: Point,
    pub z: Point,
    pub e: Direction,
    pub value: f64,
    pub stderr: f64,
    pub denominator_mean: f64,
    pub denominator_below_floor: bool,
    /// `|J| ≤ 1/κ`.
    pub within_kappa_bound: bool,
    pub n_env: u64,
    pub max_error_bound: f64,
}

/// Single `(z, e)` form of [`kalikow_j_delta_batch`].
#[allow(clippy::too_many_arguments)]
pub fn kalikow_j_delta(
    field: &EnvironmentField,
    delta: f64,
    y: Point,
    z: Point,
    e: Direction,
    a_set: &[Point],
    n_env: u64,
    tol: f64,
    seed: u64,
) -> Result<KalikowEstimate> {
    Ok(kalikow_j_delta_batch(field, delta, y, &[(z, e)], a_set, n_env, tol, seed)?.remove(0))
}

/// `E[g(0,z+y)(δ g(z+y+e,y) - g(z+y,z+y))] / E[g(0,z+y)]` in the environment
/// whose rows on `A + y` are replaced by the law mean `p_ε`, for every pair
/// `(z, e)`. All pairs share the same `n_env` environments.
#[allow(clippy::too_many_arguments)]
pub fn kalikow_j_delta_batch(
    field: &EnvironmentField,
    delta: f64,
    y: Point,
    pairs: &[(Point, Direction)],
    a_set: &[Point],
    n_env: u64,
    tol: f64,
    seed: u64,
) -> Result<Vec<KalikowEstimate>> {
    if n_env < 2 {
        return Err(LabError::InvalidArgument(
            "need at least two environments".into(),
        ));
    }
    if pairs.is_empty() {
        return Err(LabError::InvalidArgument(
            "no (z, e) pairs requested".into(),
        ));
    }
    let mean_row = field.p_epsilon().probs().to_vec();
    let shifted_a: Vec<Point> = a_set.iter().map(|a| *a + y).collect();
    let mut sources = vec![Point::origin(), y];
    for (z, e) in pairs {
        sources.extend([*z + y, (*z + y).step(*e)]);
    }
    sources.sort_by_key(|p| p.c);
    sources.dedup();
    let reach = sources.iter().map(|s| (*s - y).linf()).max().unwrap_or(0);
    let speed = field
        .mean_drift()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let r0 = suggested_radius(delta, tol, speed) + reach;

    let samples: Vec<Result<(Vec<(f64, f64)>, f64)>> = (0..n_env)
        .into_par_iter()
        .map(|i| {
            let env = field.with_seed(derive_seed(seed, stream::ENVIRONMENT, i));
            let table = killed_green_exact_growing(
                |r| {
                    EnvWindow::from_field(&env, y, r)
                        .with_rows(&shifted_a, &mean_row)
                        .expect("A + y lies inside the window")
                },
                r0,
                8 * r0,
                delta,
                &sources,
                tol,
            )?;
            let mut out = Vec::with_capacity(pairs.len());
            for (z, e) in pairs {
                let zy = *z + y;
                let g0 = table.get(Point::origin(), zy)?;
                let num = g0 * (delta * table.get(zy.step(*e), y)? - table.get(zy, zy)?);
                out.push((num, g0));
            }
            let bound = table
                .rows()
                .iter()
                .map(|r| r.error_bound)
                .fold(0.0, f64::max);
            Ok((out, bound))
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let max_error_bound = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let kappa = field.kappa();
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(j, (z, e))| {
            let num: Vec<f64> = samples.iter().map(|s| s.0[j].0).collect();
            let den: Vec<f64> = samples.iter().map(|s| s.0[j].1).collect();
            let (value, stderr) = ratio_of_means(&num, &den);
            let denominator_mean = den.iter().sum::<f64>() / den.len() as f64;
            KalikowEstimate {
                delta,
                y,
                z: *z,
                e: *e,
                value,
                stderr,
                denominator_mean,
                denominator_below_floor: denominator_mean < DENOMINATOR_FLOOR,
                within_kappa_bound: value.abs() <= 1.0 / kappa,
                n_env,
                max_error_bound,
            }
        })
        .collect())
}
