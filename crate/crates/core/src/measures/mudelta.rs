//! The geometric-Cesàro measure `μ_δ` and the identity linking it to the
//! killed Green function.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{configuration_at, configuration_count, DensityEstimate};
use crate::environment::EnvironmentField;
use crate::error::{LabError, Result};
use crate::greenfn::{
    geometric, killed_green_exact_growing, killing_time, suggested_radius, EnvWindow,
};
use crate::lattice::Point;
use crate::seeds::{derive_seed, stream, walk_rng};
use crate::stats::{mean_se, ratio_of_means};

const MAX_GROUPS: u64 = 64;

/// `μ̂_δ` on a box with its normalisation variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuDeltaEstimate {
    /// Counts over `k = 1..τ-1`, normalised by the realised total.
    pub density: DensityEstimate,
    /// The same counts divided by `n_traj · E[τ]`, as in the identity.
    pub identity_k1: Vec<f64>,
    /// Counts over `k = 0..τ-1` divided by `n_traj · E[τ]`.
    pub identity_k0: Vec<f64>,
    /// Fraction of trajectories with `τ = 1`, which contribute nothing.
    pub empty_fraction: f64,
    pub n_traj: u64,
    pub delta: f64,
}

/// `μ̂_δ` restricted to `sites`; see [`mu_delta_estimate_detailed`].
pub fn mu_delta_estimate(
    field: &EnvironmentField,
    sites: &[Point],
    delta: f64,
    n_traj: u64,
    seed: u64,
) -> Result<DensityEstimate> {
    Ok(mu_delta_estimate_detailed(field, sites, delta, n_traj, seed)?.density)
}

/// Each trajectory gets a fresh environment and a fresh geometric `τ_δ`;
/// configurations at `θ_{X_k} ω` are counted for `1 ≤ k < τ`.
///
/// Trajectories are split round-robin into at most 64 jackknife groups.
pub fn mu_delta_estimate_detailed(
    field: &EnvironmentField,
    sites: &[Point],
    delta: f64,
    n_traj: u64,
    seed: u64,
) -> Result<MuDeltaEstimate> {
    if n_traj == 0 {
        return Err(LabError::InvalidArgument(
            "n_traj must be at least 1".into(),
        ));
    }
    let geo = geometric(delta)?;
    let n_cfg = configuration_count(sites, field.law())?;
    let groups = n_traj.min(MAX_GROUPS);
    let per_group: Vec<(Vec<u64>, Vec<u64>, u64)> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let mut k1 = vec![0u64; n_cfg];
            let mut k0 = vec![0u64; n_cfg];
            let mut empty = 0u64;
            for t in (g..n_traj).step_by(groups as usize) {
                let env = field.with_seed(derive_seed(seed, stream::ENVIRONMENT, t));
                let mut rng = walk_rng(seed, stream::WALK, t);
                let tau = killing_time(&geo, &mut rng);
                if tau == 1 {
                    empty += 1;
                }
                let mut x = Point::origin();
                k0[configuration_at(&env, x, sites)] += 1;
                for _ in 1..tau {
                    let atom = env.site_atom(x);
                    x = x.step(env.step_direction(atom, rng.random::<f64>()));
                    let c = configuration_at(&env, x, sites);
                    k1[c] += 1;
                    k0[c] += 1;
                }
            }
            (k1, k0, empty)
        })
        .collect();
    let k1_groups: Vec<Vec<u64>> = per_group.iter().map(|g| g.0.clone()).collect();
    let density = DensityEstimate::from_group_counts(sites, field.law(), &k1_groups)?;
    let norm = n_traj as f64 / (1.0 - delta);
    let mut k0_total = vec![0u64; n_cfg];
    for g in &per_group {
        for (a, b) in k0_total.iter_mut().zip(&g.1) {
            *a += b;
        }
    }
    let empty: u64 = per_group.iter().map(|g| g.2).sum();
    Ok(MuDeltaEstimate {
        identity_k1: density.counts.iter().map(|c| *c as f64 / norm).collect(),
        identity_k0: k0_total.iter().map(|c| *c as f64 / norm).collect(),
        density,
        empty_fraction: empty as f64 / n_traj as f64,
        n_traj,
        delta,
    })
}

/// Indicator that `ω` carries the given atoms on `x + sites`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderFunction {
    pub sites: Vec<Point>,
    pub atoms: Vec<usize>,
}

impl CylinderFunction {
    pub fn new(sites: Vec<Point>, atoms: Vec<usize>) -> Result<Self> {
        if sites.len() != atoms.len() || sites.is_empty() {
            return Err(LabError::InvalidArgument(
                "cylinder needs one atom per site".into(),
            ));
        }
        Ok(CylinderFunction { sites, atoms })
    }

    /// `f(θ_x ω)`.
    #[inline]
    pub fn eval(&self, field: &EnvironmentField, x: Point) -> f64 {
        let hit = self
            .sites
            .iter()
            .zip(&self.atoms)
            .all(|(z, a)| field.site_atom(x + *z) == *a);
        if hit {
            1.0
        } else {
            0.0
        }
    }

    /// `E[f]` under the product law.
    pub fn mean(&self, field: &EnvironmentField) -> f64 {
        self.atoms.iter().map(|a| field.law().weight(*a)).product()
    }
}

/// Trajectory and Green-function sides of the `μ_δ` identity for one `f`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub delta: f64,
    /// `E[Σ_{k=1}^{τ-1} f(θ_{X_k} ω)] / E[τ]`.
    pub trajectory_k1: f64,
    pub trajectory_k1_stderr: f64,
    /// `E[Σ_{k=0}^{τ-1} f(θ_{X_k} ω)] / E[τ]`.
    pub trajectory_k0: f64,
    pub trajectory_k0_stderr: f64,
    /// `Σ_y E[g(0,y) f(θ_y ω)] / Σ_y E[g(0,y)]` from exact solves.
    pub green_side: f64,
    pub green_side_stderr: f64,
    pub mean_f: f64,
    /// The `k = 0` term the `k ≥ 1` sum omits: `(1-δ) E[f]`.
    pub expected_k1_gap: f64,
    pub agree_k0: bool,
    pub agree_k1: bool,
    pub n_traj: u64,
    pub n_env: u64,
    /// Largest exact-solver error bound over the sampled environments.
    pub max_error_bound: f64,
}

/// Compares the trajectory side (`n_traj` annealed trajectories) with the
/// Green side (`n_env` environments, exact rows to accuracy `tol`), using
/// 4 combined standard errors.
pub fn identity_check(
    field: &EnvironmentField,
    f: &CylinderFunction,
    delta: f64,
    n_traj: u64,
    n_env: u64,
    tol: f64,
    seed: u64,
) -> Result<IdentityReport> {
    if n_traj < 2 || n_env < 2 {
        return Err(LabError::InvalidArgument(
            "need at least two trajectories and two environments".into(),
        ));
    }
    let geo = geometric(delta)?;
    let sums: Vec<(f64, f64)> = (0..n_traj)
        .into_par_iter()
        .map(|t| {
            let env = field.with_seed(derive_seed(seed, stream::ENVIRONMENT, t));
            let mut rng = walk_rng(seed, stream::WALK, t);
            let tau = killing_time(&geo, &mut rng);
            let mut x = Point::origin();
            let first = f.eval(&env, x);
            let mut s1 = 0.0;
            for _ in 1..tau {
                let atom = env.site_atom(x);
                x = x.step(env.step_direction(atom, rng.random::<f64>()));
                s1 += f.eval(&env, x);
            }
            (s1, s1 + first)
        })
        .collect();
    let mean_tau = 1.0 / (1.0 - delta);
    let (m1, se1) = mean_se(&sums.iter().map(|s| s.0).collect::<Vec<_>>());
    let (m0, se0) = mean_se(&sums.iter().map(|s| s.1).collect::<Vec<_>>());

    let speed = field
        .mean_drift()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let r0 = suggested_radius(delta, tol, speed);
    let green: Vec<Result<(f64, f64, f64)>> = (0..n_env)
        .into_par_iter()
        .map(|i| {
            let env = field.with_seed(derive_seed(seed, stream::GREEN_SIDE, i));
            let table = killed_green_exact_growing(
                |r| EnvWindow::from_field(&env, Point::origin(), r),
                r0,
                8 * r0,
                delta,
                &[Point::origin()],
                tol,
            )?;
            let row = table.row(Point::origin())?;
            let num: f64 = table
                .row_entries(Point::origin())?
                .iter()
                .map(|(y, g)| g * f.eval(&env, *y))
                .sum();
            Ok((num, row.row_sum, row.error_bound))
        })
        .collect();
    let green = green.into_iter().collect::<Result<Vec<_>>>()?;
    let num: Vec<f64> = green.iter().map(|g| g.0).collect();
    let den: Vec<f64> = green.iter().map(|g| g.1).collect();
    let (gs, gse) = ratio_of_means(&num, &den);
    let max_error_bound = green.iter().map(|g| g.2).fold(0.0, f64::max);

    let (t1, t1se) = (m1 / mean_tau, se1 / mean_tau);
    let (t0, t0se) = (m0 / mean_tau, se0 / mean_tau);
    let agree = |a: f64, sa: f64| (a - gs).abs() <= 4.0 * (sa * sa + gse * gse).sqrt();
    let mean_f = f.mean(field);
    Ok(IdentityReport {
        delta,
        trajectory_k1: t1,
        trajectory_k1_stderr: t1se,
        trajectory_k0: t0,
        trajectory_k0_stderr: t0se,
        green_side: gs,
        green_side_stderr: gse,
        mean_f,
        expected_k1_gap: (1.0 - delta) * mean_f,
        agree_k0: agree(t0, t0se),
        agree_k1: agree(t1, t1se),
        n_traj,
        n_env,
        max_error_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::PerturbationLaw;
    use crate::kernels::TransitionKernel;

    fn field(eps: f64) -> EnvironmentField {
        EnvironmentField::new(
            TransitionKernel::symmetric(2),
            eps,
            PerturbationLaw::two_atom_drift(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn total_mass_is_one() {
        let m = mu_delta_estimate_detailed(&field(0.1), &[Point::origin()], 0.9, 2000, 1).unwrap();
        assert!((m.density.total_mass() - 1.0).abs() < 1e-12);
        // identity normalisation: E[τ - 1] / E[τ] = δ
        let s: f64 = m.identity_k1.iter().sum();
        assert!((s - 0.9).abs() < 0.03, "{s}");
    }

    #[test]
    fn tiny_delta_is_empty() {
        let m = mu_delta_estimate_detailed(&field(0.1), &[Point::origin()], 1e-9, 500, 1).unwrap();
        assert_eq!(m.empty_fraction, 1.0);
        assert_eq!(m.density.total, 0);
        assert!(m.identity_k1.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_sides_agree_at_small_scale() {
        let f = CylinderFunction::new(vec![Point::origin()], vec![1]).unwrap();
        let r = identity_check(&field(0.1), &f, 0.8, 40_000, 60, 1e-8, 3).unwrap();
        assert!(r.agree_k0, "{r:?}");
        assert!((r.expected_k1_gap - 0.1).abs() < 1e-12);
        assert!(r.max_error_bound <= 1e-8);
    }
}
