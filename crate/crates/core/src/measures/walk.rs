//! Quenched walks: traces and velocity estimates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentField;
use crate::error::{LabError, Result};
use crate::lattice::Point;
use crate::seeds::{derive_seed, stream, walk_rng};
use crate::stats::mean_se;

/// Positions `X_0, …, X_n` of one quenched walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkTrace {
    pub positions: Vec<Point>,
    pub env_seed: u64,
    pub walk_seed: u64,
    pub steps: u64,
}

impl WalkTrace {
    pub fn is_nearest_neighbour(&self) -> bool {
        self.positions.windows(2).all(|w| (w[1] - w[0]).l1() == 1)
    }

    /// The environmental process `θ_{X_k} ω` at step `k`.
    pub fn environment_at(&self, field: &EnvironmentField, k: usize) -> EnvironmentField {
        field.with_seed(self.env_seed).shifted(self.positions[k])
    }
}

/// `n_steps` of the walk in `field` from the origin.
pub fn simulate_trace(field: &EnvironmentField, n_steps: u64, walk_seed: u64) -> WalkTrace {
    let mut rng = walk_rng(walk_seed, stream::WALK, 0);
    let mut x = Point::origin();
    let mut positions = Vec::with_capacity(n_steps as usize + 1);
    positions.push(x);
    for _ in 0..n_steps {
        let atom = field.site_atom(x);
        x = x.step(field.step_direction(atom, rng.random::<f64>()));
        positions.push(x);
    }
    WalkTrace {
        positions,
        env_seed: field.seed(),
        walk_seed,
        steps: n_steps,
    }
}

/// Replica-averaged `X_n / n` with fresh environments per replica.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VelocityEstimate {
    pub n_steps: u64,
    pub replicas: u64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub per_replica: Vec<Vec<f64>>,
    /// Time average of the local drift `d(X_k, ω)`, `k < n`, per replica mean.
    pub drift_average: Vec<f64>,
    /// Mean and standard error of `X_n/n - drift average`: a martingale
    /// divided by `n`, zero only in expectation.
    pub martingale_gap: Vec<f64>,
    pub martingale_gap_stderr: Vec<f64>,
}

pub fn velocity_mc(
    field: &EnvironmentField,
    n_steps: u64,
    n_replicas: u64,
    seed: u64,
) -> Result<VelocityEstimate> {
    if n_steps == 0 || n_replicas == 0 {
        return Err(LabError::InvalidArgument(
            "need at least one step and one replica".into(),
        ));
    }
    let dim = field.dim();
    let drifts: Vec<Vec<f64>> = (0..field.law().n_atoms())
        .map(|a| field.atom_drift(a))
        .collect();
    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..n_replicas)
        .into_par_iter()
        .map(|r| {
            let env = field.with_seed(derive_seed(seed, stream::ENVIRONMENT, r));
            let mut rng = walk_rng(seed, stream::WALK, r);
            let mut x = Point::origin();
            let mut dsum = vec![0.0; dim];
            for _ in 0..n_steps {
                let atom = env.site_atom(x);
                for (s, d) in dsum.iter_mut().zip(&drifts[atom]) {
                    *s += d;
                }
                x = x.step(env.step_direction(atom, rng.random::<f64>()));
            }
            let n = n_steps as f64;
            (
                (0..dim).map(|a| x.c[a] as f64 / n).collect(),
                dsum.iter().map(|s| s / n).collect(),
            )
        })
        .collect();
    let mut mean = Vec::with_capacity(dim);
    let mut stderr = Vec::with_capacity(dim);
    let mut drift_average = Vec::with_capacity(dim);
    let mut gap = Vec::with_capacity(dim);
    let mut gap_se = Vec::with_capacity(dim);
    for a in 0..dim {
        let v: Vec<f64> = runs.iter().map(|r| r.0[a]).collect();
        let d: Vec<f64> = runs.iter().map(|r| r.1[a]).collect();
        let g: Vec<f64> = v.iter().zip(&d).map(|(x, y)| x - y).collect();
        let (m, s) = mean_se(&v);
        mean.push(m);
        stderr.push(s);
        drift_average.push(mean_se(&d).0);
        let (gm, gs) = mean_se(&g);
        gap.push(gm);
        gap_se.push(gs);
    }
    Ok(VelocityEstimate {
        n_steps,
        replicas: n_replicas,
        mean,
        stderr,
        per_replica: runs.into_iter().map(|r| r.0).collect(),
        drift_average,
        martingale_gap: gap,
        martingale_gap_stderr: gap_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::PerturbationLaw;
    use crate::kernels::TransitionKernel;

    #[test]
    fn traces_are_nearest_neighbour_and_replayable() {
        let f = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.1,
            PerturbationLaw::two_atom_drift(),
            4,
        )
        .unwrap();
        let a = simulate_trace(&f, 500, 8);
        assert!(a.is_nearest_neighbour());
        assert_eq!(a.positions, simulate_trace(&f, 500, 8).positions);
        let env = a.environment_at(&f, 10);
        assert_eq!(env.site_atom(Point::origin()), f.site_atom(a.positions[10]));
    }

    #[test]
    fn no_disorder_velocity_is_d0() {
        let p0 = TransitionKernel::new(2, vec![0.4, 0.2, 0.2, 0.2]).unwrap();
        let f = EnvironmentField::new(p0, 0.0, PerturbationLaw::two_atom_drift(), 1).unwrap();
        let v = velocity_mc(&f, 2000, 200, 5).unwrap();
        assert!((v.mean[0] - 0.2).abs() < 4.0 * v.stderr[0]);
        assert!(v.mean[1].abs() < 4.0 * v.stderr[1]);
        assert!((v.drift_average[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn stderr_shrinks_with_replicas() {
        let f = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.1,
            PerturbationLaw::two_atom_drift(),
            2,
        )
        .unwrap();
        let a = velocity_mc(&f, 400, 100, 1).unwrap();
        let b = velocity_mc(&f, 400, 1600, 2).unwrap();
        let q = a.stderr[0] / b.stderr[0];
        assert!((2.5..6.0).contains(&q), "ratio {q}");
    }
}
