//! Monte Carlo killed Green function in a fixed environment.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use super::exact::check_delta;
use super::table::KilledGreenTable;
use crate::environment::EnvironmentField;
use crate::error::{LabError, Result};
use crate::lattice::Point;
use crate::seeds::{stream, walk_rng};

/// Killing time with `P(τ = n) = (1-δ) δ^{n-1}`, `n ≥ 1`.
pub fn killing_time<R: Rng + ?Sized>(geo: &Geometric, rng: &mut R) -> u64 {
    geo.sample(rng) + 1
}

pub(crate) fn geometric(delta: f64) -> Result<Geometric> {
    check_delta(delta)?;
    Geometric::new(1.0 - delta)
        .map_err(|e| LabError::InvalidArgument(format!("geometric law: {e}")))
}

/// Visit counts to `targets` before `τ_δ`, averaged over `n_traj` quenched
/// trajectories from `source`, with per-target standard errors.
pub fn killed_green_mc(
    field: &EnvironmentField,
    delta: f64,
    source: Point,
    targets: &[Point],
    n_traj: u64,
    seed: u64,
) -> Result<KilledGreenTable> {
    if n_traj == 0 {
        return Err(LabError::InvalidArgument(
            "n_traj must be at least 1".into(),
        ));
    }
    let geo = geometric(delta)?;
    let index: HashMap<Point, usize> = targets.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let nt = targets.len();

    // fixed chunking keeps the reduction order independent of the pool size
    const CHUNK: u64 = 1024;
    let chunks: Vec<u64> = (0..n_traj.div_ceil(CHUNK)).collect();
    let partial: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = chunks
        .par_iter()
        .map(|&c| {
            let mut s1 = vec![0.0; nt];
            let mut s2 = vec![0.0; nt];
            let (mut t1, mut t2) = (0.0, 0.0);
            let mut visits = vec![0u64; nt];
            for t in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
                let mut rng = walk_rng(seed, stream::WALK, t);
                let tau = killing_time(&geo, &mut rng);
                visits.iter_mut().for_each(|v| *v = 0);
                let mut x = source;
                for n in 0..tau {
                    if let Some(&i) = index.get(&x) {
                        visits[i] += 1;
                    }
                    if n + 1 < tau {
                        let atom = field.site_atom(x);
                        x = x.step(field.step_direction(atom, rng.random::<f64>()));
                    }
                }
                for i in 0..nt {
                    let v = visits[i] as f64;
                    s1[i] += v;
                    s2[i] += v * v;
                }
                t1 += tau as f64;
                t2 += (tau as f64).powi(2);
            }
            (s1, s2, t1, t2)
        })
        .collect();

    let mut s1 = vec![0.0; nt];
    let mut s2 = vec![0.0; nt];
    let (mut t1, mut t2) = (0.0, 0.0);
    for (a, b, c, d) in partial {
        for i in 0..nt {
            s1[i] += a[i];
            s2[i] += b[i];
        }
        t1 += c;
        t2 += d;
    }
    let n = n_traj as f64;
    let se = |sum: f64, sq: f64| {
        if n_traj < 2 {
            return 0.0;
        }
        let m = sum / n;
        ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()
    };
    let values: Vec<f64> = s1.iter().map(|v| v / n).collect();
    let stderr: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| se(*a, *b)).collect();
    Ok(KilledGreenTable::monte_carlo(
        delta,
        source,
        targets.to_vec(),
        values,
        stderr,
        n_traj,
        t1 / n,
        se(t1, t2),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::PerturbationLaw;
    use crate::kernels::TransitionKernel;

    fn field() -> EnvironmentField {
        EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.1,
            PerturbationLaw::two_atom_drift(),
            3,
        )
        .unwrap()
    }

    #[test]
    fn mean_killing_time() {
        let t = killed_green_mc(
            &field(),
            0.8,
            Point::origin(),
            &[Point::origin()],
            40_000,
            1,
        )
        .unwrap();
        assert!(
            (t.mean_tau - 5.0).abs() < 4.0 * t.mean_tau_stderr,
            "{}",
            t.mean_tau
        );
        // the source is always visited at time 0
        assert!(t.get(Point::origin(), Point::origin()).unwrap() >= 1.0);
    }

    #[test]
    fn single_trajectory_with_immediate_killing() {
        // with δ tiny, τ = 1 and the only visit is the source
        let t = killed_green_mc(
            &field(),
            1e-12,
            Point::origin(),
            &[Point::origin(), Point::new(&[1, 0])],
            1,
            9,
        )
        .unwrap();
        assert_eq!(t.get(Point::origin(), Point::origin()).unwrap(), 1.0);
        assert_eq!(t.get(Point::origin(), Point::new(&[1, 0])).unwrap(), 0.0);
    }
}
