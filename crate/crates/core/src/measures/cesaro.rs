//! Long-run Cesàro averages of the environment seen from the walker.

use rand::Rng;
use rayon::prelude::*;

use super::{configuration_at, configuration_count, DensityEstimate};
use crate::environment::EnvironmentField;
use crate::error::{LabError, Result};
use crate::lattice::Point;
use crate::seeds::{derive_seed, stream, walk_rng};

/// `10/ε²` steps, capped at `10⁶`; 1000 without disorder.
pub fn default_burn_in(epsilon: f64) -> u64 {
    if epsilon <= 0.0 {
        return 1000;
    }
    (10.0 / (epsilon * epsilon)).ceil().min(1e6) as u64
}

/// Frequencies of `ω|_{X_k + B}` for `burn_in ≤ k < n_steps`, pooled over
/// `n_replicas` walks in independent environments.
///
/// Replica `r` uses environment seed `derive_seed(seed, ENVIRONMENT, r)` and
/// walk stream `(seed, WALK, r)`. Standard errors are delete-one-replica
/// jackknife.
pub fn cesaro_invariant_estimate(
    field: &EnvironmentField,
    sites: &[Point],
    n_steps: u64,
    burn_in: u64,
    n_replicas: u64,
    seed: u64,
) -> Result<DensityEstimate> {
    if n_steps <= burn_in {
        return Err(LabError::InvalidArgument(format!(
            "n_steps = {n_steps} must exceed burn_in = {burn_in}"
        )));
    }
    if n_replicas == 0 {
        return Err(LabError::InvalidArgument(
            "need at least one replica".into(),
        ));
    }
    let ld = field.check_ld();
    if !ld.holds {
        log::warn!(
            "local drift condition fails (margin {:.3e}); outside the expansion regime",
            ld.margin
        );
    }
    let n_cfg = configuration_count(sites, field.law())?;
    let counts: Vec<Vec<u64>> = (0..n_replicas)
        .into_par_iter()
        .map(|r| {
            let env = field.with_seed(derive_seed(seed, stream::ENVIRONMENT, r));
            let mut rng = walk_rng(seed, stream::WALK, r);
            let mut counts = vec![0u64; n_cfg];
            let mut x = Point::origin();
            for k in 0..n_steps {
                if k >= burn_in {
                    counts[configuration_at(&env, x, sites)] += 1;
                }
                let atom = env.site_atom(x);
                x = x.step(env.step_direction(atom, rng.random::<f64>()));
            }
            counts
        })
        .collect();
    DensityEstimate::from_group_counts(sites, field.law(), &counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::PerturbationLaw;
    use crate::kernels::TransitionKernel;

    #[test]
    fn counts_sum_to_recorded_steps() {
        let f = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.1,
            PerturbationLaw::two_atom_drift(),
            0,
        )
        .unwrap();
        let sites = [Point::origin(), Point::new(&[0, 1])];
        let d = cesaro_invariant_estimate(&f, &sites, 1000, 100, 7, 3).unwrap();
        assert_eq!(d.total, 7 * 900);
        assert_eq!(d.counts.len(), 4);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!(cesaro_invariant_estimate(&f, &sites, 100, 100, 1, 0).is_err());
    }

    #[test]
    fn no_disorder_ratios_are_one() {
        let f = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.0,
            PerturbationLaw::two_atom_drift(),
            0,
        )
        .unwrap();
        let d = cesaro_invariant_estimate(&f, &[Point::origin()], 20_000, 1000, 40, 11).unwrap();
        for (r, se) in d.ratio.iter().zip(&d.ratio_stderr) {
            assert!((r - 1.0).abs() < 4.0 * se, "{r} ± {se}");
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let f = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.1,
            PerturbationLaw::two_atom_drift(),
            0,
        )
        .unwrap();
        let a = cesaro_invariant_estimate(&f, &[Point::origin()], 2000, 10, 4, 5).unwrap();
        let b = cesaro_invariant_estimate(&f, &[Point::origin()], 2000, 10, 4, 5).unwrap();
        assert_eq!(a.counts, b.counts);
    }
}
