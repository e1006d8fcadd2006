//! Estimators for the invariant measure of the environment seen from the
//! walker, and related walk statistics.
//!
//! Restricted to a finite box `B`, both the limiting measure `Q_B` and the
//! product law `P_B` live on the finite alphabet of atom configurations, so
//! densities `dQ_B/dP_B` are estimated as frequency ratios.

mod ballistic;
mod cesaro;
mod kalikow;
mod mudelta;
mod walk;

pub use ballistic::{c0_readings, polynomial_condition_check, BallisticityReport};
pub use cesaro::{cesaro_invariant_estimate, default_burn_in};
pub use kalikow::{kalikow_j_delta, kalikow_j_delta_batch, KalikowEstimate};
pub use mudelta::{
    identity_check, mu_delta_estimate, mu_delta_estimate_detailed, CylinderFunction,
    IdentityReport, MuDeltaEstimate,
};
pub use walk::{simulate_trace, velocity_mc, VelocityEstimate, WalkTrace};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentField, PerturbationLaw};
use crate::error::{LabError, Result};
use crate::lattice::Point;
use crate::output::fmt_f64;
use crate::stats::jackknife_ratio;

/// Largest configuration alphabet an estimator will allocate.
pub const MAX_CONFIGURATIONS: usize = 1 << 20;

/// Atom indices on the sites of a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxConfiguration {
    pub sites: Vec<Point>,
    pub atoms: Vec<usize>,
}

impl BoxConfiguration {
    pub fn new(sites: Vec<Point>, atoms: Vec<usize>, law: &PerturbationLaw) -> Result<Self> {
        if sites.len() != atoms.len() {
            return Err(LabError::InvalidArgument(format!(
                "{} sites but {} atoms",
                sites.len(),
                atoms.len()
            )));
        }
        if let Some(a) = atoms.iter().find(|&&a| a >= law.n_atoms()) {
            return Err(LabError::InvalidArgument(format!(
                "atom index {a} out of range"
            )));
        }
        Ok(BoxConfiguration { sites, atoms })
    }

    /// Mixed-radix id; the first site is the least significant digit.
    pub fn id(&self, n_atoms: usize) -> usize {
        self.atoms.iter().rev().fold(0, |acc, &a| acc * n_atoms + a)
    }

    pub fn from_id(sites: &[Point], n_atoms: usize, mut id: usize) -> Self {
        let atoms = sites
            .iter()
            .map(|_| {
                let a = id % n_atoms;
                id /= n_atoms;
                a
            })
            .collect();
        BoxConfiguration {
            sites: sites.to_vec(),
            atoms,
        }
    }

    /// `P_B` of this configuration: the product of atom weights.
    pub fn probability(&self, law: &PerturbationLaw) -> f64 {
        self.atoms.iter().map(|&a| law.weight(a)).product()
    }
}

/// Size of the configuration alphabet on `sites`, capped.
pub fn configuration_count(sites: &[Point], law: &PerturbationLaw) -> Result<usize> {
    let mut n: usize = 1;
    for _ in sites {
        n = n
            .checked_mul(law.n_atoms())
            .filter(|&v| v <= MAX_CONFIGURATIONS)
            .ok_or_else(|| {
                LabError::ResourceCap(format!("more than {MAX_CONFIGURATIONS} configurations"))
            })?;
    }
    Ok(n)
}

/// All configurations on `sites`, in id order.
pub fn enumerate_configurations(
    sites: &[Point],
    law: &PerturbationLaw,
) -> Result<Vec<BoxConfiguration>> {
    let n = configuration_count(sites, law)?;
    Ok((0..n)
        .map(|id| BoxConfiguration::from_id(sites, law.n_atoms(), id))
        .collect())
}

/// Configuration id of `ω` restricted to `x + B`.
#[inline]
pub(crate) fn configuration_at(field: &EnvironmentField, x: Point, sites: &[Point]) -> usize {
    let n = field.law().n_atoms();
    sites
        .iter()
        .rev()
        .fold(0, |acc, z| acc * n + field.site_atom(x + *z))
}

/// Empirical `Q̂_B` with ratios to `P_B` and jackknife errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub sites: Vec<Point>,
    pub n_atoms: usize,
    pub counts: Vec<u64>,
    pub total: u64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub q_stderr: Vec<f64>,
    pub ratio: Vec<f64>,
    pub ratio_stderr: Vec<f64>,
    /// Per-group counts (replicas or trajectory batches) behind the jackknife.
    pub group_counts: Vec<Vec<u64>>,
}

impl DensityEstimate {
    /// Pools per-group count vectors; the jackknife deletes one group at a time.
    pub fn from_group_counts(
        sites: &[Point],
        law: &PerturbationLaw,
        group_counts: &[Vec<u64>],
    ) -> Result<Self> {
        let n_cfg = configuration_count(sites, law)?;
        let n_atoms = law.n_atoms();
        let mut counts = vec![0u64; n_cfg];
        for g in group_counts {
            for (c, v) in counts.iter_mut().zip(g) {
                *c += v;
            }
        }
        let total: u64 = counts.iter().sum();
        let group_totals: Vec<f64> = group_counts
            .iter()
            .map(|g| g.iter().sum::<u64>() as f64)
            .collect();
        let mut p = Vec::with_capacity(n_cfg);
        let mut q = Vec::with_capacity(n_cfg);
        let mut q_se = Vec::with_capacity(n_cfg);
        for id in 0..n_cfg {
            p.push(BoxConfiguration::from_id(sites, n_atoms, id).probability(law));
            let num: Vec<f64> = group_counts.iter().map(|g| g[id] as f64).collect();
            let (qv, se) = if total == 0 {
                (0.0, f64::NAN)
            } else {
                jackknife_ratio(&num, &group_totals)
            };
            q.push(qv);
            q_se.push(se);
        }
        let ratio: Vec<f64> = q
            .iter()
            .zip(&p)
            .map(|(a, b)| if *b > 0.0 { a / b } else { f64::NAN })
            .collect();
        let ratio_stderr: Vec<f64> = q_se.iter().zip(&p).map(|(a, b)| a / b).collect();
        Ok(DensityEstimate {
            sites: sites.to_vec(),
            n_atoms,
            counts,
            total,
            p,
            q,
            q_stderr: q_se,
            ratio,
            ratio_stderr,
            group_counts: group_counts.to_vec(),
        })
    }

    /// The estimate on the sub-box `sites[keep]`, jackknifed over the same groups.
    pub fn marginal(&self, keep: &[usize], law: &PerturbationLaw) -> Result<DensityEstimate> {
        if keep.iter().any(|&k| k >= self.sites.len()) {
            return Err(LabError::InvalidArgument(
                "marginal index out of range".into(),
            ));
        }
        let sub: Vec<Point> = keep.iter().map(|&k| self.sites[k]).collect();
        let n_sub = configuration_count(&sub, law)?;
        let groups: Vec<Vec<u64>> = self
            .group_counts
            .iter()
            .map(|g| {
                let mut out = vec![0u64; n_sub];
                for (id, c) in g.iter().enumerate() {
                    let full = BoxConfiguration::from_id(&self.sites, self.n_atoms, id);
                    let sub_id = keep
                        .iter()
                        .rev()
                        .fold(0, |acc, &k| acc * self.n_atoms + full.atoms[k]);
                    out[sub_id] += c;
                }
                out
            })
            .collect();
        DensityEstimate::from_group_counts(&sub, law, &groups)
    }

    pub fn configurations(&self) -> Vec<BoxConfiguration> {
        (0..self.counts.len())
            .map(|id| BoxConfiguration::from_id(&self.sites, self.n_atoms, id))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.q.iter().sum()
    }

    /// CSV columns: `configuration_id, atom_1..atom_n, count, Q, P, ratio, stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["configuration_id".to_string()];
        header.extend((1..=self.sites.len()).map(|i| format!("atom_{i}")));
        header.extend(["count", "Q", "P", "ratio", "stderr"].map(String::from));
        w.write_record(&header)?;
        for (id, cfg) in self.configurations().iter().enumerate() {
            let mut rec = vec![id.to_string()];
            rec.extend(cfg.atoms.iter().map(|a| a.to_string()));
            rec.push(self.counts[id].to_string());
            rec.extend([
                fmt_f64(self.q[id]),
                fmt_f64(self.p[id]),
                fmt_f64(self.ratio[id]),
                fmt_f64(self.ratio_stderr[id]),
            ]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::make_perturbation_law;

    #[test]
    fn ids_round_trip_and_probabilities_match_enumeration() {
        let law = make_perturbation_law(
            1,
            vec![vec![0.0, 0.0], vec![0.5, -0.5], vec![-0.2, 0.2]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let sites = vec![Point::origin(), Point::new(&[1])];
        let all = enumerate_configurations(&sites, &law).unwrap();
        assert_eq!(all.len(), 9);
        let mut total = 0.0;
        for (id, c) in all.iter().enumerate() {
            assert_eq!(c.id(3), id);
            // direct enumeration of the product law
            let direct = law.weight(c.atoms[0]) * law.weight(c.atoms[1]);
            assert_eq!(c.probability(&law), direct);
            total += direct;
        }
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn counts_sum_to_total() {
        let law = PerturbationLaw::two_atom_drift();
        let d =
            DensityEstimate::from_group_counts(&[Point::origin()], &law, &[vec![3, 5], vec![4, 4]])
                .unwrap();
        assert_eq!(d.total, 16);
        assert_eq!(d.counts.iter().sum::<u64>(), d.total);
        assert!((d.total_mass() - 1.0).abs() < 1e-15);
        assert!(d.ratio.iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn marginal_sums_joint_counts() {
        let law = PerturbationLaw::two_atom_drift();
        let sites = [Point::origin(), Point::new(&[0, 1])];
        // ids: (a0, a1) -> a0 + 2 a1
        let d =
            DensityEstimate::from_group_counts(&sites, &law, &[vec![1, 2, 3, 4], vec![5, 6, 7, 8]])
                .unwrap();
        let m1 = d.marginal(&[1], &law).unwrap();
        assert_eq!(m1.counts, vec![1 + 2 + 5 + 6, 3 + 4 + 7 + 8]);
        let m0 = d.marginal(&[0], &law).unwrap();
        assert_eq!(m0.counts, vec![1 + 3 + 5 + 7, 2 + 4 + 6 + 8]);
        assert_eq!(m0.sites, vec![Point::origin()]);
    }
}
