use proptest::prelude::*;
use rwre_lab::environment::{EnvironmentField, PerturbationLaw};
use rwre_lab::kernels::TransitionKernel;
use rwre_lab::measures::{
    cesaro_invariant_estimate, mu_delta_estimate, simulate_trace, velocity_mc, BoxConfiguration,
};
use rwre_lab::Point;

fn field(eps: f64, seed: u64) -> EnvironmentField {
    EnvironmentField::new(
        TransitionKernel::symmetric(2),
        eps,
        PerturbationLaw::two_atom_drift(),
        seed,
    )
    .unwrap()
}

#[test]
fn velocity_agrees_with_time_averaged_drift() {
    // the martingale part has mean zero, so the two agree within its error bar
    let v = velocity_mc(&field(0.1, 2), 100_000, 20, 8).unwrap();
    for a in 0..2 {
        assert!(
            v.martingale_gap[a].abs() <= 4.0 * v.martingale_gap_stderr[a],
            "{v:?}"
        );
        assert!((v.mean[a] - v.drift_average[a] - v.martingale_gap[a]).abs() < 1e-12);
    }
}

#[test]
fn mu_delta_and_cesaro_have_matching_layouts() {
    let f = field(0.1, 4);
    let sites = [Point::origin(), Point::new(&[1, 0])];
    let mu = mu_delta_estimate(&f, &sites, 0.9, 2000, 1).unwrap();
    let c = cesaro_invariant_estimate(&f, &sites, 20_000, 1000, 4, 1).unwrap();
    assert_eq!(mu.configurations(), c.configurations());
    assert_eq!(mu.p, c.p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn density_estimates_are_consistent(seed in any::<u64>(), eps in 0.0f64..0.2, y in -2i64..=2) {
        let f = field(eps, seed);
        let sites = [Point::origin(), Point::new(&[1, y])];
        let est = cesaro_invariant_estimate(&f, &sites, 3000, 100, 3, seed).unwrap();
        prop_assert_eq!(est.counts.iter().sum::<u64>(), est.total);
        prop_assert_eq!(est.total, 3 * 2900);
        for (c, cfg) in est.configurations().iter().enumerate() {
            let w: f64 = cfg.atoms.iter().map(|a| f.law().weight(*a)).product();
            prop_assert!((est.p[c] - w).abs() < 1e-15);
            prop_assert!(est.ratio[c] >= 0.0);
        }
    }

    #[test]
    fn mu_delta_mass_is_one(seed in any::<u64>(), delta in 0.5f64..0.95) {
        let est = mu_delta_estimate(&field(0.1, seed), &[Point::new(&[0, 1])], delta, 500, seed).unwrap();
        if est.total > 0 {
            prop_assert!((est.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn traces_move_to_neighbours(seed in any::<u64>(), eps in 0.0f64..0.2) {
        let t = simulate_trace(&field(eps, seed), 500, seed);
        prop_assert!(t.is_nearest_neighbour());
        prop_assert_eq!(t.positions.len(), 501);
    }

    #[test]
    fn configuration_ids_round_trip(a in 0usize..2, b in 0usize..2, c in 0usize..2) {
        let law = PerturbationLaw::two_atom_drift();
        let sites = vec![Point::origin(), Point::new(&[1, 0]), Point::new(&[0, 1])];
        let cfg = BoxConfiguration::new(sites.clone(), vec![a, b, c], &law).unwrap();
        let id = cfg.id(law.n_atoms());
        prop_assert_eq!(BoxConfiguration::from_id(&sites, law.n_atoms(), id), cfg);
    }
}
