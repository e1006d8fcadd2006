//! Killed-trajectory measure μ_δ against the Cesàro estimate, and the
//! Green-function identity behind it.

use rwre_lab::environment::{EnvironmentField, PerturbationLaw};
use rwre_lab::kernels::TransitionKernel;
use rwre_lab::measures::{
    cesaro_invariant_estimate, identity_check, mu_delta_estimate_detailed, CylinderFunction,
};
use rwre_lab::Point;

fn main() -> rwre_lab::Result<()> {
    let field = EnvironmentField::new(
        TransitionKernel::symmetric(2),
        0.1,
        PerturbationLaw::two_atom_drift(),
        9,
    )?;
    let sites = vec![Point::new(&[0, 1])];

    let mu = mu_delta_estimate_detailed(&field, &sites, 0.99, 200_000, 1)?;
    let ces = cesaro_invariant_estimate(&field, &sites, 500_000, 1000, 8, 2)?;
    for c in 0..ces.ratio.len() {
        println!(
            "atom {c}: mu_delta {:.4} ± {:.4}   cesaro {:.4} ± {:.4}",
            mu.density.ratio[c], mu.density.ratio_stderr[c], ces.ratio[c], ces.ratio_stderr[c]
        );
    }

    let f = CylinderFunction::new(sites, vec![0])?;
    let id = identity_check(&field, &f, 0.9, 100_000, 40, 1e-8, 3)?;
    println!(
        "identity: green side {:.4} ± {:.4}, trajectories k>=0 {:.4} ± {:.4}, k>=1 {:.4} (+ (1-delta)E f = {:.4})",
        id.green_side,
        id.green_side_stderr,
        id.trajectory_k0,
        id.trajectory_k0_stderr,
        id.trajectory_k1,
        id.expected_k1_gap
    );
    Ok(())
}
