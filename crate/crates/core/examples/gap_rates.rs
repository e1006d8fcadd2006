//! How fast J_{p*_ε} approaches J_{p*_0} as ε halves.

use rwre_lab::environment::{make_perturbation_law, PerturbationLaw};
use rwre_lab::expansion::j_gap_rate_fit;
use rwre_lab::kernels::{QuadratureSpec, TransitionKernel};
use rwre_lab::Point;

fn main() -> rwre_lab::Result<()> {
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let d2 = PerturbationLaw::two_atom_drift();
    for c in [[-1, 0], [1, 0], [0, 1]] {
        let fit = j_gap_rate_fit(
            &TransitionKernel::symmetric(2),
            &d2,
            Point::new(&c),
            &eps,
            QuadratureSpec::new(2048),
        )?;
        println!("d=2 x={:?} model {:?}", c, fit.model);
        for (e, r, m) in &fit.ratios {
            println!("  gap({e})/gap({}) = {r:.3} (model {m:.3})", e / 2.0);
        }
    }
    let law3 = make_perturbation_law(
        3,
        vec![
            vec![0.75, -0.75, 0.5, -0.5, 0.0, 0.0],
            vec![0.75, -0.75, -0.5, 0.5, 0.0, 0.0],
        ],
        vec![0.5, 0.5],
    )?;
    let fit = j_gap_rate_fit(
        &TransitionKernel::symmetric(3),
        &law3,
        Point::new(&[1, 0, 0]),
        &eps,
        QuadratureSpec::default_for(3),
    )?;
    println!("d=3 x=e1 model {:?}", fit.model);
    for (e, r, m) in &fit.ratios {
        println!("  gap({e})/gap({}) = {r:.3} (model {m:.3})", e / 2.0);
    }
    Ok(())
}
