//! Sampling a low-disorder environment and reading off its local drifts.

use rwre_lab::environment::{make_perturbation_law, EnvironmentField, PerturbationLaw};
use rwre_lab::kernels::TransitionKernel;
use rwre_lab::Point;

fn main() -> rwre_lab::Result<()> {
    let law = PerturbationLaw::two_atom_drift();
    let field = EnvironmentField::new(TransitionKernel::symmetric(2), 0.1, law, 7)?;
    println!("p_eps = {:?}", field.p_epsilon().probs());
    println!(
        "mean drift = {:?}, kappa = {}",
        field.mean_drift(),
        field.kappa()
    );
    let ld = field.check_ld();
    println!("LD condition holds: {} (margin {:.4})", ld.holds, ld.margin);
    for c in [[0, 0], [1, 0], [0, 1], [5, -3]] {
        let x = Point::new(&c);
        let s = field.site_omega(x);
        println!("{x}: atom {} omega {:?}", s.atom, s.omega);
    }

    // a three-atom law in d = 3
    let law3 = make_perturbation_law(
        3,
        vec![
            vec![0.75, -0.75, 0.5, -0.5, 0.0, 0.0],
            vec![-0.75, 0.75, -0.5, 0.5, 0.0, 0.0],
            vec![0.0; 6],
        ],
        vec![0.5, 0.25, 0.25],
    )?;
    println!("d = 3 law mean {:?}", law3.mean());
    Ok(())
}
