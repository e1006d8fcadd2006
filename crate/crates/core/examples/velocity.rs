//! Limiting velocity: simulation against the second-order expansion.

use rwre_lab::environment::{EnvironmentField, PerturbationLaw};
use rwre_lab::expansion::{velocity_expansion, velocity_q_average};
use rwre_lab::kernels::{PotentialKernelTable, QuadratureSpec, TransitionKernel};
use rwre_lab::measures::velocity_mc;
use rwre_lab::Direction;

fn main() -> rwre_lab::Result<()> {
    let p0 = TransitionKernel::symmetric(2);
    let law = PerturbationLaw::two_atom_drift();
    let units: Vec<_> = Direction::all(2).map(|e| e.as_point()).collect();
    for eps in [0.05, 0.1, 0.2] {
        let field = EnvironmentField::new(p0.clone(), eps, law.clone(), 1)?;
        let j = PotentialKernelTable::fourier_at(
            &field.p_epsilon(),
            &units,
            QuadratureSpec::new(1024),
        )?;
        let v = velocity_expansion(&p0, &law, eps, &j)?;
        let q = velocity_q_average(&p0, &law, eps, &j)?;
        let mc = velocity_mc(&field, 200_000, 20, 4)?;
        println!(
            "eps {eps}: simulated {:.5} ± {:.5}, expansion {:.5} (d0 {:.3} d1 {:.5} d2 {:.6}), Q-average {:.5}",
            mc.mean[0], mc.stderr[0], v.v[0], v.d0[0], v.d1[0], v.d2[0], q[0]
        );
    }
    Ok(())
}
