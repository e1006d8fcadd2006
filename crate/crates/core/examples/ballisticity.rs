//! Slab exit test for the polynomial ballisticity condition.

use rwre_lab::environment::{EnvironmentField, PerturbationLaw};
use rwre_lab::kernels::TransitionKernel;
use rwre_lab::measures::{c0_readings, polynomial_condition_check};
use rwre_lab::Direction;

fn main() -> rwre_lab::Result<()> {
    let (c_min, c_max) = c0_readings(2);
    println!("c0 readings in d = 2: {c_min} / {c_max:.1}");
    for eps in [0.0, 0.05, 0.1] {
        let field = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            eps,
            PerturbationLaw::two_atom_drift(),
            1,
        )?;
        let r =
            polynomial_condition_check(&field, Direction::pos(0), 20.0, 2.0, 20_000, 3, 1_000_000)?;
        println!(
            "eps {eps}: back exits {:.4} ± {:.4} (bound {:.4}, holds {}), mean exit time {:.0}",
            r.back_exit_probability, r.stderr, r.bound, r.holds, r.mean_exit_time
        );
    }
    Ok(())
}
