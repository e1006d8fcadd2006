//! The Kalikow quantity J_δ approaching the potential kernel of p_ε as δ → 1.

use rwre_lab::environment::{EnvironmentField, PerturbationLaw};
use rwre_lab::kernels::{potential_kernel_fourier, QuadratureSpec, TransitionKernel};
use rwre_lab::measures::kalikow_j_delta;
use rwre_lab::{Direction, Point};

fn main() -> rwre_lab::Result<()> {
    let field = EnvironmentField::new(
        TransitionKernel::symmetric(2),
        0.05,
        PerturbationLaw::two_atom_drift(),
        2,
    )?;
    let a = [Point::origin(), Point::new(&[1, 0])];
    let (z, e) = (Point::new(&[1, 0]), Direction::pos(1));
    let limit =
        potential_kernel_fourier(&field.p_epsilon(), z.step(e), QuadratureSpec::new(1024))?.value;
    for (delta, tol) in [(0.8, 1e-5), (0.9, 1e-4), (0.95, 1e-3)] {
        let k = kalikow_j_delta(&field, delta, Point::origin(), z, e, &a, 6, tol, 8)?;
        println!(
            "delta {delta}: J_delta = {:.4} ± {:.4} (limit {limit:.4})",
            k.value, k.stderr
        );
    }
    Ok(())
}
