//! Killed Green function of a quenched environment: exact solve against Monte Carlo.

use rwre_lab::environment::{EnvironmentField, PerturbationLaw};
use rwre_lab::greenfn::{killed_green_exact_growing, killed_green_mc, EnvWindow};
use rwre_lab::kernels::TransitionKernel;
use rwre_lab::Point;

fn main() -> rwre_lab::Result<()> {
    let field = EnvironmentField::new(
        TransitionKernel::symmetric(2),
        0.1,
        PerturbationLaw::two_atom_drift(),
        3,
    )?;
    let delta = 0.9;
    let o = Point::origin();
    let targets: Vec<Point> = [[0, 0], [1, 0], [-1, 0], [0, 1], [2, 0]]
        .iter()
        .map(|c| Point::new(c))
        .collect();

    let exact = killed_green_exact_growing(
        |r| EnvWindow::from_field(&field, o, r),
        40,
        320,
        delta,
        &[o],
        1e-10,
    )?;
    let mc = killed_green_mc(&field, delta, o, &targets, 200_000, 11)?;
    println!("{:>8} {:>12} {:>12} {:>10}", "y", "exact", "mc", "stderr");
    for y in &targets {
        println!(
            "{:>8} {:>12.6} {:>12.6} {:>10.1e}",
            y.to_string(),
            exact.get(o, *y)?,
            mc.get(o, *y)?,
            mc.uncertainty(o, *y)?
        );
    }
    println!(
        "row sum excess over 1/(1-delta): {:.2e}",
        exact.normalization_excess()
    );
    Ok(())
}
