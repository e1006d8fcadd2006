//! Cesàro estimate of the environment-viewed-from-the-particle density on a
//! two-site box, next to the first-order prediction.

use rwre_lab::environment::{EnvironmentField, PerturbationLaw};
use rwre_lab::expansion::{required_points, ExpansionPrediction};
use rwre_lab::kernels::{PotentialKernelTable, TransitionKernel};
use rwre_lab::measures::{cesaro_invariant_estimate, default_burn_in};
use rwre_lab::Point;

fn main() -> rwre_lab::Result<()> {
    let eps = 0.1;
    let p0 = TransitionKernel::symmetric(2);
    let law = PerturbationLaw::two_atom_drift();
    let field = EnvironmentField::new(p0.clone(), eps, law.clone(), 5)?;
    let sites = [Point::origin(), Point::new(&[0, 1])];

    let est = cesaro_invariant_estimate(&field, &sites, 1_000_000, default_burn_in(eps), 8, 5)?;
    let pts = required_points(&sites, 2);
    let j = PotentialKernelTable::ssrw_recursion(pts.iter().map(|x| x.linf()).max().unwrap_or(1))?;
    let pred = ExpansionPrediction::new(&sites, &law, eps, &j, "J_{p*_0}")?;
    for (c, cfg) in est.configurations().iter().enumerate() {
        println!(
            "atoms {:?}: ratio {:.4} ± {:.4}, first order {:.4}",
            cfg.atoms, est.ratio[c], est.ratio_stderr[c], pred.density[c]
        );
    }
    est.write_csv(std::io::stdout())?;
    Ok(())
}
