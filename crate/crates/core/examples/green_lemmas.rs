//! The finite-set perturbation inequalities on a few random instances.

use rwre_lab::environment::PerturbationLaw;
use rwre_lab::greenfn::{verify_lemma_bounds, LemmaSpec};
use rwre_lab::kernels::TransitionKernel;

fn main() -> rwre_lab::Result<()> {
    let spec = LemmaSpec {
        p0: TransitionKernel::symmetric(2),
        epsilon: 0.1,
        law: PerturbationLaw::two_atom_drift(),
        delta: 0.9,
        max_sites: 3,
        max_delta: 0.02,
        site_radius: 2,
        check_radius: 3,
        tol: 1e-10,
    };
    let r = verify_lemma_bounds(&spec, 10, 1)?;
    for i in &r.instances {
        println!(
            "#{:<2} |B|={} sup={:.4} ineq={} halving={:?} green3 printed {:.1e} corrected {:.1e}",
            i.index,
            i.n_sites,
            i.sup_delta,
            i.inequalities_hold(),
            i.halving_ratio,
            i.green3.printed_residual,
            i.green3.corrected_residual
        );
    }
    println!(
        "all hold: {}, normalization ok: {}, halving in [{:.3}, {:.3}]",
        r.all_inequalities_hold, r.normalization_ok, r.halving_ratio_min, r.halving_ratio_max
    );
    Ok(())
}
