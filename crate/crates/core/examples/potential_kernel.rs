//! Potential kernel of the simple walk on Z² three ways, plus a drifted kernel.

use rwre_lab::kernels::{
    potential_kernel_2d_ssrw, potential_kernel_fourier, potential_kernel_truncated, QuadratureSpec,
    TransitionKernel,
};
use rwre_lab::Point;

fn main() -> rwre_lab::Result<()> {
    let p = TransitionKernel::symmetric(2);
    let quad = QuadratureSpec::new(1024);
    println!(
        "{:>8} {:>16} {:>14} {:>14} {:>14}",
        "x", "exact", "value", "fourier", "truncated"
    );
    for c in [[1, 0], [1, 1], [2, 0], [2, 1], [3, 3]] {
        let x = Point::new(&c);
        let exact = potential_kernel_2d_ssrw(x)?;
        let f = potential_kernel_fourier(&p, x, quad)?;
        let t = potential_kernel_truncated(&p, x, 10_000, 1e-2)?;
        println!(
            "{:>8} {:>16} {:>14.10} {:>14.10} {:>14.10}",
            x.to_string(),
            exact.describe(),
            exact.to_f64(),
            f.value,
            t.value
        );
    }

    // with drift the sum converges geometrically and both methods agree closely
    let q = TransitionKernel::new(2, vec![0.3, 0.2, 0.25, 0.25])?;
    for c in [[1, 0], [-1, 0], [0, 1]] {
        let x = Point::new(&c);
        let f = potential_kernel_fourier(&q, x, quad)?;
        let t = potential_kernel_truncated(&q, x, 10_000, 1e-10)?;
        println!(
            "drifted J({x}) = {:.10} (fourier), {:.10} (sum, tail {:.1e})",
            f.value, t.value, t.tail
        );
    }
    Ok(())
}
