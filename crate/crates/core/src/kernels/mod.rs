//! Nearest-neighbour transition kernels and their potential kernels.
//!
//! For a kernel `p` the potential kernel of the reversed walk is
//!
//! ```text
//! J_{p*}(x) = lim_n Σ_{k=0}^{n} ( p_k(0,-x) - p_k(0,0) )
//! ```
//!
//! where `p_k` are the n-step probabilities of the *forward* kernel `p`.
//! Every routine here takes the forward kernel and returns `J_{p*}`; in the
//! two-dimensional recurrent case this is minus the classical potential kernel.
//!
//! Three independent evaluation routes exist: a truncated partial sum of exact
//! n-step probabilities, a tensor-grid Fourier quadrature, and (for the simple
//! symmetric walk in `d = 2`) an exact recursion in `Q + Q/π`.

mod nstep;
mod potential;
mod ssrw2d;

pub use nstep::{nstep_probability, point_probability_series, NStepTable};
pub use potential::{
    potential_kernel_fourier, potential_kernel_fourier_many, potential_kernel_truncated,
    potential_kernel_truncated_many, FourierValue, KernelMethod, KernelTableEntry,
    PotentialKernelTable, QuadratureSpec, TruncatedValue,
};
pub use ssrw2d::{potential_kernel_2d_ssrw, ExactKernelValue, Ssrw2dTable};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{Direction, Point, MAX_DIM};

/// Tolerance on `Σ_e p(e) = 1`.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// One-step probabilities `p(e)` over the `2d` unit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    dim: usize,
    probs: Vec<f64>,
}

impl TransitionKernel {
    /// `probs` uses the canonical direction order `e_1, -e_1, e_2, -e_2, ...`.
    pub fn new(dim: usize, probs: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::Dimension(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if probs.len() != 2 * dim {
            return Err(LabError::InvalidKernel(format!(
                "expected {} probabilities, got {}",
                2 * dim,
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(LabError::InvalidKernel(format!(
                "negative or non-finite entry {bad}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(LabError::InvalidKernel(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(TransitionKernel { dim, probs })
    }

    /// Simple symmetric walk, `p(e) = 1/(2d)`.
    pub fn symmetric(dim: usize) -> Self {
        Self::new(dim, vec![1.0 / (2 * dim) as f64; 2 * dim]).expect("symmetric kernel is valid")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn prob(&self, dir: Direction) -> f64 {
        self.probs[dir.index()]
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Membership in `P_0`: every direction has positive probability.
    pub fn is_strictly_elliptic(&self) -> bool {
        self.min_prob() > 0.0
    }

    /// `p(e) = p(-e)` for every axis.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|a| self.probs[2 * a] == self.probs[2 * a + 1])
    }

    /// Mean displacement `Σ_e e p(e)`.
    pub fn drift(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.probs[2 * a] - self.probs[2 * a + 1])
            .collect()
    }

    pub fn directions(&self) -> impl Iterator<Item = Direction> + Clone {
        Direction::all(self.dim)
    }

    /// `p*(e) = p(-e)`.
    pub fn reversed(&self) -> TransitionKernel {
        let mut probs = self.probs.clone();
        for a in 0..self.dim {
            probs.swap(2 * a, 2 * a + 1);
        }
        TransitionKernel {
            dim: self.dim,
            probs,
        }
    }

    pub(crate) fn require_elliptic(&self, what: &str) -> Result<()> {
        if self.is_strictly_elliptic() {
            Ok(())
        } else {
            Err(LabError::InvalidKernel(format!(
                "{what} requires a strictly elliptic kernel (min p = {})",
                self.min_prob()
            )))
        }
    }
}

/// The kernel of the time-reversed walk.
pub fn reverse_kernel(p: &TransitionKernel) -> TransitionKernel {
    p.reversed()
}

/// `Π_i ( sqrt(p(-e_i)/p(e_i)) )^{v_i}`.
pub fn phi_eps(p: &TransitionKernel, v: Point) -> Result<f64> {
    p.require_elliptic("phi_eps")?;
    if !v.fits_dim(p.dim()) {
        return Err(LabError::Dimension(format!(
            "point {v} not in Z^{}",
            p.dim()
        )));
    }
    let mut out = 1.0;
    for axis in 0..p.dim() {
        let ratio = (p.probs[2 * axis + 1] / p.probs[2 * axis]).sqrt();
        out *= ratio.powi(v.c[axis] as i32);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kernel_strategy(dim: usize) -> impl Strategy<Value = TransitionKernel> {
        proptest::collection::vec(0.05f64..1.0, 2 * dim).prop_map(move |w| {
            let s: f64 = w.iter().sum();
            let mut probs: Vec<f64> = w.iter().map(|x| x / s).collect();
            // Absorb rounding so the sum check is exact enough.
            let head: f64 = probs[1..].iter().sum();
            probs[0] = 1.0 - head;
            TransitionKernel::new(dim, probs).unwrap()
        })
    }

    #[test]
    fn rejects_bad_kernels() {
        assert!(TransitionKernel::new(2, vec![0.5, 0.5, 0.1]).is_err());
        assert!(TransitionKernel::new(1, vec![0.7, 0.4]).is_err());
        assert!(TransitionKernel::new(1, vec![1.1, -0.1]).is_err());
        assert!(TransitionKernel::new(0, vec![]).is_err());
    }

    #[test]
    fn ellipticity_flag() {
        let k = TransitionKernel::new(1, vec![1.0, 0.0]).unwrap();
        assert!(!k.is_strictly_elliptic());
        assert!(TransitionKernel::symmetric(3).is_strictly_elliptic());
    }

    #[test]
    fn reverse_of_symmetric_is_fixed() {
        let k = TransitionKernel::symmetric(2);
        assert_eq!(reverse_kernel(&k), k);
    }

    #[test]
    fn reverse_swaps_one_dimensional_kernel() {
        let k = TransitionKernel::new(1, vec![0.7, 0.3]).unwrap();
        let r = reverse_kernel(&k);
        assert_eq!(r.probs(), &[0.3, 0.7]);
    }

    #[test]
    fn phi_eps_examples() {
        let sym = TransitionKernel::symmetric(2);
        assert_eq!(phi_eps(&sym, Point::new(&[3, -2])).unwrap(), 1.0);
        let k = TransitionKernel::new(2, vec![0.36, 0.16, 0.24, 0.24]).unwrap();
        assert_eq!(phi_eps(&k, Point::origin()).unwrap(), 1.0);
        let v = phi_eps(&k, Point::new(&[2, 0])).unwrap();
        assert!((v - 4.0 / 9.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn reversal_is_an_involution(k in kernel_strategy(3)) {
            prop_assert_eq!(reverse_kernel(&reverse_kernel(&k)), k.clone());
            for d in k.directions() {
                prop_assert_eq!(reverse_kernel(&k).prob(d), k.prob(-d));
            }
        }

        #[test]
        fn phi_eps_is_multiplicative(k in kernel_strategy(2),
                                      u in proptest::collection::vec(-6i64..6, 2),
                                      v in proptest::collection::vec(-6i64..6, 2)) {
            let pu = Point::new(&u);
            let pv = Point::new(&v);
            let lhs = phi_eps(&k, pu + pv).unwrap();
            let rhs = phi_eps(&k, pu).unwrap() * phi_eps(&k, pv).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
