//! Killed Green functions `g_δ^ω(x,y)`: the expected number of visits to `y`
//! before an independent killing time `τ_δ` with `P(τ = n) = (1-δ) δ^{n-1}`.
//!
//! Exact rows come from a truncated Neumann series with a rigorous error
//! bound; Monte Carlo rows from quenched trajectories. The [`lemmas`] module
//! checks the finite-set perturbation inequalities on random instances.

mod exact;
pub mod lemmas;
mod mc;
mod table;
mod window;

pub use exact::{
    killed_green_exact, killed_green_exact_growing, suggested_radius, truncation_length,
};
pub use lemmas::{
    balance_residual, first_order_green_prediction, green3_residuals, verify_lemma_bounds,
    FirstOrderPrediction, Green3Residuals, InstanceReport, LemmaReport, LemmaSpec,
};
pub(crate) use mc::geometric;
pub use mc::{killed_green_mc, killing_time};
pub use table::{GreenMode, GreenRow, KilledGreenTable};
pub use window::{perturb_environment, EnvWindow, FinitePerturbation};
