//! Closed-form low-disorder predictions: the first-order density of the
//! invariant measure on a box, its two-dimensional specialisation, the
//! velocity expansion, and the `ε → 0` behaviour of `J_{p*_ε}`.
//!
//! All potential kernel tables hold `J_{p*}` for their forward kernel `p`, see
//! [`crate::kernels`].

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::environment::{p_epsilon_of, PerturbationLaw};
use crate::error::{LabError, Result};
use crate::kernels::{
    potential_kernel_fourier, PotentialKernelTable, QuadratureSpec, TransitionKernel,
};
use crate::lattice::{Direction, Point};
use crate::measures::{enumerate_configurations, BoxConfiguration};
use crate::output::fmt_f64;

/// `1 + ε Σ_{z∈B} Σ_e ξ̄(z,e) J(z+e)` for one box configuration.
pub fn density_first_order(
    config: &BoxConfiguration,
    law: &PerturbationLaw,
    epsilon: f64,
    j: &PotentialKernelTable,
) -> Result<f64> {
    let dim = law.dim();
    if j.kernel.dim() != dim {
        return Err(LabError::Dimension(
            "kernel table and law disagree on d".into(),
        ));
    }
    let mut s = 0.0;
    for (z, &atom) in config.sites.iter().zip(&config.atoms) {
        let xb = law.xi_bar(atom);
        for e in Direction::all(dim) {
            let v = xb[e.index()];
            if v != 0.0 {
                s += v * j.get(z.step(e))?;
            }
        }
    }
    Ok(1.0 + epsilon * s)
}

/// Points `z + e` a table must cover for a box.
pub fn required_points(sites: &[Point], dim: usize) -> Vec<Point> {
    let mut pts: Vec<Point> = sites
        .iter()
        .flat_map(|z| Direction::all(dim).map(move |e| z.step(e)))
        .collect();
    pts.sort_by_key(|p| p.c);
    pts.dedup();
    pts
}

/// First-order densities for every configuration of a box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionPrediction {
    pub sites: Vec<Point>,
    pub n_atoms: usize,
    pub epsilon: f64,
    pub order: String,
    /// Which potential kernel was used, e.g. `J_{p*_eps}`.
    pub kernel_ref: String,
    pub p: Vec<f64>,
    pub density: Vec<f64>,
}

impl ExpansionPrediction {
    pub fn new(
        sites: &[Point],
        law: &PerturbationLaw,
        epsilon: f64,
        j: &PotentialKernelTable,
        kernel_ref: &str,
    ) -> Result<Self> {
        let configs = enumerate_configurations(sites, law)?;
        let density = configs
            .iter()
            .map(|c| density_first_order(c, law, epsilon, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpansionPrediction {
            sites: sites.to_vec(),
            n_atoms: law.n_atoms(),
            epsilon,
            order: "first".into(),
            kernel_ref: kernel_ref.into(),
            p: configs.iter().map(|c| c.probability(law)).collect(),
            density,
        })
    }

    /// `Σ_c P_B(c) · density(c)`, which is 1 up to rounding.
    pub fn p_average(&self) -> f64 {
        self.p.iter().zip(&self.density).map(|(p, d)| p * d).sum()
    }

    /// CSV columns `configuration_id, atom_1..atom_n, P, predicted`, joinable
    /// with the density estimate export.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["configuration_id".to_string()];
        header.extend((1..=self.sites.len()).map(|i| format!("atom_{i}")));
        header.extend(["P", "predicted"].map(String::from));
        w.write_record(&header)?;
        for (id, (p, d)) in self.p.iter().zip(&self.density).enumerate() {
            let c = BoxConfiguration::from_id(&self.sites, self.n_atoms, id);
            let mut rec = vec![id.to_string()];
            rec.extend(c.atoms.iter().map(|a| a.to_string()));
            rec.extend([fmt_f64(*p), fmt_f64(*d)]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Density on `B = {0, z₁}`, `z₁ = (0,1)`, for the symmetric walk on `Z²`:
/// `1 - (4/π)(ξ̄(z₁,e₁) + ξ̄(z₁,-e₁)) ε + (8/π - 4) ξ̄(z₁,e₂) ε`.
///
/// `xi_bar_z1` is ordered `(e₁, -e₁, e₂, -e₂)`. The `-e₂` term is absent
/// because `J(0) = 0`, and the site `0` drops out because `J(±e_i) = -1` and
/// `ξ̄(0,·)` sums to zero.
pub fn corollary2_density(xi_bar_z1: &[f64], epsilon: f64) -> Result<f64> {
    if xi_bar_z1.len() != 4 {
        return Err(LabError::Dimension(format!(
            "expected 4 direction values in d = 2, got {}",
            xi_bar_z1.len()
        )));
    }
    Ok(1.0 - 4.0 / PI * (xi_bar_z1[0] + xi_bar_z1[1]) * epsilon
        + (8.0 / PI - 4.0) * xi_bar_z1[2] * epsilon)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VelocityPrediction {
    pub epsilon: f64,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    /// `Σ_{e,e'} e' C_{e',e} J(e)`.
    pub d2: Vec<f64>,
    pub v: Vec<f64>,
}

/// `v = d₀ + ε d₁ + ε² d₂` with `J` read at the unit vectors of `j_ref`
/// (normally `J_{p*_ε}`).
pub fn velocity_expansion(
    p0: &TransitionKernel,
    law: &PerturbationLaw,
    epsilon: f64,
    j_ref: &PotentialKernelTable,
) -> Result<VelocityPrediction> {
    let dim = p0.dim();
    if law.dim() != dim {
        return Err(LabError::Dimension("kernel and law disagree on d".into()));
    }
    let d0 = p0.drift();
    let d1 = law.mean_drift();
    let cov = law.covariance();
    let mut d2 = vec![0.0; dim];
    for e in Direction::all(dim) {
        let je = j_ref.get(e.as_point())?;
        for ep in Direction::all(dim) {
            d2[ep.axis()] += ep.sign() as f64 * cov[ep.index()][e.index()] * je;
        }
    }
    let v = (0..dim)
        .map(|a| d0[a] + epsilon * d1[a] + epsilon * epsilon * d2[a])
        .collect();
    Ok(VelocityPrediction {
        epsilon,
        d0,
        d1,
        d2,
        v,
    })
}

/// Brute-force `Σ_i w_i d(ω_i) · (1 + ε Σ_e ξ̄_i(e) J(e))`: the local drift
/// at the origin integrated against the one-site first-order density.
pub fn velocity_q_average(
    p0: &TransitionKernel,
    law: &PerturbationLaw,
    epsilon: f64,
    j_ref: &PotentialKernelTable,
) -> Result<Vec<f64>> {
    let dim = p0.dim();
    let origin = [Point::origin()];
    let mut v = vec![0.0; dim];
    for c in enumerate_configurations(&origin, law)? {
        let atom = c.atoms[0];
        let rho = density_first_order(&c, law, epsilon, j_ref)?;
        let xi = law.atom(atom);
        for e in Direction::all(dim) {
            let step = p0.prob(e) + epsilon * xi[e.index()];
            v[e.axis()] += law.weight(atom) * rho * e.sign() as f64 * step;
        }
    }
    Ok(v)
}

/// Rate family for `|J_{p*_ε}(x) - J_{p*₀}(x)|` as `ε → 0`.
///
/// Only the factor `Π_j r_j^{x_j/2}`, `r_j = p(-e_j)/p(e_j)`, moves at first
/// order in `ε`; when `x` has no component along the mean drift of the law the
/// leading term cancels and the gap is one order smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapModel {
    /// `x` sees no change of the kernel (zero-mean law, or `x = 0`).
    Zero,
    /// `d = 2`, symmetric `p₀`, `x` along the drift.
    EpsLogEps,
    /// `d = 2`, symmetric `p₀`, `x` orthogonal to the drift.
    EpsSqLogEps,
    Linear,
    Quadratic,
}

impl GapModel {
    pub fn select(p0: &TransitionKernel, law: &PerturbationLaw, x: Point) -> Self {
        let drift = law.mean_drift();
        let along: f64 = (0..p0.dim()).map(|a| x.c[a] as f64 * drift[a]).sum();
        let zero_mean = law.mean().iter().all(|m| m.abs() < 1e-15);
        if zero_mean || x.is_origin() {
            GapModel::Zero
        } else if !p0.is_symmetric() {
            GapModel::Linear
        } else if p0.dim() == 2 {
            if along != 0.0 {
                GapModel::EpsLogEps
            } else {
                GapModel::EpsSqLogEps
            }
        } else if along != 0.0 {
            GapModel::Linear
        } else {
            GapModel::Quadratic
        }
    }

    /// The rate function up to a constant.
    pub fn rate(self, epsilon: f64) -> f64 {
        match self {
            GapModel::Zero => 0.0,
            GapModel::EpsLogEps => -epsilon * epsilon.ln(),
            GapModel::EpsSqLogEps => -epsilon * epsilon * epsilon.ln(),
            GapModel::Linear => epsilon,
            GapModel::Quadratic => epsilon * epsilon,
        }
    }

    /// Predicted `gap(a) / gap(b)`.
    pub fn ratio(self, a: f64, b: f64) -> f64 {
        self.rate(a) / self.rate(b)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelGap {
    pub epsilon: f64,
    pub x: Point,
    pub j_epsilon: f64,
    pub j_zero: f64,
    pub gap: f64,
    /// Sum of the two quadrature error estimates.
    pub error: f64,
    pub model: GapModel,
}

/// `|J_{p*_ε}(x) - J_{p*₀}(x)|` by Fourier quadrature of both kernels.
pub fn j_epsilon_vs_j0_gap(
    p0: &TransitionKernel,
    law: &PerturbationLaw,
    epsilon: f64,
    x: Point,
    quad: QuadratureSpec,
) -> Result<KernelGap> {
    let pe = p_epsilon_of(p0, law, epsilon)?;
    let a = potential_kernel_fourier(&pe, x, quad)?;
    let b = potential_kernel_fourier(p0, x, quad)?;
    Ok(KernelGap {
        epsilon,
        x,
        j_epsilon: a.value,
        j_zero: b.value,
        gap: (a.value - b.value).abs(),
        error: a.error + b.error,
        model: GapModel::select(p0, law, x),
    })
}

/// Measured halving ratios of the gap against the selected rate model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapRateFit {
    pub model: GapModel,
    pub gaps: Vec<KernelGap>,
    /// `(ε, gap(ε)/gap(ε'), model ratio)` for each consecutive pair `ε, ε'`.
    pub ratios: Vec<(f64, f64, f64)>,
    /// Largest `|measured/model - 1|`.
    pub max_relative_deviation: f64,
}

/// Gaps at each `ε` in `eps` (expected to halve successively).
pub fn j_gap_rate_fit(
    p0: &TransitionKernel,
    law: &PerturbationLaw,
    x: Point,
    eps: &[f64],
    quad: QuadratureSpec,
) -> Result<GapRateFit> {
    if eps.len() < 2 {
        return Err(LabError::InvalidArgument(
            "need at least two ε values".into(),
        ));
    }
    let gaps = eps
        .iter()
        .map(|&e| j_epsilon_vs_j0_gap(p0, law, e, x, quad))
        .collect::<Result<Vec<_>>>()?;
    let model = GapModel::select(p0, law, x);
    let ratios: Vec<(f64, f64, f64)> = gaps
        .windows(2)
        .map(|w| {
            (
                w[0].epsilon,
                w[0].gap / w[1].gap,
                model.ratio(w[0].epsilon, w[1].epsilon),
            )
        })
        .collect();
    let max_relative_deviation = ratios
        .iter()
        .map(|(_, r, p)| (r / p - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(GapRateFit {
        model,
        gaps,
        ratios,
        max_relative_deviation,
    })
}
