//! Potential kernels `J_{p*}` by truncated sums and Fourier quadrature, and
//! the exportable table type shared by all methods.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nstep::point_probability_series;
use super::ssrw2d::Ssrw2dTable;
use super::TransitionKernel;
use crate::error::{LabError, Result};
use crate::lattice::{cube_points, Point};
use crate::output::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    TruncatedSum,
    Fourier,
    Recursion2d,
}

impl KernelMethod {
    pub fn label(self) -> &'static str {
        match self {
            KernelMethod::TruncatedSum => "truncated-sum",
            KernelMethod::Fourier => "fourier",
            KernelMethod::Recursion2d => "recursion-2d",
        }
    }
}

/// Partial-sum estimate of `J_{p*}(x)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncatedValue {
    /// Average of the last two partial sums.
    pub value: f64,
    /// Tail estimate from the last decade of partial sums.
    pub tail: f64,
    pub n_max: usize,
    /// `tail ≤ tol` for the requested tolerance.
    pub stabilized: bool,
}

/// Safety factor on the decade tail estimate.
const TAIL_SAFETY: f64 = 2.0;

fn truncated_from_series(neg_x: &[f64], origin: &[f64], n_max: usize, tol: f64) -> TruncatedValue {
    let mut partial = Vec::with_capacity(n_max + 1);
    let mut s = 0.0;
    for k in 0..=n_max {
        s += neg_x[k] - origin[k];
        partial.push(s);
    }
    // parity makes consecutive partial sums oscillate; average neighbours
    let avg = |m: usize| {
        if m == 0 {
            partial[0]
        } else {
            0.5 * (partial[m] + partial[m - 1])
        }
    };
    let value = avg(n_max);
    // for a 1/n tail, S(n) - S(n/10) = 9 × tail(n)
    let tail = TAIL_SAFETY * (avg(n_max) - avg(n_max / 10)).abs() / 9.0;
    let stabilized = tail <= tol;
    TruncatedValue {
        value,
        tail,
        n_max,
        stabilized,
    }
}

/// `Σ_{k=0}^{n_max} (p_k(0,-x) - p_k(0,0))` from exact n-step probabilities.
///
/// Logs a warning when the decade tail estimate exceeds `tol`.
pub fn potential_kernel_truncated(
    p: &TransitionKernel,
    x: Point,
    n_max: usize,
    tol: f64,
) -> Result<TruncatedValue> {
    Ok(potential_kernel_truncated_many(p, &[x], n_max, tol)?.remove(0))
}

/// Batch form of [`potential_kernel_truncated`]; shares the origin series.
pub fn potential_kernel_truncated_many(
    p: &TransitionKernel,
    xs: &[Point],
    n_max: usize,
    tol: f64,
) -> Result<Vec<TruncatedValue>> {
    p.require_elliptic("potential_kernel_truncated")?;
    if n_max < 10 {
        return Err(LabError::InvalidArgument(format!(
            "n_max = {n_max} too small for a tail estimate (need ≥ 10)"
        )));
    }
    let origin = point_probability_series(p, Point::origin(), n_max)?;
    let out: Vec<Result<TruncatedValue>> = xs
        .par_iter()
        .map(|&x| {
            let series = if x.is_origin() {
                origin.clone()
            } else {
                point_probability_series(p, -x, n_max)?
            };
            Ok(truncated_from_series(&series, &origin, n_max, tol))
        })
        .collect();
    let out: Vec<TruncatedValue> = out.into_iter().collect::<Result<_>>()?;
    for (x, v) in xs.iter().zip(&out) {
        if !v.stabilized {
            warn!(
                "truncated potential kernel at {x}: tail estimate {:.3e} exceeds tol {:.1e} after {} steps",
                v.tail, tol, n_max
            );
        }
    }
    Ok(out)
}

/// Tensor midpoint grid over `[0, 2π)^d` with Richardson extrapolation between
/// `grid / 2` and `grid` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub grid: usize,
}

impl QuadratureSpec {
    pub fn new(grid: usize) -> Self {
        QuadratureSpec { grid }
    }

    /// 1024 per axis in `d = 2`, 128 in `d = 3`, 32 in `d = 4`.
    pub fn default_for(dim: usize) -> Self {
        let grid = match dim {
            0..=2 => 1024,
            3 => 128,
            _ => 32,
        };
        QuadratureSpec { grid }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FourierValue {
    pub value: f64,
    /// `|I(h) - I(2h)| / 3`, floored at `1e-12`.
    pub error: f64,
    pub coarse: f64,
    pub fine: f64,
}

/// Both integrals on one midpoint grid of `n` nodes per axis, for every point.
fn fourier_grid(p: &TransitionKernel, xs: &[Point], prefactors: &[f64], n: usize) -> Vec<f64> {
    let dim = p.dim();
    let h = 2.0 * PI / n as f64;
    let theta: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let coupling: Vec<f64> = (0..dim)
        .map(|a| 2.0 * (p.probs()[2 * a] * p.probs()[2 * a + 1]).sqrt())
        .collect();
    // per-axis tables: c_a cos θ and e^{i x_a θ} for every point
    let cos_tab: Vec<Vec<f64>> = (0..dim)
        .map(|a| theta.iter().map(|t| coupling[a] * t.cos()).collect())
        .collect();
    let phase: Vec<Vec<Vec<(f64, f64)>>> = xs
        .iter()
        .map(|x| {
            (0..dim)
                .map(|a| {
                    theta
                        .iter()
                        .map(|t| {
                            let arg = x.c[a] as f64 * t;
                            (arg.cos(), arg.sin())
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let npts = xs.len();

    // Tiles are the slices along the first axis; they are reduced in order.
    let tiles: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![0.0; npts];
            let mut re = vec![0.0; npts];
            let mut im = vec![0.0; npts];
            for k in 0..npts {
                re[k] = phase[k][0][i0].0;
                im[k] = phase[k][0][i0].1;
            }
            accumulate(
                1,
                dim,
                n,
                1.0 - cos_tab[0][i0],
                &re,
                &im,
                &cos_tab,
                &phase,
                prefactors,
                &mut acc,
            );
            acc
        })
        .collect();
    let mut total = vec![0.0; npts];
    for t in tiles {
        for k in 0..npts {
            total[k] += t[k];
        }
    }
    let norm = (n as f64).powi(dim as i32);
    total.iter().map(|v| v / norm).collect()
}

#[allow(clippy::too_many_arguments)]
fn accumulate(
    axis: usize,
    dim: usize,
    n: usize,
    denom: f64,
    re: &[f64],
    im: &[f64],
    cos_tab: &[Vec<f64>],
    phase: &[Vec<Vec<(f64, f64)>>],
    prefactors: &[f64],
    acc: &mut [f64],
) {
    let npts = re.len();
    if axis == dim {
        let inv = 1.0 / denom;
        for k in 0..npts {
            // cos(x·θ) = Re Π e^{i x_a θ_a}
            let c = re[k];
            let mut v = (c - 1.0) * inv;
            if prefactors[k] != 0.0 {
                v += prefactors[k] * c * inv;
            }
            acc[k] += v;
        }
        return;
    }
    let mut re2 = vec![0.0; npts];
    let mut im2 = vec![0.0; npts];
    for i in 0..n {
        for k in 0..npts {
            let (c, s) = phase[k][axis][i];
            re2[k] = re[k] * c - im[k] * s;
            im2[k] = re[k] * s + im[k] * c;
        }
        accumulate(
            axis + 1,
            dim,
            n,
            denom - cos_tab[axis][i],
            &re2,
            &im2,
            cos_tab,
            phase,
            prefactors,
            acc,
        );
    }
}

/// `J_{p*}(x)` from the Fourier representation
///
/// ```text
/// (2π)^{-d} [ (Π_j (p(-e_j)/p(e_j))^{x_j/2} - 1) ∫ cos(x·θ)/D  +  ∫ (cos(x·θ) - 1)/D ],
/// D(θ) = 1 - 2 Σ_j sqrt(p(e_j) p(-e_j)) cos θ_j .
/// ```
///
/// The first integral is skipped when its prefactor vanishes (every symmetric
/// kernel), which is also the only case where `D` reaches zero.
pub fn potential_kernel_fourier(
    p: &TransitionKernel,
    x: Point,
    quad: QuadratureSpec,
) -> Result<FourierValue> {
    Ok(potential_kernel_fourier_many(p, &[x], quad)?.remove(0))
}

pub fn potential_kernel_fourier_many(
    p: &TransitionKernel,
    xs: &[Point],
    quad: QuadratureSpec,
) -> Result<Vec<FourierValue>> {
    if p.dim() < 2 {
        return Err(LabError::Dimension(
            "Fourier potential kernel needs d ≥ 2".into(),
        ));
    }
    p.require_elliptic("potential_kernel_fourier")?;
    if quad.grid < 4 || !quad.grid.is_multiple_of(2) {
        return Err(LabError::InvalidArgument(format!(
            "quadrature grid {} must be even and ≥ 4",
            quad.grid
        )));
    }
    for x in xs {
        if !x.fits_dim(p.dim()) {
            return Err(LabError::Dimension(format!(
                "point {x} not in Z^{}",
                p.dim()
            )));
        }
    }
    let prefactors: Vec<f64> = xs
        .iter()
        .map(|x| {
            let mut log = 0.0;
            for a in 0..p.dim() {
                let r = p.probs()[2 * a + 1] / p.probs()[2 * a];
                if r != 1.0 {
                    log += 0.5 * x.c[a] as f64 * r.ln();
                }
            }
            log.exp_m1()
        })
        .collect();
    let fine = fourier_grid(p, xs, &prefactors, quad.grid);
    let coarse = fourier_grid(p, xs, &prefactors, quad.grid / 2);
    Ok(xs
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let (value, error) = if x.is_origin() {
                (0.0, 0.0)
            } else {
                (
                    (4.0 * fine[k] - coarse[k]) / 3.0,
                    ((fine[k] - coarse[k]).abs() / 3.0).max(1e-12),
                )
            };
            FourierValue {
                value,
                error,
                coarse: coarse[k],
                fine: fine[k],
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KernelTableEntry {
    pub x: Point,
    pub value: f64,
    pub tol: f64,
}

/// Values of `J_{p*}` on a set of lattice points.
///
/// `kernel` is the forward kernel `p`; the stored values belong to its
/// reversal `p*` in the sense of the module docs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialKernelTable {
    pub kernel: TransitionKernel,
    pub radius: i64,
    pub method: KernelMethod,
    pub entries: Vec<KernelTableEntry>,
}

impl PotentialKernelTable {
    /// Exact recursion for the simple symmetric walk on `Z^2`.
    pub fn ssrw_recursion(radius: i64) -> Result<Self> {
        let table = Ssrw2dTable::compute(radius)?;
        let entries = cube_points(2, radius)
            .into_iter()
            .map(|x| {
                Ok(KernelTableEntry {
                    x,
                    value: table.value(x)?,
                    tol: 0.0,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PotentialKernelTable {
            kernel: TransitionKernel::symmetric(2),
            radius,
            method: KernelMethod::Recursion2d,
            entries,
        })
    }

    pub fn fourier(p: &TransitionKernel, radius: i64, quad: QuadratureSpec) -> Result<Self> {
        Self::fourier_at(p, &cube_points(p.dim(), radius), quad)
    }

    /// Fourier values at an arbitrary point set.
    pub fn fourier_at(p: &TransitionKernel, xs: &[Point], quad: QuadratureSpec) -> Result<Self> {
        let vals = potential_kernel_fourier_many(p, xs, quad)?;
        Ok(PotentialKernelTable {
            kernel: p.clone(),
            radius: xs.iter().map(|x| x.linf()).max().unwrap_or(0),
            method: KernelMethod::Fourier,
            entries: xs
                .iter()
                .zip(vals)
                .map(|(&x, v)| KernelTableEntry {
                    x,
                    value: v.value,
                    tol: v.error,
                })
                .collect(),
        })
    }

    pub fn truncated(p: &TransitionKernel, radius: i64, n_max: usize, tol: f64) -> Result<Self> {
        let xs = cube_points(p.dim(), radius);
        let vals = potential_kernel_truncated_many(p, &xs, n_max, tol)?;
        Ok(PotentialKernelTable {
            kernel: p.clone(),
            radius,
            method: KernelMethod::TruncatedSum,
            entries: xs
                .iter()
                .zip(vals)
                .map(|(&x, v)| KernelTableEntry {
                    x,
                    value: v.value,
                    tol: v.tail,
                })
                .collect(),
        })
    }

    pub fn reversed_kernel(&self) -> TransitionKernel {
        self.kernel.reversed()
    }

    pub fn entry(&self, x: Point) -> Option<&KernelTableEntry> {
        self.entries.iter().find(|e| e.x == x)
    }

    pub fn get(&self, x: Point) -> Result<f64> {
        self.entry(x)
            .map(|e| e.value)
            .ok_or_else(|| LabError::OutOfTable(format!("{x}")))
    }

    /// CSV with columns `x1..xd, J, method, tol`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.kernel.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        header.extend(["J".into(), "method".into(), "tol".into()]);
        w.write_record(&header)?;
        for e in &self.entries {
            let mut rec: Vec<String> = e.x.coords(dim).iter().map(|v| v.to_string()).collect();
            rec.push(fmt_f64(e.value));
            rec.push(self.method.label().into());
            rec.push(fmt_f64(e.tol));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
