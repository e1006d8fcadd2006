//! The named recipes. Each returns a typed report that knows how to grade
//! itself against the acceptance criteria and how to write its artifacts.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::ExperimentManifest;
use super::scaling::{residual_scaling_report, ResidualPoint, ScalingReport};
use crate::environment::EnvironmentField;
use crate::error::Result;
use crate::expansion::{
    required_points, velocity_expansion, velocity_q_average, ExpansionPrediction,
    VelocityPrediction,
};
use crate::greenfn::{verify_lemma_bounds, LemmaReport, LemmaSpec};
use crate::kernels::{
    potential_kernel_fourier, potential_kernel_truncated_many, KernelMethod, KernelTableEntry,
    PotentialKernelTable, QuadratureSpec, TransitionKernel,
};
use crate::lattice::{cube_points, Direction, Point};
use crate::measures::{
    cesaro_invariant_estimate, default_burn_in, identity_check, kalikow_j_delta_batch,
    mu_delta_estimate_detailed, polynomial_condition_check, velocity_mc, BallisticityReport,
    CylinderFunction, DensityEstimate, IdentityReport, KalikowEstimate, MuDeltaEstimate,
    VelocityEstimate,
};
use crate::output::{create_file, fmt_f64, write_json};
use crate::seeds::{derive_seed, stream};

/// Graded outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub passed: bool,
    /// The statistic compared against `threshold` (criterion specific).
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: &str, passed: bool, statistic: f64, threshold: f64, detail: String) -> Self {
        CriterionResult {
            id: id.into(),
            passed,
            statistic,
            threshold,
            detail,
        }
    }
}

/// Independent seed for the `i`-th sub-experiment of a recipe.
pub fn sub_seed(master: u64, i: u64) -> u64 {
    derive_seed(master, stream::RECIPE, i)
}

fn is_ssrw2d(p: &TransitionKernel) -> bool {
    p.dim() == 2 && p.probs().iter().all(|v| *v == 0.25)
}

/// `J_{p*}` on `pts`: the exact recursion for the simple walk in `d = 2`,
/// Fourier quadrature otherwise.
pub fn j_table_for(
    p: &TransitionKernel,
    pts: &[Point],
    quad: QuadratureSpec,
) -> Result<PotentialKernelTable> {
    if is_ssrw2d(p) {
        PotentialKernelTable::ssrw_recursion(pts.iter().map(|x| x.linf()).max().unwrap_or(0))
    } else {
        PotentialKernelTable::fourier_at(p, pts, quad)
    }
}

/// Closed-form values of `J` for the simple symmetric walk on `Z²` on the
/// points `|x|_1 ≤ 2`.
pub fn ssrw_reference_values() -> Vec<(Point, f64)> {
    let mut out = vec![(Point::origin(), 0.0)];
    for e in Direction::all(2) {
        out.push((e.as_point(), -1.0));
        out.push((e.as_point() + e.as_point(), 8.0 / PI - 4.0));
    }
    for (a, b) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
        out.push((Point::new(&[a, b]), -4.0 / PI));
    }
    out
}

// ---------------------------------------------------------------- kernel-table

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelComparison {
    pub x: Point,
    pub recursion: Option<f64>,
    pub fourier: f64,
    pub fourier_tol: f64,
    pub truncated: f64,
    pub truncated_tol: f64,
    /// Largest `|a - b| - tol_a - tol_b` over the available method pairs.
    pub worst_excess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelTableReport {
    pub recursion: Option<PotentialKernelTable>,
    pub fourier: PotentialKernelTable,
    pub truncated: PotentialKernelTable,
    pub comparisons: Vec<KernelComparison>,
}

/// Truncated sums evaluated once per symmetry class of the kernel.
fn truncated_by_sector(
    p: &TransitionKernel,
    radius: i64,
    n_max: usize,
    tol: f64,
) -> Result<PotentialKernelTable> {
    let dim = p.dim();
    let all_equal = p.probs().iter().all(|v| *v == p.probs()[0]);
    let rep = |x: Point| -> Point {
        if !p.is_symmetric() {
            return x;
        }
        let mut c: Vec<i64> = (0..dim).map(|a| x.c[a].abs()).collect();
        if all_equal {
            c.sort_unstable_by(|a, b| b.cmp(a));
        }
        Point::new(&c)
    };
    let xs = cube_points(dim, radius);
    let mut reps: Vec<Point> = xs.iter().map(|x| rep(*x)).collect();
    reps.sort_by_key(|r| r.c);
    reps.dedup();
    let vals = potential_kernel_truncated_many(p, &reps, n_max, tol)?;
    let entries = xs
        .iter()
        .map(|x| {
            let i = reps
                .iter()
                .position(|r| *r == rep(*x))
                .expect("representative computed");
            KernelTableEntry {
                x: *x,
                value: vals[i].value,
                tol: vals[i].tail,
            }
        })
        .collect();
    Ok(PotentialKernelTable {
        kernel: p.clone(),
        radius,
        method: KernelMethod::TruncatedSum,
        entries,
    })
}

pub fn kernel_table(m: &ExperimentManifest) -> Result<KernelTableReport> {
    let p = m.p0_kernel()?;
    let recursion = if is_ssrw2d(&p) {
        Some(PotentialKernelTable::ssrw_recursion(m.radius)?)
    } else {
        None
    };
    let fourier = PotentialKernelTable::fourier(&p, m.radius, QuadratureSpec::new(m.quad_grid))?;
    let truncated = truncated_by_sector(&p, m.radius, m.n_max, m.tol)?;
    let comparisons = fourier
        .entries
        .iter()
        .zip(&truncated.entries)
        .map(|(f, t)| {
            let r = recursion
                .as_ref()
                .and_then(|r| r.entry(f.x).map(|e| e.value));
            // floating-point allowance on top of the stated tolerances
            let slack = 1e-12;
            let mut worst = (f.value - t.value).abs() - f.tol - t.tol - slack;
            if let Some(r) = r {
                worst = worst
                    .max((r - f.value).abs() - f.tol - slack)
                    .max((r - t.value).abs() - t.tol - slack);
            }
            KernelComparison {
                x: f.x,
                recursion: r,
                fourier: f.value,
                fourier_tol: f.tol,
                truncated: t.value,
                truncated_tol: t.tol,
                worst_excess: worst,
            }
        })
        .collect();
    Ok(KernelTableReport {
        recursion,
        fourier,
        truncated,
        comparisons,
    })
}

impl KernelTableReport {
    pub fn criteria(&self) -> Vec<CriterionResult> {
        let c1 = match &self.recursion {
            None => CriterionResult::new(
                "C1",
                false,
                f64::NAN,
                1e-9,
                "the closed-form table needs the simple symmetric walk on Z^2".into(),
            ),
            Some(rec) => {
                let mut rec_err: f64 = 0.0;
                let mut four_err: f64 = 0.0;
                for (x, exact) in ssrw_reference_values() {
                    rec_err = rec_err.max(rec.get(x).map_or(f64::INFINITY, |v| (v - exact).abs()));
                    four_err = four_err.max(
                        self.fourier
                            .get(x)
                            .map_or(f64::INFINITY, |v| (v - exact).abs()),
                    );
                }
                CriterionResult::new(
                    "C1",
                    rec_err <= 1e-9 && four_err <= 1e-4,
                    rec_err,
                    1e-9,
                    format!("recursion max error {rec_err:.3e} (≤ 1e-9), fourier max error {four_err:.3e} (≤ 1e-4)"),
                )
            }
        };
        let worst = self
            .comparisons
            .iter()
            .map(|c| c.worst_excess)
            .fold(f64::NEG_INFINITY, f64::max);
        let c2 = CriterionResult::new(
            "C2",
            worst <= 0.0,
            worst,
            0.0,
            format!(
                "{} points, worst |a-b| - tol_a - tol_b = {worst:.3e}{}",
                self.comparisons.len(),
                if self.recursion.is_none() {
                    " (fourier vs truncated only)"
                } else {
                    ""
                }
            ),
        );
        vec![c1, c2]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<String>> {
        let mut out = Vec::new();
        if let Some(r) = &self.recursion {
            r.save_csv(&dir.join("kernel_recursion.csv"))?;
            out.push("kernel_recursion.csv".into());
        }
        self.fourier.save_csv(&dir.join("kernel_fourier.csv"))?;
        self.truncated.save_csv(&dir.join("kernel_truncated.csv"))?;
        out.extend(["kernel_fourier.csv".into(), "kernel_truncated.csv".into()]);
        let dim = self.fourier.kernel.dim();
        let mut w = csv::Writer::from_writer(create_file(&dir.join("kernel_comparison.csv"))?);
        let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        header.extend(
            [
                "recursion",
                "fourier",
                "fourier_tol",
                "truncated",
                "truncated_tol",
                "worst_excess",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for c in &self.comparisons {
            let mut rec: Vec<String> = c.x.coords(dim).iter().map(|v| v.to_string()).collect();
            rec.push(c.recursion.map_or(String::new(), fmt_f64));
            rec.extend(
                [
                    c.fourier,
                    c.fourier_tol,
                    c.truncated,
                    c.truncated_tol,
                    c.worst_excess,
                ]
                .map(fmt_f64),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        out.push("kernel_comparison.csv".into());
        Ok(out)
    }
}

// ----------------------------------------------------------- corollary2-verify

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corollary2Point {
    pub epsilon: f64,
    pub burn_in: u64,
    pub seed: u64,
    /// Estimate on `{0, z₁}` and its two one-site marginals.
    pub joint: DensityEstimate,
    pub z1: DensityEstimate,
    pub origin: DensityEstimate,
    /// First-order predictions with `J_{p*₀}` on each box.
    pub joint_prediction: ExpansionPrediction,
    pub z1_prediction: ExpansionPrediction,
    pub origin_prediction: ExpansionPrediction,
    /// Same on `{z₁}` with `J_{p*_ε}`.
    pub z1_prediction_eps: ExpansionPrediction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corollary2Report {
    pub epsilon_target: f64,
    pub n_replicas: u64,
    pub points: Vec<Corollary2Point>,
    /// Configuration of `{z₁}` used for the scaling fit.
    pub scaling_configuration: usize,
    pub scaling: ScalingReport,
}

pub fn corollary2_verify(m: &ExperimentManifest) -> Result<Corollary2Report> {
    let p0 = m.p0_kernel()?;
    let law = m.law()?;
    let quad = QuadratureSpec::new(m.quad_grid);
    let z1 = m.box_sites[1];
    let j0 = j_table_for(&p0, &required_points(&m.box_sites, p0.dim()), quad)?;
    let mut points = Vec::new();
    for (i, &eps) in m.epsilons.iter().enumerate() {
        let field = m.field(eps)?;
        let burn_in = m.burn_in.unwrap_or_else(|| default_burn_in(eps));
        let seed = sub_seed(m.seed(), i as u64);
        log::info!(
            "corollary2: ε = {eps}, {} replicas × {} steps",
            m.n_replicas,
            m.n_steps
        );
        let joint = cesaro_invariant_estimate(
            &field,
            &m.box_sites,
            m.n_steps,
            burn_in,
            m.n_replicas,
            seed,
        )?;
        let je = PotentialKernelTable::fourier_at(
            &field.p_epsilon(),
            &required_points(&[z1], p0.dim()),
            quad,
        )?;
        points.push(Corollary2Point {
            epsilon: eps,
            burn_in,
            seed,
            z1: joint.marginal(&[1], &law)?,
            origin: joint.marginal(&[0], &law)?,
            joint,
            joint_prediction: ExpansionPrediction::new(&m.box_sites, &law, eps, &j0, "J_{p*_0}")?,
            z1_prediction: ExpansionPrediction::new(&[z1], &law, eps, &j0, "J_{p*_0}")?,
            origin_prediction: ExpansionPrediction::new(
                &[Point::origin()],
                &law,
                eps,
                &j0,
                "J_{p*_0}",
            )?,
            z1_prediction_eps: ExpansionPrediction::new(&[z1], &law, eps, &je, "J_{p*_eps}")?,
        });
    }
    // the configuration with the largest first-order effect
    let first = &points[0].z1_prediction;
    let cfg = (0..first.density.len())
        .max_by(|a, b| {
            (first.density[*a] - 1.0)
                .abs()
                .total_cmp(&(first.density[*b] - 1.0).abs())
        })
        .unwrap_or(0);
    let residuals: Vec<ResidualPoint> = points
        .iter()
        .map(|p| ResidualPoint {
            epsilon: p.epsilon,
            measured: p.z1.ratio[cfg],
            stderr: p.z1.ratio_stderr[cfg],
            predicted: p.z1_prediction.density[cfg],
        })
        .collect();
    Ok(Corollary2Report {
        epsilon_target: m.epsilon_target,
        n_replicas: m.n_replicas,
        points,
        scaling_configuration: cfg,
        scaling: residual_scaling_report(&residuals)?,
    })
}

impl Corollary2Report {
    pub fn target(&self) -> &Corollary2Point {
        self.points
            .iter()
            .find(|p| p.epsilon == self.epsilon_target)
            .expect("validated manifest contains the target ε")
    }

    pub fn criteria(&self) -> Vec<CriterionResult> {
        let t = self.target();
        let eps = t.epsilon;
        let floor3 = 0.3 * eps * eps * eps.ln().abs();
        let mut worst3 = f64::NEG_INFINITY;
        for c in 0..t.z1.ratio.len() {
            let dev = (t.z1.ratio[c] - t.z1_prediction.density[c]).abs();
            worst3 = worst3.max(dev - (4.0 * t.z1.ratio_stderr[c]).max(floor3));
        }
        let enough = t.z1.total >= 10_000_000 && self.n_replicas >= 20;
        let slope_ok = self.scaling.slope().is_none_or(|s| s >= 1.5);
        let slope_txt = match self.scaling.slope() {
            Some(s) => format!("fitted slope {s:.3}"),
            None => "slope noise-limited".into(),
        };
        let c3 = CriterionResult::new(
            "C3",
            worst3 <= 0.0 && enough && slope_ok,
            worst3,
            0.0,
            format!(
                "ε = {eps}: worst |ratio - prediction| - max(4 se, {floor3:.3e}) = {worst3:.3e}; \
                 {} recorded steps over {} replicas; {slope_txt}",
                t.z1.total, self.n_replicas
            ),
        );
        let floor4 = eps.powf(1.5);
        let mut worst4 = f64::NEG_INFINITY;
        for c in 0..t.origin.ratio.len() {
            let dev = (t.origin.ratio[c] - 1.0).abs();
            worst4 = worst4.max(dev - (4.0 * t.origin.ratio_stderr[c]).max(floor4));
        }
        let c4 = CriterionResult::new(
            "C4",
            worst4 <= 0.0,
            worst4,
            0.0,
            format!(
                "B = {{0}}, ε = {eps}: worst |ratio - 1| - max(4 se, {floor4:.3e}) = {worst4:.3e}"
            ),
        );
        vec![c3, c4]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for p in &self.points {
            for (name, est, pred) in [
                ("joint", &p.joint, &p.joint_prediction),
                ("z1", &p.z1, &p.z1_prediction),
                ("origin", &p.origin, &p.origin_prediction),
            ] {
                let f = format!("density_{name}_eps{}.csv", p.epsilon);
                est.write_csv(create_file(&dir.join(&f))?)?;
                let g = format!("prediction_{name}_eps{}.csv", p.epsilon);
                pred.write_csv(create_file(&dir.join(&g))?)?;
                out.extend([f, g]);
            }
        }
        self.scaling
            .write_csv(create_file(&dir.join("residual_scaling.csv"))?)?;
        out.push("residual_scaling.csv".into());
        Ok(out)
    }
}

// ------------------------------------------------------------- velocity-verify

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VelocityPoint {
    pub epsilon: f64,
    pub seed: u64,
    pub mc: VelocityEstimate,
    /// With `J_{p*_ε}`.
    pub prediction: VelocityPrediction,
    /// With `J_{p*₀}`.
    pub prediction_j0: VelocityPrediction,
    pub q_average: Vec<f64>,
}

impl VelocityPoint {
    pub fn oracle_gap(&self) -> f64 {
        self.prediction
            .v
            .iter()
            .zip(&self.q_average)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VelocityReport {
    pub points: Vec<VelocityPoint>,
}

pub fn velocity_verify(m: &ExperimentManifest) -> Result<VelocityReport> {
    let p0 = m.p0_kernel()?;
    let law = m.law()?;
    let quad = QuadratureSpec::new(m.quad_grid);
    let units: Vec<Point> = Direction::all(p0.dim()).map(|e| e.as_point()).collect();
    let j0 = j_table_for(&p0, &units, quad)?;
    let mut points = Vec::new();
    for (i, &eps) in m.epsilons.iter().enumerate() {
        let field = m.field(eps)?;
        let seed = sub_seed(m.seed(), i as u64);
        let je = PotentialKernelTable::fourier_at(&field.p_epsilon(), &units, quad)?;
        log::info!(
            "velocity: ε = {eps}, {} replicas × {} steps",
            m.n_replicas,
            m.n_steps
        );
        points.push(VelocityPoint {
            epsilon: eps,
            seed,
            mc: velocity_mc(&field, m.n_steps, m.n_replicas, seed)?,
            prediction: velocity_expansion(&p0, &law, eps, &je)?,
            prediction_j0: velocity_expansion(&p0, &law, eps, &j0)?,
            q_average: velocity_q_average(&p0, &law, eps, &je)?,
        });
    }
    Ok(VelocityReport { points })
}

impl VelocityReport {
    pub fn criteria(&self) -> Vec<CriterionResult> {
        let mut worst = f64::NEG_INFINITY;
        let mut oracle: f64 = 0.0;
        let mut parts = Vec::new();
        for p in &self.points {
            let dev = (p.mc.mean[0] - p.prediction.v[0]).abs();
            let thr = (4.0 * p.mc.stderr[0]).max(5.0 * p.epsilon.powf(2.5));
            worst = worst.max(dev - thr);
            oracle = oracle.max(p.oracle_gap());
            parts.push(format!(
                "ε = {}: |v̂·e1 - v·e1| = {dev:.3e} vs {thr:.3e}",
                p.epsilon
            ));
        }
        vec![CriterionResult::new(
            "C5",
            worst <= 0.0 && oracle <= 1e-10,
            worst,
            0.0,
            format!(
                "{}; d2 vs Q-average oracle {oracle:.3e} (≤ 1e-10)",
                parts.join("; ")
            ),
        )]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<String>> {
        let mut w = csv::Writer::from_writer(create_file(&dir.join("velocity.csv"))?);
        w.write_record([
            "epsilon",
            "axis",
            "measured",
            "stderr",
            "predicted",
            "predicted_j0",
            "q_average",
            "d0",
            "d1",
            "d2",
        ])?;
        for p in &self.points {
            for a in 0..p.mc.mean.len() {
                let mut rec = vec![fmt_f64(p.epsilon), (a + 1).to_string()];
                rec.extend(
                    [
                        p.mc.mean[a],
                        p.mc.stderr[a],
                        p.prediction.v[a],
                        p.prediction_j0.v[a],
                        p.q_average[a],
                        p.prediction.d0[a],
                        p.prediction.d1[a],
                        p.prediction.d2[a],
                    ]
                    .map(fmt_f64),
                );
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(vec!["velocity.csv".into()])
    }
}

// ---------------------------------------------------------- green-lemma-verify

pub fn green_lemma_verify(m: &ExperimentManifest) -> Result<LemmaReport> {
    let spec = LemmaSpec {
        p0: m.p0_kernel()?,
        epsilon: m.epsilon_target,
        law: m.law()?,
        delta: m.deltas[0],
        max_sites: m.max_sites,
        max_delta: m.max_delta,
        site_radius: m.site_radius,
        check_radius: m.check_radius,
        tol: m.tol,
    };
    verify_lemma_bounds(&spec, m.n_instances, m.seed())
}

pub fn lemma_criteria(r: &LemmaReport) -> Vec<CriterionResult> {
    let halving = r.halving_in(3.0, 5.0);
    let fails = r.failures();
    let c6 = CriterionResult::new(
        "C6",
        r.all_inequalities_hold && halving,
        r.halving_ratio_max,
        5.0,
        format!(
            "{} instances, inequality failures {:?}; halving ratio in [{:.3}, {:.3}] ({} unresolved); \
             Green3 residual printed {:.3e} (singletons {:.3e}), corrected {:.3e}; \
             balance residual printed {:.3e}, corrected {:.3e}",
            r.instances.len(),
            fails,
            r.halving_ratio_min,
            r.halving_ratio_max,
            r.halving_unresolved,
            r.green3_printed_max_abs,
            r.green3_printed_max_abs_singletons,
            r.green3_corrected_max_abs,
            r.balance_printed_max_abs,
            r.balance_corrected_max_abs,
        ),
    );
    let worst_bound = r
        .instances
        .iter()
        .map(|i| i.max_error_bound)
        .fold(0.0, f64::max);
    let c7 = CriterionResult::new(
        "C7",
        r.normalization_ok,
        worst_bound,
        r.spec.tol,
        format!(
            "row sums equal 1/(1-δ) within each row's error bound; largest bound {worst_bound:.3e}"
        ),
    );
    vec![c6, c7]
}

pub fn write_lemma_artifacts(r: &LemmaReport, dir: &Path) -> Result<Vec<String>> {
    let mut w = csv::Writer::from_writer(create_file(&dir.join("lemma_instances.csv"))?);
    w.write_record([
        "index",
        "seed",
        "n_sites",
        "diameter",
        "sup_delta",
        "kappa",
        "unif",
        "green1",
        "green2",
        "expansion1",
        "expansion2",
        "halving_ratio",
        "green3_printed",
        "green3_corrected",
        "balance_printed",
        "balance_corrected",
        "max_error_bound",
    ])?;
    for i in &r.instances {
        w.write_record([
            i.index.to_string(),
            i.seed.to_string(),
            i.n_sites.to_string(),
            i.diameter.to_string(),
            fmt_f64(i.sup_delta),
            fmt_f64(i.kappa),
            i.unif_ok.to_string(),
            i.green1_ok.to_string(),
            i.green2_ok.to_string(),
            i.expansion1_ok.to_string(),
            i.expansion2_ok.to_string(),
            i.halving_ratio.map_or(String::new(), fmt_f64),
            fmt_f64(i.green3.printed_residual),
            fmt_f64(i.green3.corrected_residual),
            fmt_f64(i.balance_printed_max_residual),
            fmt_f64(i.balance_corrected_max_residual),
            fmt_f64(i.max_error_bound),
        ])?;
    }
    w.flush()?;
    Ok(vec!["lemma_instances.csv".into()])
}

// ---------------------------------------------------------- mu-delta-vs-cesaro

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigurationComparison {
    pub configuration_id: usize,
    pub mu_ratio: f64,
    pub mu_stderr: f64,
    pub cesaro_ratio: f64,
    pub cesaro_stderr: f64,
    /// `|mu - cesaro| / combined stderr`.
    pub z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuDeltaReport {
    pub epsilon: f64,
    pub cylinder: CylinderFunction,
    pub identity: IdentityReport,
    pub mu: MuDeltaEstimate,
    pub cesaro: DensityEstimate,
    pub comparisons: Vec<ConfigurationComparison>,
}

pub fn mu_delta_vs_cesaro(m: &ExperimentManifest) -> Result<MuDeltaReport> {
    let field: EnvironmentField = m.field(m.epsilon_target)?;
    let cylinder = CylinderFunction::new(m.box_sites.clone(), vec![0; m.box_sites.len()])?;
    log::info!("identity check at δ = {}", m.identity_delta);
    let identity = identity_check(
        &field,
        &cylinder,
        m.identity_delta,
        m.n_traj,
        m.n_env,
        m.tol,
        sub_seed(m.seed(), 0),
    )?;
    log::info!("μ_δ at δ = {}", m.deltas[0]);
    let mu = mu_delta_estimate_detailed(
        &field,
        &m.box_sites,
        m.deltas[0],
        m.n_traj,
        sub_seed(m.seed(), 1),
    )?;
    let burn_in = m
        .burn_in
        .unwrap_or_else(|| default_burn_in(m.epsilon_target));
    let cesaro = cesaro_invariant_estimate(
        &field,
        &m.box_sites,
        m.n_steps,
        burn_in,
        m.n_replicas,
        sub_seed(m.seed(), 2),
    )?;
    let comparisons = (0..cesaro.ratio.len())
        .map(|c| {
            let (a, sa) = (mu.density.ratio[c], mu.density.ratio_stderr[c]);
            let (b, sb) = (cesaro.ratio[c], cesaro.ratio_stderr[c]);
            ConfigurationComparison {
                configuration_id: c,
                mu_ratio: a,
                mu_stderr: sa,
                cesaro_ratio: b,
                cesaro_stderr: sb,
                z: (a - b).abs() / (sa * sa + sb * sb).sqrt(),
            }
        })
        .collect();
    Ok(MuDeltaReport {
        epsilon: m.epsilon_target,
        cylinder,
        identity,
        mu,
        cesaro,
        comparisons,
    })
}

impl MuDeltaReport {
    /// The `k ≥ 1` trajectory side plus the omitted `k = 0` term, against the
    /// Green side, in combined standard errors.
    pub fn corrected_k1_z(&self) -> f64 {
        let i = &self.identity;
        (i.trajectory_k1 + i.expected_k1_gap - i.green_side).abs()
            / (i.trajectory_k1_stderr.powi(2) + i.green_side_stderr.powi(2)).sqrt()
    }

    pub fn criteria(&self) -> Vec<CriterionResult> {
        let i = &self.identity;
        let z0 = (i.trajectory_k0 - i.green_side).abs()
            / (i.trajectory_k0_stderr.powi(2) + i.green_side_stderr.powi(2)).sqrt();
        let z1 = self.corrected_k1_z();
        let c8 = CriterionResult::new(
            "C8",
            z0 <= 4.0 && z1 <= 4.0,
            z0.max(z1),
            4.0,
            format!(
                "δ = {}, {} environments: green side {:.5} ± {:.5}; trajectory k≥0 {:.5} ± {:.5} ({z0:.2} se); \
                 k≥1 {:.5} (gap {:.5}, expected (1-δ)E[f] = {:.5}; corrected {z1:.2} se)",
                i.delta,
                i.n_env,
                i.green_side,
                i.green_side_stderr,
                i.trajectory_k0,
                i.trajectory_k0_stderr,
                i.trajectory_k1,
                i.green_side - i.trajectory_k1,
                i.expected_k1_gap,
            ),
        );
        let worst = self.comparisons.iter().map(|c| c.z).fold(0.0, f64::max);
        let c9 = CriterionResult::new(
            "C9",
            worst <= 4.0,
            worst,
            4.0,
            format!(
                "δ = {}: largest |μ_δ - Cesàro| ratio difference {worst:.2} combined se over {} configurations",
                self.mu.delta,
                self.comparisons.len()
            ),
        );
        vec![c8, c9]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<String>> {
        self.mu
            .density
            .write_csv(create_file(&dir.join("mu_delta.csv"))?)?;
        self.cesaro
            .write_csv(create_file(&dir.join("cesaro.csv"))?)?;
        write_json(&dir.join("identity.json"), &self.identity)?;
        Ok(vec![
            "mu_delta.csv".into(),
            "cesaro.csv".into(),
            "identity.json".into(),
        ])
    }
}

// -------------------------------------------------------------- kalikow-jdelta

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KalikowTrend {
    pub z: Point,
    pub e: Direction,
    /// `J_{p*_ε}(z+e)`.
    pub limit: f64,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub gaps: Vec<f64>,
    pub trend_ok: bool,
    pub final_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KalikowReport {
    pub epsilon: f64,
    pub estimates: Vec<Vec<KalikowEstimate>>,
    pub trends: Vec<KalikowTrend>,
}

pub fn kalikow_jdelta(m: &ExperimentManifest) -> Result<KalikowReport> {
    let eps = m.epsilon_target;
    let field = m.field(eps)?;
    let dim = field.dim();
    let pairs: Vec<(Point, Direction)> = m
        .z_sites
        .iter()
        .flat_map(|z| Direction::all(dim).map(move |e| (*z, e)))
        .collect();
    let mut estimates = Vec::new();
    for (i, &delta) in m.deltas.iter().enumerate() {
        log::info!(
            "kalikow: δ = {delta}, tol {:.0e}, {} environments",
            m.tol_for(i),
            m.n_env
        );
        estimates.push(kalikow_j_delta_batch(
            &field,
            delta,
            Point::origin(),
            &pairs,
            &m.a_sites,
            m.n_env,
            m.tol_for(i),
            m.seed(),
        )?);
    }
    let pe = field.p_epsilon();
    let quad = QuadratureSpec::new(m.quad_grid);
    let mut trends = Vec::new();
    for (j, (z, e)) in pairs.iter().enumerate() {
        let limit = potential_kernel_fourier(&pe, z.step(*e), quad)?.value;
        let values: Vec<f64> = estimates.iter().map(|r| r[j].value).collect();
        let stderrs: Vec<f64> = estimates.iter().map(|r| r[j].stderr).collect();
        let gaps: Vec<f64> = values.iter().map(|v| (v - limit).abs()).collect();
        let comb = |a: usize, b: usize| (stderrs[a].powi(2) + stderrs[b].powi(2)).sqrt();
        let n = gaps.len();
        let steps_ok = (1..n).all(|k| gaps[k] <= gaps[k - 1] + 2.0 * comb(k - 1, k));
        let overall_ok = gaps[n - 1] <= gaps[0] + 2.0 * comb(0, n - 1);
        trends.push(KalikowTrend {
            z: *z,
            e: *e,
            limit,
            deltas: m.deltas.clone(),
            trend_ok: steps_ok && overall_ok,
            final_ok: gaps[n - 1] <= (4.0 * stderrs[n - 1]).max(10.0 * eps),
            values,
            stderrs,
            gaps,
        });
    }
    Ok(KalikowReport {
        epsilon: eps,
        estimates,
        trends,
    })
}

impl KalikowReport {
    pub fn criteria(&self) -> Vec<CriterionResult> {
        let bad: Vec<String> = self
            .trends
            .iter()
            .filter(|t| !(t.trend_ok && t.final_ok))
            .map(|t| format!("z = {}, e = {:?}", t.z, t.e))
            .collect();
        let worst = self
            .trends
            .iter()
            .map(|t| *t.gaps.last().unwrap_or(&f64::NAN))
            .fold(0.0, f64::max);
        let floors = self
            .estimates
            .iter()
            .flatten()
            .any(|e| e.denominator_below_floor);
        vec![CriterionResult::new(
            "C10",
            bad.is_empty() && !floors,
            worst,
            10.0 * self.epsilon,
            format!(
                "{} (z, e) pairs; largest final gap {worst:.4}; failing pairs {bad:?}{}",
                self.trends.len(),
                if floors {
                    "; denominator below floor"
                } else {
                    ""
                }
            ),
        )]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<String>> {
        let mut w = csv::Writer::from_writer(create_file(&dir.join("kalikow.csv"))?);
        w.write_record(["z", "e", "delta", "estimate", "stderr", "limit", "gap"])?;
        for t in &self.trends {
            for k in 0..t.deltas.len() {
                w.write_record([
                    t.z.to_string(),
                    t.e.as_point().to_string(),
                    fmt_f64(t.deltas[k]),
                    fmt_f64(t.values[k]),
                    fmt_f64(t.stderrs[k]),
                    fmt_f64(t.limit),
                    fmt_f64(t.gaps[k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(vec!["kalikow.csv".into()])
    }
}

// ---------------------------------------------------------- ballisticity-check

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallisticityRecipeReport {
    /// The manifest's field at `epsilon_target`.
    pub drifted: BallisticityReport,
    /// Same backbone at `ε = 0`.
    pub null: BallisticityReport,
}

pub fn ballisticity_check(m: &ExperimentManifest) -> Result<BallisticityRecipeReport> {
    let l = Direction::pos(0);
    let run = |eps: f64, i: u64| -> Result<BallisticityReport> {
        polynomial_condition_check(
            &m.field(eps)?,
            l,
            m.big_l,
            m.m,
            m.n_traj,
            sub_seed(m.seed(), i),
            m.step_cap,
        )
    };
    Ok(BallisticityRecipeReport {
        drifted: run(m.epsilon_target, 0)?,
        null: run(0.0, 1)?,
    })
}

impl BallisticityRecipeReport {
    pub fn criteria(&self) -> Vec<CriterionResult> {
        let d = &self.drifted;
        let thr = d.big_l.powi(-2);
        let ok = d.back_exit_upper < thr
            && self.null.back_exit_probability > 0.1
            && d.exit_membership_ok
            && self.null.exit_membership_ok;
        vec![CriterionResult::new(
            "C11",
            ok,
            d.back_exit_upper,
            thr,
            format!(
                "L = {}: drifted back-exit {:.3e} ± {:.1e} ({} capped) vs 1/L² = {thr:.3e}; \
                 ε = 0 back-exit {:.4} (> 0.1); c0 readings {} / {:.1}, L ≥ c0: {} / {}",
                d.big_l,
                d.back_exit_probability,
                d.stderr,
                d.capped,
                self.null.back_exit_probability,
                d.c0_min,
                d.c0_max,
                d.l_at_least_c0_min,
                d.l_at_least_c0_max,
            ),
        )]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<String>> {
        write_json(&dir.join("ballisticity.json"), self)?;
        Ok(vec!["ballisticity.json".into()])
    }
}
