//! First-order Green predictions, the second-order identity, and randomized
//! verification of the perturbation inequalities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::exact::{killed_green_exact_growing, suggested_radius};
use super::table::KilledGreenTable;
use super::window::{perturb_environment, EnvWindow, FinitePerturbation};
use crate::environment::{EnvironmentField, PerturbationLaw};
use crate::error::{LabError, Result};
use crate::kernels::TransitionKernel;
use crate::lattice::{cube_points, Direction, Point};
use crate::seeds::{stream, walk_rng};

/// `‖Δ‖_∞` of the perturbation used for the remainder halving test.
pub const HALVING_NORM: f64 = 1e-3;
/// Solver tolerance for the halving test tables.
pub const HALVING_TOL: f64 = 1e-13;

/// Both first-order predictors of `g^{ω^B}(y,y')`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FirstOrderPrediction {
    /// `g^ω(y,y')`.
    pub base: f64,
    /// `g + Σ_x g(y,x) Σ_e Δ_x(e) [δ g(x+e,y') - g(x,x)]`.
    pub printed: f64,
    /// `g + δ Σ_x Σ_e g(y,x) Δ_x(e) g(x+e,y')`.
    pub raw: f64,
}

/// Sources whose rows the first-order predictor reads.
pub fn first_order_sources(pert: &FinitePerturbation, dim: usize, y: Point) -> Vec<Point> {
    let mut out = vec![y];
    for &x in &pert.sites {
        out.push(x);
        out.extend(Direction::all(dim).map(|e| x + e));
    }
    dedup(out)
}

fn dedup(mut v: Vec<Point>) -> Vec<Point> {
    let mut seen = std::collections::HashSet::new();
    v.retain(|p| seen.insert(*p));
    v
}

/// First-order prediction from an exact table of the unperturbed environment.
pub fn first_order_green_prediction(
    g: &KilledGreenTable,
    pert: &FinitePerturbation,
    delta: f64,
    y: Point,
    y2: Point,
) -> Result<FirstOrderPrediction> {
    let base = g.get(y, y2)?;
    let mut printed = base;
    let mut raw = base;
    for (x, d) in pert.sites.iter().zip(&pert.deltas) {
        let gyx = g.get(y, *x)?;
        let gxx = g.get(*x, *x)?;
        for (ei, de) in d.iter().enumerate() {
            let e = Direction::from_index(ei);
            let gxe = g.get(*x + e, y2)?;
            printed += gyx * de * (delta * gxe - gxx);
            raw += delta * gyx * de * gxe;
        }
    }
    Ok(FirstOrderPrediction { base, printed, raw })
}

/// Residuals of the second-order identity in its printed (factorized) and
/// corrected (double-sum) forms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Green3Residuals {
    /// `g^B(y,y') - g(y,y') - first-order term`.
    pub lhs: f64,
    pub printed_rhs: f64,
    /// `Σ_{x,z∈B} g(y,x) [Σ_e Δ_x(e)(δg(x+e,z) - g(x,z))] [Σ_e' Δ_z(e')(δg^B(z+e',y') - g^B(z,y'))]`.
    pub corrected_rhs: f64,
    pub printed_residual: f64,
    pub corrected_residual: f64,
}

/// Sources the second-order identity reads from the perturbed table.
pub fn green3_perturbed_sources(pert: &FinitePerturbation, dim: usize, y: Point) -> Vec<Point> {
    let mut out = vec![y];
    for &z in &pert.sites {
        out.push(z);
        out.extend(Direction::all(dim).map(|e| z + e));
    }
    dedup(out)
}

pub fn green3_residuals(
    g: &KilledGreenTable,
    gb: &KilledGreenTable,
    pert: &FinitePerturbation,
    delta: f64,
    y: Point,
    y2: Point,
) -> Result<Green3Residuals> {
    let first = first_order_green_prediction(g, pert, delta, y, y2)?;
    let lhs = gb.get(y, y2)? - first.printed;
    // right factor, per z ∈ B
    let mut right = Vec::with_capacity(pert.n());
    for (z, d) in pert.sites.iter().zip(&pert.deltas) {
        let gbz = gb.get(*z, y2)?;
        let mut s = 0.0;
        for (ei, de) in d.iter().enumerate() {
            s += de * (delta * gb.get(*z + Direction::from_index(ei), y2)? - gbz);
        }
        right.push(s);
    }
    let mut printed_left = 0.0;
    let mut corrected = 0.0;
    for (x, d) in pert.sites.iter().zip(&pert.deltas) {
        let gyx = g.get(y, *x)?;
        let gxx = g.get(*x, *x)?;
        for (ei, de) in d.iter().enumerate() {
            printed_left += gyx * de * (delta * g.get(*x + Direction::from_index(ei), *x)? - gxx);
        }
        for (zi, z) in pert.sites.iter().enumerate() {
            let gxz = g.get(*x, *z)?;
            let mut s = 0.0;
            for (ei, de) in d.iter().enumerate() {
                s += de * (delta * g.get(*x + Direction::from_index(ei), *z)? - gxz);
            }
            corrected += gyx * s * right[zi];
        }
    }
    let printed_rhs = printed_left * right.iter().sum::<f64>();
    Ok(Green3Residuals {
        lhs,
        printed_rhs,
        corrected_rhs: corrected,
        printed_residual: lhs - printed_rhs,
        corrected_residual: lhs - corrected,
    })
}

/// Residual of the balance relation at `z` in row `y`:
/// `g(y,z) - 1_{y=z} - δ Σ_e g(y,z+e) ω(z+e, dir(e))`, where `flip` selects
/// `dir(e) = -e` (mass entering `z`) instead of `dir(e) = e`.
pub fn balance_residual(
    g: &KilledGreenTable,
    w: &EnvWindow,
    delta: f64,
    y: Point,
    z: Point,
    flip: bool,
) -> Result<f64> {
    let mut s = if y == z { 1.0 } else { 0.0 };
    for e in Direction::all(w.dim()) {
        let dir = if flip { -e } else { e };
        let rate = w
            .omega_dir(z + e, dir)
            .ok_or_else(|| LabError::OutOfTable(format!("{}", z + e)))?;
        s += delta * g.get(y, z + e)? * rate;
    }
    Ok(g.get(y, z)? - s)
}

/// Random instance family for the lemma checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaSpec {
    pub p0: TransitionKernel,
    pub epsilon: f64,
    pub law: PerturbationLaw,
    pub delta: f64,
    /// `|B|` is drawn uniformly from `1..=max_sites`.
    pub max_sites: usize,
    /// `‖Δ‖_∞` is drawn in `(max_delta/4, max_delta]`.
    pub max_delta: f64,
    /// Sites of `B` lie in `|x|_∞ ≤ site_radius`.
    pub site_radius: i64,
    /// Inequalities are checked on `|z - y|_∞ ≤ check_radius`.
    pub check_radius: i64,
    pub tol: f64,
}

impl LemmaSpec {
    /// Two-dimensional defaults: symmetric backbone, the two-atom law at
    /// `ε = 0.1`, `δ = 0.9`, `|B| ≤ 3`, `‖Δ‖_∞ ≤ 0.02`.
    pub fn default_2d() -> Self {
        LemmaSpec {
            p0: TransitionKernel::symmetric(2),
            epsilon: 0.1,
            law: PerturbationLaw::two_atom_drift(),
            delta: 0.9,
            max_sites: 3,
            max_delta: 0.02,
            site_radius: 2,
            check_radius: 3,
            tol: 1e-10,
        }
    }
}

/// Outcome of one random instance; `seed` replays it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceReport {
    pub index: u64,
    pub seed: u64,
    pub field_seed: u64,
    pub perturbation: FinitePerturbation,
    pub n_sites: usize,
    pub diameter: i64,
    pub sup_delta: f64,
    pub kappa: f64,
    pub c3: f64,
    pub unif_ok: bool,
    /// Unif relation with the direction as printed, `ω(z+e, e)`.
    pub balance_printed_max_residual: f64,
    /// Same relation with the incoming direction `ω(z+e, -e)`.
    pub balance_corrected_max_residual: f64,
    pub green1_ok: bool,
    pub green2_ok: bool,
    pub expansion1_ok: bool,
    pub expansion2_ok: bool,
    /// Largest `|remainder| / (bound · g^B)` seen.
    pub expansion2_worst_fraction: f64,
    pub predictors_max_difference: f64,
    /// Remainders of the first-order predictor at `(y, y)` for the instance
    /// rescaled to [`HALVING_NORM`] and for half of that.
    pub remainder_full: f64,
    pub remainder_half: f64,
    /// `None` when the halved remainder is not resolved above solver error.
    pub halving_ratio: Option<f64>,
    pub green3: Green3Residuals,
    pub normalization_ok: bool,
    pub max_error_bound: f64,
}

impl InstanceReport {
    pub fn inequalities_hold(&self) -> bool {
        self.unif_ok && self.green1_ok && self.green2_ok && self.expansion1_ok && self.expansion2_ok
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub spec: LemmaSpec,
    pub seed: u64,
    pub instances: Vec<InstanceReport>,
    pub all_inequalities_hold: bool,
    pub normalization_ok: bool,
    pub halving_ratio_min: f64,
    pub halving_ratio_max: f64,
    pub halving_unresolved: usize,
    pub green3_printed_max_abs: f64,
    pub green3_corrected_max_abs: f64,
    pub green3_printed_max_abs_singletons: f64,
    pub balance_printed_max_abs: f64,
    pub balance_corrected_max_abs: f64,
}

impl LemmaReport {
    /// Seeds of instances whose inequalities failed.
    pub fn failures(&self) -> Vec<u64> {
        self.instances
            .iter()
            .filter(|r| !r.inequalities_hold())
            .map(|r| r.seed)
            .collect()
    }

    pub fn halving_in(&self, lo: f64, hi: f64) -> bool {
        self.instances
            .iter()
            .filter_map(|r| r.halving_ratio)
            .all(|q| (lo..=hi).contains(&q))
            && self.instances.iter().any(|r| r.halving_ratio.is_some())
    }
}

/// Draws a perturbation of `n` distinct sites with zero-sum rows.
pub fn random_perturbation<R: Rng>(
    rng: &mut R,
    dim: usize,
    n: usize,
    site_radius: i64,
    max_delta: f64,
) -> FinitePerturbation {
    let candidates = cube_points(dim, site_radius);
    let mut sites = Vec::with_capacity(n);
    while sites.len() < n {
        let p = candidates[rng.random_range(0..candidates.len())];
        if !sites.contains(&p) {
            sites.push(p);
        }
    }
    let deltas = sites
        .iter()
        .map(|_| {
            let mut v: Vec<f64> = (0..2 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= m);
            let s = rng.random_range(0.25..=1.0) * max_delta;
            let mx = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            v.iter().map(|x| x * s / mx).collect()
        })
        .collect();
    FinitePerturbation::new(sites, deltas).expect("zero-sum rows by construction")
}

/// Runs `n_instances` random instances of `spec` and collects the checks.
pub fn verify_lemma_bounds(spec: &LemmaSpec, n_instances: u64, seed: u64) -> Result<LemmaReport> {
    let base = EnvironmentField::new(spec.p0.clone(), spec.epsilon, spec.law.clone(), 0)?;
    let dim = base.dim();
    let mut instances = Vec::with_capacity(n_instances as usize);
    for i in 0..n_instances {
        let inst_seed = crate::seeds::derive_seed(seed, stream::INSTANCE, i);
        let mut rng = walk_rng(inst_seed, stream::INSTANCE, 0);
        let field_seed: u64 = rng.random();
        let n = rng.random_range(1..=spec.max_sites);
        let pert = random_perturbation(&mut rng, dim, n, spec.site_radius, spec.max_delta);
        let field = base.with_seed(field_seed);
        let mut rep = run_instance(spec, &field, &pert)?;
        rep.index = i;
        rep.seed = inst_seed;
        rep.field_seed = field_seed;
        instances.push(rep);
    }
    let resolved: Vec<f64> = instances.iter().filter_map(|r| r.halving_ratio).collect();
    let max_abs = |f: &dyn Fn(&InstanceReport) -> f64| {
        instances.iter().map(f).fold(0.0f64, |a, v| a.max(v.abs()))
    };
    Ok(LemmaReport {
        spec: spec.clone(),
        seed,
        all_inequalities_hold: instances.iter().all(|r| r.inequalities_hold()),
        normalization_ok: instances.iter().all(|r| r.normalization_ok),
        halving_ratio_min: resolved.iter().copied().fold(f64::INFINITY, f64::min),
        halving_ratio_max: resolved.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        halving_unresolved: instances.len() - resolved.len(),
        green3_printed_max_abs: max_abs(&|r| r.green3.printed_residual),
        green3_corrected_max_abs: max_abs(&|r| r.green3.corrected_residual),
        green3_printed_max_abs_singletons: instances
            .iter()
            .filter(|r| r.n_sites == 1)
            .map(|r| r.green3.printed_residual.abs())
            .fold(0.0, f64::max),
        balance_printed_max_abs: max_abs(&|r| r.balance_printed_max_residual),
        balance_corrected_max_abs: max_abs(&|r| r.balance_corrected_max_residual),
        instances,
    })
}

fn run_instance(
    spec: &LemmaSpec,
    field: &EnvironmentField,
    pert: &FinitePerturbation,
) -> Result<InstanceReport> {
    let dim = field.dim();
    let delta = spec.delta;
    let tol = spec.tol;
    let y = Point::origin();
    let speed = field.mean_drift().iter().map(|v| v.abs()).sum::<f64>() + field.epsilon();
    let r0 = suggested_radius(delta, tol, speed).max(spec.site_radius + spec.check_radius + 4);
    let build = |r: i64| EnvWindow::from_field(field, Point::origin(), r);
    let window = build(r0);
    let wb = perturb_environment(&window, pert)?;
    // the halving probe keeps the instance's shape at a fixed small size, where
    // the cubic remainder is negligible
    let probe = pert.scaled(HALVING_NORM / pert.sup_abs());
    let probe_half = probe.scaled(0.5);
    let kappa = window.kappa().min(wb.kappa());
    let c3 = pert.c3(dim, kappa);

    // rows of ω: every checked z and its neighbours, plus what the predictor needs
    let mut checked: Vec<Point> = vec![y];
    checked.extend(pert.sites.iter().copied());
    let checked = dedup(checked);
    let mut src = first_order_sources(pert, dim, y);
    for &z in &checked {
        src.push(z);
        src.extend(Direction::all(dim).map(|e| z + e));
    }
    let src = dedup(src);
    let max_r = 8 * r0;
    let g = killed_green_exact_growing(build, r0, max_r, delta, &src, tol)?;
    let gb = killed_green_exact_growing(
        |r| perturb_environment(&build(r), pert).expect("validated"),
        g.radius(),
        max_r,
        delta,
        &green3_perturbed_sources(pert, dim, y),
        tol,
    )?;
    let probe_tol = tol.min(HALVING_TOL);
    let probe_solve = |q: &FinitePerturbation| {
        killed_green_exact_growing(
            |r| perturb_environment(&build(r), q).expect("validated"),
            g.radius(),
            max_r,
            delta,
            &[y],
            probe_tol,
        )
    };
    let g0 = killed_green_exact_growing(
        build,
        g.radius(),
        max_r,
        delta,
        &first_order_sources(&probe, dim, y),
        probe_tol,
    )?;
    let gp = probe_solve(&probe)?;
    let gh = probe_solve(&probe_half)?;
    let err = [&g, &gb]
        .iter()
        .flat_map(|t| t.rows().iter().map(|r| r.error_bound))
        .fold(0.0f64, f64::max);
    let normalization_ok = [&g, &gb, &g0, &gp, &gh]
        .iter()
        .all(|t| t.normalization_excess() <= 0.0);

    let hood = |c: Point| -> Vec<Point> {
        cube_points(dim, spec.check_radius)
            .into_iter()
            .map(|d| c + d)
            .collect()
    };

    // unif, on every computed row of ω and ω^B
    let mut unif_ok = true;
    let mut bal_printed = 0.0f64;
    let mut bal_corrected = 0.0f64;
    for (t, w) in [(&g, &window), (&gb, &wb)] {
        for row in t.rows() {
            let s = row.source;
            for z in hood(s) {
                if z != s {
                    for e in Direction::all(dim) {
                        let lhs = t.get(s, z)?;
                        let rhs = delta * kappa * t.get(s, z + e)?;
                        if lhs - rhs < -(1.0 + delta * kappa) * err {
                            unif_ok = false;
                        }
                    }
                }
                bal_printed = bal_printed.max(balance_residual(t, w, delta, s, z, false)?.abs());
                bal_corrected = bal_corrected.max(balance_residual(t, w, delta, s, z, true)?.abs());
            }
        }
    }

    let mut green1_ok = true;
    let mut green2_ok = true;
    for &z in &checked {
        let gzz = g.get(z, z)?;
        for e in Direction::all(dim) {
            let a = (delta * g.get(z + e, z)? - gzz).abs();
            if a - (1.0 + delta) * err > 1.0 / kappa {
                green1_ok = false;
            }
            for y2 in hood(z) {
                let lhs = (delta * g.get(z + e, y2)? - g.get(z, y2)?).abs();
                let rhs = (g.get(z, y2)? + err) / (kappa * kappa * (gzz - err));
                if lhs - (1.0 + delta) * err > rhs {
                    green2_ok = false;
                }
            }
        }
    }

    let n = pert.n() as f64;
    let s = pert.sup_abs();
    let bound2 = (2.0 * dim as f64 * s).powi(2) / kappa.powi(3)
        * (1.0 + (n - 1.0) / (delta * kappa).powi(pert.diameter() as i32))
        * (1.0 + c3)
        * n;
    let mut expansion1_ok = true;
    let mut expansion2_ok = true;
    let mut worst = 0.0f64;
    let mut pred_diff = 0.0f64;
    // first-order error propagation: every term is a product of table entries
    let pred_err = err * (1.0 + 4.0 * dim as f64 * n * s * (1.0 + 1.0 / (1.0 - delta)));
    for y2 in hood(y) {
        let gby = gb.get(y, y2)?;
        let gy = g.get(y, y2)?;
        if (gby - gy).abs() - 2.0 * err > c3 * (gby + err) {
            expansion1_ok = false;
        }
        let p = first_order_green_prediction(&g, pert, delta, y, y2)?;
        pred_diff = pred_diff.max((p.printed - p.raw).abs());
        let rem = (gby - p.printed).abs();
        if rem - err - pred_err > bound2 * (gby + err) {
            expansion2_ok = false;
        }
        if gby > 0.0 {
            worst = worst.max(rem / (bound2 * gby));
        }
    }

    let full = first_order_green_prediction(&g0, &probe, delta, y, y)?;
    let half = first_order_green_prediction(&g0, &probe_half, delta, y, y)?;
    let remainder_full = gp.get(y, y)? - full.printed;
    let remainder_half = gh.get(y, y)? - half.printed;
    let probe_err = [&g0, &gp, &gh]
        .iter()
        .flat_map(|t| t.rows().iter().map(|r| r.error_bound))
        .fold(0.0f64, f64::max);
    let probe_pred_err =
        probe_err * (1.0 + 4.0 * dim as f64 * n * HALVING_NORM * (1.0 + 1.0 / (1.0 - delta)));
    let resolution = 100.0 * (probe_err + probe_pred_err);
    let halving_ratio =
        (remainder_half.abs() > resolution).then(|| remainder_full / remainder_half);

    let green3 = green3_residuals(&g, &gb, pert, delta, y, y)?;
    Ok(InstanceReport {
        index: 0,
        seed: 0,
        field_seed: field.seed(),
        perturbation: pert.clone(),
        n_sites: pert.n(),
        diameter: pert.diameter(),
        sup_delta: s,
        kappa,
        c3,
        unif_ok,
        balance_printed_max_residual: bal_printed,
        balance_corrected_max_residual: bal_corrected,
        green1_ok,
        green2_ok,
        expansion1_ok,
        expansion2_ok,
        expansion2_worst_fraction: worst,
        predictors_max_difference: pred_diff,
        remainder_full,
        remainder_half,
        halving_ratio,
        green3,
        normalization_ok,
        max_error_bound: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greenfn::killed_green_exact;

    #[test]
    fn zero_perturbation_predicts_base() {
        let w = EnvWindow::homogeneous(&TransitionKernel::symmetric(2), Point::origin(), 60);
        let pert = FinitePerturbation::new(vec![Point::new(&[1, 0])], vec![vec![0.0; 4]]).unwrap();
        let g = killed_green_exact(
            &w,
            0.5,
            &first_order_sources(&pert, 2, Point::origin()),
            1e-10,
        )
        .unwrap();
        let p =
            first_order_green_prediction(&g, &pert, 0.5, Point::origin(), Point::origin()).unwrap();
        assert_eq!(p.printed, p.base);
        assert_eq!(p.raw, p.base);
    }

    #[test]
    fn corrected_second_order_identity_is_exact() {
        let p0 = TransitionKernel::new(2, vec![0.3, 0.2, 0.25, 0.25]).unwrap();
        let w = EnvWindow::homogeneous(&p0, Point::origin(), 70);
        let pert = FinitePerturbation::new(
            vec![Point::new(&[1, 0]), Point::new(&[0, 2])],
            vec![vec![0.02, -0.01, 0.0, -0.01], vec![-0.015, 0.0, 0.015, 0.0]],
        )
        .unwrap();
        let y = Point::origin();
        let wb = perturb_environment(&w, &pert).unwrap();
        let g = killed_green_exact(&w, 0.8, &first_order_sources(&pert, 2, y), 1e-12).unwrap();
        let gb =
            killed_green_exact(&wb, 0.8, &green3_perturbed_sources(&pert, 2, y), 1e-12).unwrap();
        let r = green3_residuals(&g, &gb, &pert, 0.8, y, y).unwrap();
        assert!(r.corrected_residual.abs() < 1e-10, "{r:?}");
        assert!(r.lhs.abs() > 1e-7);
    }

    #[test]
    fn balance_holds_with_incoming_direction() {
        let p0 = TransitionKernel::new(2, vec![0.4, 0.1, 0.3, 0.2]).unwrap();
        let w = EnvWindow::homogeneous(&p0, Point::origin(), 70);
        let g = killed_green_exact(&w, 0.8, &[Point::origin()], 1e-12).unwrap();
        for z in cube_points(2, 2) {
            let r = balance_residual(&g, &w, 0.8, Point::origin(), z, true).unwrap();
            assert!(r.abs() < 1e-10, "{z}: {r}");
        }
        let printed =
            balance_residual(&g, &w, 0.8, Point::origin(), Point::new(&[1, 0]), false).unwrap();
        assert!(printed.abs() > 1e-3);
    }
}
