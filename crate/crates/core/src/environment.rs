//! Low-disorder i.i.d. environments `ω(x,e) = p₀(e) + ε ξ(x,e)`.
//!
//! Environments are never stored. The atom at a site is a pure function of
//! the master seed and the site coordinates, so any region can be replayed
//! and shards can be evaluated independently.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::kernels::TransitionKernel;
use crate::lattice::{Direction, Point, MAX_DIM};
use crate::seeds::{splitmix64, unit_f64};

/// Tolerance for weight sums and zero-sum atoms.
pub const LAW_TOL: f64 = 1e-12;

/// One support point of the perturbation law, as stored in law files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawAtom {
    pub xi: Vec<f64>,
    pub w: f64,
}

/// On-disk form: `{"dimension": d, "atoms": [{"xi": [...], "w": ...}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawFile {
    pub dimension: usize,
    pub atoms: Vec<LawAtom>,
}

/// Finitely supported law of the fluctuation vector `ξ(0,·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawFile", into = "LawFile")]
pub struct PerturbationLaw {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<LawFile> for PerturbationLaw {
    type Error = LabError;
    fn try_from(f: LawFile) -> Result<Self> {
        let (xi, w): (Vec<_>, Vec<_>) = f.atoms.into_iter().map(|a| (a.xi, a.w)).unzip();
        make_perturbation_law(f.dimension, xi, w)
    }
}

impl From<PerturbationLaw> for LawFile {
    fn from(l: PerturbationLaw) -> Self {
        LawFile {
            dimension: l.dim,
            atoms: l
                .atoms
                .into_iter()
                .zip(l.weights)
                .map(|(xi, w)| LawAtom { xi, w })
                .collect(),
        }
    }
}

/// Validates atoms and weights and precomputes the mean and covariance.
pub fn make_perturbation_law(
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
) -> Result<PerturbationLaw> {
    if dim == 0 || dim > MAX_DIM {
        return Err(LabError::Dimension(format!(
            "dimension {dim} outside 1..={MAX_DIM}"
        )));
    }
    if atoms.is_empty() || atoms.len() != weights.len() {
        return Err(LabError::InvalidLaw(format!(
            "{} atoms but {} weights",
            atoms.len(),
            weights.len()
        )));
    }
    for (i, a) in atoms.iter().enumerate() {
        if a.len() != 2 * dim {
            return Err(LabError::InvalidLaw(format!(
                "atom {i} has {} entries, expected {}",
                a.len(),
                2 * dim
            )));
        }
        if let Some(v) = a.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(LabError::InvalidLaw(format!(
                "atom {i} entry {v} outside [-1,1]"
            )));
        }
        let s: f64 = a.iter().sum();
        if s.abs() > LAW_TOL {
            return Err(LabError::InvalidLaw(format!("atom {i} sums to {s}, not 0")));
        }
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(LabError::InvalidLaw(format!(
            "weight {w} is negative or non-finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > LAW_TOL {
        return Err(LabError::InvalidLaw(format!(
            "weights sum to {total}, not 1"
        )));
    }
    let n = 2 * dim;
    let mut mean = vec![0.0; n];
    for (a, w) in atoms.iter().zip(&weights) {
        for e in 0..n {
            mean[e] += w * a[e];
        }
    }
    let mut cov = vec![vec![0.0; n]; n];
    for (a, w) in atoms.iter().zip(&weights) {
        for e in 0..n {
            for f in 0..n {
                cov[e][f] += w * (a[e] - mean[e]) * (a[f] - mean[f]);
            }
        }
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    Ok(PerturbationLaw {
        dim,
        atoms,
        weights,
        cumulative,
        mean,
        cov,
    })
}

impl PerturbationLaw {
    /// Degenerate law concentrated on `ξ = 0`.
    pub fn zero(dim: usize) -> Self {
        make_perturbation_law(dim, vec![vec![0.0; 2 * dim]], vec![1.0]).expect("valid")
    }

    /// The two-atom law used throughout the experiments: a deterministic
    /// push of `0.75` along `e₁` and a fair coin moving `0.5` between `±e₂`.
    /// Its mean drift is `d₁·e₁ = 1.5`.
    pub fn two_atom_drift() -> Self {
        make_perturbation_law(
            2,
            vec![vec![0.75, -0.75, 0.5, -0.5], vec![0.75, -0.75, -0.5, 0.5]],
            vec![0.5, 0.5],
        )
        .expect("valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[ξ(0,e)]` per direction.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `C_{e,e'} = Cov(ξ(0,e), ξ(0,e'))`, indexed by direction index.
    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.cov
    }

    /// Centered atom `ξ̄ = ξ - E[ξ]`.
    pub fn xi_bar(&self, i: usize) -> Vec<f64> {
        self.atoms[i]
            .iter()
            .zip(&self.mean)
            .map(|(a, m)| a - m)
            .collect()
    }

    /// Largest `|ξ(e)|` over the support.
    pub fn max_abs(&self) -> f64 {
        self.atoms
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `d₁ = Σ_e e E[ξ(0,e)]`.
    pub fn mean_drift(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.mean[2 * a] - self.mean[2 * a + 1])
            .collect()
    }

    /// Atom index for a uniform value `u ∈ [0,1)`.
    #[inline]
    pub fn atom_for(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.atoms.len() - 1)
    }

    /// Same law with an extra atom of weight 0 (does not change any moment).
    pub fn with_null_atom(&self, xi: Vec<f64>) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        let mut weights = self.weights.clone();
        atoms.push(xi);
        weights.push(0.0);
        make_perturbation_law(self.dim, atoms, weights)
    }
}

/// Environment at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteConfig {
    pub atom: usize,
    pub omega: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_bar: Vec<f64>,
}

impl SiteConfig {
    /// Local drift `d(x,ω) = Σ_e ω(x,e) e`.
    pub fn drift(&self) -> Vec<f64> {
        (0..self.omega.len() / 2)
            .map(|a| self.omega[2 * a] - self.omega[2 * a + 1])
            .collect()
    }
}

/// Outcome of the local drift condition test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdCheck {
    pub holds: bool,
    /// `E[d(0,ω)]·e₁ - ε`.
    pub margin: f64,
}

/// Per-direction values for one atom, padded to `2·MAX_DIM`.
type DirArray = [f64; 2 * MAX_DIM];

/// A seed-addressable i.i.d. environment.
#[derive(Debug, Clone)]
pub struct EnvironmentField {
    p0: TransitionKernel,
    epsilon: f64,
    law: PerturbationLaw,
    seed: u64,
    /// Lookups at `x` read the underlying site `x + origin`.
    origin: Point,
    kappa: f64,
    atom_omega: Vec<DirArray>,
    atom_cumulative: Vec<DirArray>,
}

impl EnvironmentField {
    /// Requires `0 ≤ ε < min_e p₀(e)` so every sampled row is bounded below by
    /// `κ = min p₀ - ε > 0`.
    pub fn new(
        p0: TransitionKernel,
        epsilon: f64,
        law: PerturbationLaw,
        seed: u64,
    ) -> Result<Self> {
        if p0.dim() != law.dim() {
            return Err(LabError::Dimension(format!(
                "kernel is {}-dimensional, law is {}-dimensional",
                p0.dim(),
                law.dim()
            )));
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(LabError::InvalidEnvironment(format!(
                "ε = {epsilon} outside [0,1)"
            )));
        }
        let kappa = p0.min_prob() - epsilon;
        if kappa <= 0.0 {
            return Err(LabError::InvalidEnvironment(format!(
                "κ = min p₀ - ε = {kappa} is not positive"
            )));
        }
        let n = 2 * p0.dim();
        let mut atom_omega = Vec::with_capacity(law.n_atoms());
        let mut atom_cumulative = Vec::with_capacity(law.n_atoms());
        for i in 0..law.n_atoms() {
            let mut om = [0.0; 2 * MAX_DIM];
            let mut cu = [0.0; 2 * MAX_DIM];
            let mut acc = 0.0;
            for e in 0..n {
                om[e] = p0.probs()[e] + epsilon * law.atom(i)[e];
                acc += om[e];
                cu[e] = acc;
            }
            // guard against rounding in the last bucket
            for c in cu.iter_mut().skip(n - 1) {
                *c = f64::INFINITY;
            }
            atom_omega.push(om);
            atom_cumulative.push(cu);
        }
        Ok(EnvironmentField {
            p0,
            epsilon,
            law,
            seed,
            origin: Point::origin(),
            kappa,
            atom_omega,
            atom_cumulative,
        })
    }

    pub fn dim(&self) -> usize {
        self.p0.dim()
    }

    pub fn p0(&self) -> &TransitionKernel {
        &self.p0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn law(&self) -> &PerturbationLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same law and backbone, different environment.
    pub fn with_seed(&self, seed: u64) -> Self {
        EnvironmentField {
            seed,
            origin: Point::origin(),
            ..self.clone()
        }
    }

    /// Same environment at a different disorder strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut f = Self::new(self.p0.clone(), epsilon, self.law.clone(), self.seed)?;
        f.origin = self.origin;
        Ok(f)
    }

    /// The shifted environment `θ_x ω`: lookups at `y` read site `y + x`.
    pub fn shifted(&self, x: Point) -> Self {
        EnvironmentField {
            origin: self.origin + x,
            ..self.clone()
        }
    }

    /// `κ = min_e p₀(e) - ε`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Atom index at `x`, from the counter-based hash of `(seed, x)`.
    #[inline]
    pub fn site_atom(&self, x: Point) -> usize {
        if self.law.n_atoms() == 1 {
            return 0;
        }
        let p = x + self.origin;
        let mut h = splitmix64(self.seed);
        for a in 0..self.dim() {
            h = splitmix64(
                h ^ (p.c[a] as u64)
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .rotate_left(a as u32 * 16),
            );
        }
        self.law.atom_for(unit_f64(h))
    }

    #[inline]
    pub fn atom_omega(&self, atom: usize) -> &[f64] {
        &self.atom_omega[atom][..2 * self.dim()]
    }

    /// Direction of one step from an atom given a uniform `u ∈ [0,1)`.
    #[inline]
    pub fn step_direction(&self, atom: usize, u: f64) -> Direction {
        let cu = &self.atom_cumulative[atom];
        let mut e = 0;
        while u >= cu[e] {
            e += 1;
        }
        Direction::from_index(e)
    }

    pub fn site_omega(&self, x: Point) -> SiteConfig {
        let atom = self.site_atom(x);
        let xi = self.law.atom(atom).to_vec();
        SiteConfig {
            atom,
            omega: self.atom_omega(atom).to_vec(),
            xi_bar: self.law.xi_bar(atom),
            xi,
        }
    }

    /// Local drift of atom `atom`.
    pub fn atom_drift(&self, atom: usize) -> Vec<f64> {
        let om = self.atom_omega(atom);
        (0..self.dim()).map(|a| om[2 * a] - om[2 * a + 1]).collect()
    }

    /// Averaged kernel `p_ε(e) = p₀(e) + ε E[ξ(0,e)]`.
    pub fn p_epsilon(&self) -> TransitionKernel {
        p_epsilon_of(&self.p0, &self.law, self.epsilon).expect("κ > 0 keeps p_ε valid")
    }

    /// `E[d(0,ω)] = d₀ + ε d₁`.
    pub fn mean_drift(&self) -> Vec<f64> {
        self.p_epsilon().drift()
    }

    /// Local drift condition `E[d(0,ω)]·e₁ ≥ ε`.
    pub fn check_ld(&self) -> LdCheck {
        let margin = self.mean_drift()[0] - self.epsilon;
        LdCheck {
            holds: margin >= 0.0,
            margin,
        }
    }
}

/// `p₀ + ε E[ξ]`, renormalised against rounding.
pub fn p_epsilon_of(
    p0: &TransitionKernel,
    law: &PerturbationLaw,
    epsilon: f64,
) -> Result<TransitionKernel> {
    let probs: Vec<f64> = p0
        .probs()
        .iter()
        .zip(law.mean())
        .map(|(p, m)| p + epsilon * m)
        .collect();
    let s: f64 = probs.iter().sum();
    TransitionKernel::new(p0.dim(), probs.iter().map(|p| p / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_atom_field(eps: f64, seed: u64) -> EnvironmentField {
        EnvironmentField::new(
            TransitionKernel::symmetric(2),
            eps,
            PerturbationLaw::two_atom_drift(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn law_moments() {
        let z = PerturbationLaw::zero(2);
        assert!(z.mean().iter().all(|&m| m == 0.0));
        assert!(z.covariance().iter().flatten().all(|&c| c == 0.0));
        let l = PerturbationLaw::two_atom_drift();
        assert_eq!(l.mean(), &[0.75, -0.75, 0.0, 0.0]);
        assert!((l.covariance()[2][2] - 0.25).abs() < 1e-15);
        assert!((l.covariance()[2][3] + 0.25).abs() < 1e-15);
        assert_eq!(l.covariance()[0][0], 0.0);
    }

    #[test]
    fn law_rejections() {
        assert!(make_perturbation_law(2, vec![vec![0.1, 0.0, 0.0, 0.0]], vec![1.0]).is_err());
        assert!(make_perturbation_law(1, vec![vec![1.5, -1.5]], vec![1.0]).is_err());
        assert!(make_perturbation_law(1, vec![vec![0.5, -0.5]], vec![0.9]).is_err());
        assert!(make_perturbation_law(1, vec![vec![0.5, -0.5]], vec![-1.0]).is_err());
        assert!(make_perturbation_law(1, vec![vec![0.5, -0.5, 0.0]], vec![1.0]).is_err());
    }

    #[test]
    fn law_json_round_trip() {
        let l = PerturbationLaw::two_atom_drift();
        let s = serde_json::to_string(&l).unwrap();
        assert!(s.contains("\"dimension\":2"));
        let back: PerturbationLaw = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        let bad = r#"{"dimension":1,"atoms":[{"xi":[0.2,0.1],"w":1.0}]}"#;
        assert!(serde_json::from_str::<PerturbationLaw>(bad).is_err());
    }

    #[test]
    fn ld_examples() {
        let f = two_atom_field(0.1, 1);
        let ld = f.check_ld();
        assert!(ld.holds);
        assert!((ld.margin - 0.05).abs() < 1e-15);

        let sym = PerturbationLaw::zero(2);
        let f = EnvironmentField::new(TransitionKernel::symmetric(2), 0.1, sym.clone(), 1).unwrap();
        assert!(!f.check_ld().holds);

        let p0 = TransitionKernel::new(2, vec![0.35, 0.15, 0.25, 0.25]).unwrap();
        let f = EnvironmentField::new(p0, 0.1, sym, 1).unwrap();
        let ld = f.check_ld();
        assert!(ld.holds);
        assert!((ld.margin - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ld_ignores_null_atoms() {
        let l = PerturbationLaw::two_atom_drift()
            .with_null_atom(vec![-1.0, 1.0, 0.0, 0.0])
            .unwrap();
        let f = EnvironmentField::new(TransitionKernel::symmetric(2), 0.1, l, 3).unwrap();
        assert_eq!(f.check_ld(), two_atom_field(0.1, 3).check_ld());
    }

    #[test]
    fn kappa_and_construction_bounds() {
        assert!((two_atom_field(0.1, 0).kappa() - 0.15).abs() < 1e-15);
        assert!(EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.25,
            PerturbationLaw::two_atom_drift(),
            0
        )
        .is_err());
        assert!((two_atom_field(1e-9, 0).kappa() - 0.25).abs() < 1e-8);
    }

    #[test]
    fn p_epsilon_example() {
        let p = two_atom_field(0.1, 0).p_epsilon();
        let want = [0.325, 0.175, 0.25, 0.25];
        for (a, b) in p.probs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let f = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.1,
            PerturbationLaw::zero(2),
            0,
        )
        .unwrap();
        assert_eq!(f.p_epsilon(), TransitionKernel::symmetric(2));
    }

    #[test]
    fn lookups_are_deterministic_and_shift_consistent() {
        let f = two_atom_field(0.1, 42);
        let x = Point::new(&[17, -5]);
        assert_eq!(f.site_omega(x), f.site_omega(x));
        assert_eq!(f.shifted(x).site_omega(Point::origin()), f.site_omega(x));
        let y = Point::new(&[-3, 8]);
        assert_eq!(
            f.shifted(x).shifted(y).site_atom(Point::origin()),
            f.site_atom(x + y)
        );
        let single = EnvironmentField::new(
            TransitionKernel::symmetric(2),
            0.1,
            PerturbationLaw::zero(2),
            1,
        )
        .unwrap();
        assert_eq!(single.site_omega(x).omega, vec![0.25; 4]);
    }

    #[test]
    fn atom_frequencies_within_four_sigma() {
        let l = make_perturbation_law(
            1,
            vec![vec![0.5, -0.5], vec![-0.5, 0.5], vec![0.0, 0.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let f = EnvironmentField::new(TransitionKernel::symmetric(1), 0.2, l, 99).unwrap();
        let n = 1_000_000i64;
        let mut counts = [0u64; 3];
        for x in 0..n {
            counts[f.site_atom(Point::new(&[x]))] += 1;
        }
        let mut chi2 = 0.0;
        for (c, w) in counts.iter().zip([0.2, 0.3, 0.5]) {
            let expect = w * n as f64;
            let sigma = (n as f64 * w * (1.0 - w)).sqrt();
            assert!((*c as f64 - expect).abs() < 4.0 * sigma, "{counts:?}");
            chi2 += (*c as f64 - expect).powi(2) / expect;
        }
        // two degrees of freedom; P(chi2 > 18.4) ≈ 1e-4
        assert!(chi2 < 18.4, "chi2 = {chi2}");
    }

    #[test]
    fn neighbouring_sites_are_uncorrelated() {
        let f = two_atom_field(0.1, 5);
        let n = 200_000i64;
        let mut same = 0u64;
        for x in 0..n {
            let a = f.site_atom(Point::new(&[x, 0]));
            let b = f.site_atom(Point::new(&[x, 1]));
            same += (a == b) as u64;
        }
        let frac = same as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((frac - 0.5).abs() < 4.0 * sigma, "{frac}");
    }

    #[test]
    fn empirical_mean_of_xi() {
        let f = two_atom_field(0.1, 11);
        let n = 100_000i64;
        let mut s = 0.0;
        for x in 0..n {
            s += f.site_omega(Point::new(&[x, 3 * x])).xi[2];
        }
        let sigma = (0.25 / n as f64).sqrt();
        assert!((s / n as f64).abs() < 4.0 * sigma);
    }

    proptest! {
        #[test]
        fn sampled_rows_are_elliptic_and_stochastic(seed in any::<u64>(), x in -1000i64..1000, y in -1000i64..1000) {
            let f = two_atom_field(0.1, seed);
            let s = f.site_omega(Point::new(&[x, y]));
            prop_assert!(s.omega.iter().all(|&w| w >= f.kappa() - 1e-15));
            prop_assert!((s.omega.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for e in 0..4 {
                prop_assert!((s.xi_bar[e] - (s.xi[e] - f.law().mean()[e])).abs() == 0.0);
            }
        }

        #[test]
        fn step_direction_follows_cumulative(u in 0.0f64..1.0) {
            let f = two_atom_field(0.1, 0);
            let d = f.step_direction(0, u);
            let om = f.atom_omega(0);
            let lo: f64 = om[..d.index()].iter().sum();
            prop_assert!(u >= lo - 1e-15);
            prop_assert!(u < lo + om[d.index()] + 1e-15);
        }
    }
}
