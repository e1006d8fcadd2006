//! JSON experiment manifests.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::environment::{EnvironmentField, PerturbationLaw};
use crate::error::{LabError, Result};
use crate::kernels::TransitionKernel;
use crate::lattice::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    KernelTable,
    Corollary2Verify,
    VelocityVerify,
    GreenLemmaVerify,
    MuDeltaVsCesaro,
    KalikowJdelta,
    BallisticityCheck,
}

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::KernelTable,
        Recipe::Corollary2Verify,
        Recipe::VelocityVerify,
        Recipe::GreenLemmaVerify,
        Recipe::MuDeltaVsCesaro,
        Recipe::KalikowJdelta,
        Recipe::BallisticityCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::KernelTable => "kernel-table",
            Recipe::Corollary2Verify => "corollary2-verify",
            Recipe::VelocityVerify => "velocity-verify",
            Recipe::GreenLemmaVerify => "green-lemma-verify",
            Recipe::MuDeltaVsCesaro => "mu-delta-vs-cesaro",
            Recipe::KalikowJdelta => "kalikow-jdelta",
            Recipe::BallisticityCheck => "ballisticity-check",
        }
    }

    /// Acceptance criteria evaluated by the recipe.
    pub fn criteria(self) -> &'static [&'static str] {
        match self {
            Recipe::KernelTable => &["C1", "C2"],
            Recipe::Corollary2Verify => &["C3", "C4"],
            Recipe::VelocityVerify => &["C5"],
            Recipe::GreenLemmaVerify => &["C6", "C7"],
            Recipe::MuDeltaVsCesaro => &["C8", "C9"],
            Recipe::KalikowJdelta => &["C10"],
            Recipe::BallisticityCheck => &["C11"],
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| LabError::Manifest(format!("unknown recipe {s:?}")))
    }
}

/// Every parameter of one experiment. Keys absent from a manifest file take
/// the recipe's defaults, so a manifest plus the code version determines the
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub recipe: Recipe,
    pub artifact_version: String,
    pub dimension: usize,
    /// Backbone kernel in direction order `e₁, -e₁, e₂, -e₂, …`.
    pub p0: Vec<f64>,
    /// Perturbation law file; the built-in two-atom law when absent (`d = 2`).
    pub law_file: Option<PathBuf>,
    pub epsilons: Vec<f64>,
    pub epsilon_target: f64,
    pub deltas: Vec<f64>,
    /// Per-δ solver tolerances; empty means `tol` for every δ.
    pub tols: Vec<f64>,
    pub identity_delta: f64,
    pub box_sites: Vec<Point>,
    pub a_sites: Vec<Point>,
    pub z_sites: Vec<Point>,
    pub n_steps: u64,
    pub burn_in: Option<u64>,
    pub n_replicas: u64,
    pub n_traj: u64,
    pub n_env: u64,
    pub n_instances: u64,
    pub max_sites: usize,
    pub max_delta: f64,
    pub site_radius: i64,
    pub check_radius: i64,
    pub radius: i64,
    pub quad_grid: usize,
    pub n_max: usize,
    pub tol: f64,
    pub big_l: f64,
    pub m: f64,
    pub step_cap: u64,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl ExperimentManifest {
    /// Defaults sized for the acceptance runs on a single core.
    pub fn defaults(recipe: Recipe) -> Self {
        let mut m = ExperimentManifest {
            recipe,
            artifact_version: "1".into(),
            dimension: 2,
            p0: vec![0.25; 4],
            law_file: None,
            epsilons: vec![0.1],
            epsilon_target: 0.1,
            deltas: vec![0.9],
            tols: Vec::new(),
            identity_delta: 0.9,
            box_sites: vec![Point::new(&[0, 1])],
            a_sites: vec![Point::origin(), Point::new(&[1, 0])],
            z_sites: vec![Point::origin(), Point::new(&[1, 0])],
            n_steps: 1_000_000,
            burn_in: None,
            n_replicas: 40,
            n_traj: 100_000,
            n_env: 20,
            n_instances: 100,
            max_sites: 3,
            max_delta: 0.02,
            site_radius: 2,
            check_radius: 3,
            radius: 4,
            quad_grid: 1024,
            n_max: 10_000,
            tol: 1e-10,
            big_l: 20.0,
            m: 2.0,
            step_cap: 1_000_000,
            seeds: vec![20_240_601],
            out_dir: PathBuf::from("out").join(recipe.name()),
        };
        match recipe {
            Recipe::KernelTable => {
                // stabilisation threshold for the truncated sums
                m.tol = 1e-2;
            }
            Recipe::Corollary2Verify => {
                m.epsilons = vec![0.04, 0.08, 0.16];
                m.epsilon_target = 0.08;
                m.box_sites = vec![Point::origin(), Point::new(&[0, 1])];
                m.n_steps = 5_000_000;
                m.n_replicas = 40;
            }
            Recipe::VelocityVerify => {
                m.epsilons = vec![0.05, 0.1];
                m.n_steps = 1_000_000;
                m.n_replicas = 100;
            }
            Recipe::GreenLemmaVerify => {
                m.deltas = vec![0.9];
                m.tol = 1e-10;
            }
            Recipe::MuDeltaVsCesaro => {
                m.deltas = vec![0.99];
                m.identity_delta = 0.9;
                m.n_traj = 1_000_000;
                m.n_env = 200;
                m.n_steps = 2_500_000;
                m.burn_in = Some(1000);
                m.tol = 1e-8;
            }
            Recipe::KalikowJdelta => {
                m.epsilon_target = 0.05;
                m.deltas = vec![0.9, 0.95, 0.99];
                m.tols = vec![1e-4, 1e-3, 1e-2];
                m.n_env = 20;
            }
            Recipe::BallisticityCheck => {
                m.n_traj = 100_000;
            }
        }
        m
    }

    /// Parses a manifest, filling absent keys from the recipe defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        let obj = user
            .as_object()
            .ok_or_else(|| LabError::Manifest("manifest must be a JSON object".into()))?;
        let recipe: Recipe = obj
            .get("recipe")
            .and_then(Value::as_str)
            .ok_or_else(|| LabError::Manifest("missing \"recipe\"".into()))?
            .parse()?;
        let mut merged = serde_json::to_value(Self::defaults(recipe))?;
        let target = merged
            .as_object_mut()
            .expect("manifest serialises to an object");
        for (k, v) in obj {
            if !target.contains_key(k) {
                return Err(LabError::Manifest(format!("unknown key {k:?}")));
            }
            target.insert(k.clone(), v.clone());
        }
        let m: Self =
            serde_json::from_value(merged).map_err(|e| LabError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Loads a manifest file; a relative `law_file` is resolved against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        if let (Some(law), Some(dir)) = (&m.law_file, path.parent()) {
            if law.is_relative() {
                m.law_file = Some(dir.join(law));
            }
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::Manifest(msg));
        if !(1..=crate::lattice::MAX_DIM).contains(&self.dimension) {
            return bad(format!("dimension {} unsupported", self.dimension));
        }
        TransitionKernel::new(self.dimension, self.p0.clone())
            .map_err(|e| LabError::Manifest(format!("p0: {e}")))?;
        if self.epsilons.is_empty() {
            return bad("empty ε list".into());
        }
        if self
            .epsilons
            .iter()
            .chain([&self.epsilon_target])
            .any(|e| !(0.0..1.0).contains(e))
        {
            return bad("ε values must lie in [0,1)".into());
        }
        if self.deltas.is_empty()
            || self
                .deltas
                .iter()
                .chain([&self.identity_delta])
                .any(|d| !(*d > 0.0 && *d < 1.0))
        {
            return bad("δ list must be non-empty with values in (0,1)".into());
        }
        if !self.tols.is_empty() && self.tols.len() != self.deltas.len() {
            return bad("tols must match deltas in length".into());
        }
        if self.seeds.is_empty() {
            return bad("empty seed list".into());
        }
        if self
            .box_sites
            .iter()
            .chain(&self.a_sites)
            .chain(&self.z_sites)
            .any(|p| !p.fits_dim(self.dimension))
        {
            return bad(format!("site outside Z^{}", self.dimension));
        }
        if self.recipe == Recipe::Corollary2Verify {
            let lo = self.epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = self.epsilons.iter().cloned().fold(0.0, f64::max);
            if self.epsilons.len() < 3 || hi < 4.0 * lo {
                return bad("the residual scaling fit needs ≥ 3 ε values spanning ≥ 4×".into());
            }
            if !self.epsilons.contains(&self.epsilon_target) {
                return bad("epsilon_target must be one of epsilons".into());
            }
            if self.box_sites.len() != 2 || !self.box_sites[0].is_origin() {
                return bad("box_sites must be [0, z₁]".into());
            }
        }
        if self.n_replicas == 0 || self.n_traj == 0 || self.n_env < 2 {
            return bad("replica, trajectory and environment counts must be positive".into());
        }
        Ok(())
    }

    /// The resolved manifest as JSON with every site written in full
    /// `dimension` coordinates.
    pub fn to_json_value(&self) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        for key in ["box_sites", "a_sites", "z_sites"] {
            if let Some(Value::Array(sites)) = v.get_mut(key) {
                for site in sites.iter_mut() {
                    if let Value::Array(c) = site {
                        c.resize(self.dimension.max(c.len()), Value::from(0));
                    }
                }
            }
        }
        Ok(v)
    }

    /// The manifest with `seeds = [seed]`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }

    pub fn p0_kernel(&self) -> Result<TransitionKernel> {
        TransitionKernel::new(self.dimension, self.p0.clone())
    }

    pub fn law(&self) -> Result<PerturbationLaw> {
        match &self.law_file {
            Some(path) => PerturbationLaw::from_file(path),
            None if self.dimension == 2 => Ok(PerturbationLaw::two_atom_drift()),
            None => Err(LabError::Manifest(
                "law_file is required unless d = 2".into(),
            )),
        }
    }

    pub fn field(&self, epsilon: f64) -> Result<EnvironmentField> {
        EnvironmentField::new(self.p0_kernel()?, epsilon, self.law()?, self.seed())
    }

    /// Solver tolerance for `deltas[i]`.
    pub fn tol_for(&self, i: usize) -> f64 {
        self.tols.get(i).copied().unwrap_or(self.tol)
    }
}
