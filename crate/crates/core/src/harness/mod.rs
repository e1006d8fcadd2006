//! Batch experiment runner: manifests, recipes and pass/fail summaries.
//!
//! A run writes the resolved manifest, the recipe's CSV tables and a
//! `summary.json` whose criteria carry the acceptance identifiers `C1`–`C11`.
//! Outputs depend only on the manifest; worker count changes scheduling, not
//! results.

mod manifest;
pub mod recipes;
mod scaling;

pub use manifest::{ExperimentManifest, Recipe};
pub use recipes::CriterionResult;
pub use scaling::{residual_scaling_report, ResidualPoint, ScalingFit, ScalingReport};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::output::write_json;

/// Default worker count when `--workers` is not given.
pub const WORKERS_ENV: &str = "RWRE_LAB_WORKERS";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecipeSummary {
    pub recipe: Recipe,
    pub artifact_version: String,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub passed: bool,
    pub artifacts: Vec<String>,
}

impl RecipeSummary {
    pub fn criterion(&self, id: &str) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

/// Runs the manifest's recipe, writes its artifacts under `out_dir` and
/// returns the summary (also written as `summary.json`).
pub fn run_recipe(m: &ExperimentManifest) -> Result<RecipeSummary> {
    m.validate()?;
    let dir = &m.out_dir;
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("manifest.json"), &m.to_json_value()?)?;
    let (criteria, mut artifacts) = match m.recipe {
        Recipe::KernelTable => {
            let r = recipes::kernel_table(m)?;
            (r.criteria(), r.write_artifacts(dir)?)
        }
        Recipe::Corollary2Verify => {
            let r = recipes::corollary2_verify(m)?;
            (r.criteria(), r.write_artifacts(dir)?)
        }
        Recipe::VelocityVerify => {
            let r = recipes::velocity_verify(m)?;
            (r.criteria(), r.write_artifacts(dir)?)
        }
        Recipe::GreenLemmaVerify => {
            let r = recipes::green_lemma_verify(m)?;
            (
                recipes::lemma_criteria(&r),
                recipes::write_lemma_artifacts(&r, dir)?,
            )
        }
        Recipe::MuDeltaVsCesaro => {
            let r = recipes::mu_delta_vs_cesaro(m)?;
            (r.criteria(), r.write_artifacts(dir)?)
        }
        Recipe::KalikowJdelta => {
            let r = recipes::kalikow_jdelta(m)?;
            (r.criteria(), r.write_artifacts(dir)?)
        }
        Recipe::BallisticityCheck => {
            let r = recipes::ballisticity_check(m)?;
            (r.criteria(), r.write_artifacts(dir)?)
        }
    };
    artifacts.insert(0, "manifest.json".into());
    let summary = RecipeSummary {
        recipe: m.recipe,
        artifact_version: m.artifact_version.clone(),
        seed: m.seed(),
        passed: criteria.iter().all(|c| c.passed),
        criteria,
        artifacts,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// [`run_recipe`] on a dedicated pool of `workers` threads.
pub fn run_recipe_with_workers(m: &ExperimentManifest, workers: usize) -> Result<RecipeSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_recipe(m))
}

/// Worker count from `RWRE_LAB_WORKERS`, else the number of CPUs.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
