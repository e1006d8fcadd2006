//! Running a recipe from a manifest in-process.

use rwre_lab::harness::{run_recipe, ExperimentManifest, Recipe};

fn main() -> rwre_lab::Result<()> {
    let mut m = match std::env::args().nth(1) {
        Some(path) => ExperimentManifest::load(path.as_ref())?,
        None => ExperimentManifest::defaults(Recipe::KernelTable),
    };
    m.out_dir = std::env::temp_dir().join("rwre-lab").join(m.recipe.name());
    let summary = run_recipe(&m)?;
    for c in &summary.criteria {
        println!(
            "{} {}: {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    println!("wrote {:?} to {}", summary.artifacts, m.out_dir.display());
    Ok(())
}
