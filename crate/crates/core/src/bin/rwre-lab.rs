use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rwre_lab::harness::{default_workers, run_recipe_with_workers, ExperimentManifest, Recipe};

/// Run one named experiment recipe from a JSON manifest.
#[derive(Parser, Debug)]
#[command(name = "rwre-lab", version)]
struct Args {
    /// kernel-table, corollary2-verify, velocity-verify, green-lemma-verify,
    /// mu-delta-vs-cesaro, kalikow-jdelta or ballisticity-check
    recipe: Recipe,
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest's first seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to $RWRE_LAB_WORKERS, else the CPU count.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: Args) -> rwre_lab::Result<bool> {
    let mut m = ExperimentManifest::load(&args.manifest)?;
    if m.recipe != args.recipe {
        return Err(rwre_lab::LabError::Manifest(format!(
            "manifest is for {}, not {}",
            m.recipe, args.recipe
        )));
    }
    if let Some(s) = args.seed {
        m = m.with_seed(s);
    }
    if let Some(d) = args.out_dir {
        m.out_dir = d;
    }
    let workers = args.workers.unwrap_or_else(default_workers);
    let summary = run_recipe_with_workers(&m, workers)?;
    for c in &summary.criteria {
        println!(
            "{} {}: {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    println!("artifacts in {}", m.out_dir.display());
    Ok(summary.passed)
}
