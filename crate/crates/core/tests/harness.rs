use std::process::Command;

use rwre_lab::harness::{run_recipe, run_recipe_with_workers, ExperimentManifest, Recipe};
use rwre_lab::kernels::PotentialKernelTable;
use rwre_lab::Point;

fn small(recipe: Recipe, dir: &std::path::Path) -> ExperimentManifest {
    let mut m = ExperimentManifest::defaults(recipe);
    m.out_dir = dir.to_path_buf();
    m.n_steps = 20_000;
    m.burn_in = Some(1000);
    m.n_replicas = 4;
    m.n_traj = 2_000;
    m.n_env = 4;
    m.n_instances = 3;
    m.quad_grid = 256;
    m
}

fn read(dir: &std::path::Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let s1 = run_recipe_with_workers(&small(Recipe::VelocityVerify, &a), 1).unwrap();
    let s2 = run_recipe_with_workers(&small(Recipe::VelocityVerify, &b), 3).unwrap();
    assert_eq!(s1.artifacts, s2.artifacts);
    // only the manifest records out_dir
    for f in s1.artifacts.iter().filter(|f| *f != "manifest.json") {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_eq!(read(&a, "summary.json"), read(&b, "summary.json"));
}

#[test]
fn summary_mirrors_the_recipe_criteria() {
    let t = tempfile::tempdir().unwrap();
    for r in [
        Recipe::KernelTable,
        Recipe::MuDeltaVsCesaro,
        Recipe::BallisticityCheck,
    ] {
        let s = run_recipe(&small(r, &t.path().join(r.name()))).unwrap();
        let ids: Vec<&str> = s.criteria.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, r.criteria());
        let back: ExperimentManifest =
            serde_json::from_str(&read(&t.path().join(r.name()), "manifest.json")).unwrap();
        assert_eq!(back.recipe, r);
        assert!(
            read(&t.path().join(r.name()), "manifest.json").contains("[\n      1,\n      0\n    ]")
        );
    }
}

#[test]
fn kernel_table_csv_has_full_precision() {
    let t = tempfile::tempdir().unwrap();
    run_recipe(&small(Recipe::KernelTable, t.path())).unwrap();
    let csv = read(t.path(), "kernel_recursion.csv");
    let line = csv
        .lines()
        .find(|l| l.starts_with("2,0,") || l.starts_with("0,2,"))
        .unwrap();
    let v: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
    let table = PotentialKernelTable::ssrw_recursion(2).unwrap();
    assert_eq!(v, table.get(Point::new(&[2, 0])).unwrap());
    assert!((v - (8.0 / std::f64::consts::PI - 4.0)).abs() < 1e-15);
}

fn cli(args: &[&str]) -> std::process::ExitStatus {
    Command::new(env!("CARGO_BIN_EXE_rwre-lab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
        .status
}

#[test]
fn cli_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let manifests = concat!(env!("CARGO_MANIFEST_DIR"), "/manifests");
    let out = t.path().to_str().unwrap();
    let ok = cli(&[
        "kernel-table",
        "--manifest",
        &format!("{manifests}/kernel-table.json"),
        "--out-dir",
        out,
    ]);
    assert_eq!(ok.code(), Some(0));
    assert!(t.path().join("summary.json").exists());

    // too few trajectories to resolve the back-exit bound: an assertion fails
    let weak = t.path().join("weak.json");
    std::fs::write(
        &weak,
        r#"{"recipe": "ballisticity-check", "epsilon_target": 0.0, "n_traj": 200}"#,
    )
    .unwrap();
    let fail = cli(&[
        "ballisticity-check",
        "--manifest",
        weak.to_str().unwrap(),
        "--out-dir",
        out,
        "--workers",
        "2",
    ]);
    assert_eq!(fail.code(), Some(1));

    let wrong = cli(&[
        "velocity-verify",
        "--manifest",
        weak.to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert_eq!(wrong.code(), Some(2));
}
