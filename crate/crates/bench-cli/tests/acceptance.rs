//! Runs every fixture at its pinned settings and prints one verdict line per
//! criterion. Exits nonzero when any criterion fails or is missing.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use eulerctl_bench::criteria::determinism;
use eulerctl_bench::{load_config, run, verdicts, Verdict};

const FIXTURES: [&str; 6] = [
    "saturation",
    "convergence",
    "reproduction",
    "relaxation",
    "steering",
    "projection",
];

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"))
}

fn run_fixture(name: &str, out: &Path) -> Vec<Verdict> {
    let loaded = load_config(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    match run(&loaded, out, 1) {
        Ok(summary) => verdicts(&summary),
        Err(e) => panic!("{name}: {e}"),
    }
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temporary directory");
    let mut all: Vec<Verdict> = Vec::new();
    for name in FIXTURES {
        all.extend(run_fixture(name, &root.path().join(name)));
    }
    // the seeded sweep again, compared byte for byte
    let again = root.path().join("saturation-again");
    run_fixture("saturation", &again);
    all.push(determinism(&root.path().join("saturation"), &again).expect("both runs readable"));
    all.sort_by_key(|v| v.id);

    println!("acceptance criteria");
    let mut ok = true;
    for id in 1..=12u8 {
        match all.iter().find(|v| v.id == id) {
            Some(v) => {
                ok &= v.pass;
                println!("{v}");
            }
            None => {
                ok = false;
                println!("[FAIL] C{id:<2} not produced by any fixture");
            }
        }
    }
    if ok {
        println!("all 12 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance FAILED");
        ExitCode::FAILURE
    }
}
