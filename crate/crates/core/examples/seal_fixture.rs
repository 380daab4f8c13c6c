//! Re-records replay stores so their prompt digests match the prompts the
//! current code builds. For fixtures this also rewrites
//! `expected/report.json`.
//!
//! Hand-written answers can be dropped in as `<seq>_<i>.txt` with a
//! manifest entry whose digest is a placeholder; sealing fills it in.
//!
//!     cargo run --example seal_fixture -- crates/core/fixtures/so-e0515
//!     cargo run --example seal_fixture -- --bench <dataset-dir> <replay-dir>

use std::path::Path;

use fixloop::fixtures::{seal_bench, seal_fixture, Fixture};
use fixloop::orchestrator::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.as_slice() {
        [] => {
            eprintln!("usage: seal_fixture <fixture-dir>... | --bench <dataset-dir> <replay-dir>");
            std::process::exit(2);
        }
        [flag, dataset, replay] if flag == "--bench" => {
            for (name, report) in seal_bench(Path::new(dataset), Path::new(replay), &RunConfig::default())? {
                print!("{name}: {report}");
            }
        }
        dirs => {
            for dir in dirs {
                let f = Fixture::load(dir)?;
                let run = seal_fixture(&f)?;
                print!("{}: {}", f.spec.name, run.report);
                for m in run.tree_mismatches.iter().chain(&run.report_mismatches) {
                    println!("  mismatch: {m}");
                }
            }
        }
    }
    Ok(())
}
