//! Run the bundled micro benchmark from recorded answers and print the
//! per-category table.
//!
//! ```text
//! cargo run --example bench [--csv]
//! ```

use std::path::PathBuf;

use fixloop::bench::{render_summary, run_bench, BenchmarkCase};
use fixloop::llm::{BackendError, CompletionBackend, ReplayBackend};
use fixloop::orchestrator::RunConfig;

fn main() {
    let csv = std::env::args().any(|a| a == "--csv");
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let replay = root.join("micro-replay");
    let mut backend_for = |case: &BenchmarkCase| -> Result<Box<dyn CompletionBackend>, BackendError> {
        Ok(Box::new(ReplayBackend::open(replay.join(&case.name))?))
    };

    let run = run_bench(&root.join("micro"), &RunConfig::default(), &mut backend_for).unwrap();
    for r in &run.results {
        let failure = r.failure.map(|f| format!(" ({f} failure)")).unwrap_or_default();
        println!("{:<20} {:<10} {}{failure}", r.name, r.category.to_string(), r.outcome);
    }
    println!();
    print!("{}", render_summary(&run.summary, csv));
}
