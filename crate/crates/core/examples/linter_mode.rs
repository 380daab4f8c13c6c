//! Fix clippy warnings from a recorded run. The prompt carries the text of
//! `cargo clippy --explain <lint>` rather than the short rendered warning.
//!
//! ```text
//! cargo run --example linter_mode
//! ```

use std::path::PathBuf;

use fixloop::diagnostics::{Checker, CheckerProfile, CommandChecker};
use fixloop::fixtures::Fixture;
use fixloop::llm::ReplayBackend;
use fixloop::orchestrator::Session;
use fixloop::runlog::RunRecord;
use fixloop::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

fn main() {
    let fixture = Fixture::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/lint-three")).unwrap();
    let scratch = tempfile::tempdir().unwrap();
    copy_tree(&fixture.project_dir(), scratch.path()).unwrap();

    let groups = ["complexity", "style"];
    let mut checker = CommandChecker::new(CheckerProfile::linter(&groups));
    println!("$ {}", checker.command_line());
    let warnings = checker.check(scratch.path()).expect("clippy runs");
    for w in &warnings {
        println!("  {}", w.headline());
    }
    if let Some(first) = warnings.first() {
        let e = checker.explain(first);
        println!("\nexplanation for the first one ({:?}):", e.source);
        for l in e.text.lines().take(8) {
            println!("  {l}");
        }
    }

    let mut ws = Workspace::load(scratch.path(), DEFAULT_EXTENSIONS).unwrap();
    let mut backend = ReplayBackend::open(fixture.replay_dir()).unwrap();
    let cfg = fixture.run_config();
    let (report, log) = Session::new(&mut ws, &mut checker, &mut backend, &cfg).run().unwrap();
    for r in log.records() {
        if let RunRecord::Iteration { explanation_source, chosen, .. } = r {
            println!("iteration: explanation from {explanation_source:?}, chose {chosen:?}");
        }
    }
    print!("\n{report}");
}
