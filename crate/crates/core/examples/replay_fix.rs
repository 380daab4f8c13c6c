//! Run the repair loop on a fixture with its recorded answers and print the
//! run log. Needs `cargo` for the checker but no network.
//!
//! ```text
//! cargo run --example replay_fix [fixture-name]
//! ```

use std::path::PathBuf;

use fixloop::fixtures::Fixture;
use fixloop::llm::ReplayBackend;
use fixloop::orchestrator::Session;
use fixloop::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "so-e0515".into());
    let fixture = Fixture::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(&name)).unwrap();
    println!("{}: {}", fixture.spec.name, fixture.spec.description);

    let scratch = tempfile::tempdir().unwrap();
    copy_tree(&fixture.project_dir(), scratch.path()).unwrap();
    let mut ws = Workspace::load(scratch.path(), DEFAULT_EXTENSIONS).unwrap();
    let mut checker = fixture.checker();
    let mut backend = ReplayBackend::open(fixture.replay_dir()).unwrap();
    let cfg = fixture.run_config();

    let (report, log) = Session::new(&mut ws, &mut checker, &mut backend, &cfg).run().unwrap();
    for r in log.records() {
        println!("{}", serde_json::to_string(r).unwrap());
    }
    print!("\n{report}");
}
