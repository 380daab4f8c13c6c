//! Run `cargo check` on a project and show each error with the code window
//! the model would get.
//!
//! ```text
//! cargo run --example localize [project-dir] [window]
//! ```

use std::env;
use std::path::PathBuf;

use fixloop::diagnostics::{Checker, CheckerProfile, CommandChecker};
use fixloop::localization::{collect_locations, extract_snippets};
use fixloop::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

fn main() {
    let mut args = env::args().skip(1);
    let project = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/so-e0515/project"));
    let window: usize = args.next().map_or(3, |w| w.parse().expect("window is a number"));

    // Check a copy so no target/ directory lands in the project.
    let scratch = tempfile::tempdir().unwrap();
    copy_tree(&project, scratch.path()).unwrap();
    let ws = Workspace::load(scratch.path(), DEFAULT_EXTENSIONS).unwrap();
    let mut checker = CommandChecker::new(CheckerProfile::compiler());
    let diags = checker.check(scratch.path()).expect("cargo check runs");
    println!("{} error(s)", diags.len());

    for d in &diags {
        println!("\n{}", d.headline());
        for s in extract_snippets(&ws, &collect_locations(d, &ws), window) {
            println!("File: {}, lines {}", s.file.display(), s.window);
            for l in s.numbered_lines() {
                println!("  {l}");
            }
        }
    }
}
