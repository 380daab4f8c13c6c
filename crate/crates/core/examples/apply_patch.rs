//! Apply a recorded answer to a copy of the worked-example project and
//! print the resulting diff.
//!
//! ```text
//! cargo run --example apply_patch
//! ```

use std::path::PathBuf;

use fixloop::changelog::{parse_response, validate};
use fixloop::llm::ReplayStore;
use fixloop::patching::{apply, plan, unified_diff};
use fixloop::prompting::PromptVariant;
use fixloop::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

fn main() {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/so-e0515");
    let scratch = tempfile::tempdir().unwrap();
    copy_tree(&fixture.join("project"), scratch.path()).unwrap();

    let store = ReplayStore::open(fixture.join("replay")).unwrap();
    let answer = store.read_completions(0).unwrap().remove(0).text;

    let mut ws = Workspace::load(scratch.path(), DEFAULT_EXTENSIONS).unwrap();
    let before = ws.snapshot();
    let changelogs = parse_response(&answer, PromptVariant::P4).expect("recorded answer parses");
    for cl in &changelogs {
        validate(cl, &ws).expect("echoed lines match the file");
    }
    let p = plan(&changelogs, "completion 0").unwrap();
    for e in &p.edits {
        println!("edit {} lines {} -> {} line(s)", e.file.display(), e.range, e.replacement.len());
    }
    apply(&mut ws, &p).unwrap();
    print!("\n{}", unified_diff(&before, &ws.snapshot()));
    println!("written to {}", scratch.path().display());
}
