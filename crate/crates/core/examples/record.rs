//! Record a run into a replay store, then replay it offline.
//!
//! With an endpoint the answers come from a live chat-completion service
//! (key read from `OPENAI_API_KEY`); without one they come from a script.
//!
//! ```text
//! cargo run --example record [endpoint [model]]
//! ```

use std::path::PathBuf;

use fixloop::diagnostics::{CheckerProfile, CommandChecker};
use fixloop::llm::{CompletionBackend, HttpBackend, HttpConfig, RecordingBackend, ReplayBackend, ReplayStore, ScriptedBackend};
use fixloop::orchestrator::{RunConfig, Session};
use fixloop::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

fn main() {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/so-e0515");
    let mut args = std::env::args().skip(1);
    let endpoint = args.next();
    let mut cfg = RunConfig::default();
    if let Some(model) = args.next() {
        cfg.model = model;
    }

    let inner: Box<dyn CompletionBackend> = match endpoint {
        Some(endpoint) => Box::new(HttpBackend::new(HttpConfig {
            endpoint,
            ..HttpConfig::default()
        })),
        None => Box::new(ScriptedBackend::from_store(&ReplayStore::open(fixture.join("replay")).unwrap()).unwrap()),
    };

    let out = tempfile::tempdir().unwrap();
    let store_dir = out.path().join("store");
    let first = out.path().join("first");
    copy_tree(&fixture.join("project"), &first).unwrap();

    let mut recording = RecordingBackend::new(inner, ReplayStore::create(&store_dir).unwrap());
    let mut ws = Workspace::load(&first, DEFAULT_EXTENSIONS).unwrap();
    let mut checker = CommandChecker::new(CheckerProfile::compiler());
    let (report, _) = Session::new(&mut ws, &mut checker, &mut recording, &cfg).run().unwrap();
    let store = recording.into_store();
    println!("recorded {} slot(s) into {}: {report}", store.manifest().slots.len(), store_dir.display());

    let second = out.path().join("second");
    copy_tree(&fixture.join("project"), &second).unwrap();
    let mut ws = Workspace::load(&second, DEFAULT_EXTENSIONS).unwrap();
    let mut replay = ReplayBackend::open(&store_dir).unwrap();
    let (again, _) = Session::new(&mut ws, &mut checker, &mut replay, &cfg).run().unwrap();
    println!("replayed {} request(s): {again}", replay.requests_served());
}
