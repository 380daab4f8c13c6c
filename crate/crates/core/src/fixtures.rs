//! Self-verifying end-to-end fixtures.
//!
//! A fixture directory holds:
//!
//! - `fixture.toml`: run settings and the expected outcome,
//! - `project/`: the broken project,
//! - `replay/`: the recorded model answers (see [`ReplayStore`]),
//! - `expected/project/`: the tree the run must produce (absent when the
//!   run must leave the project untouched),
//! - `expected/report.json`: the exact report the run must produce.
//!
//! Verification copies `project/` to a scratch directory, runs the loop
//! there against the replay store and compares the results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::bench::CheckerKind;
use crate::diagnostics::{Checker, CommandChecker};
use crate::llm::{RecordingBackend, ReplayBackend, ReplayStore, ScriptedBackend};
use crate::orchestrator::{RunConfig, RunError, Session};
use crate::prompting::PromptVariant;
use crate::report::FixReport;
use crate::runlog::RunRecord;
use crate::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

fn default_n() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_max_unique() -> usize {
    crate::orchestrator::DEFAULT_MAX_UNIQUE_ERRORS
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub initial_errors: usize,
    pub fixed: usize,
    #[serde(default)]
    pub inner_iterations: Option<usize>,
    /// Failure classes of the errors that were not fixed, in report order.
    #[serde(default)]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub checker: CheckerKind,
    #[serde(default)]
    pub lint_groups: Option<Vec<String>>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub variant: PromptVariant,
    #[serde(default = "default_true")]
    pub grouping: bool,
    #[serde(default = "default_max_unique")]
    pub max_unique_errors: usize,
    #[serde(default)]
    pub test_cmd: Option<String>,
    pub expect: Expectation,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub dir: PathBuf,
    pub spec: FixtureSpec,
}

impl Fixture {
    pub fn load(dir: impl Into<PathBuf>) -> Result<Self, RunError> {
        let dir = dir.into();
        let path = dir.join("fixture.toml");
        let text = fs::read_to_string(&path).map_err(|source| RunError::Io {
            what: format!("reading {}", path.display()),
            source,
        })?;
        let spec = toml::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self { dir, spec })
    }

    pub fn project_dir(&self) -> PathBuf {
        self.dir.join("project")
    }

    pub fn replay_dir(&self) -> PathBuf {
        self.dir.join("replay")
    }

    pub fn expected_tree(&self) -> PathBuf {
        let p = self.dir.join("expected/project");
        if p.is_dir() {
            p
        } else {
            self.project_dir()
        }
    }

    pub fn expected_report_path(&self) -> PathBuf {
        self.dir.join("expected/report.json")
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            n_completions: self.spec.n,
            variant: self.spec.variant,
            grouping_enabled: self.spec.grouping,
            max_unique_errors: self.spec.max_unique_errors,
            test_command: self.spec.test_cmd.clone(),
            ..RunConfig::default()
        }
    }

    pub fn checker(&self) -> CommandChecker {
        CommandChecker::new(self.spec.checker.profile(self.spec.lint_groups.as_deref()))
    }
}

#[derive(Debug)]
pub struct FixtureRun {
    pub report: FixReport,
    pub records: Vec<RunRecord>,
    /// Files that differ between the produced and the expected tree.
    pub tree_mismatches: Vec<String>,
    pub report_mismatches: Vec<String>,
    /// The scratch copy the run happened in.
    pub workdir: tempfile::TempDir,
}

impl FixtureRun {
    pub fn passed(&self) -> bool {
        self.tree_mismatches.is_empty() && self.report_mismatches.is_empty()
    }
}

fn scratch_copy(f: &Fixture) -> Result<tempfile::TempDir, RunError> {
    let work = tempfile::tempdir().map_err(|source| RunError::Io {
        what: "creating a scratch directory".into(),
        source,
    })?;
    copy_tree(&f.project_dir(), work.path()).map_err(|source| RunError::Io {
        what: format!("copying {}", f.project_dir().display()),
        source,
    })?;
    Ok(work)
}

/// Runs the fixture against its replay store and compares the outcome.
pub fn verify_fixture(f: &Fixture) -> Result<FixtureRun, RunError> {
    let work = scratch_copy(f)?;
    let mut ws = Workspace::load(work.path(), DEFAULT_EXTENSIONS)?;
    let mut checker = f.checker();
    let mut backend = ReplayBackend::open(f.replay_dir())?;
    let cfg = f.run_config();
    let (report, log) = Session::new(&mut ws, &mut checker, &mut backend, &cfg).run()?;

    let tree_mismatches = compare_trees(&f.expected_tree(), work.path());
    let mut report_mismatches = check_expectation(&f.spec.expect, &report);
    match fs::read_to_string(f.expected_report_path()) {
        Ok(text) => match serde_json::from_str::<FixReport>(&text) {
            Ok(expected) if expected == report => {}
            Ok(_) => report_mismatches.push("report differs from expected/report.json".into()),
            Err(e) => report_mismatches.push(format!("expected/report.json: {e}")),
        },
        Err(_) => report_mismatches.push("expected/report.json is missing".into()),
    }
    Ok(FixtureRun {
        report,
        records: log.into_records(),
        tree_mismatches,
        report_mismatches,
        workdir: work,
    })
}

/// Re-records the replay store from its own answers so that prompt digests
/// match the current prompts, then writes `expected/report.json`.
///
/// Use after hand-editing answers or changing prompt construction; review
/// the resulting diff before committing it.
pub fn seal_fixture(f: &Fixture) -> Result<FixtureRun, RunError> {
    let (report, records, work) = seal_store(&f.project_dir(), &f.replay_dir(), &mut f.checker(), &f.run_config())?;
    let report_path = f.expected_report_path();
    let io = |what: String| move |source| RunError::Io { what, source };
    fs::create_dir_all(report_path.parent().expect("has parent")).map_err(io("creating expected/".into()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&report_path, json + "\n").map_err(io(format!("writing {}", report_path.display())))?;

    let tree_mismatches = compare_trees(&f.expected_tree(), work.path());
    let report_mismatches = check_expectation(&f.spec.expect, &report);
    Ok(FixtureRun {
        report,
        records,
        tree_mismatches,
        report_mismatches,
        workdir: work,
    })
}

/// Runs `project` (on a scratch copy) against the answers stored in
/// `replay`, ignoring their digests, and rewrites the store with the
/// prompts actually sent.
pub fn seal_store(
    project: &Path,
    replay: &Path,
    checker: &mut dyn Checker,
    cfg: &RunConfig,
) -> Result<(FixReport, Vec<RunRecord>, tempfile::TempDir), RunError> {
    let answers = ScriptedBackend::from_store(&ReplayStore::open(replay)?)?;
    let io = |what: String| move |source| RunError::Io { what, source };
    let fresh = tempfile::tempdir().map_err(io("creating a scratch directory".into()))?;
    let work = tempfile::tempdir().map_err(io("creating a scratch directory".into()))?;
    copy_tree(project, work.path()).map_err(io(format!("copying {}", project.display())))?;
    let mut ws = Workspace::load(work.path(), DEFAULT_EXTENSIONS)?;
    let mut backend = RecordingBackend::new(answers, ReplayStore::create(fresh.path())?);
    let (report, log) = Session::new(&mut ws, checker, &mut backend, cfg).run()?;

    fs::remove_dir_all(replay).map_err(io(format!("clearing {}", replay.display())))?;
    copy_tree(fresh.path(), replay).map_err(io(format!("writing {}", replay.display())))?;
    Ok((report, log.into_records(), work))
}

/// Seals the replay store of every case of a benchmark dataset; stores
/// live in `replay_root/<case name>`.
pub fn seal_bench(dataset: &Path, replay_root: &Path, base: &RunConfig) -> Result<Vec<(String, FixReport)>, RunError> {
    let manifest = crate::bench::BenchManifest::load(dataset)?;
    let mut out = Vec::new();
    for case in &manifest.cases {
        let project = dataset.join(case.dir.as_deref().unwrap_or(Path::new(&case.name)));
        let mut checker = CommandChecker::new(case.checker.profile(case.lint_groups.as_deref()));
        let cfg = RunConfig {
            test_command: case.test_cmd.clone().or_else(|| base.test_command.clone()),
            ..base.clone()
        };
        let (report, _, _) = seal_store(&project, &replay_root.join(&case.name), &mut checker, &cfg)?;
        out.push((case.name.clone(), report));
    }
    Ok(out)
}

fn check_expectation(e: &Expectation, r: &FixReport) -> Vec<String> {
    let mut out = Vec::new();
    if e.initial_errors != r.initial_errors {
        out.push(format!("initial errors: expected {}, got {}", e.initial_errors, r.initial_errors));
    }
    if e.fixed != r.fixed {
        out.push(format!("fixed: expected {}, got {}", e.fixed, r.fixed));
    }
    if let Some(n) = e.inner_iterations {
        if n != r.inner_iterations {
            out.push(format!("inner iterations: expected {n}, got {}", r.inner_iterations));
        }
    }
    let failures: Vec<String> = r
        .outcomes
        .iter()
        .filter_map(|o| o.failure.map(|f| f.to_string()))
        .collect();
    if failures != e.failures {
        out.push(format!("failures: expected {:?}, got {:?}", e.failures, failures));
    }
    out
}

fn is_build_output(rel: &Path) -> bool {
    rel.components().next().is_some_and(|c| c.as_os_str() == "target") || rel == Path::new("Cargo.lock")
}

fn tree_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?.to_path_buf();
            if is_build_output(&rel) {
                return None;
            }
            Some((rel, fs::read(e.path()).ok()?))
        })
        .collect()
}

/// Relative paths whose bytes differ, or that exist on one side only.
/// Build output (`target/`, `Cargo.lock`) is ignored.
pub fn compare_trees(expected: &Path, actual: &Path) -> Vec<String> {
    let want = tree_files(expected);
    let got = tree_files(actual);
    let mut out = Vec::new();
    for (path, bytes) in &want {
        match got.get(path) {
            None => out.push(format!("missing {}", path.display())),
            Some(b) if b != bytes => out.push(format!("differs {}", path.display())),
            Some(_) => {}
        }
    }
    for path in got.keys().filter(|p| !want.contains_key(*p)) {
        out.push(format!("unexpected {}", path.display()));
    }
    out
}

/// Fixture directories (those with a `fixture.toml`) directly under `root`.
pub fn discover(root: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .into_iter()
        .flatten()
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("fixture.toml").is_file())
        .collect();
    dirs.sort();
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_comparison_ignores_build_output() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [a.path(), b.path()] {
            fs::create_dir_all(d.join("src")).unwrap();
            fs::write(d.join("src/lib.rs"), "fn a() {}\n").unwrap();
        }
        fs::create_dir_all(b.path().join("target/debug")).unwrap();
        fs::write(b.path().join("target/debug/x"), "bin").unwrap();
        fs::write(b.path().join("Cargo.lock"), "lock").unwrap();
        assert!(compare_trees(a.path(), b.path()).is_empty());

        fs::write(b.path().join("src/lib.rs"), "fn a() {} \n").unwrap();
        fs::write(b.path().join("src/new.rs"), "").unwrap();
        assert_eq!(compare_trees(a.path(), b.path()), ["differs src/lib.rs", "unexpected src/new.rs"]);
    }

    #[test]
    fn spec_defaults() {
        let spec: FixtureSpec = toml::from_str(
            "name = \"x\"\n[expect]\ninitial_errors = 1\nfixed = 1\n",
        )
        .unwrap();
        assert_eq!(spec.n, 1);
        assert!(spec.grouping);
        assert_eq!(spec.variant, PromptVariant::P4);
        assert_eq!(spec.max_unique_errors, 100);
        assert!(spec.expect.failures.is_empty());
    }
}
