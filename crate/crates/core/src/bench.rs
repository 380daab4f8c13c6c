//! Benchmark datasets: a directory of small projects plus a `manifest.toml`
//! listing each case with its category and expected outcome.
//!
//! ```toml
//! [[case]]
//! name = "e0382-use-after-move"
//! category = "ownership"
//! expected = "fixed"
//! test_cmd = "cargo test --quiet"   # optional
//! checker = "compiler"              # or "linter"
//! ```
//!
//! Each case lives in `<dataset>/<name>/` (or `dir` if given). Runs happen
//! on a temporary copy, so the dataset is never modified.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{CheckerProfile, CommandChecker, DEFAULT_LINT_GROUPS};
use crate::llm::{BackendError, CompletionBackend};
use crate::orchestrator::{RunConfig, RunError, Session};
use crate::report::{FailureClass, FixReport, Outcome};
use crate::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Syntax,
    Type,
    Generics,
    Traits,
    Ownership,
    Lifetime,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Self::Syntax,
        Self::Type,
        Self::Generics,
        Self::Traits,
        Self::Ownership,
        Self::Lifetime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Syntax => "syntax",
            Self::Type => "type",
            Self::Generics => "generics",
            Self::Traits => "traits",
            Self::Ownership => "ownership",
            Self::Lifetime => "lifetime",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerKind {
    #[default]
    Compiler,
    Linter,
}

impl CheckerKind {
    pub fn profile(self, lint_groups: Option<&[String]>) -> CheckerProfile {
        match self {
            Self::Compiler => CheckerProfile::compiler(),
            Self::Linter => match lint_groups {
                Some(groups) => CheckerProfile::linter(&groups.iter().map(String::as_str).collect::<Vec<_>>()),
                None => CheckerProfile::linter(DEFAULT_LINT_GROUPS),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCase {
    pub name: String,
    #[serde(default)]
    pub dir: Option<PathBuf>,
    pub category: Category,
    pub expected: Outcome,
    #[serde(default)]
    pub test_cmd: Option<String>,
    #[serde(default)]
    pub checker: CheckerKind,
    #[serde(default)]
    pub lint_groups: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BenchManifest {
    #[serde(rename = "case", default)]
    pub cases: Vec<BenchmarkCase>,
}

impl BenchManifest {
    pub fn load(dataset: &Path) -> Result<Self, RunError> {
        let path = dataset.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|source| RunError::Io {
            what: format!("reading {}", path.display()),
            source,
        })?;
        toml::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub name: String,
    pub category: Category,
    pub expected: Outcome,
    pub outcome: Outcome,
    pub failure: Option<FailureClass>,
    pub matched: bool,
    pub report: Option<FixReport>,
    /// Set when the case could not be run to completion.
    pub error: Option<String>,
}

/// Failure class of a whole case: a failing test suite wins, then any
/// build failure, then format.
pub fn case_failure(report: &FixReport) -> Option<FailureClass> {
    if report.all_fixed() {
        return None;
    }
    [FailureClass::Test, FailureClass::Build, FailureClass::Format]
        .into_iter()
        .find(|c| report.failures(*c) > 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub total: usize,
    pub fixed: usize,
    pub format: usize,
    pub build: usize,
    pub test: usize,
}

impl SummaryRow {
    pub fn fix_percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.fixed as f64 * 100.0 / self.total as f64
        }
    }

    fn add(&mut self, fixed: bool, failure: Option<FailureClass>) {
        self.total += 1;
        if fixed {
            self.fixed += 1;
        }
        match failure {
            Some(FailureClass::Format) => self.format += 1,
            Some(FailureClass::Build) => self.build += 1,
            Some(FailureClass::Test) => self.test += 1,
            None => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    /// One row per category that has cases, in category order.
    pub rows: Vec<SummaryRow>,
    pub total: SummaryRow,
}

impl BenchmarkSummary {
    pub fn from_results(results: &[CaseResult]) -> Self {
        let mut rows = Vec::new();
        let mut total = SummaryRow {
            label: "Total".into(),
            ..SummaryRow::default()
        };
        for cat in Category::ALL {
            let mut row = SummaryRow {
                label: cat.to_string(),
                ..SummaryRow::default()
            };
            for r in results.iter().filter(|r| r.category == cat) {
                row.add(r.outcome == Outcome::Fixed, r.failure);
                total.add(r.outcome == Outcome::Fixed, r.failure);
            }
            if row.total > 0 {
                rows.push(row);
            }
        }
        Self { rows, total }
    }
}

const HEADER: [&str; 7] = ["Category", "Cases", "Fix%", "#Fixed", "Format", "Build", "Test"];

fn cells(row: &SummaryRow) -> [String; 7] {
    [
        row.label.clone(),
        row.total.to_string(),
        format!("{:.2}%", row.fix_percent()),
        row.fixed.to_string(),
        row.format.to_string(),
        row.build.to_string(),
        row.test.to_string(),
    ]
}

/// Text table (or CSV) with a row per category and a total row. With no
/// cases only the header is printed.
pub fn render_summary(s: &BenchmarkSummary, csv_output: bool) -> String {
    let mut lines: Vec<[String; 7]> = s.rows.iter().map(cells).collect();
    if s.total.total > 0 {
        lines.push(cells(&s.total));
    }
    if csv_output {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory write");
        for l in &lines {
            w.write_record(l).expect("in-memory write");
        }
        return String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells");
    }
    let mut widths = HEADER.map(str::len);
    for l in &lines {
        for (w, c) in widths.iter_mut().zip(l) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let header = HEADER.map(String::from);
    for l in std::iter::once(&header).chain(&lines) {
        let row: Vec<String> = l
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(row.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Builds the completion source for one benchmark case.
pub type BackendFactory<'a> = dyn FnMut(&BenchmarkCase) -> Result<Box<dyn CompletionBackend>, BackendError> + 'a;

pub struct BenchRun {
    pub results: Vec<CaseResult>,
    pub summary: BenchmarkSummary,
}

impl BenchRun {
    pub fn all_matched(&self) -> bool {
        self.results.iter().all(|r| r.matched)
    }
}

/// Runs every case of a dataset sequentially. `backend_for` supplies the
/// completion source per case; errors it returns mark the case as failed
/// without stopping the benchmark.
pub fn run_bench(
    dataset: &Path,
    base: &RunConfig,
    backend_for: &mut BackendFactory<'_>,
) -> Result<BenchRun, RunError> {
    let manifest = BenchManifest::load(dataset)?;
    let mut results = Vec::new();
    for case in &manifest.cases {
        log::info!("bench case {}", case.name);
        let result = run_case(dataset, case, base, backend_for);
        let (report, error) = match result {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let failure = match &report {
            Some(r) => case_failure(r),
            None => Some(FailureClass::Build),
        };
        let outcome = if failure.is_none() { Outcome::Fixed } else { Outcome::GaveUp };
        results.push(CaseResult {
            name: case.name.clone(),
            category: case.category,
            expected: case.expected,
            outcome,
            failure,
            matched: error.is_none() && outcome == case.expected,
            report,
            error,
        });
    }
    let summary = BenchmarkSummary::from_results(&results);
    Ok(BenchRun { results, summary })
}

fn run_case(
    dataset: &Path,
    case: &BenchmarkCase,
    base: &RunConfig,
    backend_for: &mut BackendFactory<'_>,
) -> Result<FixReport, RunError> {
    let src = dataset.join(case.dir.as_deref().unwrap_or(Path::new(&case.name)));
    let work = tempfile::tempdir().map_err(|source| RunError::Io {
        what: "creating a scratch directory".into(),
        source,
    })?;
    copy_tree(&src, work.path()).map_err(|source| RunError::Io {
        what: format!("copying {}", src.display()),
        source,
    })?;
    let mut ws = Workspace::load(work.path(), DEFAULT_EXTENSIONS)?;
    let mut checker = CommandChecker::new(case.checker.profile(case.lint_groups.as_deref()));
    let mut backend = backend_for(case)?;
    let cfg = RunConfig {
        test_command: case.test_cmd.clone().or_else(|| base.test_command.clone()),
        ..base.clone()
    };
    let (report, _) = Session::new(&mut ws, &mut checker, backend.as_mut(), &cfg).run()?;
    Ok(report)
}
