//! Command-line front end: `fix` (default), `bench` and `record`.
//!
//! Exit codes: 0 when everything was fixed (or every benchmark case matched
//! its expectation), 1 otherwise, 2 for usage errors, 3 for fatal errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::bench::{render_summary, run_bench, BenchmarkCase, CheckerKind};
use crate::diagnostics::CommandChecker;
use crate::llm::{BackendError, CompletionBackend, HttpBackend, HttpConfig, RecordingBackend, ReplayBackend, ReplayStore};
use crate::orchestrator::{RunConfig, RunError, Session, DEFAULT_MAX_UNIQUE_ERRORS, DEFAULT_MODEL};
use crate::localization::DEFAULT_WINDOW;
use crate::prompting::{PromptTemplate, PromptVariant};
use crate::runlog::RunLog;
use crate::workspace::{copy_tree, Workspace, DEFAULT_EXTENSIONS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNFIXED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FATAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fixloop", version, about = "Repair compiler and linter errors in a Rust project with a language model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fix the errors of one project (the default subcommand).
    Fix {
        path: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        backend: BackendArgs,
        /// Read completions from a replay store (or a fixture holding `replay/`).
        #[arg(long, value_name = "DIR")]
        replay: Option<PathBuf>,
        /// Write one unified diff per applied completion into DIR.
        #[arg(long, value_name = "DIR")]
        emit_patch: Option<PathBuf>,
        /// With --emit-patch, also edit the project itself.
        #[arg(long, requires = "emit_patch")]
        in_place: bool,
    },
    /// Run every case of a benchmark dataset and print the summary table.
    Bench {
        dataset: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        backend: BackendArgs,
        /// Directory with one replay store per case, named after the case.
        #[arg(long, value_name = "DIR")]
        replay: Option<PathBuf>,
        /// Print the summary as comma-separated values.
        #[arg(long)]
        csv: bool,
    },
    /// Fix a project against the HTTP backend, saving every answer to a replay store.
    Record {
        path: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        backend: BackendArgs,
        /// Replay store to create.
        #[arg(long, alias = "store", value_name = "DIR")]
        replay: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `compiler` (cargo check) or `linter` (cargo clippy).
    #[arg(long, default_value = "compiler", value_parser = parse_checker)]
    pub checker: CheckerKind,
    /// Comma-separated lint groups for the linter profile.
    #[arg(long, value_delimiter = ',')]
    pub lint_groups: Option<Vec<String>>,
    /// Completions requested per prompt.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=crate::llm::MAX_COMPLETIONS as i64))]
    pub n: u8,
    /// Lines of context on each side of a reported location.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value = "P4")]
    pub variant: PromptVariant,
    #[arg(long, default_value_t = DEFAULT_MAX_UNIQUE_ERRORS, value_parser = parse_positive)]
    pub max_unique_errors: usize,
    /// Work through all errors in one loop instead of per-error groups.
    #[arg(long)]
    pub no_grouping: bool,
    /// Shell command run in the project once it checks clean.
    #[arg(long)]
    pub test_cmd: Option<String>,
    /// Prompt template file replacing the built-in one.
    #[arg(long, value_name = "FILE")]
    pub template: Option<PathBuf>,
    /// Append the structured run log (JSON lines) to FILE.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, default_value = DEFAULT_MODEL)]
    pub model: String,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    /// Attempts per request, including the first.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub attempts: u32,
}

fn parse_checker(s: &str) -> Result<CheckerKind, String> {
    match s {
        "compiler" | "check" | "cargo-check" => Ok(CheckerKind::Compiler),
        "linter" | "clippy" => Ok(CheckerKind::Linter),
        _ => Err(format!("unknown checker `{s}` (expected compiler or linter)")),
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

impl RunArgs {
    fn config(&self, backend: &BackendArgs) -> Result<RunConfig, RunError> {
        let template = match &self.template {
            Some(p) => Some(PromptTemplate::from_file(p).map_err(|source| RunError::Io {
                what: format!("reading {}", p.display()),
                source,
            })?),
            None => None,
        };
        Ok(RunConfig {
            n_completions: self.n as usize,
            window: self.window,
            max_unique_errors: self.max_unique_errors,
            variant: self.variant,
            grouping_enabled: !self.no_grouping,
            test_command: self.test_cmd.clone(),
            template,
            model: backend.model.clone(),
            ..RunConfig::default()
        })
    }

    fn checker(&self) -> CommandChecker {
        CommandChecker::new(self.checker.profile(self.lint_groups.as_deref()))
    }

    fn run_log(&self) -> Result<RunLog, RunError> {
        match &self.log {
            Some(p) => RunLog::to_file(p).map_err(|source| RunError::Io {
                what: format!("opening {}", p.display()),
                source,
            }),
            None => Ok(RunLog::in_memory()),
        }
    }
}

impl BackendArgs {
    fn http(&self) -> HttpBackend {
        let mut config = HttpConfig::default();
        if let Some(e) = &self.endpoint {
            config.endpoint = e.clone();
        }
        if let Some(k) = &self.api_key_env {
            config.api_key_env = k.clone();
        }
        config.timeout = Duration::from_secs(self.timeout);
        config.attempts = self.attempts;
        HttpBackend::new(config)
    }
}

/// Accepts either a replay store or a fixture directory containing one.
pub fn resolve_replay(dir: &Path) -> PathBuf {
    let nested = dir.join("replay");
    if !dir.join("manifest.json").is_file() && nested.join("manifest.json").is_file() {
        nested
    } else {
        dir.to_path_buf()
    }
}

const SUBCOMMANDS: &[&str] = &["fix", "bench", "record", "help"];

/// Inserts `fix` when the first argument names no subcommand.
fn with_default_subcommand(mut args: Vec<OsString>) -> Vec<OsString> {
    if let Some(first) = args.get(1).and_then(|a| a.to_str()) {
        let is_global = matches!(first, "-h" | "--help" | "-V" | "--version");
        if !is_global && !SUBCOMMANDS.contains(&first) {
            args.insert(1, "fix".into());
        }
    }
    args
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = with_default_subcommand(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, RunError::Config(_)) {
                EXIT_USAGE
            } else {
                EXIT_FATAL
            }
        }
    }
}

fn execute(cmd: Command) -> Result<i32, RunError> {
    match cmd {
        Command::Fix {
            path,
            run,
            backend,
            replay,
            emit_patch,
            in_place,
        } => {
            let mut b: Box<dyn CompletionBackend> = match &replay {
                Some(dir) => Box::new(ReplayBackend::open(resolve_replay(dir))?),
                None => Box::new(backend.http()),
            };
            let mut cfg = run.config(&backend)?;
            cfg.emit_patch_dir = emit_patch.clone();
            fix(&path, &run, &cfg, b.as_mut(), emit_patch.is_some() && !in_place)
        }
        Command::Record {
            path,
            run,
            backend,
            replay,
        } => {
            let cfg = run.config(&backend)?;
            let store = ReplayStore::create(&replay)?;
            let mut b = RecordingBackend::new(backend.http(), store);
            let code = fix(&path, &run, &cfg, &mut b, false)?;
            println!("replay store written to {}", replay.display());
            Ok(code)
        }
        Command::Bench {
            dataset,
            run,
            backend,
            replay,
            csv,
        } => {
            let cfg = run.config(&backend)?;
            let mut backend_for = |case: &BenchmarkCase| -> Result<Box<dyn CompletionBackend>, BackendError> {
                match &replay {
                    Some(dir) => Ok(Box::new(ReplayBackend::open(resolve_replay(&dir.join(&case.name)))?)),
                    None => Ok(Box::new(backend.http())),
                }
            };
            let result = run_bench(&dataset, &cfg, &mut backend_for)?;
            if !csv {
                for r in &result.results {
                    let status = if r.matched { "ok" } else { "MISMATCH" };
                    let failure = r.failure.map(|f| format!(" ({f})")).unwrap_or_default();
                    println!("{status:<8} {:<28} expected {}, got {}{failure}", r.name, r.expected, r.outcome);
                    if let Some(e) = &r.error {
                        println!("         {e}");
                    }
                }
                println!();
            }
            print!("{}", render_summary(&result.summary, csv));
            Ok(if result.all_matched() { EXIT_OK } else { EXIT_UNFIXED })
        }
    }
}

fn fix(path: &Path, run: &RunArgs, cfg: &RunConfig, backend: &mut dyn CompletionBackend, on_copy: bool) -> Result<i32, RunError> {
    cfg.validate()?;
    // Keep the scratch copy alive until the run is over.
    let scratch;
    let root = if on_copy {
        scratch = tempfile::tempdir().map_err(|source| RunError::Io {
            what: "creating a scratch directory".into(),
            source,
        })?;
        copy_tree(path, scratch.path()).map_err(|source| RunError::Io {
            what: format!("copying {}", path.display()),
            source,
        })?;
        scratch.path().to_path_buf()
    } else {
        path.to_path_buf()
    };
    let mut ws = Workspace::load(&root, DEFAULT_EXTENSIONS)?;
    let mut checker = run.checker();
    let log = run.run_log()?;
    let (report, _) = Session::new(&mut ws, &mut checker, backend, cfg).with_log(log).run()?;
    print!("{report}");
    Ok(if report.all_fixed() { EXIT_OK } else { EXIT_UNFIXED })
}
