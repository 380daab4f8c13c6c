//! Checker invocation and diagnostic parsing.
//!
//! A checker is any process that emits rustc-style JSON diagnostics, either
//! bare (`rustc --error-format=json`) or wrapped in cargo's
//! `{"reason":"compiler-message", ...}` envelopes. The same code path serves
//! compiler mode (`cargo check`) and linter mode (`cargo clippy`); only the
//! [`CheckerProfile`] differs.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io;
use std::path::{Component, Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("checker binary `{program}` could not be started: {source}")]
    MissingBinary { program: String, source: io::Error },
    #[error("checker profile has an empty command")]
    EmptyCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    /// Project-relative path, or the path as reported when `external`.
    pub file: PathBuf,
    pub line_start: usize,
    pub line_end: usize,
    pub label: Option<String>,
    pub external: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: Option<String>,
    pub message: String,
    pub level: Level,
    pub primary_span: SourceSpan,
    pub related_spans: Vec<SourceSpan>,
    pub rendered: String,
}

impl Diagnostic {
    pub fn key(&self) -> ErrorKey {
        error_key(self)
    }

    pub fn primary_line(&self) -> usize {
        self.primary_span.line_start
    }

    /// `error[E0515]: cannot return ...` style one-line summary.
    pub fn headline(&self) -> String {
        let level = match self.level {
            Level::Error => "error",
            Level::Warning => "warning",
        };
        match &self.code {
            Some(code) => format!("{level}[{code}]: {}", self.message),
            None => format!("{level}: {}", self.message),
        }
    }
}

const KEY_SEPARATOR: char = '\u{1f}';

/// Line-number-free identity of a diagnostic: code, message and primary file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorKey(String);

impl ErrorKey {
    pub fn new(code: &str, message: &str, file: &Path) -> Self {
        let file = file.to_string_lossy().replace('\\', "/");
        Self(format!("{code}{KEY_SEPARATOR}{message}{KEY_SEPARATOR}{file}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn code(&self) -> &str {
        self.0.split(KEY_SEPARATOR).next().unwrap_or_default()
    }
}

impl fmt::Display for ErrorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = self.0.split(KEY_SEPARATOR);
        let code = parts.next().unwrap_or_default();
        let message = parts.next().unwrap_or_default();
        let file = parts.next().unwrap_or_default();
        if code.is_empty() {
            write!(f, "{message} ({file})")
        } else {
            write!(f, "[{code}] {message} ({file})")
        }
    }
}

pub fn error_key(d: &Diagnostic) -> ErrorKey {
    ErrorKey::new(
        d.code.as_deref().unwrap_or(""),
        &d.message,
        &d.primary_span.file,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerMode {
    Compiler,
    Linter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplanationSource {
    Rendered,
    ExplainCommand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub text: String,
    pub source: ExplanationSource,
}

impl Explanation {
    pub fn rendered(d: &Diagnostic) -> Self {
        Self {
            text: d.rendered.clone(),
            source: ExplanationSource::Rendered,
        }
    }
}

/// Anything that can report diagnostics for a flushed project tree.
pub trait Checker {
    /// Command line shown to the model in the prompt preamble.
    fn command_line(&self) -> String;

    fn mode(&self) -> CheckerMode;

    fn check(&mut self, root: &Path) -> Result<Vec<Diagnostic>, CheckError>;

    fn explain(&mut self, d: &Diagnostic) -> Explanation;
}

/// Which warnings count as fix targets in linter mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFilter {
    /// Code prefixes (e.g. `clippy::`) that mark a warning as a target.
    pub prefixes: Vec<String>,
    /// Explicit lint codes; when non-empty only these are targets.
    pub allow: Vec<String>,
}

impl Default for LintFilter {
    fn default() -> Self {
        Self {
            prefixes: vec!["clippy::".into()],
            allow: Vec::new(),
        }
    }
}

impl LintFilter {
    fn accepts(&self, code: Option<&str>) -> bool {
        let Some(code) = code else { return false };
        if !self.allow.is_empty() {
            return self.allow.iter().any(|a| a == code);
        }
        self.prefixes.iter().any(|p| code.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckerProfile {
    pub mode: CheckerMode,
    pub argv: Vec<String>,
    /// Appended before any `--` separator in `argv` unless already present.
    pub structured_flag: Option<String>,
    /// Explain command; `{code}` is replaced by the diagnostic code.
    pub explain_argv: Option<Vec<String>>,
    pub lint_filter: LintFilter,
    /// When set, only these environment variables reach the checker.
    pub env_allowlist: Option<Vec<String>>,
}

pub const DEFAULT_LINT_GROUPS: &[&str] = &["pedantic", "complexity", "style"];

impl CheckerProfile {
    pub fn compiler() -> Self {
        Self {
            mode: CheckerMode::Compiler,
            argv: vec!["cargo".into(), "check".into()],
            structured_flag: Some("--message-format=json".into()),
            explain_argv: None,
            lint_filter: LintFilter::default(),
            env_allowlist: None,
        }
    }

    /// Clippy with the given lint groups promoted to warnings.
    pub fn linter(groups: &[&str]) -> Self {
        let mut argv: Vec<String> = vec!["cargo".into(), "clippy".into()];
        if !groups.is_empty() {
            argv.push("--".into());
            for g in groups {
                argv.push("-W".into());
                argv.push(format!("clippy::{g}"));
            }
        }
        Self {
            mode: CheckerMode::Linter,
            argv,
            structured_flag: Some("--message-format=json".into()),
            explain_argv: Some(vec![
                "cargo".into(),
                "clippy".into(),
                "--explain".into(),
                "{code}".into(),
            ]),
            lint_filter: LintFilter::default(),
            env_allowlist: None,
        }
    }

    pub fn full_argv(&self) -> Vec<String> {
        let mut argv = self.argv.clone();
        if let Some(flag) = &self.structured_flag {
            if !argv.iter().any(|a| a == flag) {
                let at = argv.iter().position(|a| a == "--").unwrap_or(argv.len());
                argv.insert(at, flag.clone());
            }
        }
        argv
    }

    fn is_target(&self, level: Level, code: Option<&str>) -> bool {
        match (self.mode, level) {
            (_, Level::Error) => true,
            (CheckerMode::Compiler, Level::Warning) => false,
            (CheckerMode::Linter, Level::Warning) => self.lint_filter.accepts(code),
        }
    }
}

/// Runs a [`CheckerProfile`] as a subprocess.
#[derive(Debug, Clone)]
pub struct CommandChecker {
    profile: CheckerProfile,
    explain_cache: BTreeMap<String, Option<String>>,
    last_root: Option<PathBuf>,
}

impl CommandChecker {
    pub fn new(profile: CheckerProfile) -> Self {
        Self {
            profile,
            explain_cache: BTreeMap::new(),
            last_root: None,
        }
    }

    pub fn profile(&self) -> &CheckerProfile {
        &self.profile
    }

    fn command(&self, argv: &[String], dir: &Path) -> Result<Command, CheckError> {
        let (program, args) = argv.split_first().ok_or(CheckError::EmptyCommand)?;
        let mut cmd = Command::new(program);
        cmd.args(args).current_dir(dir).stdin(Stdio::null());
        if let Some(allow) = &self.profile.env_allowlist {
            cmd.env_clear();
            for var in allow {
                if let Some(v) = std::env::var_os(var) {
                    cmd.env(var, v);
                }
            }
        }
        Ok(cmd)
    }

    fn run_explain(&self, code: &str, dir: &Path) -> Option<String> {
        let template = self.profile.explain_argv.as_ref()?;
        let argv: Vec<String> = template.iter().map(|a| a.replace("{code}", code)).collect();
        let output = self.command(&argv, dir).ok()?.output().ok()?;
        if !output.status.success() {
            log::info!("explain for {code} failed with {}", output.status);
            return None;
        }
        let text = String::from_utf8_lossy(&output.stdout).trim_end().to_string();
        (!text.is_empty()).then_some(text)
    }
}

impl Checker for CommandChecker {
    fn command_line(&self) -> String {
        self.profile.argv.join(" ")
    }

    fn mode(&self) -> CheckerMode {
        self.profile.mode
    }

    fn check(&mut self, root: &Path) -> Result<Vec<Diagnostic>, CheckError> {
        self.last_root = Some(root.to_path_buf());
        let argv = self.profile.full_argv();
        let program = argv.first().cloned().unwrap_or_default();
        let output = self
            .command(&argv, root)?
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .output()
            .map_err(|source| CheckError::MissingBinary { program, source })?;
        log::debug!("checker exited with {}", output.status);
        let stdout = String::from_utf8_lossy(&output.stdout);
        Ok(parse_checker_output(&stdout, root, &self.profile))
    }

    fn explain(&mut self, d: &Diagnostic) -> Explanation {
        if self.profile.mode == CheckerMode::Compiler {
            return Explanation::rendered(d);
        }
        let Some(code) = d.code.clone() else {
            return Explanation::rendered(d);
        };
        let cwd = self.last_root.clone().unwrap_or_else(|| PathBuf::from("."));
        if !self.explain_cache.contains_key(&code) {
            let text = self.run_explain(&code, &cwd);
            self.explain_cache.insert(code.clone(), text);
        }
        match &self.explain_cache[&code] {
            Some(text) => Explanation {
                text: text.clone(),
                source: ExplanationSource::ExplainCommand,
            },
            None => Explanation::rendered(d),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawDiagnostic {
    message: String,
    code: Option<RawCode>,
    level: String,
    #[serde(default)]
    spans: Vec<RawSpan>,
    #[serde(default)]
    children: Vec<RawDiagnostic>,
    rendered: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawCode {
    code: String,
}

#[derive(Debug, Deserialize)]
struct RawSpan {
    file_name: String,
    line_start: usize,
    line_end: usize,
    is_primary: bool,
    label: Option<String>,
    expansion: Option<Box<RawExpansion>>,
}

#[derive(Debug, Deserialize)]
struct RawExpansion {
    span: RawSpan,
}

/// Parses a checker's stdout. Never fails: records that cannot be understood
/// are skipped with a warning.
pub fn parse_checker_output(stdout: &str, root: &Path, profile: &CheckerProfile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (lineno, line) in stdout.lines().enumerate() {
        let line = line.trim();
        if !line.starts_with('{') {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(err) => {
                log::warn!("skipping malformed checker record on line {}: {err}", lineno + 1);
                continue;
            }
        };
        let message = match value.get("reason").and_then(|r| r.as_str()) {
            Some("compiler-message") => match value.get("message") {
                Some(m) => m.clone(),
                None => {
                    log::warn!("compiler-message without payload on line {}", lineno + 1);
                    continue;
                }
            },
            Some(_) => continue,
            None => value,
        };
        let raw: RawDiagnostic = match serde_json::from_value(message) {
            Ok(r) => r,
            Err(err) => {
                log::warn!("skipping unparseable diagnostic on line {}: {err}", lineno + 1);
                continue;
            }
        };
        let level = match raw.level.as_str() {
            "error" => Level::Error,
            "warning" => Level::Warning,
            l if l.starts_with("error") => Level::Error,
            _ => continue,
        };
        let code = raw.code.as_ref().map(|c| c.code.clone());
        if !profile.is_target(level, code.as_deref()) {
            continue;
        }
        match convert(raw, level, code, root) {
            Some(d) => out.push(d),
            None => log::warn!("skipping diagnostic without a source span on line {}", lineno + 1),
        }
    }
    normalize(out)
}

/// Deduplicates by (key, primary line) and sorts by (file, line, code).
pub fn normalize(mut diags: Vec<Diagnostic>) -> Vec<Diagnostic> {
    let mut seen = HashSet::new();
    diags.retain(|d| seen.insert((error_key(d), d.primary_line())));
    diags.sort_by(|a, b| {
        (&a.primary_span.file, a.primary_line(), &a.code, &a.message)
            .cmp(&(&b.primary_span.file, b.primary_line(), &b.code, &b.message))
    });
    diags
}

fn convert(raw: RawDiagnostic, level: Level, code: Option<String>, root: &Path) -> Option<Diagnostic> {
    let spans: Vec<SourceSpan> = raw.spans.iter().map(|s| resolve_span(s, root)).collect();
    let primary_idx = raw
        .spans
        .iter()
        .position(|s| s.is_primary)
        .or(if spans.is_empty() { None } else { Some(0) })?;
    let primary_span = spans[primary_idx].clone();

    let mut related: Vec<SourceSpan> = spans
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != primary_idx)
        .map(|(_, s)| s.clone())
        .collect();
    let mut stack: Vec<&RawDiagnostic> = raw.children.iter().rev().collect();
    while let Some(child) = stack.pop() {
        for s in &child.spans {
            let mut span = resolve_span(s, root);
            if span.label.is_none() {
                span.label = Some(format!("{}: {}", child.level, child.message));
            }
            related.push(span);
        }
        stack.extend(child.children.iter().rev());
    }

    let rendered = match raw.rendered {
        Some(r) if !r.trim().is_empty() => r,
        _ => {
            let level_str = if level == Level::Error { "error" } else { "warning" };
            let head = match &code {
                Some(c) => format!("{level_str}[{c}]: {}", raw.message),
                None => format!("{level_str}: {}", raw.message),
            };
            format!(
                "{head}\n --> {}:{}\n",
                primary_span.file.display(),
                primary_span.line_start
            )
        }
    };

    Some(Diagnostic {
        code,
        message: raw.message,
        level,
        primary_span,
        related_spans: related,
        rendered,
    })
}

/// Maps a raw span to a project-relative location, following macro
/// expansions back to a call site inside the project when the span itself
/// points outside it.
fn resolve_span(span: &RawSpan, root: &Path) -> SourceSpan {
    let mut cur = span;
    loop {
        if let Some(rel) = relative_to_root(&cur.file_name, root) {
            return SourceSpan {
                file: rel,
                line_start: cur.line_start,
                line_end: cur.line_end.max(cur.line_start),
                label: cur.label.clone(),
                external: false,
            };
        }
        match &cur.expansion {
            Some(exp) => cur = &exp.span,
            None => break,
        }
    }
    SourceSpan {
        file: PathBuf::from(&span.file_name),
        line_start: span.line_start,
        line_end: span.line_end.max(span.line_start),
        label: span.label.clone(),
        external: true,
    }
}

fn relative_to_root(file_name: &str, root: &Path) -> Option<PathBuf> {
    if file_name.starts_with('<') {
        return None;
    }
    let path = Path::new(file_name);
    let rel = if path.is_absolute() {
        path.strip_prefix(root)
            .ok()
            .map(Path::to_path_buf)
            .or_else(|| {
                let canon = root.canonicalize().ok()?;
                path.strip_prefix(canon).ok().map(Path::to_path_buf)
            })?
    } else {
        path.to_path_buf()
    };
    let clean = rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    clean.then(|| rel.components().filter(|c| !matches!(c, Component::CurDir)).collect())
}
