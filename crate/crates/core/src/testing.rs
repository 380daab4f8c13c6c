//! Test doubles: a checker driven by markers in the source and helpers for
//! writing answers to prompts programmatically.
//!
//! [`MarkerChecker`] reports one error for every `@err(CODE: message)` marker
//! found in the project's `.rs` files, which makes it possible to exercise
//! the whole repair loop without invoking a compiler.

use std::path::Path;

use crate::changelog::{render, ChangeLog, ChangePair, CodeSegment};
use crate::diagnostics::{CheckError, Checker, CheckerMode, Diagnostic, Explanation, ExplanationSource, Level, SourceSpan};
use crate::localization::strip_line_prefix;
use crate::prompting::PromptVariant;
use crate::workspace::{Workspace, DEFAULT_EXTENSIONS};

const MARKER: &str = "@err(";

#[derive(Debug, Clone)]
pub struct MarkerChecker {
    mode: CheckerMode,
    pub checks: usize,
}

impl MarkerChecker {
    pub fn new() -> Self {
        Self {
            mode: CheckerMode::Compiler,
            checks: 0,
        }
    }

    /// Explanations then come from a pretend explain command.
    pub fn linter() -> Self {
        Self {
            mode: CheckerMode::Linter,
            checks: 0,
        }
    }
}

impl Default for MarkerChecker {
    fn default() -> Self {
        Self::new()
    }
}

/// `// @err(CODE: message)`
pub fn marker(code: &str, message: &str) -> String {
    format!("// {MARKER}{code}: {message})")
}

fn scan_line(file: &Path, n: usize, line: &str) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut rest = line;
    while let Some(at) = rest.find(MARKER) {
        rest = &rest[at + MARKER.len()..];
        let Some(close) = rest.find(')') else { break };
        let body = &rest[..close];
        rest = &rest[close..];
        let (code, message) = body.split_once(':').unwrap_or(("", body));
        let (code, message) = (code.trim(), message.trim());
        let headline = if code.is_empty() {
            format!("error: {message}")
        } else {
            format!("error[{code}]: {message}")
        };
        out.push(Diagnostic {
            code: (!code.is_empty()).then(|| code.to_string()),
            message: message.to_string(),
            level: Level::Error,
            primary_span: SourceSpan {
                file: file.to_path_buf(),
                line_start: n,
                line_end: n,
                label: None,
                external: false,
            },
            related_spans: vec![],
            rendered: format!("{headline}\n --> {}:{n}\n", file.display()),
        });
    }
    out
}

impl Checker for MarkerChecker {
    fn command_line(&self) -> String {
        "marker-check".into()
    }

    fn mode(&self) -> CheckerMode {
        self.mode
    }

    fn check(&mut self, root: &Path) -> Result<Vec<Diagnostic>, CheckError> {
        self.checks += 1;
        let ws = Workspace::load(root, DEFAULT_EXTENSIONS).map_err(|e| CheckError::MissingBinary {
            program: "marker-check".into(),
            source: std::io::Error::other(e.to_string()),
        })?;
        let mut out = Vec::new();
        for path in ws.paths() {
            let file = ws.file(path).expect("listed path");
            for (i, line) in file.lines().iter().enumerate() {
                out.extend(scan_line(path, i + 1, line));
            }
        }
        Ok(crate::diagnostics::normalize(out))
    }

    fn explain(&mut self, d: &Diagnostic) -> Explanation {
        match (self.mode, &d.code) {
            (CheckerMode::Linter, Some(code)) => Explanation {
                text: format!("Explanation of {code}."),
                source: ExplanationSource::ExplainCommand,
            },
            _ => Explanation::rendered(d),
        }
    }
}

/// Location (`file`, line) of the error a prompt is about, read from the
/// ` --> file:line` part of the rendered diagnostic.
pub fn prompt_error_location(prompt: &str) -> Option<(String, usize)> {
    prompt.lines().find_map(|l| {
        let rest = l.trim_start().strip_prefix("--> ")?;
        let mut parts = rest.split(':');
        let file = parts.next()?.to_string();
        let line = parts.next()?.trim().parse().ok()?;
        Some((file, line))
    })
}

/// Text of line `n` as shown in a prompt with `[N]` prefixes.
pub fn prompt_line(prompt: &str, n: usize) -> Option<String> {
    prompt
        .lines()
        .filter_map(strip_line_prefix)
        .find(|(k, _)| *k == n)
        .map(|(_, t)| t.to_string())
}

/// A single-pair answer replacing line `n` of `file` with `replacement`,
/// echoing `original` as the model would.
pub fn replace_line_answer(file: &str, n: usize, original: &str, replacement: &[&str], variant: PromptVariant) -> String {
    let fixed: Vec<String> = replacement.iter().map(|s| s.to_string()).collect();
    let pair = if variant.echoes_original() {
        let mut f = CodeSegment::new(n, fixed);
        if f.lines.is_empty() {
            f.declared_end = n - 1;
        }
        ChangePair {
            original: Some(CodeSegment::new(n, vec![original.to_string()])),
            fixed: f,
        }
    } else {
        ChangePair {
            original: None,
            fixed: CodeSegment {
                declared_start: n,
                declared_end: n,
                lines: fixed,
            },
        }
    };
    let cl = ChangeLog {
        id: 1,
        file: file.into(),
        fix_description: variant.requires_description().then(|| "Replace the offending line.".to_string()),
        pairs: vec![pair],
        header_line: 0,
    };
    render(&[cl], variant)
}

/// Answer to `prompt` replacing the reported line with `replacement`.
pub fn answer_replacing_error_line(prompt: &str, replacement: &[&str], variant: PromptVariant) -> Option<String> {
    let (file, n) = prompt_error_location(prompt)?;
    // Unprefixed prompts only come with variants that never echo the original.
    let original = match prompt_line(prompt, n) {
        Some(o) => o,
        None if !variant.echoes_original() => String::new(),
        None => return None,
    };
    Some(replace_line_answer(&file, n, &original, replacement, variant))
}
