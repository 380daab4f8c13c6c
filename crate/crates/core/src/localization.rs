//! Turns diagnostic spans into line-numbered code windows for the prompt.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::workspace::{LineRange, Workspace};

pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub file: PathBuf,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub file: PathBuf,
    pub window: LineRange,
    lines: Vec<String>,
}

impl Snippet {
    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// `[N] code` for every line of the window.
    pub fn numbered_lines(&self) -> Vec<String> {
        self.lines
            .iter()
            .zip(self.window.start..)
            .map(|(l, n)| format!("[{n}] {l}"))
            .collect()
    }
}

/// Caps on how much code one prompt may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetBudget {
    pub max_snippets: usize,
    pub max_lines: usize,
}

impl Default for SnippetBudget {
    fn default() -> Self {
        Self {
            max_snippets: 8,
            max_lines: 1200,
        }
    }
}

/// Primary location first, then related spans in order; duplicates and
/// locations outside the indexed project are dropped.
pub fn collect_locations(d: &Diagnostic, ws: &Workspace) -> Vec<Location> {
    let mut out: Vec<Location> = Vec::new();
    for span in std::iter::once(&d.primary_span).chain(&d.related_spans) {
        if span.external || !ws.contains(&span.file) {
            continue;
        }
        let loc = Location {
            file: span.file.clone(),
            line: span.line_start,
        };
        if !out.contains(&loc) {
            out.push(loc);
        }
    }
    out
}

/// One `±window` interval per location, clamped to the file and merged when
/// intervals in the same file overlap or touch.
pub fn extract_snippets(ws: &Workspace, locations: &[Location], window: usize) -> Vec<Snippet> {
    let mut intervals: Vec<(PathBuf, LineRange)> = locations
        .iter()
        .filter_map(|loc| {
            let len = ws.file(&loc.file).ok()?.len();
            if len == 0 {
                return None;
            }
            let line = loc.line.clamp(1, len);
            let range = LineRange::new(line.saturating_sub(window).max(1), (line + window).min(len));
            Some((loc.file.clone(), range))
        })
        .collect();
    intervals.sort();

    let mut merged: Vec<(PathBuf, LineRange)> = Vec::new();
    for (file, range) in intervals {
        match merged.last_mut() {
            Some((f, last)) if *f == file && range.start <= last.end + 1 => {
                last.end = last.end.max(range.end);
            }
            _ => merged.push((file, range)),
        }
    }

    merged
        .into_iter()
        .map(|(file, window)| {
            let lines = ws
                .read_lines(&file, window)
                .expect("interval derived from an indexed file")
                .to_vec();
            Snippet { file, window, lines }
        })
        .collect()
}

/// Like [`extract_snippets`], dropping locations from the end of the list
/// until the result fits `budget`. The first location is always kept.
pub fn extract_within_budget(
    ws: &Workspace,
    locations: &[Location],
    window: usize,
    budget: SnippetBudget,
) -> Vec<Snippet> {
    for keep in (1..=locations.len()).rev() {
        let snippets = extract_snippets(ws, &locations[..keep], window);
        let lines: usize = snippets.iter().map(|s| s.window.len()).sum();
        if keep == 1 || (snippets.len() <= budget.max_snippets && lines <= budget.max_lines) {
            if keep < locations.len() {
                log::info!("snippet budget dropped {} location(s)", locations.len() - keep);
            }
            return snippets;
        }
    }
    Vec::new()
}

/// Removes a leading `[N]` marker and the single space after it, if any.
pub fn strip_line_prefix(line: &str) -> Option<(usize, &str)> {
    let rest = line.strip_prefix('[')?;
    let close = rest.find(']')?;
    let n = rest[..close].trim().parse().ok()?;
    let text = &rest[close + 1..];
    Some((n, text.strip_prefix(' ').unwrap_or(text)))
}

pub fn snippet_for<'a>(snippets: &'a [Snippet], file: &Path, window: LineRange) -> Option<&'a Snippet> {
    snippets.iter().find(|s| s.file == file && s.window == window)
}
