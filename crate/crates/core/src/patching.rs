//! Turning validated changelogs into line edits and applying them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use similar::TextDiff;
use thiserror::Error;

use crate::changelog::{ChangeLog, FormatError, FormatReason};
use crate::workspace::{LineRange, Workspace, WorkspaceError, WorkspaceSnapshot};

/// Replace `range` of `file` with `replacement`. `expected` holds the echoed
/// original lines, re-checked right before applying.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub file: PathBuf,
    pub range: LineRange,
    pub expected: Option<Vec<String>>,
    pub replacement: Vec<String>,
}

/// Edits of one completion, sorted by file and then by descending start
/// line, so applying them in order never shifts a later edit's lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchPlan {
    pub source: String,
    pub edits: Vec<Edit>,
    /// Changelogs left out because they overlap an earlier one.
    pub dropped: Vec<(u32, FormatError)>,
}

impl PatchPlan {
    pub fn files(&self) -> Vec<&Path> {
        let mut files: Vec<&Path> = self.edits.iter().map(|e| e.file.as_path()).collect();
        files.dedup();
        files
    }
}

#[derive(Debug, Error)]
pub enum ApplyError {
    #[error("{file} changed since validation at line {line}")]
    Mismatch { file: PathBuf, line: usize },
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

/// Flattens the pairs of every changelog into edits. A changelog touching
/// lines already claimed by an earlier changelog is dropped as a whole.
pub fn plan(changelogs: &[ChangeLog], source: impl Into<String>) -> Result<PatchPlan, FormatError> {
    let mut claimed: BTreeMap<&Path, Vec<LineRange>> = BTreeMap::new();
    let mut edits = Vec::new();
    let mut dropped = Vec::new();
    for cl in changelogs {
        let taken = claimed.get(cl.file.as_path()).map(Vec::as_slice).unwrap_or_default();
        let clash = cl
            .pairs
            .iter()
            .map(|p| p.replaced())
            .find_map(|r| taken.iter().find(|t| t.overlaps(&r)).map(|t| (r, *t)));
        if let Some((r, t)) = clash {
            let err = FormatError::new(
                FormatReason::Overlap,
                cl.header_line,
                format!(
                    "changelog {} lines {r} overlap lines {t} of an earlier changelog in {}",
                    cl.id,
                    cl.file.display()
                ),
            );
            log::info!("dropping changelog: {err}");
            dropped.push((cl.id, err));
            continue;
        }
        let entry = claimed.entry(cl.file.as_path()).or_default();
        for pair in &cl.pairs {
            entry.push(pair.replaced());
            edits.push(Edit {
                file: cl.file.clone(),
                range: pair.replaced(),
                expected: pair.original.as_ref().map(|o| o.lines.clone()),
                replacement: pair.fixed.lines.clone(),
            });
        }
    }
    if edits.is_empty() {
        let err = dropped.pop().map(|(_, e)| e).unwrap_or_else(|| {
            FormatError::new(FormatReason::MissingSection, 0, "completion contains no edits")
        });
        return Err(err);
    }
    edits.sort_by(|a, b| a.file.cmp(&b.file).then(b.range.start.cmp(&a.range.start)));
    Ok(PatchPlan {
        source: source.into(),
        edits,
        dropped,
    })
}

/// Applies every edit in memory, or none: on failure the workspace is back
/// at its pre-apply content.
pub fn apply_in_memory(ws: &mut Workspace, plan: &PatchPlan) -> Result<(), ApplyError> {
    let before = ws.snapshot();
    let result = plan.edits.iter().try_for_each(|e| apply_edit(ws, e));
    if result.is_err() {
        ws.restore(&before);
    }
    result
}

fn apply_edit(ws: &mut Workspace, edit: &Edit) -> Result<(), ApplyError> {
    if let Some(expected) = &edit.expected {
        let current = ws.file(&edit.file)?;
        for (n, want) in (edit.range.start..).zip(expected) {
            if current.line(n).map(str::trim_end) != Some(want.trim_end()) {
                return Err(ApplyError::Mismatch {
                    file: edit.file.clone(),
                    line: n,
                });
            }
        }
    }
    ws.replace_range(&edit.file, edit.range, edit.replacement.clone())?;
    Ok(())
}

/// Applies the plan atomically and writes the result to disk.
pub fn apply(ws: &mut Workspace, plan: &PatchPlan) -> Result<(), ApplyError> {
    let before = ws.snapshot();
    apply_in_memory(ws, plan)?;
    if let Err(e) = ws.flush() {
        ws.restore(&before);
        if let Err(again) = ws.flush() {
            log::error!("could not roll back after failed write: {again}");
        }
        return Err(e.into());
    }
    Ok(())
}

/// Unified diff of every file whose content differs between two snapshots.
pub fn unified_diff(before: &WorkspaceSnapshot, after: &WorkspaceSnapshot) -> String {
    let mut out = String::new();
    for (path, old) in before.iter() {
        let Some(new) = after.get(path) else { continue };
        if old == new {
            continue;
        }
        let name = path.to_string_lossy().replace('\\', "/");
        let diff = TextDiff::from_lines(old.as_str(), new);
        out.push_str(
            &diff
                .unified_diff()
                .context_radius(3)
                .header(&format!("a/{name}"), &format!("b/{name}"))
                .to_string(),
        );
    }
    out
}
