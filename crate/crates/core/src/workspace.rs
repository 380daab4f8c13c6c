//! In-memory index of a project's source files.
//!
//! Every mutation made by the repair loop goes through a [`Workspace`]: files
//! are read once at load time, edited as line vectors, captured and restored
//! as whole-content snapshots, and written back to disk only on [`flush`].
//! Files outside the indexed extension set are never opened for writing.
//!
//! [`flush`]: Workspace::flush

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("cannot read project root {path}: {source}")]
    UnreadableRoot { path: PathBuf, source: io::Error },
    #[error("file is not indexed: {0}")]
    UnknownFile(PathBuf),
    #[error("line range {range} is outside {path} ({len} lines)")]
    OutOfBounds {
        path: PathBuf,
        range: LineRange,
        len: usize,
    },
    #[error("failed to write {path}: {source}")]
    Flush { path: PathBuf, source: io::Error },
}

/// Inclusive, 1-based line interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn single(line: usize) -> Self {
        Self::new(line, line)
    }

    pub fn len(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn overlaps(&self, other: &LineRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for LineRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Newline {
    Lf,
    CrLf,
}

impl Newline {
    fn as_str(self) -> &'static str {
        match self {
            Newline::Lf => "\n",
            Newline::CrLf => "\r\n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    lines: Vec<String>,
    newline: Newline,
    trailing_newline: bool,
    dirty: bool,
}

impl SourceFile {
    /// Splits `content` into lines. CRLF is used only when every line break
    /// in the file is CRLF; otherwise any stray `\r` stays part of the line
    /// text so that rejoining is byte-exact.
    pub fn parse(content: &str) -> Self {
        let breaks = content.matches('\n').count();
        let crlf = content.matches("\r\n").count();
        let newline = if breaks > 0 && crlf == breaks {
            Newline::CrLf
        } else {
            Newline::Lf
        };
        let trailing_newline = content.ends_with('\n');
        let body = if trailing_newline {
            &content[..content.len() - 1]
        } else {
            content
        };
        let lines = if content.is_empty() {
            Vec::new()
        } else {
            body.split('\n')
                .map(|l| match newline {
                    Newline::CrLf => l.strip_suffix('\r').unwrap_or(l).to_string(),
                    Newline::Lf => l.to_string(),
                })
                .collect()
        };
        Self {
            lines,
            newline,
            trailing_newline,
            dirty: false,
        }
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join(self.newline.as_str());
        if self.trailing_newline && !self.lines.is_empty() {
            out.push_str(self.newline.as_str());
        }
        out
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    /// Returns line `n` (1-based).
    pub fn line(&self, n: usize) -> Option<&str> {
        n.checked_sub(1)
            .and_then(|i| self.lines.get(i))
            .map(String::as_str)
    }
}

/// Full file contents captured at one point in time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorkspaceSnapshot {
    contents: BTreeMap<PathBuf, String>,
}

impl WorkspaceSnapshot {
    pub fn get(&self, path: &Path) -> Option<&str> {
        self.contents.get(path).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PathBuf, &String)> {
        self.contents.iter()
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    files: BTreeMap<PathBuf, SourceFile>,
}

pub const DEFAULT_EXTENSIONS: &[&str] = &["rs"];

impl Workspace {
    /// Indexes every file under `root` whose extension is in `extensions`.
    /// Hidden directories and `target/` build output are not descended into.
    pub fn load(root: impl AsRef<Path>, extensions: &[&str]) -> Result<Self, WorkspaceError> {
        let root = root.as_ref().to_path_buf();
        fs::read_dir(&root).map_err(|source| WorkspaceError::UnreadableRoot {
            path: root.clone(),
            source,
        })?;

        let mut files = BTreeMap::new();
        let walker = WalkDir::new(&root)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || !is_skipped_dir(e));
        for entry in walker {
            let entry = match entry {
                Ok(e) => e,
                Err(err) => {
                    log::warn!("skipping unreadable entry: {err}");
                    continue;
                }
            };
            if !entry.file_type().is_file() {
                continue;
            }
            let matches = entry
                .path()
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| extensions.iter().any(|x| x.trim_start_matches('.') == e));
            if !matches {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(&root)
                .expect("walkdir yields paths under root")
                .to_path_buf();
            match fs::read(entry.path()).map(String::from_utf8) {
                Ok(Ok(text)) => {
                    files.insert(rel, SourceFile::parse(&text));
                }
                Ok(Err(_)) => log::warn!("skipping non-UTF-8 file {}", rel.display()),
                Err(err) => log::warn!("skipping {}: {err}", rel.display()),
            }
        }
        Ok(Self { root, files })
    }

    /// Builds a workspace from in-memory contents. Nothing is read from
    /// `root`; [`flush`](Self::flush) writes under it.
    pub fn from_files<P, S>(root: impl Into<PathBuf>, files: impl IntoIterator<Item = (P, S)>) -> Self
    where
        P: Into<PathBuf>,
        S: AsRef<str>,
    {
        Self {
            root: root.into(),
            files: files
                .into_iter()
                .map(|(p, s)| (p.into(), SourceFile::parse(s.as_ref())))
                .collect(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.keys().map(PathBuf::as_path)
    }

    pub fn contains(&self, path: &Path) -> bool {
        self.files.contains_key(path)
    }

    pub fn file(&self, path: &Path) -> Result<&SourceFile, WorkspaceError> {
        self.files
            .get(path)
            .ok_or_else(|| WorkspaceError::UnknownFile(path.to_path_buf()))
    }

    pub fn content(&self, path: &Path) -> Result<String, WorkspaceError> {
        self.file(path).map(SourceFile::render)
    }

    /// Lines `range` of `path`, clamped to the file.
    pub fn read_lines(&self, path: &Path, range: LineRange) -> Result<&[String], WorkspaceError> {
        let file = self.file(path)?;
        let start = range.start.max(1);
        let end = range.end.min(file.len());
        if start > end {
            return Ok(&[]);
        }
        Ok(&file.lines[start - 1..end])
    }

    /// Replaces lines `range` with `new_lines`. The range must lie inside the
    /// current file.
    pub fn replace_range(
        &mut self,
        path: &Path,
        range: LineRange,
        new_lines: Vec<String>,
    ) -> Result<(), WorkspaceError> {
        let file = self
            .files
            .get_mut(path)
            .ok_or_else(|| WorkspaceError::UnknownFile(path.to_path_buf()))?;
        if range.start == 0 || range.start > range.end || range.end > file.lines.len() {
            return Err(WorkspaceError::OutOfBounds {
                path: path.to_path_buf(),
                range,
                len: file.lines.len(),
            });
        }
        file.lines.splice(range.start - 1..range.end, new_lines);
        file.dirty = true;
        Ok(())
    }

    pub fn snapshot(&self) -> WorkspaceSnapshot {
        WorkspaceSnapshot {
            contents: self
                .files
                .iter()
                .map(|(p, f)| (p.clone(), f.render()))
                .collect(),
        }
    }

    /// Reverts every captured file to its snapshot content. Only files whose
    /// content actually changes are marked dirty.
    pub fn restore(&mut self, snap: &WorkspaceSnapshot) {
        for (path, content) in &snap.contents {
            if self.files.get(path).is_some_and(|f| f.render() == *content) {
                continue;
            }
            let mut file = SourceFile::parse(content);
            file.dirty = true;
            self.files.insert(path.clone(), file);
        }
    }

    /// Writes dirty files under the root.
    pub fn flush(&mut self) -> Result<(), WorkspaceError> {
        for (rel, file) in self.files.iter_mut().filter(|(_, f)| f.dirty) {
            let path = self.root.join(rel);
            fs::write(&path, file.render()).map_err(|source| WorkspaceError::Flush { path, source })?;
            file.dirty = false;
        }
        Ok(())
    }
}

/// Copies a project tree, leaving out build output and hidden directories.
pub fn copy_tree(src: &Path, dst: &Path) -> io::Result<()> {
    for entry in WalkDir::new(src).sort_by_file_name().into_iter().filter_entry(|e| e.depth() == 0 || !is_skipped_dir(e)) {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry.path().strip_prefix(src).expect("walk stays under src");
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target)?;
        } else if entry.file_type().is_file() {
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

fn is_skipped_dir(entry: &walkdir::DirEntry) -> bool {
    entry.file_type().is_dir()
        && entry
            .file_name()
            .to_str()
            .is_some_and(|n| n.starts_with('.') || n == "target")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("line {i}\n")).collect()
    }

    fn ws_with(content: &str) -> Workspace {
        Workspace::from_files("/nonexistent", [("src/a.rs", content)])
    }

    #[test]
    fn load_filters_by_suffix_and_recurses() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("src/x")).unwrap();
        fs::create_dir_all(dir.path().join("target/debug")).unwrap();
        fs::write(dir.path().join("src/a.rs"), "a").unwrap();
        fs::write(dir.path().join("src/b.rs"), "b").unwrap();
        fs::write(dir.path().join("src/x/y.rs"), "y").unwrap();
        fs::write(dir.path().join("Cargo.toml"), "[package]").unwrap();
        fs::write(dir.path().join("target/debug/gen.rs"), "g").unwrap();

        let ws = Workspace::load(dir.path(), DEFAULT_EXTENSIONS).unwrap();
        let paths: Vec<_> = ws.paths().map(|p| p.to_string_lossy().into_owned()).collect();
        assert_eq!(paths, ["src/a.rs", "src/b.rs", "src/x/y.rs"]);
    }

    #[test]
    fn load_empty_dir_and_missing_root() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(Workspace::load(dir.path(), DEFAULT_EXTENSIONS).unwrap().len(), 0);
        let missing = dir.path().join("nope");
        assert!(matches!(
            Workspace::load(&missing, DEFAULT_EXTENSIONS),
            Err(WorkspaceError::UnreadableRoot { .. })
        ));
    }

    #[test]
    fn read_lines_clamps() {
        let ws = ws_with(&numbered(10));
        let p = Path::new("src/a.rs");
        assert_eq!(ws.read_lines(p, LineRange::new(8, 15)).unwrap(), ["line 8", "line 9", "line 10"]);
        assert_eq!(ws.read_lines(p, LineRange::single(3)).unwrap(), ["line 3"]);
        assert!(matches!(
            ws.read_lines(Path::new("src/zz.rs"), LineRange::single(1)),
            Err(WorkspaceError::UnknownFile(_))
        ));
    }

    #[test]
    fn replace_range_grows_and_deletes() {
        let p = Path::new("src/a.rs");
        let mut ws = ws_with(&numbered(30));
        let six = (0..6).map(|i| format!("new {i}")).collect();
        ws.replace_range(p, LineRange::new(19, 23), six).unwrap();
        assert_eq!(ws.file(p).unwrap().len(), 31);
        assert_eq!(ws.file(p).unwrap().line(25), Some("line 24"));

        let mut ws = ws_with(&numbered(10));
        ws.replace_range(p, LineRange::new(4, 6), vec![]).unwrap();
        assert_eq!(ws.file(p).unwrap().len(), 7);
        assert_eq!(ws.file(p).unwrap().line(4), Some("line 7"));

        let mut ws = ws_with(&numbered(10));
        ws.replace_range(p, LineRange::single(5), vec!["line 5".into()]).unwrap();
        assert_eq!(ws.content(p).unwrap(), numbered(10));
        assert!(ws.file(p).unwrap().is_dirty());

        assert!(matches!(
            ws.replace_range(p, LineRange::new(9, 11), vec![]),
            Err(WorkspaceError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn newline_conventions_round_trip() {
        for text in ["a\r\nb\r\n", "a\nb", "a\r\nb\nc\n", "", "\n", "x\r\n\r\n", "only\r"] {
            assert_eq!(SourceFile::parse(text).render(), text, "{text:?}");
        }
        assert_eq!(SourceFile::parse("a\r\nb\r\n").lines(), ["a", "b"]);
    }

    #[test]
    fn snapshot_edit_restore_flush_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("src")).unwrap();
        let original = "fn main() {\r\n    let x = 1;\r\n}";
        fs::write(dir.path().join("src/main.rs"), original).unwrap();
        let copy = fs::read(dir.path().join("src/main.rs")).unwrap();

        let p = Path::new("src/main.rs");
        let mut ws = Workspace::load(dir.path(), DEFAULT_EXTENSIONS).unwrap();
        let snap = ws.snapshot();
        ws.replace_range(p, LineRange::single(2), vec!["    let x = 2;".into()]).unwrap();
        ws.replace_range(p, LineRange::single(1), vec!["fn main() { // edited".into()]).unwrap();
        ws.flush().unwrap();
        assert_ne!(fs::read(dir.path().join("src/main.rs")).unwrap(), copy);

        ws.restore(&snap);
        ws.flush().unwrap();
        assert_eq!(fs::read(dir.path().join("src/main.rs")).unwrap(), copy);

        let fresh = ws.snapshot();
        ws.restore(&fresh);
        assert_eq!(ws.snapshot(), fresh);
    }

    fn edit_strategy() -> impl Strategy<Value = (usize, usize, Vec<String>)> {
        (1usize..40, 0usize..6, prop::collection::vec("[a-z ]{0,8}", 0..5))
    }

    proptest! {
        #[test]
        fn restore_undoes_any_edit_sequence(
            n in 1usize..40,
            edits in prop::collection::vec(edit_strategy(), 0..12),
        ) {
            let p = Path::new("src/a.rs");
            let mut ws = ws_with(&numbered(n));
            let snap = ws.snapshot();
            for (start, span, lines) in edits {
                let len = ws.file(p).unwrap().len();
                if len == 0 {
                    break;
                }
                let start = (start - 1) % len + 1;
                let end = (start + span).min(len);
                ws.replace_range(p, LineRange::new(start, end), lines).unwrap();
            }
            ws.restore(&snap);
            prop_assert_eq!(ws.snapshot(), snap);
        }

        #[test]
        fn replace_range_matches_prefix_new_suffix(
            n in 1usize..30,
            a in 1usize..30,
            b in 0usize..30,
            new in prop::collection::vec("[a-z]{0,5}", 0..6),
        ) {
            let p = Path::new("src/a.rs");
            let mut ws = ws_with(&numbered(n));
            let old: Vec<String> = ws.file(p).unwrap().lines().to_vec();
            let start = (a - 1) % n + 1;
            let end = (start + b).min(n);
            ws.replace_range(p, LineRange::new(start, end), new.clone()).unwrap();

            let mut expected = old[..start - 1].to_vec();
            expected.extend(new);
            expected.extend_from_slice(&old[end..]);
            prop_assert_eq!(ws.file(p).unwrap().lines(), expected.as_slice());
        }
    }
}
