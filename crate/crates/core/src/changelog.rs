//! Parsing and validation of model responses.
//!
//! The wire format is a list of changelog groups:
//!
//! ```text
//! ChangeLog:1@src/example.rs
//! FixDescription: Change the type of values stored in the HashMap.
//! OriginalCode@16-16:
//! [16]   map: RwLock<HashMap<String, Bar>>
//! FixedCode@16-16:
//! [16]   map: RwLock<HashMap<String, std::sync::Arc<Bar>>>
//! ```
//!
//! `<@OriginalCode@>@A-B:` and `<@FixedCode@>@A-B:` are accepted as
//! alternative header spellings. The `FixDescription` may wrap over several
//! lines and is never interpreted. Lower prompt variants drop parts of the
//! format: `P3` has no description, `P2` has no `OriginalCode` (the
//! `FixedCode` header then names the replaced lines), `P1` additionally has
//! no `[N]` prefixes. `P0` answers are whole revised snippets, handled by
//! [`parse_revised_snippets`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::localization::strip_line_prefix;
use crate::prompting::{snippet_header, Prompt, PromptVariant};
use crate::workspace::{LineRange, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatReason {
    BadHeader,
    NonConsecutiveLines,
    StartMismatch,
    MissingSection,
    OriginalMismatch,
    UnknownFile,
    Overlap,
}

impl FormatReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BadHeader => "bad-header",
            Self::NonConsecutiveLines => "non-consecutive-lines",
            Self::StartMismatch => "start-mismatch",
            Self::MissingSection => "missing-section",
            Self::OriginalMismatch => "original-mismatch",
            Self::UnknownFile => "unknown-file",
            Self::Overlap => "overlap",
        }
    }
}

impl fmt::Display for FormatReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rejected response. `line` is the 1-based line of the response text the
/// problem was found at, or 0 when it concerns the response as a whole.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatError {
    pub reason: FormatReason,
    pub line: usize,
    pub detail: String,
}

impl FormatError {
    pub fn new(reason: FormatReason, line: usize, detail: impl Into<String>) -> Self {
        Self {
            reason,
            line,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.reason, self.detail)
        } else {
            write!(f, "{} at response line {}: {}", self.reason, self.line, self.detail)
        }
    }
}

impl std::error::Error for FormatError {}

/// Lines of one `OriginalCode` or `FixedCode` section. Line `i` of `lines`
/// carries the number `declared_start + i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSegment {
    pub declared_start: usize,
    pub declared_end: usize,
    pub lines: Vec<String>,
}

impl CodeSegment {
    pub fn new(declared_start: usize, lines: Vec<String>) -> Self {
        let declared_end = declared_start + lines.len().max(1) - 1;
        Self {
            declared_start,
            declared_end,
            lines,
        }
    }

    pub fn declared(&self) -> LineRange {
        LineRange::new(self.declared_start, self.declared_end)
    }

    pub fn numbered(&self) -> impl Iterator<Item = (usize, &str)> {
        (self.declared_start..).zip(self.lines.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePair {
    /// Absent for `P0`-`P2` answers.
    pub original: Option<CodeSegment>,
    pub fixed: CodeSegment,
}

impl ChangePair {
    /// Workspace lines this pair replaces.
    pub fn replaced(&self) -> LineRange {
        match &self.original {
            Some(o) => o.declared(),
            None => self.fixed.declared(),
        }
    }
}

#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub struct ChangeLog {
    pub id: u32,
    pub file: PathBuf,
    pub fix_description: Option<String>,
    pub pairs: Vec<ChangePair>,
    /// Line of the `ChangeLog:` header in the response, for error reports.
    #[serde(default)]
    pub header_line: usize,
}

impl PartialEq for ChangeLog {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.file == other.file
            && self.fix_description == other.fix_description
            && self.pairs == other.pairs
    }
}

enum Token<'a> {
    ChangeLog { id: u32, file: &'a str },
    Description(&'a str),
    Segment { original: bool, start: usize, end: usize },
    Fence,
    Text(&'a str),
}

fn tokenize(line: &str) -> Result<Token<'_>, String> {
    let t = line.trim();
    if let Some(rest) = t.strip_prefix("ChangeLog:") {
        let (id, file) = rest
            .split_once('@')
            .ok_or_else(|| format!("expected `ChangeLog:<id>@<file>`, found `{t}`"))?;
        let id: u32 = id
            .trim()
            .parse()
            .ok()
            .filter(|&id| id > 0)
            .ok_or_else(|| format!("changelog id `{}` is not a positive integer", id.trim()))?;
        let file = file.trim();
        if file.is_empty() {
            return Err("changelog header names no file".into());
        }
        return Ok(Token::ChangeLog { id, file });
    }
    if let Some(rest) = t.strip_prefix("FixDescription:") {
        return Ok(Token::Description(rest.trim()));
    }
    for (prefix, original) in [
        ("<@OriginalCode@>@", true),
        ("OriginalCode@", true),
        ("<@FixedCode@>@", false),
        ("FixedCode@", false),
    ] {
        if let Some(rest) = t.strip_prefix(prefix) {
            let rest = rest.strip_suffix(':').unwrap_or(rest);
            let parsed = rest.split_once('-').and_then(|(a, b)| {
                Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?))
            });
            return match parsed {
                Some((start, end)) if start >= 1 && end + 1 >= start => {
                    Ok(Token::Segment { original, start, end })
                }
                _ => Err(format!("bad line range in `{t}`")),
            };
        }
    }
    if t.starts_with("```") {
        return Ok(Token::Fence);
    }
    Ok(Token::Text(line))
}

struct OpenSegment {
    original: bool,
    start: usize,
    end: usize,
    header_line: usize,
    /// (prefix number, text, response line)
    lines: Vec<(Option<usize>, String, usize)>,
}

struct OpenGroup {
    id: u32,
    file: PathBuf,
    description: Option<String>,
    describing: bool,
    pairs: Vec<ChangePair>,
    pending_original: Option<(CodeSegment, usize)>,
    header_line: usize,
}

struct Parser {
    variant: PromptVariant,
    groups: Vec<ChangeLog>,
    group: Option<OpenGroup>,
    segment: Option<OpenSegment>,
}

impl Parser {
    fn close_segment(&mut self) -> Result<(), FormatError> {
        let Some(mut seg) = self.segment.take() else {
            return Ok(());
        };
        let group = self.group.as_mut().expect("segments only open inside a group");
        if !self.variant.line_prefixes() {
            while seg.lines.last().is_some_and(|(_, l, _)| l.trim().is_empty()) {
                seg.lines.pop();
            }
        }

        // Numbering: explicit prefixes must count up from the declared start.
        for (i, (n, _, at)) in seg.lines.iter().enumerate() {
            if let Some(n) = n {
                if *n != seg.start + i {
                    return Err(FormatError::new(
                        FormatReason::NonConsecutiveLines,
                        *at,
                        format!("expected line [{}], found [{n}]", seg.start + i),
                    ));
                }
            }
        }
        let lines: Vec<String> = seg.lines.into_iter().map(|(_, l, _)| l).collect();
        let listed_end = seg.start + lines.len();
        let segment = CodeSegment {
            declared_start: seg.start,
            declared_end: seg.end,
            lines,
        };

        if seg.original {
            if segment.lines.is_empty() {
                return Err(FormatError::new(
                    FormatReason::MissingSection,
                    seg.header_line,
                    "OriginalCode section lists no lines",
                ));
            }
            if listed_end - 1 != seg.end {
                return Err(FormatError::new(
                    FormatReason::NonConsecutiveLines,
                    seg.header_line,
                    format!("OriginalCode declares {}-{} but lists {} line(s)", seg.start, seg.end, segment.lines.len()),
                ));
            }
            if group.pending_original.is_some() {
                return Err(FormatError::new(
                    FormatReason::MissingSection,
                    seg.header_line,
                    "OriginalCode follows OriginalCode without a FixedCode section",
                ));
            }
            group.pending_original = Some((segment, seg.header_line));
            return Ok(());
        }

        let original = group.pending_original.take();
        match &original {
            Some((o, _)) => {
                if o.declared_start != seg.start {
                    return Err(FormatError::new(
                        FormatReason::StartMismatch,
                        seg.header_line,
                        format!("OriginalCode starts at {} but FixedCode at {}", o.declared_start, seg.start),
                    ));
                }
                if !segment.lines.is_empty() && listed_end - 1 != seg.end {
                    return Err(FormatError::new(
                        FormatReason::NonConsecutiveLines,
                        seg.header_line,
                        format!("FixedCode declares {}-{} but lists {} line(s)", seg.start, seg.end, segment.lines.len()),
                    ));
                }
            }
            None if self.variant.echoes_original() => {
                return Err(FormatError::new(
                    FormatReason::MissingSection,
                    seg.header_line,
                    "FixedCode without a preceding OriginalCode section",
                ));
            }
            None => {
                if seg.end < seg.start {
                    return Err(FormatError::new(
                        FormatReason::BadHeader,
                        seg.header_line,
                        format!("FixedCode replaces an empty range {}-{}", seg.start, seg.end),
                    ));
                }
            }
        }
        group.pairs.push(ChangePair {
            original: original.map(|(o, _)| o),
            fixed: segment,
        });
        Ok(())
    }

    fn close_group(&mut self) -> Result<(), FormatError> {
        self.close_segment()?;
        let Some(g) = self.group.take() else {
            return Ok(());
        };
        if let Some((_, at)) = g.pending_original {
            return Err(FormatError::new(
                FormatReason::MissingSection,
                at,
                "OriginalCode section has no matching FixedCode",
            ));
        }
        if self.variant.requires_description() && g.description.is_none() {
            return Err(FormatError::new(
                FormatReason::MissingSection,
                g.header_line,
                "changelog group has no FixDescription",
            ));
        }
        if g.pairs.is_empty() {
            return Err(FormatError::new(
                FormatReason::MissingSection,
                g.header_line,
                "changelog group has no code sections",
            ));
        }
        self.groups.push(ChangeLog {
            id: g.id,
            file: g.file,
            fix_description: g.description,
            pairs: g.pairs,
            header_line: g.header_line,
        });
        Ok(())
    }

    fn line(&mut self, at: usize, raw: &str) -> Result<(), FormatError> {
        let token = tokenize(raw).map_err(|d| FormatError::new(FormatReason::BadHeader, at, d))?;
        match token {
            Token::ChangeLog { id, file } => {
                self.close_group()?;
                self.group = Some(OpenGroup {
                    id,
                    file: PathBuf::from(file),
                    description: None,
                    describing: false,
                    pairs: Vec::new(),
                    pending_original: None,
                    header_line: at,
                });
            }
            Token::Description(text) => {
                self.close_segment()?;
                let Some(g) = self.group.as_mut() else {
                    return Err(FormatError::new(
                        FormatReason::MissingSection,
                        at,
                        "FixDescription outside a ChangeLog group",
                    ));
                };
                if !g.pairs.is_empty() || g.pending_original.is_some() || g.description.is_some() {
                    return Err(FormatError::new(
                        FormatReason::BadHeader,
                        at,
                        "FixDescription must come once, right after the ChangeLog header",
                    ));
                }
                g.description = Some(text.to_string());
                g.describing = true;
            }
            Token::Segment { original, start, end } => {
                self.close_segment()?;
                let Some(g) = self.group.as_mut() else {
                    return Err(FormatError::new(
                        FormatReason::MissingSection,
                        at,
                        "code section outside a ChangeLog group",
                    ));
                };
                g.describing = false;
                self.segment = Some(OpenSegment {
                    original,
                    start,
                    end,
                    header_line: at,
                    lines: Vec::new(),
                });
            }
            Token::Fence => {}
            Token::Text(text) => {
                if let Some(seg) = self.segment.as_mut() {
                    if self.variant.line_prefixes() {
                        match strip_line_prefix(text.trim_start()) {
                            Some((n, code)) => seg.lines.push((Some(n), code.to_string(), at)),
                            // Anything else ends the section; later prose is ignored.
                            None => self.close_segment()?,
                        }
                    } else {
                        seg.lines.push((None, text.to_string(), at));
                    }
                } else if let Some(g) = self.group.as_mut().filter(|g| g.describing) {
                    let text = text.trim();
                    if text.is_empty() {
                        g.describing = false;
                    } else if let Some(d) = g.description.as_mut() {
                        if !d.is_empty() {
                            d.push('\n');
                        }
                        d.push_str(text);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses a changelog answer (`P1`-`P4`). Prose before the first group and
/// after the last section is ignored; any structural problem inside a group
/// rejects the whole response.
pub fn parse_response(text: &str, variant: PromptVariant) -> Result<Vec<ChangeLog>, FormatError> {
    if !variant.uses_changelog() {
        return Err(FormatError::new(
            FormatReason::MissingSection,
            0,
            "P0 answers carry revised snippets, not changelogs",
        ));
    }
    let mut p = Parser {
        variant,
        groups: Vec::new(),
        group: None,
        segment: None,
    };
    for (i, raw) in text.lines().enumerate() {
        p.line(i + 1, raw)?;
    }
    p.close_group()?;
    if p.groups.is_empty() {
        return Err(FormatError::new(
            FormatReason::MissingSection,
            0,
            "response contains no ChangeLog group",
        ));
    }
    Ok(p.groups)
}

fn parse_snippet_header(t: &str) -> Option<Result<(&str, LineRange), String>> {
    let rest = t.strip_prefix("File:")?;
    let parsed = rest.rsplit_once(", lines").and_then(|(file, range)| {
        let range = range.trim().strip_suffix(':').unwrap_or(range.trim());
        let (a, b) = range.split_once('-')?;
        let (a, b) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        (a >= 1 && a <= b).then(|| (file.trim(), LineRange::new(a, b)))
    });
    Some(parsed.ok_or_else(|| format!("expected `File: <file>, lines A-B:`, found `{t}`")))
}

/// Parses a `P0` answer: each revised snippet repeats its prompt header and
/// then gives the full new text in a fenced block. Every snippet becomes a
/// changelog replacing that window wholesale.
pub fn parse_revised_snippets(
    text: &str,
    snippet_index: &BTreeMap<PathBuf, Vec<LineRange>>,
) -> Result<Vec<ChangeLog>, FormatError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out: Vec<ChangeLog> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let at = i + 1;
        let Some(header) = parse_snippet_header(lines[i].trim()) else {
            i += 1;
            continue;
        };
        let (file, window) = header.map_err(|d| FormatError::new(FormatReason::BadHeader, at, d))?;
        let file = PathBuf::from(file);
        let Some(windows) = snippet_index.get(&file) else {
            return Err(FormatError::new(
                FormatReason::UnknownFile,
                at,
                format!("{} was not part of the prompt", file.display()),
            ));
        };
        if !windows.contains(&window) {
            return Err(FormatError::new(
                FormatReason::BadHeader,
                at,
                format!("no snippet of {} covers lines {window}", file.display()),
            ));
        }
        if out.iter().any(|c| c.file == file && c.pairs[0].replaced() == window) {
            return Err(FormatError::new(
                FormatReason::Overlap,
                at,
                format!("snippet {} lines {window} revised twice", file.display()),
            ));
        }

        i += 1;
        while i < lines.len() && lines[i].trim().is_empty() {
            i += 1;
        }
        if i >= lines.len() || !lines[i].trim().starts_with("```") {
            return Err(FormatError::new(
                FormatReason::MissingSection,
                at,
                "revised snippet is not followed by a ``` block",
            ));
        }
        i += 1;
        let body_start = i;
        while i < lines.len() && lines[i].trim() != "```" {
            i += 1;
        }
        if i >= lines.len() {
            return Err(FormatError::new(
                FormatReason::MissingSection,
                at,
                "revised snippet block is never closed",
            ));
        }
        let body: Vec<String> = lines[body_start..i].iter().map(|l| l.to_string()).collect();
        i += 1;

        out.push(ChangeLog {
            id: out.len() as u32 + 1,
            file,
            fix_description: None,
            pairs: vec![ChangePair {
                original: None,
                fixed: CodeSegment {
                    declared_start: window.start,
                    declared_end: window.end,
                    lines: body,
                },
            }],
            header_line: at,
        });
    }
    if out.is_empty() {
        return Err(FormatError::new(
            FormatReason::MissingSection,
            0,
            "response contains no revised snippet",
        ));
    }
    Ok(out)
}

/// Parses `text` as an answer to `prompt`, picking the grammar its variant
/// asked for.
pub fn parse_for_prompt(text: &str, prompt: &Prompt) -> Result<Vec<ChangeLog>, FormatError> {
    if prompt.variant.uses_changelog() {
        parse_response(text, prompt.variant)
    } else {
        parse_revised_snippets(text, &prompt.snippet_index)
    }
}

/// Renders changelogs in the grammar of `variant`. Parsing the result with
/// the same variant gives the input back.
pub fn render(changelogs: &[ChangeLog], variant: PromptVariant) -> String {
    let mut out = String::new();
    for cl in changelogs {
        if !variant.uses_changelog() {
            for pair in &cl.pairs {
                out.push_str(&snippet_header(&cl.file, pair.replaced()));
                out.push_str("\n```\n");
                for l in &pair.fixed.lines {
                    out.push_str(l);
                    out.push('\n');
                }
                out.push_str("```\n");
            }
            continue;
        }
        out.push_str(&format!("ChangeLog:{}@{}\n", cl.id, display_path(&cl.file)));
        if let Some(d) = &cl.fix_description {
            out.push_str(&format!("FixDescription: {d}\n"));
        }
        for pair in &cl.pairs {
            if let Some(o) = &pair.original {
                render_segment(&mut out, "OriginalCode", o, variant.line_prefixes());
            }
            render_segment(&mut out, "FixedCode", &pair.fixed, variant.line_prefixes());
        }
    }
    out
}

fn render_segment(out: &mut String, name: &str, seg: &CodeSegment, prefixed: bool) {
    out.push_str(&format!("{name}@{}-{}:\n", seg.declared_start, seg.declared_end));
    for (n, l) in seg.numbered() {
        if prefixed {
            out.push_str(&format!("[{n}] "));
        }
        out.push_str(l);
        out.push('\n');
    }
}

fn display_path(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Checks a parsed changelog against the workspace: the file must be
/// indexed, echoed original lines must match (ignoring trailing
/// whitespace), replaced lines must exist, and pairs must not overlap.
pub fn validate(cl: &ChangeLog, ws: &Workspace) -> Result<(), FormatError> {
    let Ok(file) = ws.file(&cl.file) else {
        return Err(FormatError::new(
            FormatReason::UnknownFile,
            cl.header_line,
            format!("{} is not part of the project", cl.file.display()),
        ));
    };
    for pair in &cl.pairs {
        match &pair.original {
            Some(o) => {
                for (n, text) in o.numbered() {
                    let actual = file.line(n);
                    if actual.map(str::trim_end) != Some(text.trim_end()) {
                        return Err(FormatError::new(
                            FormatReason::OriginalMismatch,
                            cl.header_line,
                            match actual {
                                Some(a) => format!("line {n} is `{}`, answer says `{}`", a.trim_end(), text.trim_end()),
                                None => format!("line {n} is past the end of {}", cl.file.display()),
                            },
                        ));
                    }
                }
            }
            None => {
                let r = pair.replaced();
                if r.end > file.len() {
                    return Err(FormatError::new(
                        FormatReason::OriginalMismatch,
                        cl.header_line,
                        format!("lines {r} are past the end of {} ({} lines)", cl.file.display(), file.len()),
                    ));
                }
            }
        }
    }
    let mut ranges: Vec<LineRange> = cl.pairs.iter().map(ChangePair::replaced).collect();
    ranges.sort();
    if let Some(w) = ranges.windows(2).find(|w| w[0].overlaps(&w[1])) {
        return Err(FormatError::new(
            FormatReason::Overlap,
            cl.header_line,
            format!("sections {} and {} overlap", w[0], w[1]),
        ));
    }
    Ok(())
}
