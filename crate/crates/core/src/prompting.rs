//! Prompt construction.
//!
//! A prompt is one template instantiated with the checker command, the
//! diagnostic, its explanation and the localized snippets. The format
//! section varies with the [`PromptVariant`], from whole revised snippets
//! (`P0`) to the full described changelog (`P4`, the default).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{CheckerMode, Diagnostic, ErrorKey, Explanation};
use crate::localization::Snippet;
use crate::workspace::LineRange;

pub const TEMPLATE_VERSION: &str = "v1";

const COMPILER_TEMPLATE: &str = include_str!("../templates/compiler.v1.txt");
const LINTER_TEMPLATE: &str = include_str!("../templates/linter.v1.txt");
const FORMAT_P0: &str = include_str!("../templates/format_p0.txt");
const FORMAT_P1: &str = include_str!("../templates/format_p1.txt");
const FORMAT_P2: &str = include_str!("../templates/format_p2.txt");
const FORMAT_P3: &str = include_str!("../templates/format_p3.txt");
const FORMAT_P4: &str = include_str!("../templates/format_p4.txt");

pub const DEFAULT_CHAR_BUDGET: usize = 48_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum PromptVariant {
    /// Complete revised snippets, no changelog.
    P0,
    /// Changelog with FixedCode only, no line prefixes.
    P1,
    /// P1 plus `[N]` line prefixes.
    P2,
    /// P2 plus the echoed OriginalCode section.
    P3,
    /// P3 plus a FixDescription per group.
    #[default]
    P4,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 5] = [Self::P0, Self::P1, Self::P2, Self::P3, Self::P4];

    pub fn uses_changelog(self) -> bool {
        self >= Self::P1
    }

    pub fn line_prefixes(self) -> bool {
        self >= Self::P2
    }

    pub fn echoes_original(self) -> bool {
        self >= Self::P3
    }

    pub fn requires_description(self) -> bool {
        self == Self::P4
    }

    fn format_section(self) -> &'static str {
        match self {
            Self::P0 => FORMAT_P0,
            Self::P1 => FORMAT_P1,
            Self::P2 => FORMAT_P2,
            Self::P3 => FORMAT_P3,
            Self::P4 => FORMAT_P4,
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P0" => Ok(Self::P0),
            "P1" => Ok(Self::P1),
            "P2" => Ok(Self::P2),
            "P3" => Ok(Self::P3),
            "P4" => Ok(Self::P4),
            other => Err(format!("unknown prompt variant `{other}` (expected P0..P4)")),
        }
    }
}

/// Base prompt text with `{cmd}`, `{error}`, `{error_explanation}`,
/// `{code_snippets}` and `{format_instructions}` holes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    base: String,
}

impl PromptTemplate {
    pub fn builtin(mode: CheckerMode) -> Self {
        let base = match mode {
            CheckerMode::Compiler => COMPILER_TEMPLATE,
            CheckerMode::Linter => LINTER_TEMPLATE,
        };
        Self { base: base.to_string() }
    }

    pub fn from_text(base: impl Into<String>) -> Self {
        Self { base: base.into() }
    }

    pub fn from_file(path: &Path) -> io::Result<Self> {
        fs::read_to_string(path).map(Self::from_text)
    }

    pub fn text(&self) -> &str {
        &self.base
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub variant: PromptVariant,
    pub error_key: ErrorKey,
    pub snippet_index: BTreeMap<PathBuf, Vec<LineRange>>,
    format_span: Range<usize>,
}

impl Prompt {
    pub fn digest(&self) -> String {
        prompt_digest(&self.text)
    }

    /// The variant-specific answer instructions inside [`text`](Self::text).
    pub fn format_section(&self) -> &str {
        &self.text[self.format_span.clone()]
    }

    pub fn includes(&self, file: &Path, window: LineRange) -> bool {
        self.snippet_index
            .get(file)
            .is_some_and(|ws| ws.contains(&window))
    }
}

pub fn prompt_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Header line introducing a snippet in the prompt (and, for `P0`, a revised
/// snippet in the answer).
pub fn snippet_header(file: &Path, window: LineRange) -> String {
    format!(
        "File: {}, lines {}-{}:",
        file.to_string_lossy().replace('\\', "/"),
        window.start,
        window.end
    )
}

pub fn render_snippets(snippets: &[Snippet], prefixed: bool) -> String {
    let mut out = String::new();
    for (i, s) in snippets.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&snippet_header(&s.file, s.window));
        out.push('\n');
        let lines = if prefixed {
            s.numbered_lines()
        } else {
            s.lines().to_vec()
        };
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
    }
    out
}

pub fn instantiate_prompt(
    template: &PromptTemplate,
    d: &Diagnostic,
    explanation: &Explanation,
    snippets: &[Snippet],
    variant: PromptVariant,
    cmd: &str,
) -> Prompt {
    debug_assert!(!snippets.is_empty(), "a prompt needs at least one snippet");
    let error = d.rendered.trim_end();
    let explanation_text = explanation.text.trim_end();
    // The compiler's own rendering doubles as its explanation; show it once.
    let explanation_text = if explanation_text == error {
        ""
    } else {
        explanation_text
    };
    let code = render_snippets(snippets, variant.line_prefixes());
    let format = variant.format_section().trim_end();

    let mut format_span = 0..0;
    let text = fill_holes(template.text(), |hole, out| {
        match hole {
            "cmd" => out.push_str(cmd),
            "error" => out.push_str(error),
            "error_explanation" => {
                if !explanation_text.is_empty() {
                    out.push('\n');
                    out.push_str(explanation_text);
                }
            }
            "code_snippets" => out.push_str(code.trim_end()),
            "format_instructions" => {
                let start = out.len();
                out.push_str(format);
                format_span = start..out.len();
            }
            _ => return false,
        }
        true
    });

    let mut snippet_index: BTreeMap<PathBuf, Vec<LineRange>> = BTreeMap::new();
    for s in snippets {
        snippet_index.entry(s.file.clone()).or_default().push(s.window);
    }

    Prompt {
        text,
        variant,
        error_key: d.key(),
        snippet_index,
        format_span,
    }
}

/// Single pass over `template`, so substituted text is never rescanned for
/// holes (source code routinely contains `{error}`-like braces).
fn fill_holes(template: &str, mut fill: impl FnMut(&str, &mut String) -> bool) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close)
                if after[..close]
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c == '_')
                    && close > 0 =>
            {
                let name = &after[..close];
                if !fill(name, &mut out) {
                    out.push('{');
                    out.push_str(name);
                    out.push('}');
                }
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
