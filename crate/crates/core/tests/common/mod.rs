#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fixloop::changelog::{parse_response, parse_revised_snippets, validate, FormatReason};
use fixloop::localization::strip_line_prefix;
use fixloop::prompting::PromptVariant;
use fixloop::testing::{prompt_error_location, prompt_line};
use fixloop::workspace::{LineRange, Workspace};

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The first answer of the so-e0515 walkthrough, verbatim.
pub const WALKTHROUGH_ANSWER: &str = "ChangeLog:1@src/example.rs
FixDescription: Change the return type of the 'get' method to return an
Arc<Bar> and wrap the Bar in an Arc when inserting it into the HashMap.
<@OriginalCode@>@19-23:
[19] impl Foo {
[20]   pub fn get(&self, key: String) -> &Bar {
[21]     self.map.write().unwrap().entry(key).or_insert(Bar::new())
[22]   }
[23] }
<@FixedCode@>@19-24:
[19] impl Foo {
[20]   pub fn get(&self, key: String) -> std::sync::Arc<Bar> {
[21]     self.map.write().unwrap().entry(key).or_insert_with(
[22]       || std::sync::Arc::new(Bar::new())).clone()
[23]   }
[24] }
";

/// Multi-group example from the format instructions of the full prompt.
pub const FORMAT_SKELETON: &str = "ChangeLog:1@<file>
FixDescription: <summary>.
OriginalCode@4-6:
[4] <white space> <original code line>
[5] <white space> <original code line>
[6] <white space> <original code line>
FixedCode@4-6:
[4] <white space> <fixed code line>
[5] <white space> <fixed code line>
[6] <white space> <fixed code line>
OriginalCode@9-10:
[9] <white space> <original code line>
[10] <white space> <original code line>
FixedCode@9-9:
[9] <white space> <fixed code line>
...
ChangeLog:K@<file>
FixDescription: <summary>.
OriginalCode@15-16:
[15] <white space> <original code line>
[16] <white space> <original code line>
FixedCode@15-17:
[15] <white space> <fixed code line>
[16] <white space> <fixed code line>
[17] <white space> <fixed code line>
OriginalCode@23-23:
[23] <white space> <original code line>
FixedCode@23-23:
[23] <white space> <fixed code line>
";

/// File every corpus answer is validated against.
pub const CORPUS_FILE: &str = "fn main() {
    let x = 1;
    let y = 2;
    println!(\"{}\", x + y);
}

fn helper() -> u32 {
    42
}
";

pub fn corpus_workspace() -> Workspace {
    Workspace::from_files("/corpus", [("src/lib.rs", CORPUS_FILE)])
}

pub struct Malformed {
    pub name: &'static str,
    pub variant: PromptVariant,
    pub text: &'static str,
    pub reason: FormatReason,
}

/// Parses (and, when parsing succeeds, validates) a corpus answer.
pub fn rejection(m: &Malformed, ws: &Workspace) -> Option<FormatReason> {
    if m.variant == PromptVariant::P0 {
        let index = [(PathBuf::from("src/lib.rs"), vec![LineRange::new(1, 9)])].into_iter().collect();
        return parse_revised_snippets(m.text, &index).err().map(|e| e.reason);
    }
    match parse_response(m.text, m.variant) {
        Err(e) => Some(e.reason),
        Ok(cls) => cls.iter().find_map(|cl| validate(cl, ws).err()).map(|e| e.reason),
    }
}

macro_rules! case {
    ($name:expr, $v:ident, $reason:ident, $text:expr) => {
        Malformed {
            name: $name,
            variant: PromptVariant::$v,
            text: $text,
            reason: FormatReason::$reason,
        }
    };
}

pub fn malformed_corpus() -> Vec<Malformed> {
    vec![
        // Headers.
        case!("id not a number", P4, BadHeader, "ChangeLog:abc@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("id zero", P4, BadHeader, "ChangeLog:0@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("negative id", P3, BadHeader, "ChangeLog:-1@src/lib.rs\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("no @ in header", P4, BadHeader, "ChangeLog:1 src/lib.rs\nFixDescription: x\n"),
        case!("no file in header", P4, BadHeader, "ChangeLog:1@\nFixDescription: x\n"),
        case!("range not numeric", P4, BadHeader, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@a-b:\n[2]     let x = 1;\n"),
        case!("range without dash", P4, BadHeader, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@5:\n[5] }\n"),
        case!("range end before start", P3, BadHeader, "ChangeLog:1@src/lib.rs\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@3-1:\n"),
        case!("line zero", P4, BadHeader, "ChangeLog:1@src/lib.rs\nFixDescription: x\n<@OriginalCode@>@0-0:\n[0] x\n"),
        case!("half range", P4, BadHeader, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-x:\n[2]     let x = 1;\n"),
        case!("missing range start", P4, BadHeader, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\n<@FixedCode@>@-3:\n"),
        case!("description twice", P4, BadHeader, "ChangeLog:1@src/lib.rs\nFixDescription: x\nFixDescription: y\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("description after code", P4, BadHeader, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\nFixDescription: late\n"),
        case!("empty replaced range without original", P2, BadHeader, "ChangeLog:1@src/lib.rs\nFixedCode@5-4:\n"),
        // Numbering.
        case!("skipped prefix", P4, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-3:\n[2]     let x = 1;\n[4]     let y = 2;\n"),
        case!("prefix off by one", P4, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-3:\n[3]     let x = 1;\n[4]     let y = 2;\n"),
        case!("original shorter than range", P4, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-4:\n[2]     let x = 1;\n[3]     let y = 2;\nFixedCode@2-3:\n[2]     let x = 1;\n[3]     let y = 3;\n"),
        case!("fixed longer than range", P4, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-3:\n[2]     let x = 1;\n[3]     let y = 3;\n[4]     let z = 4;\n"),
        case!("descending prefixes", P3, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nOriginalCode@2-3:\n[3]     let y = 2;\n[2]     let x = 1;\n"),
        case!("repeated prefix", P3, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nOriginalCode@2-3:\n[2]     let x = 1;\n[2]     let y = 2;\n"),
        case!("P2 fixed prefix mismatch", P2, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nFixedCode@2-3:\n[2]     let x = 1;\n[5]     let y = 2;\n"),
        case!("original longer than range", P4, NonConsecutiveLines, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\n[3]     let y = 2;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        // Start lines.
        case!("fixed starts later", P4, StartMismatch, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-3:\n[2]     let x = 1;\n[3]     let y = 2;\nFixedCode@3-4:\n[3]     let x = 1;\n[4]     let y = 3;\n"),
        case!("fixed starts earlier", P4, StartMismatch, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@1-1:\n[1]     let x = 2;\n"),
        case!("alternate spelling, wrong start", P4, StartMismatch, "ChangeLog:1@src/lib.rs\nFixDescription: x\n<@OriginalCode@>@7-7:\n[7] fn helper() -> u32 {\n<@FixedCode@>@8-8:\n[8] fn helper() -> u64 {\n"),
        case!("second pair wrong start", P3, StartMismatch, "ChangeLog:1@src/lib.rs\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 5;\nOriginalCode@8-8:\n[8]     42\nFixedCode@9-9:\n[9]     43\n"),
        // Missing parts.
        case!("empty response", P4, MissingSection, ""),
        case!("prose only", P4, MissingSection, "The variable x should be declared mutable.\n"),
        case!("no description", P4, MissingSection, "ChangeLog:1@src/lib.rs\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("original without fixed", P4, MissingSection, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\n"),
        case!("fixed without original", P4, MissingSection, "ChangeLog:1@src/lib.rs\nFixDescription: x\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("group without code", P4, MissingSection, "ChangeLog:1@src/lib.rs\nFixDescription: nothing to do\n"),
        case!("original lists no lines", P4, MissingSection, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("description outside group", P4, MissingSection, "FixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\n"),
        case!("code outside group", P3, MissingSection, "OriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("two originals in a row", P3, MissingSection, "ChangeLog:1@src/lib.rs\nOriginalCode@2-2:\n[2]     let x = 1;\nOriginalCode@3-3:\n[3]     let y = 2;\nFixedCode@3-3:\n[3]     let y = 3;\n"),
        case!("P3 fixed without original", P3, MissingSection, "ChangeLog:1@src/lib.rs\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("P0 snippet without block", P0, MissingSection, "File: src/lib.rs, lines 1-9:\nfn main() {}\n"),
        case!("P0 unclosed block", P0, MissingSection, "File: src/lib.rs, lines 1-9:\n```\nfn main() {}\n"),
        // Disagreement with the project.
        case!("original text differs", P4, OriginalMismatch, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 10;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("original past end of file", P4, OriginalMismatch, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@20-20:\n[20] }\nFixedCode@20-20:\n[20] }\n"),
        case!("original indentation differs", P3, OriginalMismatch, "ChangeLog:1@src/lib.rs\nOriginalCode@2-2:\n[2] let x = 1;\nFixedCode@2-2:\n[2] let x = 2;\n"),
        case!("P2 range past end of file", P2, OriginalMismatch, "ChangeLog:1@src/lib.rs\nFixedCode@20-20:\n[20] }\n"),
        case!("second pair differs", P4, OriginalMismatch, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 5;\nOriginalCode@8-8:\n[8]     41\nFixedCode@8-8:\n[8]     43\n"),
        case!("unknown file", P4, UnknownFile, "ChangeLog:1@src/missing.rs\nFixDescription: x\nOriginalCode@2-2:\n[2]     let x = 1;\nFixedCode@2-2:\n[2]     let x = 2;\n"),
        case!("absolute path", P1, UnknownFile, "ChangeLog:1@/etc/passwd\nFixedCode@1-1:\nroot\n"),
        case!("P0 snippet of unknown file", P0, UnknownFile, "File: src/main.rs, lines 1-9:\n```\nfn main() {}\n```\n"),
        case!("overlapping pairs", P4, Overlap, "ChangeLog:1@src/lib.rs\nFixDescription: x\nOriginalCode@2-3:\n[2]     let x = 1;\n[3]     let y = 2;\nFixedCode@2-3:\n[2]     let x = 1;\n[3]     let y = 3;\nOriginalCode@3-4:\n[3]     let y = 2;\n[4]     println!(\"{}\", x + y);\nFixedCode@3-3:\n[3]     let y = 4;\n"),
        case!("P2 overlapping sections", P2, Overlap, "ChangeLog:1@src/lib.rs\nFixedCode@2-4:\n[2]     let x = 1;\nFixedCode@4-4:\n[4]     println!(\"{}\", x);\n"),
        case!("P0 snippet revised twice", P0, Overlap, "File: src/lib.rs, lines 1-9:\n```\nfn main() {}\n```\nFile: src/lib.rs, lines 1-9:\n```\nfn other() {}\n```\n"),
        case!("P0 window not in prompt", P0, BadHeader, "File: src/lib.rs, lines 2-4:\n```\nlet x = 1;\n```\n"),
    ]
}

/// `error[CODE]` of the diagnostic a prompt is about.
pub fn prompt_error_code(prompt: &str) -> Option<String> {
    let at = prompt.find("error[")? + "error[".len();
    let len = prompt[at..].find(']')?;
    Some(prompt[at..at + len].to_string())
}

/// A full-format answer replacing line `n` of `file` with `fixed`, plus
/// optional extra pairs given as (file, line, original, replacement).
pub fn p4_answer(file: &str, n: usize, original: &str, fixed: &[String], extra: &[(String, usize, String, Vec<String>)]) -> String {
    let mut out = String::new();
    let mut id = 1;
    let mut push = |file: &str, n: usize, original: &str, fixed: &[String]| {
        out.push_str(&format!("ChangeLog:{id}@{file}\nFixDescription: adjust line {n}.\n"));
        out.push_str(&format!("OriginalCode@{n}-{n}:\n[{n}] {original}\n"));
        let end = n + fixed.len().max(1) - 1;
        let end = if fixed.is_empty() { n - 1 } else { end };
        out.push_str(&format!("FixedCode@{n}-{end}:\n"));
        for (i, l) in fixed.iter().enumerate() {
            out.push_str(&format!("[{}] {l}\n", n + i));
        }
        id += 1;
    };
    push(file, n, original, fixed);
    for (f, n, o, r) in extra {
        push(f, *n, o, r);
    }
    out
}

/// Location and text of the error line a prompt targets.
pub fn prompt_target(prompt: &str) -> Option<(String, usize, String)> {
    let (file, n) = prompt_error_location(prompt)?;
    let text = prompt_line(prompt, n)?;
    Some((file, n, text))
}

/// Lines shown for `file` in a `[N]`-prefixed prompt.
pub fn prompt_numbered_lines(prompt: &str) -> Vec<(usize, String)> {
    prompt
        .lines()
        .filter_map(strip_line_prefix)
        .map(|(n, t)| (n, t.to_string()))
        .collect()
}

/// Answer to a `P0` prompt: the first snippet, revised by replacing line
/// `n` with `replacement`.
pub fn revised_snippet_answer(prompt: &str, n: usize, replacement: &str) -> Option<String> {
    let lines: Vec<&str> = prompt.lines().collect();
    let at = lines.iter().position(|l| l.starts_with("File: "))?;
    let header = lines[at];
    let range = header.rsplit_once(", lines ")?.1.trim_end_matches(':');
    let (a, b) = range.split_once('-')?;
    let (a, b): (usize, usize) = (a.parse().ok()?, b.parse().ok()?);
    let mut out = format!("{header}\n```\n");
    for (i, l) in lines[at + 1..=at + 1 + b - a].iter().enumerate() {
        if a + i == n {
            out.push_str(replacement);
        } else {
            out.push_str(l);
        }
        out.push('\n');
    }
    out.push_str("```\n");
    Some(out)
}
