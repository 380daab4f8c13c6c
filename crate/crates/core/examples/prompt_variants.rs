//! Print the answer-format section of each prompt variant for one error.
//!
//! ```text
//! cargo run --example prompt_variants [P0..P4]
//! ```

use fixloop::diagnostics::{CheckerMode, Diagnostic, Explanation, Level, SourceSpan};
use fixloop::localization::{collect_locations, extract_snippets};
use fixloop::prompting::{instantiate_prompt, PromptTemplate, PromptVariant};
use fixloop::workspace::Workspace;

fn main() {
    let src = "fn main() {\n    let total: u32 = \"3\";\n    println!(\"{total}\");\n}\n";
    let ws = Workspace::from_files("/demo", [("src/main.rs", src)]);
    let d = Diagnostic {
        code: Some("E0308".into()),
        message: "mismatched types".into(),
        level: Level::Error,
        primary_span: SourceSpan {
            file: "src/main.rs".into(),
            line_start: 2,
            line_end: 2,
            label: Some("expected `u32`, found `&str`".into()),
            external: false,
        },
        related_spans: vec![],
        rendered: "error[E0308]: mismatched types\n --> src/main.rs:2:22\n".into(),
    };
    let snippets = extract_snippets(&ws, &collect_locations(&d, &ws), 50);
    let template = PromptTemplate::builtin(CheckerMode::Compiler);

    let only: Option<PromptVariant> = std::env::args().nth(1).map(|v| v.parse().expect("a variant P0..P4"));
    for v in PromptVariant::ALL.into_iter().filter(|v| only.is_none_or(|o| o == *v)) {
        let p = instantiate_prompt(&template, &d, &Explanation::rendered(&d), &snippets, v, "cargo check");
        println!("==== {v} ({} chars, digest {})", p.text.len(), &p.digest()[..12]);
        if only.is_some() {
            println!("{}", p.text);
        } else {
            println!("{}", p.format_section());
        }
    }
}
