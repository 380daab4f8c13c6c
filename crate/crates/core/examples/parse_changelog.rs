//! Parse a model answer in the changelog format and print what it says.
//!
//! ```text
//! cargo run --example parse_changelog [answer.txt] [P1..P4]
//! ```

use std::env;
use std::fs;

use fixloop::changelog::parse_response;
use fixloop::prompting::PromptVariant;

const ANSWER: &str = "\
ChangeLog:1@src/example.rs
FixDescription: Return the shared pointer instead of a reference into the map.
OriginalCode@19-19:
[19]   pub fn get(&self, key: String) -> &Bar {
FixedCode@19-19:
[19]   pub fn get(&self, key: String) -> std::sync::Arc<Bar> {
OriginalCode@21-21:
[21]       || Bar::new())
FixedCode@21-21:
[21]       || std::sync::Arc::new(Bar::new())).clone()
";

fn main() {
    let mut args = env::args().skip(1);
    let text = match args.next() {
        Some(path) => fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}")),
        None => ANSWER.to_string(),
    };
    let variant: PromptVariant = args.next().map_or(PromptVariant::P4, |v| v.parse().expect("a variant P0..P4"));

    match parse_response(&text, variant) {
        Ok(groups) => {
            for cl in &groups {
                println!("changelog {} for {}", cl.id, cl.file.display());
                if let Some(d) = &cl.fix_description {
                    println!("  why: {d}");
                }
                for pair in &cl.pairs {
                    let fixed = &pair.fixed;
                    match &pair.original {
                        Some(o) => println!(
                            "  lines {}-{} ({} lines) -> {} lines",
                            o.declared_start,
                            o.declared_end,
                            o.lines.len(),
                            fixed.lines.len()
                        ),
                        None => println!("  lines {} -> {} lines", pair.replaced(), fixed.lines.len()),
                    }
                    for (n, l) in fixed.numbered() {
                        println!("    + [{n}] {l}");
                    }
                }
            }
        }
        Err(e) => {
            println!("rejected: {e}");
            std::process::exit(1);
        }
    }

    // A near miss: the original echo skips a line.
    let broken = ANSWER.replace("OriginalCode@21-21", "OriginalCode@21-22");
    println!("\nwith a bad range: {}", parse_response(&broken, variant).unwrap_err());
}
