pub mod bench;
pub mod changelog;
pub mod cli;
pub mod diagnostics;
pub mod fixtures;
pub mod llm;
pub mod localization;
pub mod orchestrator;
pub mod patching;
pub mod prompting;
pub mod report;
pub mod runlog;
pub mod testing;
pub mod workspace;
