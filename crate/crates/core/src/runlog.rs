//! Line-delimited JSON log of a run, one record per event.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ErrorKey, ExplanationSource};
use crate::llm::{FinishState, SamplingParams};
use crate::prompting::PromptVariant;

/// How one completion fared during ranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionScore {
    pub index: usize,
    pub finish: FinishState,
    /// Residual diagnostics after trial application; `None` when rejected.
    pub errors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunRecord {
    RunStart {
        root: PathBuf,
        checker: String,
        backend: String,
        model: String,
        variant: PromptVariant,
        n: usize,
        window: usize,
        max_unique_errors: usize,
        grouping: bool,
        sampling: SamplingParams,
        initial_errors: usize,
    },
    GroupStart {
        group: usize,
        origin: ErrorKey,
    },
    Iteration {
        group: usize,
        iteration: usize,
        origin: ErrorKey,
        target: ErrorKey,
        prompt_digest: String,
        prompt_chars: usize,
        window: usize,
        explanation_source: ExplanationSource,
        scores: Vec<CompletionScore>,
        chosen: Option<usize>,
        group_size: usize,
        lifetime_size: usize,
        /// The group emptied while the seed's own key is still reported.
        seed_persisted: bool,
    },
    GroupEnd {
        group: usize,
        origin: ErrorKey,
        fixed: bool,
        reason: String,
        iterations: usize,
    },
    Step {
        step: usize,
        target: ErrorKey,
        prompt_digest: String,
        prompt_chars: usize,
        window: usize,
        explanation_source: ExplanationSource,
        scores: Vec<CompletionScore>,
        chosen: Option<usize>,
        remaining_errors: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        abandoned: Option<String>,
    },
    Patch {
        path: PathBuf,
    },
    TestRun {
        command: String,
        exit_code: Option<i32>,
        passed: bool,
    },
    RunEnd {
        initial_errors: usize,
        fixed: usize,
        final_errors: usize,
        inner_iterations: usize,
        completions_consumed: usize,
    },
}

impl RunRecord {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::RunStart { .. } => "run_start",
            Self::GroupStart { .. } => "group_start",
            Self::Iteration { .. } => "iteration",
            Self::GroupEnd { .. } => "group_end",
            Self::Step { .. } => "step",
            Self::Patch { .. } => "patch",
            Self::TestRun { .. } => "test_run",
            Self::RunEnd { .. } => "run_end",
        }
    }
}

/// Keeps every record in memory and optionally mirrors it to a file as it
/// happens, so a crashed run still leaves a readable log.
#[derive(Default)]
pub struct RunLog {
    records: Vec<RunRecord>,
    sink: Option<BufWriter<File>>,
}

impl RunLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: &Path) -> io::Result<Self> {
        Ok(Self {
            records: Vec::new(),
            sink: Some(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn push(&mut self, record: RunRecord) -> io::Result<()> {
        if let Some(sink) = &mut self.sink {
            serde_json::to_writer(&mut *sink, &record)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<RunRecord> {
        self.records
    }
}

pub fn read_log(path: &Path) -> io::Result<Vec<RunRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect()
}
