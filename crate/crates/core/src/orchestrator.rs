//! The repair loop.
//!
//! Errors are taken one at a time. Each seeds an error group; the group is
//! worked on by prompting for fixes, ranking the answers by how many errors
//! remain after trial application, applying the best one and re-checking.
//! Errors that show up after a fix and were not present when the group
//! started join the group. A group ends when it is empty (fixed) or when it
//! stops making progress or grows too large (gave up, all its edits undone).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::changelog::{parse_for_prompt, validate, FormatError};
use crate::diagnostics::{CheckError, Checker, Diagnostic, ErrorKey, ExplanationSource};
use crate::llm::{BackendError, Completion, CompletionBackend, CompletionRequest, FinishState, SamplingParams};
use crate::localization::{collect_locations, extract_within_budget, SnippetBudget, DEFAULT_WINDOW};
use crate::patching::{self, unified_diff, PatchPlan};
use crate::prompting::{instantiate_prompt, Prompt, PromptTemplate, PromptVariant, DEFAULT_CHAR_BUDGET};
use crate::report::{ErrorOutcome, FailureClass, FixReport, Outcome};
use crate::runlog::{CompletionScore, RunLog, RunRecord};
use crate::workspace::{Workspace, WorkspaceError, WorkspaceSnapshot};

pub const DEFAULT_MAX_UNIQUE_ERRORS: usize = 100;
pub const DEFAULT_MODEL: &str = "gpt-4";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_completions: usize,
    pub window: usize,
    pub max_unique_errors: usize,
    pub variant: PromptVariant,
    pub grouping_enabled: bool,
    /// Shell command run once the project checks clean.
    pub test_command: Option<String>,
    pub snippet_budget: SnippetBudget,
    pub prompt_char_budget: usize,
    pub sampling: SamplingParams,
    pub model: String,
    /// Replaces the built-in prompt template of the checker's mode.
    pub template: Option<PromptTemplate>,
    /// Directory receiving one unified diff per applied completion.
    pub emit_patch_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_completions: 1,
            window: DEFAULT_WINDOW,
            max_unique_errors: DEFAULT_MAX_UNIQUE_ERRORS,
            variant: PromptVariant::default(),
            grouping_enabled: true,
            test_command: None,
            snippet_budget: SnippetBudget::default(),
            prompt_char_budget: DEFAULT_CHAR_BUDGET,
            sampling: SamplingParams::default(),
            model: DEFAULT_MODEL.into(),
            template: None,
            emit_patch_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if !(1..=crate::llm::MAX_COMPLETIONS).contains(&self.n_completions) {
            return Err(RunError::Config(format!(
                "number of completions must be between 1 and {}, got {}",
                crate::llm::MAX_COMPLETIONS,
                self.n_completions
            )));
        }
        if self.max_unique_errors == 0 {
            return Err(RunError::Config("max unique errors must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("{what}: {source}")]
    Io { what: String, source: io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn io_err(what: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
    let what = what.into();
    move |source| RunError::Io { what, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GiveUp {
    /// The group saw too many distinct errors.
    BlowUp,
    /// No answer applied, or the group's errors stayed the same across two
    /// applied fixes.
    NoProgress,
    /// The group used its whole iteration allowance without settling.
    IterationLimit,
    /// Every completion of a request failed at the backend.
    BackendError,
    /// The error points at no indexed source line.
    NoLocation,
}

impl GiveUp {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BlowUp => "blow-up",
            Self::NoProgress => "no-progress",
            Self::IterationLimit => "iteration-limit",
            Self::BackendError => "backend-error",
            Self::NoLocation => "no-location",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupResult {
    Fixed,
    GaveUp(GiveUp),
}

/// The completion picked by [`Session::best_completion`], already applied.
#[derive(Debug, Clone)]
pub struct Chosen {
    pub index: usize,
    pub plan: PatchPlan,
    /// Checker output with the completion applied.
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone)]
pub struct Ranking {
    pub scores: Vec<CompletionScore>,
    pub chosen: Option<Chosen>,
}

/// Per initial error bookkeeping used to classify failures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyTrack {
    pub attempted: bool,
    pub applied: bool,
    pub iterations: usize,
    pub reason: Option<String>,
}

/// Failure class of an error at the end of a run, `None` if it counts as
/// fixed. An error still reported is a format failure when no answer for it
/// ever applied, and a build failure otherwise (including errors the run
/// never got to). A vanished error whose project then fails its tests is a
/// test failure.
pub fn classify_failure(track: &KeyTrack, still_present: bool, test_passed: Option<bool>) -> Option<FailureClass> {
    if still_present {
        if track.attempted && !track.applied {
            Some(FailureClass::Format)
        } else {
            Some(FailureClass::Build)
        }
    } else if test_passed == Some(false) {
        Some(FailureClass::Test)
    } else {
        None
    }
}

struct BuiltPrompt {
    prompt: Prompt,
    source: ExplanationSource,
    window: usize,
}

pub struct Session<'a> {
    ws: &'a mut Workspace,
    checker: &'a mut dyn Checker,
    backend: &'a mut dyn CompletionBackend,
    cfg: &'a RunConfig,
    template: PromptTemplate,
    log: RunLog,
    inner_iterations: usize,
    completions_consumed: usize,
    requests: usize,
    tracks: BTreeMap<ErrorKey, KeyTrack>,
    histogram: BTreeMap<usize, usize>,
    patches: usize,
}

impl<'a> Session<'a> {
    pub fn new(
        ws: &'a mut Workspace,
        checker: &'a mut dyn Checker,
        backend: &'a mut dyn CompletionBackend,
        cfg: &'a RunConfig,
    ) -> Self {
        let template = cfg
            .template
            .clone()
            .unwrap_or_else(|| PromptTemplate::builtin(checker.mode()));
        Self {
            ws,
            checker,
            backend,
            cfg,
            template,
            log: RunLog::in_memory(),
            inner_iterations: 0,
            completions_consumed: 0,
            requests: 0,
            tracks: BTreeMap::new(),
            histogram: BTreeMap::new(),
            patches: 0,
        }
    }

    pub fn with_log(mut self, log: RunLog) -> Self {
        self.log = log;
        self
    }

    fn record(&mut self, r: RunRecord) -> Result<(), RunError> {
        self.log.push(r).map_err(io_err("writing run log"))
    }

    /// Flushes pending edits and runs the checker.
    pub fn check(&mut self) -> Result<Vec<Diagnostic>, RunError> {
        self.ws.flush()?;
        Ok(self.checker.check(self.ws.root())?)
    }

    fn restore(&mut self, snap: &WorkspaceSnapshot) -> Result<(), RunError> {
        self.ws.restore(snap);
        self.ws.flush()?;
        Ok(())
    }

    /// Runs the whole loop and returns the report with the run log.
    pub fn run(mut self) -> Result<(FixReport, RunLog), RunError> {
        self.cfg.validate()?;
        if let Some(dir) = &self.cfg.emit_patch_dir {
            fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
        }
        let start = self.ws.snapshot();
        let errs = self.check()?;
        let initial = unique_keys(&errs);
        self.record(RunRecord::RunStart {
            root: self.ws.root().to_path_buf(),
            checker: self.checker.command_line(),
            backend: self.backend.describe(),
            model: self.cfg.model.clone(),
            variant: self.cfg.variant,
            n: self.cfg.n_completions,
            window: self.cfg.window,
            max_unique_errors: self.cfg.max_unique_errors,
            grouping: self.cfg.grouping_enabled,
            sampling: self.cfg.sampling,
            initial_errors: initial.len(),
        })?;
        for key in &initial {
            self.tracks.insert(key.clone(), KeyTrack::default());
        }

        let final_errs = if initial.is_empty() {
            errs
        } else if self.cfg.grouping_enabled {
            self.grouped_loop(errs, initial.len())?
        } else {
            self.single_loop(errs, initial.len())?
        };

        let test_passed = match (&self.cfg.test_command, final_errs.is_empty() && !initial.is_empty()) {
            (Some(cmd), true) => Some(self.run_tests(cmd)?),
            _ => None,
        };

        if let Some(dir) = &self.cfg.emit_patch_dir {
            let diff = unified_diff(&start, &self.ws.snapshot());
            let path = dir.join("final.patch");
            fs::write(&path, diff).map_err(io_err(format!("writing {}", path.display())))?;
        }

        let final_keys = unique_keys(&final_errs);
        let mut outcomes = Vec::new();
        for key in &initial {
            let track = self.tracks.get(key).cloned().unwrap_or_default();
            let present = final_keys.contains(key);
            let failure = classify_failure(&track, present, test_passed);
            let reason = match failure {
                None => "fixed".to_string(),
                Some(FailureClass::Test) => "test-failed".to_string(),
                Some(_) => track
                    .reason
                    .clone()
                    .unwrap_or_else(|| if track.attempted { "unresolved" } else { "not-attempted" }.to_string()),
            };
            outcomes.push(ErrorOutcome {
                key: key.clone(),
                outcome: if failure.is_none() { Outcome::Fixed } else { Outcome::GaveUp },
                failure,
                reason,
                iterations: track.iterations,
            });
        }
        let fixed = outcomes.iter().filter(|o| o.outcome == Outcome::Fixed).count();
        let report = FixReport {
            initial_errors: initial.len(),
            fixed,
            outcomes,
            inner_iterations: self.inner_iterations,
            iterations_histogram: self.histogram.clone(),
            completions_consumed: self.completions_consumed,
            test_passed,
            final_errors: final_keys.len(),
        };
        self.record(RunRecord::RunEnd {
            initial_errors: report.initial_errors,
            fixed: report.fixed,
            final_errors: report.final_errors,
            inner_iterations: report.inner_iterations,
            completions_consumed: report.completions_consumed,
        })?;
        Ok((report, self.log))
    }

    fn grouped_loop(&mut self, mut errs: Vec<Diagnostic>, initial_count: usize) -> Result<Vec<Diagnostic>, RunError> {
        let mut failed_seeds: BTreeSet<ErrorKey> = BTreeSet::new();
        for group_id in 0..initial_count {
            let Some(seed) = errs.iter().find(|d| !failed_seeds.contains(&d.key())).cloned() else {
                break;
            };
            let errs_keys = unique_keys(&errs);
            let (result, iterations) = self.fix_group(group_id, seed.clone(), &errs_keys)?;
            let track = self.tracks.entry(seed.key()).or_default();
            track.iterations += iterations;
            match result {
                GroupResult::Fixed => {
                    *self.histogram.entry(iterations).or_default() += 1;
                }
                GroupResult::GaveUp(why) => {
                    track.reason = Some(why.as_str().to_string());
                    failed_seeds.insert(seed.key());
                }
            }
            errs = self.check()?;
        }
        Ok(errs)
    }

    /// One error group, from seeding to fixed or gave-up. `errs` are the
    /// keys reported when the group started; they never join the group.
    pub fn fix_group(
        &mut self,
        group_id: usize,
        seed: Diagnostic,
        errs: &BTreeSet<ErrorKey>,
    ) -> Result<(GroupResult, usize), RunError> {
        let origin = seed.key();
        let snap = self.ws.snapshot();
        let mut group = vec![seed];
        let mut lifetime: BTreeSet<ErrorKey> = BTreeSet::from([origin.clone()]);
        let mut prev_applied: Option<BTreeSet<ErrorKey>> = None;
        let mut iterations = 0;
        self.record(RunRecord::GroupStart {
            group: group_id,
            origin: origin.clone(),
        })?;
        self.tracks.entry(origin.clone()).or_default().attempted = true;

        let result = loop {
            if iterations >= self.cfg.max_unique_errors {
                break GroupResult::GaveUp(GiveUp::IterationLimit);
            }
            iterations += 1;
            self.inner_iterations += 1;
            let target = group[0].clone();

            let Some(built) = self.build_prompt(&target) else {
                break GroupResult::GaveUp(GiveUp::NoLocation);
            };
            let completions = self.request(&built.prompt)?;
            let backend_down = completions.iter().all(|c| c.finish_state == FinishState::BackendError);
            let ranking = self.best_completion(&built.prompt, &completions)?;

            let mut seed_persisted = false;
            let applied = ranking.chosen.is_some();
            if let Some(chosen) = &ranking.chosen {
                self.tracks.entry(origin.clone()).or_default().applied = true;
                group = chosen
                    .diagnostics
                    .iter()
                    .filter(|d| !errs.contains(&d.key()))
                    .cloned()
                    .collect();
                lifetime.extend(group.iter().map(Diagnostic::key));
                seed_persisted = group.is_empty() && chosen.diagnostics.iter().any(|d| d.key() == origin);
            }
            let keys_now = unique_keys(&group);
            self.record(RunRecord::Iteration {
                group: group_id,
                iteration: iterations,
                origin: origin.clone(),
                target: target.key(),
                prompt_digest: built.prompt.digest(),
                prompt_chars: built.prompt.text.len(),
                window: built.window,
                explanation_source: built.source,
                scores: ranking.scores,
                chosen: ranking.chosen.as_ref().map(|c| c.index),
                group_size: group.len(),
                lifetime_size: lifetime.len(),
                seed_persisted,
            })?;
            if seed_persisted {
                log::info!("group {group_id} emptied while {origin} is still reported");
            }

            if applied && group.is_empty() {
                break GroupResult::Fixed;
            }
            if backend_down {
                break GroupResult::GaveUp(GiveUp::BackendError);
            }
            if !applied {
                break GroupResult::GaveUp(GiveUp::NoProgress);
            }
            if lifetime.len() >= self.cfg.max_unique_errors {
                break GroupResult::GaveUp(GiveUp::BlowUp);
            }
            if prev_applied.as_ref() == Some(&keys_now) {
                break GroupResult::GaveUp(GiveUp::NoProgress);
            }
            prev_applied = Some(keys_now);
        };

        if let GroupResult::GaveUp(_) = result {
            self.restore(&snap)?;
        }
        let (fixed, reason) = match result {
            GroupResult::Fixed => (true, "fixed"),
            GroupResult::GaveUp(why) => (false, why.as_str()),
        };
        self.record(RunRecord::GroupEnd {
            group: group_id,
            origin,
            fixed,
            reason: reason.to_string(),
            iterations,
        })?;
        Ok((result, iterations))
    }

    /// Fixing one error at a time from the global error list, without
    /// groups or rollback. Each error keeps its own give-up counters.
    fn single_loop(&mut self, mut bag: Vec<Diagnostic>, initial_count: usize) -> Result<Vec<Diagnostic>, RunError> {
        #[derive(Default)]
        struct PerError {
            lifetime: BTreeSet<ErrorKey>,
            prev_applied: Option<BTreeSet<ErrorKey>>,
        }
        let budget = initial_count * self.cfg.max_unique_errors;
        let mut abandoned: BTreeSet<ErrorKey> = BTreeSet::new();
        let mut state: BTreeMap<ErrorKey, PerError> = BTreeMap::new();
        let mut steps = 0;
        while steps < budget {
            let Some(target) = bag.iter().find(|d| !abandoned.contains(&d.key())).cloned() else {
                break;
            };
            let key = target.key();
            steps += 1;
            self.inner_iterations += 1;
            let track = self.tracks.entry(key.clone()).or_default();
            track.attempted = true;
            track.iterations += 1;

            let mut give_up = None;
            let mut scores = Vec::new();
            let mut chosen = None;
            let mut digest = String::new();
            let mut chars = 0;
            let mut window = 0;
            let mut source = ExplanationSource::Rendered;
            match self.build_prompt(&target) {
                None => give_up = Some(GiveUp::NoLocation),
                Some(built) => {
                    digest = built.prompt.digest();
                    chars = built.prompt.text.len();
                    window = built.window;
                    source = built.source;
                    let completions = self.request(&built.prompt)?;
                    let backend_down = completions.iter().all(|c| c.finish_state == FinishState::BackendError);
                    let ranking = self.best_completion(&built.prompt, &completions)?;
                    scores = ranking.scores;
                    chosen = ranking.chosen.as_ref().map(|c| c.index);
                    match ranking.chosen {
                        Some(c) => {
                            self.tracks.entry(key.clone()).or_default().applied = true;
                            let before = unique_keys(&bag);
                            let after = unique_keys(&c.diagnostics);
                            let st = state.entry(key.clone()).or_default();
                            st.lifetime.insert(key.clone());
                            st.lifetime.extend(after.difference(&before).cloned());
                            if after.contains(&key) {
                                if st.lifetime.len() >= self.cfg.max_unique_errors {
                                    give_up = Some(GiveUp::BlowUp);
                                } else if st.prev_applied.as_ref() == Some(&after) {
                                    give_up = Some(GiveUp::NoProgress);
                                }
                            }
                            st.prev_applied = Some(after);
                            bag = c.diagnostics;
                        }
                        None if backend_down => give_up = Some(GiveUp::BackendError),
                        None => give_up = Some(GiveUp::NoProgress),
                    }
                }
            }
            if let Some(why) = give_up {
                abandoned.insert(key.clone());
                self.tracks.entry(key.clone()).or_default().reason = Some(why.as_str().to_string());
            }
            self.record(RunRecord::Step {
                step: steps,
                target: key.clone(),
                prompt_digest: digest,
                prompt_chars: chars,
                window,
                explanation_source: source,
                scores,
                chosen,
                remaining_errors: bag.len(),
                abandoned: give_up.map(|g| g.as_str().to_string()),
            })?;
        }
        let final_bag = self.check()?;
        let final_keys = unique_keys(&final_bag);
        for (key, track) in &self.tracks {
            if track.attempted && !final_keys.contains(key) {
                *self.histogram.entry(track.iterations).or_default() += 1;
            }
        }
        Ok(final_bag)
    }

    fn build_prompt(&mut self, target: &Diagnostic) -> Option<BuiltPrompt> {
        let explanation = self.checker.explain(target);
        let locations = collect_locations(target, self.ws);
        if locations.is_empty() {
            log::warn!("{} has no location inside the project", target.key());
            return None;
        }
        let cmd = self.checker.command_line();
        let mut window = self.cfg.window;
        loop {
            let snippets = extract_within_budget(self.ws, &locations, window, self.cfg.snippet_budget);
            let prompt = instantiate_prompt(&self.template, target, &explanation, &snippets, self.cfg.variant, &cmd);
            if prompt.text.len() <= self.cfg.prompt_char_budget || window == 0 {
                return Some(BuiltPrompt {
                    prompt,
                    source: explanation.source,
                    window,
                });
            }
            window /= 2;
        }
    }

    fn request(&mut self, prompt: &Prompt) -> Result<Vec<Completion>, RunError> {
        let req = CompletionRequest {
            prompt_text: prompt.text.clone(),
            n: self.cfg.n_completions,
            sampling: self.cfg.sampling,
            model: self.cfg.model.clone(),
        };
        let mut completions = self.backend.complete(&req)?;
        self.requests += 1;
        self.completions_consumed += completions.len();
        completions.sort_by_key(|c| c.index);
        Ok(completions)
    }

    fn prepare(&self, text: &str, prompt: &Prompt, index: usize) -> Result<PatchPlan, FormatError> {
        let changelogs = parse_for_prompt(text, prompt)?;
        for cl in &changelogs {
            validate(cl, self.ws)?;
        }
        patching::plan(&changelogs, format!("request {} completion {index}", self.requests))
    }

    /// Tries every completion on the workspace, keeps the one leaving the
    /// fewest errors (lowest index on ties) and applies it for real.
    pub fn best_completion(&mut self, prompt: &Prompt, completions: &[Completion]) -> Result<Ranking, RunError> {
        let pre = self.ws.snapshot();
        let mut scores = Vec::with_capacity(completions.len());
        let mut best: Option<(usize, usize, PatchPlan, Vec<Diagnostic>)> = None;
        for c in completions {
            let mut score = CompletionScore {
                index: c.index,
                finish: c.finish_state,
                errors: None,
                rejection: None,
            };
            if c.finish_state == FinishState::BackendError {
                score.rejection = Some(format!("backend: {}", c.text));
                scores.push(score);
                continue;
            }
            let plan = match self.prepare(&c.text, prompt, c.index) {
                Ok(p) => p,
                Err(e) => {
                    score.rejection = Some(e.to_string());
                    scores.push(score);
                    continue;
                }
            };
            if let Err(e) = patching::apply(self.ws, &plan) {
                score.rejection = Some(format!("apply: {e}"));
                scores.push(score);
                continue;
            }
            let probe = self.check();
            self.restore(&pre)?;
            let diagnostics = probe?;
            score.errors = Some(diagnostics.len());
            scores.push(score);
            if best.as_ref().is_none_or(|(count, ..)| diagnostics.len() < *count) {
                best = Some((diagnostics.len(), c.index, plan, diagnostics));
            }
        }

        let chosen = match best {
            None => None,
            Some((_, index, plan, diagnostics)) => {
                patching::apply(self.ws, &plan).map_err(|e| RunError::Io {
                    what: "re-applying the chosen completion".into(),
                    source: io::Error::other(e.to_string()),
                })?;
                self.emit_patch(&pre)?;
                Some(Chosen {
                    index,
                    plan,
                    diagnostics,
                })
            }
        };
        Ok(Ranking { scores, chosen })
    }

    fn emit_patch(&mut self, before: &WorkspaceSnapshot) -> Result<(), RunError> {
        let Some(dir) = &self.cfg.emit_patch_dir else {
            return Ok(());
        };
        self.patches += 1;
        let path = dir.join(format!("{:03}.patch", self.patches));
        let diff = unified_diff(before, &self.ws.snapshot());
        fs::write(&path, diff).map_err(io_err(format!("writing {}", path.display())))?;
        self.record(RunRecord::Patch { path })
    }

    fn run_tests(&mut self, cmd: &str) -> Result<bool, RunError> {
        let output = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .current_dir(self.ws.root())
            .output()
            .map_err(io_err(format!("running test command `{cmd}`")))?;
        log::debug!("test command output:\n{}", String::from_utf8_lossy(&output.stdout));
        let passed = output.status.success();
        self.record(RunRecord::TestRun {
            command: cmd.to_string(),
            exit_code: output.status.code(),
            passed,
        })?;
        Ok(passed)
    }
}

fn unique_keys(diags: &[Diagnostic]) -> BTreeSet<ErrorKey> {
    diags.iter().map(Diagnostic::key).collect()
}

/// Runs the loop on `ws` with a fresh in-memory log.
pub fn fix_project(
    ws: &mut Workspace,
    checker: &mut dyn Checker,
    backend: &mut dyn CompletionBackend,
    cfg: &RunConfig,
) -> Result<FixReport, RunError> {
    Session::new(ws, checker, backend, cfg).run().map(|(report, _)| report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{FnBackend, ScriptedBackend};
    use crate::testing::{answer_replacing_error_line, marker, MarkerChecker};
    use std::path::Path;

    struct Project {
        dir: tempfile::TempDir,
    }

    impl Project {
        fn new(src: &str) -> Self {
            let dir = tempfile::tempdir().unwrap();
            fs::create_dir(dir.path().join("src")).unwrap();
            fs::write(dir.path().join("src/lib.rs"), src).unwrap();
            Self { dir }
        }

        fn ws(&self) -> Workspace {
            Workspace::load(self.dir.path(), &["rs"]).unwrap()
        }

        fn source(&self) -> String {
            fs::read_to_string(self.dir.path().join("src/lib.rs")).unwrap()
        }
    }

    fn lib(lines: &[&str]) -> String {
        lines.iter().map(|l| format!("{l}\n")).collect()
    }

    fn run(p: &Project, backend: &mut dyn CompletionBackend, cfg: &RunConfig) -> (FixReport, Vec<RunRecord>) {
        let mut ws = p.ws();
        let mut checker = MarkerChecker::new();
        let (report, log) = Session::new(&mut ws, &mut checker, backend, cfg).run().unwrap();
        (report, log.into_records())
    }

    fn fixer(replacement: &'static [&'static str]) -> impl FnMut(&CompletionRequest, u64) -> Vec<String> {
        move |req, _| vec![answer_replacing_error_line(&req.prompt_text, replacement, PromptVariant::P4).unwrap()]
    }

    #[test]
    fn clean_project_makes_no_requests() {
        let p = Project::new("fn main() {}\n");
        let mut backend = ScriptedBackend::default();
        let (report, log) = run(&p, &mut backend, &RunConfig::default());
        assert_eq!(report, FixReport::default());
        assert!(log.iter().all(|r| !matches!(r, RunRecord::Iteration { .. })));
        assert_eq!(report.to_string(), "0 errors\n");
    }

    #[test]
    fn single_fix() {
        let m = marker("E1", "broken");
        let p = Project::new(&lib(&["fn a() {}", &format!("let x = 1; {m}"), "fn b() {}"]));
        let mut backend = FnBackend::new(fixer(&["let x = 2;"]));
        let (report, log) = run(&p, &mut backend, &RunConfig::default());
        assert_eq!((report.initial_errors, report.fixed, report.inner_iterations), (1, 1, 1));
        assert_eq!(p.source(), lib(&["fn a() {}", "let x = 2;", "fn b() {}"]));
        assert_eq!(report.iterations_histogram, BTreeMap::from([(1, 1)]));
        let kinds: Vec<_> = log.iter().map(RunRecord::kind).collect();
        assert_eq!(kinds, ["run_start", "group_start", "iteration", "group_end", "run_end"]);
    }

    #[test]
    fn fix_induced_error_joins_the_group() {
        let p = Project::new(&lib(&["fn a() {}", &marker("E1", "first"), "fn b() {}"]));
        let answers = [marker("E2", "second"), "// ok".to_string()];
        let mut backend = FnBackend::new(move |req: &CompletionRequest, i: u64| {
            let line = answers[i as usize].as_str();
            vec![answer_replacing_error_line(&req.prompt_text, &[line], PromptVariant::P4).unwrap()]
        });
        let (report, log) = run(&p, &mut backend, &RunConfig::default());
        assert_eq!(report.fixed, 1);
        assert_eq!(report.inner_iterations, 2);
        let sizes: Vec<_> = log
            .iter()
            .filter_map(|r| match r {
                RunRecord::Iteration { group_size, lifetime_size, .. } => Some((*group_size, *lifetime_size)),
                _ => None,
            })
            .collect();
        assert_eq!(sizes, [(1, 2), (0, 2)]);
    }

    #[test]
    fn malformed_answers_give_up_and_restore() {
        let src = lib(&["fn a() {}", &marker("E1", "broken")]);
        let p = Project::new(&src);
        let mut backend = ScriptedBackend::new([vec!["I could not find a fix."]]);
        let (report, log) = run(&p, &mut backend, &RunConfig::default());
        assert_eq!(report.fixed, 0);
        assert_eq!(report.outcomes[0].failure, Some(FailureClass::Format));
        assert_eq!(report.outcomes[0].reason, "no-progress");
        assert_eq!(p.source(), src);
        assert!(log.iter().any(|r| matches!(r, RunRecord::GroupEnd { fixed: false, .. })));
    }

    #[test]
    fn fresh_errors_blow_up_and_roll_back() {
        let src = lib(&["fn a() {}", &marker("E0", "seed"), "fn b() {}"]);
        let p = Project::new(&src);
        let mut backend = FnBackend::new(|req: &CompletionRequest, i: u64| {
            let fresh = marker(&format!("F{i}"), "fresh");
            vec![answer_replacing_error_line(&req.prompt_text, &[&fresh], PromptVariant::P4).unwrap()]
        });
        let cfg = RunConfig {
            max_unique_errors: 5,
            ..RunConfig::default()
        };
        let (report, log) = run(&p, &mut backend, &cfg);
        assert_eq!(report.outcomes[0].failure, Some(FailureClass::Build));
        assert_eq!(report.outcomes[0].reason, "blow-up");
        assert_eq!(report.inner_iterations, 4);
        assert_eq!(p.source(), src);
        let lifetimes: Vec<_> = log
            .iter()
            .filter_map(|r| match r {
                RunRecord::Iteration { lifetime_size, .. } => Some(*lifetime_size),
                _ => None,
            })
            .collect();
        assert_eq!(lifetimes, [2, 3, 4, 5]);
    }

    #[test]
    fn same_group_twice_is_no_progress() {
        let src = lib(&["fn a() {}", &marker("E0", "seed")]);
        let p = Project::new(&src);
        let mut backend = FnBackend::new(|req: &CompletionRequest, _| {
            vec![answer_replacing_error_line(&req.prompt_text, &[&marker("E9", "same")], PromptVariant::P4).unwrap()]
        });
        let (report, _) = run(&p, &mut backend, &RunConfig::default());
        assert_eq!(report.outcomes[0].reason, "no-progress");
        assert_eq!(report.outcomes[0].failure, Some(FailureClass::Build));
        assert_eq!(report.inner_iterations, 2);
        assert_eq!(p.source(), src);
    }

    #[test]
    fn ranking_prefers_fewest_errors_then_lowest_index() {
        let src = lib(&["fn a() {}", &marker("E0", "seed")]);
        let p = Project::new(&src);
        let mut backend = FnBackend::new(|req: &CompletionRequest, _| {
            let three = [marker("A", "a"), marker("B", "b"), marker("C", "c")].join(" ");
            let one_x = marker("X", "x");
            let one_y = marker("Y", "y");
            [three, one_x, one_y]
                .iter()
                .map(|r| answer_replacing_error_line(&req.prompt_text, &[r], PromptVariant::P4).unwrap())
                .collect()
        });
        let mut ws = p.ws();
        let mut checker = MarkerChecker::new();
        let cfg = RunConfig {
            n_completions: 3,
            max_unique_errors: 1,
            ..RunConfig::default()
        };
        let (_, log) = Session::new(&mut ws, &mut checker, &mut backend, &cfg).run().unwrap();
        let (scores, chosen) = log
            .records()
            .iter()
            .find_map(|r| match r {
                RunRecord::Iteration { scores, chosen, .. } => Some((scores.clone(), *chosen)),
                _ => None,
            })
            .unwrap();
        assert_eq!(scores.iter().map(|s| s.errors).collect::<Vec<_>>(), [Some(3), Some(1), Some(1)]);
        assert_eq!(chosen, Some(1));
    }

    #[test]
    fn single_completion_matches_general_path() {
        let src = lib(&["fn a() {}", &marker("E0", "seed"), "fn b() {}"]);
        let outcome = |n: usize| {
            let p = Project::new(&src);
            let mut backend = FnBackend::new(move |req: &CompletionRequest, _| {
                vec![answer_replacing_error_line(&req.prompt_text, &["fn fixed() {}"], PromptVariant::P4).unwrap(); n]
            });
            let mut ws = p.ws();
            let mut checker = MarkerChecker::new();
            let cfg = RunConfig {
                n_completions: n,
                ..RunConfig::default()
            };
            let mut session = Session::new(&mut ws, &mut checker, &mut backend, &cfg);
            let seed = session.check().unwrap().remove(0);
            let built = session.build_prompt(&seed).unwrap();
            let completions = session.request(&built.prompt).unwrap();
            let ranking = session.best_completion(&built.prompt, &completions).unwrap();
            let chosen = ranking.chosen.unwrap();
            (chosen.index, chosen.plan.edits, chosen.diagnostics, p.source())
        };
        assert_eq!(outcome(1), outcome(3));
    }

    #[test]
    fn single_loop_logs_steps_only() {
        let p = Project::new(&lib(&[&marker("E1", "one"), &marker("E2", "two"), &marker("E3", "three")]));
        let mut backend = FnBackend::new(fixer(&["// fine"]));
        let cfg = RunConfig {
            grouping_enabled: false,
            ..RunConfig::default()
        };
        let (report, log) = run(&p, &mut backend, &cfg);
        assert_eq!((report.initial_errors, report.fixed), (3, 3));
        assert!(log.iter().all(|r| !matches!(r, RunRecord::GroupStart { .. } | RunRecord::GroupEnd { .. } | RunRecord::Iteration { .. })));
        assert_eq!(log.iter().filter(|r| r.kind() == "step").count(), 3);
    }

    #[test]
    fn test_command_runs_after_a_clean_check() {
        let p = Project::new(&lib(&[&marker("E1", "one")]));
        let cfg = RunConfig {
            test_command: Some("exit 3".into()),
            ..RunConfig::default()
        };
        let mut backend = FnBackend::new(fixer(&["// fine"]));
        let (report, log) = run(&p, &mut backend, &cfg);
        assert_eq!(report.test_passed, Some(false));
        assert_eq!(report.outcomes[0].failure, Some(FailureClass::Test));
        assert!(log.iter().any(|r| matches!(r, RunRecord::TestRun { exit_code: Some(3), .. })));
    }

    #[test]
    fn emit_patch_writes_diffs() {
        let p = Project::new(&lib(&["fn a() {}", &marker("E1", "one")]));
        let out = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            emit_patch_dir: Some(out.path().to_path_buf()),
            ..RunConfig::default()
        };
        let mut backend = FnBackend::new(fixer(&["// fine"]));
        run(&p, &mut backend, &cfg);
        let first = fs::read_to_string(out.path().join("001.patch")).unwrap();
        assert!(first.contains("+// fine"));
        assert_eq!(first, fs::read_to_string(out.path().join("final.patch")).unwrap());
    }

    #[test]
    fn classification_rules() {
        let untouched = KeyTrack::default();
        let tried = KeyTrack {
            attempted: true,
            ..KeyTrack::default()
        };
        let applied = KeyTrack {
            attempted: true,
            applied: true,
            ..KeyTrack::default()
        };
        assert_eq!(classify_failure(&tried, true, None), Some(FailureClass::Format));
        assert_eq!(classify_failure(&applied, true, None), Some(FailureClass::Build));
        assert_eq!(classify_failure(&untouched, true, None), Some(FailureClass::Build));
        assert_eq!(classify_failure(&applied, false, Some(false)), Some(FailureClass::Test));
        assert_eq!(classify_failure(&applied, false, Some(true)), None);
        assert_eq!(classify_failure(&applied, false, None), None);
    }

    #[test]
    fn config_is_checked() {
        let p = Project::new("fn main() {}\n");
        let mut ws = p.ws();
        let mut checker = MarkerChecker::new();
        let mut backend = ScriptedBackend::default();
        let cfg = RunConfig {
            n_completions: 6,
            ..RunConfig::default()
        };
        assert!(matches!(
            Session::new(&mut ws, &mut checker, &mut backend, &cfg).run(),
            Err(RunError::Config(_))
        ));
        let _ = Path::new("");
    }
}
