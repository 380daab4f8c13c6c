//! Completion backends: a chat-completion HTTP client, a replay store for
//! deterministic runs, and small in-process backends.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::prompting::prompt_digest;

pub const MAX_COMPLETIONS: usize = 5;
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            max_tokens: 800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt_text: String,
    pub n: usize,
    pub sampling: SamplingParams,
    pub model: String,
}

impl CompletionRequest {
    pub fn new(prompt_text: impl Into<String>, n: usize, model: impl Into<String>) -> Self {
        Self {
            prompt_text: prompt_text.into(),
            n,
            sampling: SamplingParams::default(),
            model: model.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinishState {
    #[default]
    Complete,
    Truncated,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub index: usize,
    pub text: String,
    pub finish_state: FinishState,
}

impl Completion {
    pub fn complete(index: usize, text: impl Into<String>) -> Self {
        Self {
            index,
            text: text.into(),
            finish_state: FinishState::Complete,
        }
    }

    fn failed(index: usize, why: &str) -> Self {
        Self {
            index,
            text: why.to_string(),
            finish_state: FinishState::BackendError,
        }
    }
}

/// Errors that stop a run. Transient HTTP trouble is not one of them: it
/// comes back as completions with [`FinishState::BackendError`].
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("replay store has no slot {seq} (nearest recorded: {nearest:?})")]
    MissingSlot { seq: u64, nearest: Vec<u64> },
    #[error("prompt for replay slot {seq} changed: recorded digest {recorded}, current {current}")]
    PromptDrift {
        seq: u64,
        recorded: String,
        current: String,
    },
    #[error("replay slot {seq} holds {available} completion(s), {requested} requested")]
    ShortSlot {
        seq: u64,
        available: usize,
        requested: usize,
    },
    #[error("replay store {path}: {source}")]
    Store { path: PathBuf, source: io::Error },
    #[error("replay manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("scripted backend ran out of responses at request {0}")]
    ScriptExhausted(u64),
    #[error("backend configuration: {0}")]
    Config(String),
}

pub trait CompletionBackend {
    /// Exactly `req.n` completions, in index order.
    fn complete(&mut self, req: &CompletionRequest) -> Result<Vec<Completion>, BackendError>;

    fn describe(&self) -> String;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&mut self, req: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        (**self).complete(req)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key_env: String,
    pub timeout: Duration,
    /// Total attempts per request, including the first.
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout: Duration::from_secs(120),
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Client for the common chat-completion endpoint shape. The prompt goes out
/// as a single user message.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Vec<(String, FinishState)>),
    Retry(String),
    Fail(String),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            api_key,
            agent,
        }
    }

    pub fn body(req: &CompletionRequest, n: usize) -> Value {
        let s = &req.sampling;
        json!({
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt_text}],
            "n": n,
            "temperature": s.temperature,
            "top_p": s.top_p,
            "frequency_penalty": s.frequency_penalty,
            "presence_penalty": s.presence_penalty,
            "max_tokens": s.max_tokens,
        })
    }

    fn attempt(&self, req: &CompletionRequest, n: usize) -> Attempt {
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match call.send_json(Self::body(req, n)) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("request failed: {e}")),
        };
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string();
        match status {
            200..=299 => {}
            429 | 500..=599 => return Attempt::Retry(format!("HTTP {status}")),
            _ => {
                let detail = body.unwrap_or_default();
                return Attempt::Fail(format!("HTTP {status}: {}", detail.chars().take(200).collect::<String>()));
            }
        }
        let parsed = body
            .map_err(|e| e.to_string())
            .and_then(|b| serde_json::from_str::<Value>(&b).map_err(|e| e.to_string()))
            .and_then(|v| parse_choices(&v));
        match parsed {
            Ok(choices) => Attempt::Done(choices),
            Err(e) => Attempt::Retry(format!("malformed response body: {e}")),
        }
    }
}

fn parse_choices(v: &Value) -> Result<Vec<(String, FinishState)>, String> {
    let choices = v
        .get("choices")
        .and_then(Value::as_array)
        .filter(|c| !c.is_empty())
        .ok_or("no `choices` array")?;
    choices
        .iter()
        .map(|c| {
            let text = c
                .pointer("/message/content")
                .or_else(|| c.get("text"))
                .and_then(Value::as_str)
                .ok_or("choice without text content")?;
            let finish = match c.get("finish_reason").and_then(Value::as_str) {
                Some("length") => FinishState::Truncated,
                _ => FinishState::Complete,
            };
            Ok((text.to_string(), finish))
        })
        .collect()
}

impl CompletionBackend for HttpBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        if self.api_key.is_none() && self.config.endpoint.starts_with("https://") {
            return Err(BackendError::Config(format!(
                "environment variable {} is not set",
                self.config.api_key_env
            )));
        }
        let mut got: Vec<(String, FinishState)> = Vec::new();
        let mut attempt = 0;
        let mut last_problem = String::new();
        // Some endpoints return fewer choices than asked for; keep asking
        // for the remainder within the same attempt budget.
        while got.len() < req.n && attempt < self.config.attempts.max(1) {
            if attempt > 0 {
                let delay = self.config.base_delay * 2u32.saturating_pow(attempt - 1);
                thread::sleep(delay);
            }
            attempt += 1;
            match self.attempt(req, req.n - got.len()) {
                Attempt::Done(choices) => {
                    let want = req.n - got.len();
                    got.extend(choices.into_iter().take(want));
                    attempt = 0;
                }
                Attempt::Retry(why) => {
                    log::warn!("completion attempt {attempt} failed: {why}");
                    last_problem = why;
                }
                Attempt::Fail(why) => {
                    log::warn!("completion request rejected: {why}");
                    last_problem = why;
                    break;
                }
            }
        }
        Ok((0..req.n)
            .map(|i| match got.get(i) {
                Some((text, finish)) => Completion {
                    index: i,
                    text: text.clone(),
                    finish_state: *finish,
                },
                None => Completion::failed(i, &last_problem),
            })
            .collect())
    }

    fn describe(&self) -> String {
        format!("http {}", self.config.endpoint)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub prompt_digest: String,
    pub completions: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub finish: Vec<FinishState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub slots: BTreeMap<u64, SlotEntry>,
}

/// Directory of recorded responses: `<seq>_<i>.txt` per completion,
/// `<seq>_prompt.txt` with the prompt that produced them, and
/// `manifest.json` mapping each sequence number to its prompt digest.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
    manifest: Manifest,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl ReplayStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|source| BackendError::Store {
            path: path.clone(),
            source,
        })?;
        let manifest = serde_json::from_str(&text).map_err(|source| BackendError::Manifest { path, source })?;
        Ok(Self { dir, manifest })
    }

    /// Opens an existing store or starts an empty one.
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        if dir.join(MANIFEST_FILE).exists() {
            return Self::open(dir);
        }
        fs::create_dir_all(&dir).map_err(|source| BackendError::Store {
            path: dir.clone(),
            source,
        })?;
        Ok(Self {
            dir,
            manifest: Manifest::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn slot(&self, seq: u64) -> Option<&SlotEntry> {
        self.manifest.slots.get(&seq)
    }

    pub fn read_prompt(&self, seq: u64) -> Option<String> {
        fs::read_to_string(self.dir.join(format!("{seq}_prompt.txt"))).ok()
    }

    pub fn read_completions(&self, seq: u64) -> Result<Vec<Completion>, BackendError> {
        let entry = self.slot(seq).ok_or_else(|| BackendError::MissingSlot {
            seq,
            nearest: self.nearest(seq),
        })?;
        (0..entry.completions)
            .map(|i| {
                let path = self.dir.join(format!("{seq}_{i}.txt"));
                let text = fs::read_to_string(&path).map_err(|source| BackendError::Store { path, source })?;
                Ok(Completion {
                    index: i,
                    text,
                    finish_state: entry.finish.get(i).copied().unwrap_or_default(),
                })
            })
            .collect()
    }

    pub fn record(&mut self, seq: u64, prompt: &str, completions: &[Completion]) -> Result<(), BackendError> {
        if self.manifest.slots.contains_key(&seq) {
            log::warn!("overwriting replay slot {seq} in {}", self.dir.display());
        }
        let write = |name: String, text: &str| {
            let path = self.dir.join(name);
            fs::write(&path, text).map_err(|source| BackendError::Store { path, source })
        };
        write(format!("{seq}_prompt.txt"), prompt)?;
        for c in completions {
            write(format!("{seq}_{}.txt", c.index), &c.text)?;
        }
        let finish: Vec<FinishState> = completions.iter().map(|c| c.finish_state).collect();
        self.manifest.slots.insert(
            seq,
            SlotEntry {
                prompt_digest: prompt_digest(prompt),
                completions: completions.len(),
                finish: if finish.iter().all(|f| *f == FinishState::Complete) {
                    Vec::new()
                } else {
                    finish
                },
            },
        );
        self.save()
    }

    fn save(&self) -> Result<(), BackendError> {
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|source| BackendError::Store { path, source })
    }

    fn nearest(&self, seq: u64) -> Vec<u64> {
        let mut keys: Vec<u64> = self.manifest.slots.keys().copied().collect();
        keys.sort_by_key(|k| (k.abs_diff(seq), *k));
        keys.truncate(3);
        keys.sort();
        keys
    }
}

/// Serves recorded completions in request order, refusing to continue if
/// a prompt differs from the one recorded for its slot.
pub struct ReplayBackend {
    store: ReplayStore,
    next_seq: u64,
}

impl ReplayBackend {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        Ok(Self {
            store: ReplayStore::open(dir)?,
            next_seq: 0,
        })
    }

    pub fn requests_served(&self) -> u64 {
        self.next_seq
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        let seq = self.next_seq;
        let entry = self.store.slot(seq).ok_or_else(|| BackendError::MissingSlot {
            seq,
            nearest: self.store.nearest(seq),
        })?;
        let current = prompt_digest(&req.prompt_text);
        if entry.prompt_digest != current {
            return Err(BackendError::PromptDrift {
                seq,
                recorded: entry.prompt_digest.clone(),
                current,
            });
        }
        if entry.completions < req.n {
            return Err(BackendError::ShortSlot {
                seq,
                available: entry.completions,
                requested: req.n,
            });
        }
        let mut out = self.store.read_completions(seq)?;
        out.truncate(req.n);
        self.next_seq += 1;
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("replay {}", self.store.dir().display())
    }
}

/// Passes requests to `inner` and writes every answer into a replay store.
pub struct RecordingBackend<B> {
    inner: B,
    store: ReplayStore,
    next_seq: u64,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, store: ReplayStore) -> Self {
        Self {
            inner,
            store,
            next_seq: 0,
        }
    }

    pub fn into_store(self) -> ReplayStore {
        self.store
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&mut self, req: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        let out = self.inner.complete(req)?;
        self.store.record(self.next_seq, &req.prompt_text, &out)?;
        self.next_seq += 1;
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("recording {} into {}", self.inner.describe(), self.store.dir().display())
    }
}

/// Answers requests from a fixed queue of responses, ignoring the prompt.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    queue: VecDeque<Vec<String>>,
    served: u64,
}

impl ScriptedBackend {
    pub fn new<I, R, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: responses
                .into_iter()
                .map(|r| r.into_iter().map(Into::into).collect())
                .collect(),
            served: 0,
        }
    }

    /// The responses of a store, in slot order, without digest checks.
    pub fn from_store(store: &ReplayStore) -> Result<Self, BackendError> {
        let mut queue = VecDeque::new();
        for &seq in store.manifest().slots.keys() {
            queue.push_back(store.read_completions(seq)?.into_iter().map(|c| c.text).collect());
        }
        Ok(Self { queue, served: 0 })
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        let texts = self.queue.pop_front().ok_or(BackendError::ScriptExhausted(self.served))?;
        self.served += 1;
        Ok((0..req.n)
            .map(|i| match texts.get(i) {
                Some(t) => Completion::complete(i, t.clone()),
                None => Completion::failed(i, "no scripted response"),
            })
            .collect())
    }

    fn describe(&self) -> String {
        "scripted".into()
    }
}

/// Backend computed by a closure of (request, request number).
pub struct FnBackend<F> {
    f: F,
    calls: u64,
}

impl<F> FnBackend<F>
where
    F: FnMut(&CompletionRequest, u64) -> Vec<String>,
{
    pub fn new(f: F) -> Self {
        Self { f, calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

impl<F> CompletionBackend for FnBackend<F>
where
    F: FnMut(&CompletionRequest, u64) -> Vec<String>,
{
    fn complete(&mut self, req: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        let texts = (self.f)(req, self.calls);
        self.calls += 1;
        Ok((0..req.n)
            .map(|i| match texts.get(i) {
                Some(t) => Completion::complete(i, t.clone()),
                None => Completion::failed(i, "no response"),
            })
            .collect())
    }

    fn describe(&self) -> String {
        "closure".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn defaults_match_configuration() {
        let r = CompletionRequest::new("p", 1, "m");
        assert_eq!(r.sampling.temperature, 0.2);
        assert_eq!(r.sampling.top_p, 1.0);
        assert_eq!(r.sampling.frequency_penalty, 0.0);
        assert_eq!(r.sampling.presence_penalty, 0.0);
        assert_eq!(r.sampling.max_tokens, 800);
        let body = HttpBackend::body(&r, 3);
        assert_eq!(body["n"], 3);
        assert_eq!(body["temperature"], 0.2);
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["role"], "user");
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ReplayStore::create(dir.path()).unwrap();
        let answers: Vec<_> = (0..3).map(|i| Completion::complete(i, format!("answer {i}"))).collect();
        store.record(0, "prompt one", &answers[..1]).unwrap();
        store.record(1, "prompt two", &answers).unwrap();

        let mut replay = ReplayBackend::open(dir.path()).unwrap();
        let got = replay.complete(&CompletionRequest::new("prompt one", 1, "m")).unwrap();
        assert_eq!(got, answers[..1]);
        let got = replay.complete(&CompletionRequest::new("prompt two", 3, "m")).unwrap();
        assert_eq!(got, answers);
        match replay.complete(&CompletionRequest::new("prompt three", 1, "m")) {
            Err(BackendError::MissingSlot { seq: 2, nearest }) => assert_eq!(nearest, [0, 1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn drift_and_short_slots_are_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ReplayStore::create(dir.path()).unwrap();
        store.record(0, "prompt", &[Completion::complete(0, "a")]).unwrap();
        let mut replay = ReplayBackend::open(dir.path()).unwrap();
        assert!(matches!(
            replay.complete(&CompletionRequest::new("prompt, edited", 1, "m")),
            Err(BackendError::PromptDrift { seq: 0, .. })
        ));
        let mut replay = ReplayBackend::open(dir.path()).unwrap();
        assert!(matches!(
            replay.complete(&CompletionRequest::new("prompt", 2, "m")),
            Err(BackendError::ShortSlot { .. })
        ));
    }

    #[test]
    fn recording_wraps_another_backend() {
        let dir = tempfile::tempdir().unwrap();
        let inner = ScriptedBackend::new([vec!["x", "y"]]);
        let mut rec = RecordingBackend::new(inner, ReplayStore::create(dir.path()).unwrap());
        let got = rec.complete(&CompletionRequest::new("p", 2, "m")).unwrap();
        assert_eq!(got.len(), 2);
        assert!(rec.complete(&CompletionRequest::new("p", 1, "m")).is_err());
        let store = rec.into_store();
        assert_eq!(store.slot(0).unwrap().prompt_digest, prompt_digest("p"));
        assert_eq!(std::fs::read_to_string(dir.path().join("0_1.txt")).unwrap(), "y");
        assert_eq!(store.read_prompt(0).as_deref(), Some("p"));
        let mut again = ScriptedBackend::from_store(&ReplayStore::open(dir.path()).unwrap()).unwrap();
        assert_eq!(again.complete(&CompletionRequest::new("other", 1, "m")).unwrap()[0].text, "x");
    }

    /// Serves `replies` (status, body) to successive connections.
    fn serve(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in replies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    fn http(url: String) -> HttpBackend {
        HttpBackend::new(HttpConfig {
            endpoint: url,
            api_key_env: "FIXLOOP_TEST_UNSET_KEY".into(),
            timeout: Duration::from_secs(5),
            attempts: 3,
            base_delay: Duration::from_millis(1),
        })
    }

    #[test]
    fn http_success_and_truncation() {
        let body = r#"{"choices":[{"index":0,"message":{"role":"assistant","content":"one"},"finish_reason":"stop"},{"index":1,"message":{"role":"assistant","content":"two"},"finish_reason":"length"}]}"#;
        let (url, server) = serve(vec![(200, body.into())]);
        let got = http(url).complete(&CompletionRequest::new("hello", 2, "gpt")).unwrap();
        assert_eq!(got[0], Completion::complete(0, "one"));
        assert_eq!(got[1].finish_state, FinishState::Truncated);
        let sent: Value = serde_json::from_str(&server.join().unwrap()[0]).unwrap();
        assert_eq!(sent["model"], "gpt");
        assert_eq!(sent["messages"][0]["content"], "hello");
        assert_eq!(sent["max_tokens"], 800);
    }

    #[test]
    fn malformed_body_is_retried_then_reported() {
        let (url, server) = serve(vec![(200, "{not json".into()), (503, "{}".into()), (200, r#"{"choices":[]}"#.into())]);
        let got = http(url).complete(&CompletionRequest::new("hello", 2, "gpt")).unwrap();
        assert_eq!(got.len(), 2);
        assert!(got.iter().all(|c| c.finish_state == FinishState::BackendError));
        assert_eq!(server.join().unwrap().len(), 3);
    }

    #[test]
    fn retry_recovers_and_client_errors_stop() {
        let ok = r#"{"choices":[{"message":{"content":"fine"}}]}"#;
        let (url, server) = serve(vec![(500, "{}".into()), (200, ok.into())]);
        let got = http(url).complete(&CompletionRequest::new("hello", 1, "gpt")).unwrap();
        assert_eq!(got[0].text, "fine");
        server.join().unwrap();

        let (url, server) = serve(vec![(400, r#"{"error":"bad"}"#.into())]);
        let got = http(url).complete(&CompletionRequest::new("hello", 1, "gpt")).unwrap();
        assert_eq!(got[0].finish_state, FinishState::BackendError);
        assert_eq!(server.join().unwrap().len(), 1);
    }
}
