//! Instruction-dataset curation: teacher prompts, reply parsing, filtering,
//! datapoint assembly and the train/validation split.
//!
//! The network-facing driver lives in the companion crate; everything here
//! is deterministic data handling.

mod pairs;
mod templates;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pairs::{parse_pairs, ParsedPairs, RawPair};
pub use templates::{render_teacher_messages, ChatMessage, Role, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurateError {
    #[error("unknown teacher template `{0}`")]
    UnknownTemplate(String),
    #[error("preprompt is empty")]
    EmptyPreprompt,
    #[error("no parseable list of dictionaries in teacher reply")]
    NoPairList { raw: String },
    #[error("pair collides with the datapoint markers")]
    MarkerCollision,
    #[error("text is not a datapoint: {0}")]
    NotADatapoint(String),
    #[error("dataset needs at least 2 datapoints to split, got {0}")]
    TooFewDatapoints(usize),
    #[error("invalid curation config: {0}")]
    Config(String),
}

pub const AREA_MARKER: &str = "Area : ";
pub const QUESTION_MARKER: &str = " Question : ";
pub const ANSWER_MARKER: &str = " Answer : ";

/// A prompt record as produced by the `preprompts` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepromptRecord {
    pub preprompt_id: String,
    pub lat: f64,
    pub lon: f64,
    pub preprompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub prompt: String,
    pub answer: String,
    pub source_preprompt_id: String,
    pub teacher_batch: String,
}

impl QAPair {
    pub fn from_raw(raw: RawPair, preprompt_id: &str, batch: &str) -> Self {
        Self {
            prompt: raw.prompt,
            answer: raw.answer,
            source_preprompt_id: preprompt_id.to_string(),
            teacher_batch: batch.to_string(),
        }
    }
}

/// One training record: `Area : {preprompt} Question : {prompt} Answer : {answer}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Datapoint {
    pub text: String,
    pub preprompt_id: String,
    pub pair_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherEndpoint {
    /// Full chat-completions URL.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
}

impl Default for TeacherEndpoint {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000/v1/chat/completions".to_string(),
            model: "teacher".to_string(),
            token_env: "CARTOPROMPT_TEACHER_TOKEN".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationJob {
    pub pairs_per_request: usize,
    pub teacher: TeacherEndpoint,
    pub temperature: f64,
    pub max_retries: u32,
    pub requests_per_minute: f64,
    /// First backoff delay; doubles on every retry.
    pub backoff_base_ms: u64,
    pub refusal_filters: Vec<String>,
    /// Requests issued per preprompt, in order.
    pub templates: Vec<TemplateId>,
}

impl Default for CurationJob {
    fn default() -> Self {
        Self {
            pairs_per_request: 50,
            teacher: TeacherEndpoint::default(),
            temperature: 1.0,
            max_retries: 3,
            requests_per_minute: 20.0,
            backoff_base_ms: 1000,
            refusal_filters: vec![
                "does not provide sufficient".to_string(),
                "not enough information".to_string(),
            ],
            templates: vec![TemplateId::Instruction],
        }
    }
}

impl CurationJob {
    pub fn validate(&self) -> Result<(), CurateError> {
        if self.pairs_per_request == 0 {
            return Err(CurateError::Config("pairs_per_request must be ≥ 1".into()));
        }
        if !(self.requests_per_minute > 0.0) {
            return Err(CurateError::Config("requests_per_minute must be > 0".into()));
        }
        if self.templates.is_empty() {
            return Err(CurateError::Config("at least one template is required".into()));
        }
        Ok(())
    }
}

/// Why a pair was removed by [`PairFilter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Refusal,
    Duplicate,
    MarkerCollision,
}

/// Stateful filter: refusal substrings, marker collisions and exact
/// duplicates across every batch seen so far.
///
/// Duplicates are keyed by `(preprompt id, prompt, answer)`: a generic
/// pair legitimately recurs for different areas.
#[derive(Debug, Clone, Default)]
pub struct PairFilter {
    refusals: Vec<String>,
    seen: BTreeSet<(String, String, String)>,
}

impl PairFilter {
    pub fn new(job: &CurationJob) -> Self {
        Self {
            refusals: job.refusal_filters.iter().map(|s| s.to_lowercase()).collect(),
            seen: BTreeSet::new(),
        }
    }

    pub fn check(&mut self, pair: &QAPair) -> Result<(), DropReason> {
        let answer = pair.answer.to_lowercase();
        if self.refusals.iter().any(|r| answer.contains(r.as_str())) {
            return Err(DropReason::Refusal);
        }
        if !marker_safe(&pair.prompt, &pair.answer) {
            return Err(DropReason::MarkerCollision);
        }
        let key = (
            pair.source_preprompt_id.clone(),
            pair.prompt.clone(),
            pair.answer.clone(),
        );
        if !self.seen.insert(key) {
            return Err(DropReason::Duplicate);
        }
        Ok(())
    }

    /// Keeps the surviving pairs in order.
    pub fn filter(&mut self, pairs: Vec<QAPair>) -> Vec<QAPair> {
        pairs.into_iter().filter(|p| self.check(p).is_ok()).collect()
    }
}

/// One-shot filter over a complete pair list.
pub fn filter_pairs(pairs: Vec<QAPair>, job: &CurationJob) -> Vec<QAPair> {
    PairFilter::new(job).filter(pairs)
}

fn marker_safe(prompt: &str, answer: &str) -> bool {
    let markers = [AREA_MARKER, QUESTION_MARKER, ANSWER_MARKER].map(str::trim);
    if [prompt, answer]
        .iter()
        .any(|field| markers.iter().any(|m| field.contains(m)))
    {
        return false;
    }
    let probe = "P.";
    let text = join_datapoint(probe, prompt, answer);
    matches!(split_datapoint(&text), Ok((p, q, a)) if p == probe && q == prompt && a == answer)
}

fn join_datapoint(preprompt: &str, prompt: &str, answer: &str) -> String {
    let mut s = String::with_capacity(
        AREA_MARKER.len()
            + preprompt.len()
            + QUESTION_MARKER.len()
            + prompt.len()
            + ANSWER_MARKER.len()
            + answer.len(),
    );
    s.push_str(AREA_MARKER);
    s.push_str(preprompt);
    s.push_str(QUESTION_MARKER);
    s.push_str(prompt);
    s.push_str(ANSWER_MARKER);
    s.push_str(answer);
    s
}

/// Builds the training string; fails if the pieces would not split back
/// unambiguously.
pub fn assemble_datapoint(
    preprompt: &str,
    preprompt_id: &str,
    pair_index: usize,
    pair: &QAPair,
) -> Result<Datapoint, CurateError> {
    let text = join_datapoint(preprompt, &pair.prompt, &pair.answer);
    match split_datapoint(&text) {
        Ok((p, q, a)) if p == preprompt && q == pair.prompt && a == pair.answer => Ok(Datapoint {
            text,
            preprompt_id: preprompt_id.to_string(),
            pair_index,
        }),
        _ => Err(CurateError::MarkerCollision),
    }
}

/// Splits `Area : P Question : Q Answer : A` into `(P, Q, A)`.
pub fn split_datapoint(text: &str) -> Result<(&str, &str, &str), CurateError> {
    let bad = || CurateError::NotADatapoint(text.chars().take(80).collect());
    let body = text.strip_prefix(AREA_MARKER).ok_or_else(bad)?;
    let (pre, rest) = body.split_once(QUESTION_MARKER).ok_or_else(bad)?;
    let (q, a) = rest.split_once(ANSWER_MARKER).ok_or_else(bad)?;
    Ok((pre, q, a))
}

/// Number of validation items for `n` datapoints: `max(1, round((1−f)·n))`,
/// capped so training keeps at least one item.
pub fn validation_size(n: usize, train_fraction: f64) -> usize {
    let v = libm::round((1.0 - train_fraction) * n as f64).max(1.0) as usize;
    v.min(n.saturating_sub(1))
}

/// Deterministic shuffled split. Both partitions keep the input order.
pub fn split_dataset<T>(
    items: Vec<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), CurateError> {
    let n = items.len();
    if n < 2 {
        return Err(CurateError::TooFewDatapoints(n));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(CurateError::Config(alloc::format!(
            "train fraction {train_fraction} outside (0, 1]"
        )));
    }
    let v = validation_size(n, train_fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_val = vec![false; n];
    for &i in &order[..v] {
        in_val[i] = true;
    }
    let mut train = Vec::with_capacity(n - v);
    let mut val = Vec::with_capacity(v);
    for (i, item) in items.into_iter().enumerate() {
        if in_val[i] {
            val.push(item);
        } else {
            train.push(item);
        }
    }
    Ok((train, val))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepromptStatus {
    Ok,
    Failed,
}

/// Per-preprompt bookkeeping. `parsed == filtered + kept` always holds,
/// where `filtered` counts pairs removed by the filter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepromptReport {
    pub preprompt_id: String,
    pub status: PrepromptStatus,
    pub requests: u32,
    pub retries: u32,
    pub parsed: usize,
    pub skipped_entries: usize,
    pub parse_errors: usize,
    pub filtered: usize,
    pub kept: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PrepromptReport {
    pub fn new(preprompt_id: &str) -> Self {
        Self {
            preprompt_id: preprompt_id.to_string(),
            status: PrepromptStatus::Ok,
            requests: 0,
            retries: 0,
            parsed: 0,
            skipped_entries: 0,
            parse_errors: 0,
            filtered: 0,
            kept: 0,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub model: String,
    pub temperature: f64,
    pub pairs_per_request: usize,
    pub preprompts: Vec<PrepromptReport>,
}

impl CurationReport {
    pub fn new(job: &CurationJob) -> Self {
        Self {
            model: job.teacher.model.clone(),
            temperature: job.temperature,
            pairs_per_request: job.pairs_per_request,
            preprompts: Vec::new(),
        }
    }

    pub fn total_kept(&self) -> usize {
        self.preprompts.iter().map(|p| p.kept).sum()
    }

    pub fn completed_ids(&self) -> BTreeSet<&str> {
        self.preprompts
            .iter()
            .filter(|p| p.status == PrepromptStatus::Ok)
            .map(|p| p.preprompt_id.as_str())
            .collect()
    }
}
