//! One annotation session: its configuration, the labeled/pool/test split,
//! the pending batch and the append-only event log that rebuilds them.
//!
//! Every change is written to `events.jsonl` before it is applied in
//! memory, so reopening a session directory replays to the same state.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ndsal::acquisition::{select_unlabeled, Decay, MixingState, SelectOptions, Strategy, DEFAULT_ALPHA_DECAY};
use ndsal::classifier::{predict, train, DEFAULT_MC_PASSES};
use ndsal::harness::metrics::macro_f1;
use ndsal::harness::run::cycle_seed;
use ndsal::harness::PoolState;
use ndsal::iostore::{append_jsonl, checksum, read_embedding_file, read_jsonl, read_labels};
use ndsal::numerics::{dot, FeatureMatrix};
use ndsal::SampleId;

use crate::{Result, ServiceError};

pub const RECORD_FILE: &str = "session.json";
pub const EVENTS_FILE: &str = "events.jsonl";

/// Labeled neighbours shown when a sample has no text.
const CONTEXT_NEIGHBORS: usize = 3;

fn default_strategy() -> Strategy {
    Strategy::Nds
}

fn default_draw_size() -> usize {
    20
}

fn default_budget() -> usize {
    500
}

fn default_mc_passes() -> usize {
    DEFAULT_MC_PASSES
}

fn default_alpha_decay() -> f64 {
    DEFAULT_ALPHA_DECAY
}

/// Body of `POST /session`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub embeddings: PathBuf,
    /// `id,label` file; labeled rows form the initial set and `-1` rows the
    /// pool. Ids the file does not list take no part.
    pub labels: PathBuf,
    /// Held-out labeled ids, never offered for annotation; enables F1.
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
    /// One line of display text per sample, in id order.
    #[serde(default)]
    pub texts: Option<PathBuf>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default = "default_draw_size")]
    pub draw_size: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    pub classes: usize,
    #[serde(default)]
    pub class_names: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mc_passes")]
    pub mc_passes: usize,
    #[serde(default = "default_alpha_decay")]
    pub alpha_decay: f64,
    #[serde(default)]
    pub alpha_schedule: Decay,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ServiceError::BadRequest(m));
        if self.classes < 2 {
            return bad(format!("classes must be at least 2, got {}", self.classes));
        }
        if self.draw_size == 0 {
            return bad("draw_size must be positive".into());
        }
        if self.mc_passes == 0 {
            return bad("mc_passes must be positive".into());
        }
        if !self.class_names.is_empty() && self.class_names.len() != self.classes {
            return bad(format!("{} class names for {} classes", self.class_names.len(), self.classes));
        }
        if !(0.0..=1.0).contains(&self.alpha_decay) {
            return bad(format!("alpha_decay must lie in [0, 1], got {}", self.alpha_decay));
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        if self.class_names.is_empty() {
            (0..self.classes).map(|c| c.to_string()).collect()
        } else {
            self.class_names.clone()
        }
    }

    pub fn mixing(&self, cycle: usize) -> MixingState {
        MixingState::new(self.alpha_decay, self.alpha_schedule, cycle)
    }

    /// Selection settings for `cycle`; the same engine and defaults as
    /// `ndsal select`.
    pub fn options(&self, cycle: usize, draw_size: usize) -> SelectOptions {
        SelectOptions {
            mc_passes: self.mc_passes,
            mixing: self.mixing(cycle),
            ..SelectOptions::new(self.strategy, self.classes, draw_size)
        }
    }

    /// Mixing weight at `cycle`, for NDS+ only.
    pub fn alpha(&self, cycle: usize) -> Option<f64> {
        (self.strategy == Strategy::NdsPlus).then(|| self.mixing(cycle).alpha())
    }
}

/// Contents of `session.json`: the starting point the event log replays from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub config: SessionConfig,
    /// Payload checksum of the embedding file at creation.
    pub embedding_checksum: u64,
    pub initial: PoolState,
    pub initial_f1: Option<f64>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    BatchCreated {
        batch_id: u64,
        cycle: usize,
        ids: Vec<SampleId>,
        alpha: Option<f64>,
        cutoff_multipliers: Vec<f64>,
        at: u64,
    },
    Labeled { batch_id: u64, id: SampleId, label: usize, at: u64 },
    Skipped { batch_id: u64, id: SampleId, at: u64 },
    /// The batch is resolved; `cycle` is the new cycle number.
    CycleCompleted { batch_id: u64, cycle: usize, f1: Option<f64>, at: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Pending,
    Labeled,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub id: u64,
    pub cycle: usize,
    pub ids: Vec<SampleId>,
    pub status: BTreeMap<SampleId, SampleStatus>,
    pub texts: BTreeMap<SampleId, String>,
}

impl Batch {
    pub fn is_resolved(&self) -> bool {
        self.status.values().all(|s| *s != SampleStatus::Pending)
    }

    pub fn pending(&self) -> usize {
        self.status.values().filter(|s| **s == SampleStatus::Pending).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleView {
    pub id: SampleId,
    pub text: String,
    pub status: SampleStatus,
}

/// Response of `GET /session/{id}/batch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchView {
    pub batch_id: Option<u64>,
    pub cycle: usize,
    pub samples: Vec<SampleView>,
    pub class_names: Vec<String>,
    /// Budget reached or pool exhausted; no further batches.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub labeled: usize,
    pub budget: usize,
    /// Macro-F1 on the test labels after each cycle; absent without them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_history: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_history: Option<Vec<f64>>,
    pub cycle: usize,
    pub cutoff_multipliers: Vec<f64>,
    pub pending: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub error: String,
}

/// Response of `POST /session/{id}/labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: Vec<SampleId>,
    pub rejected: Vec<Rejection>,
    /// The new cycle number when this submission completed the batch.
    pub completed_cycle: Option<usize>,
    pub progress: Progress,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn replay_error(line: usize, msg: &str) -> ServiceError {
    ServiceError::Corrupt(format!("event {line}: {msg}"))
}

fn read_texts(path: &Path, n: usize) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    if lines.len() != n {
        return Err(ServiceError::BadRequest(format!(
            "{} has {} lines for {n} samples",
            path.display(),
            lines.len()
        )));
    }
    Ok(lines)
}

pub struct Session {
    dir: PathBuf,
    record: SessionRecord,
    features: FeatureMatrix,
    texts: Option<Vec<String>>,
    state: PoolState,
    batch: Option<Batch>,
    f1_history: Vec<f64>,
    cutoff_multipliers: Vec<f64>,
    batches_created: u64,
}

impl Session {
    /// Load the files named by `config` and write a new session into `dir`.
    pub fn create(dir: &Path, id: String, config: SessionConfig) -> Result<Session> {
        config.validate()?;
        let file = read_embedding_file(&config.embeddings)?;
        let features = FeatureMatrix::with_sequential_ids(file.to_matrix()?)?;
        let k = config.classes;
        let labels = read_labels(&config.labels, k)?;
        labels.aligned(features.ids())?;
        let labeled: BTreeMap<SampleId, usize> = labels.labeled().collect();
        let mut test = BTreeMap::new();
        if let Some(path) = &config.test_labels {
            let file = read_labels(path, k)?;
            file.aligned(features.ids())?;
            let listed: BTreeSet<SampleId> = labels.entries.iter().map(|(id, _)| *id).collect();
            for (id, label) in &file.entries {
                let label = label.ok_or_else(|| {
                    ServiceError::BadRequest(format!("test label file leaves sample {id} unlabeled"))
                })?;
                if listed.contains(id) {
                    return Err(ServiceError::BadRequest(format!("sample {id} is in both label files")));
                }
                test.insert(*id, label);
            }
        }
        let pool: BTreeSet<SampleId> = labels.entries.iter().filter(|(_, l)| l.is_none()).map(|(id, _)| *id).collect();
        let state = PoolState { labeled, pool, test, cycle: 0 };
        state.check()?;
        let texts = config.texts.as_deref().map(|p| read_texts(p, features.n())).transpose()?;

        let record = SessionRecord {
            id,
            embedding_checksum: checksum(&file.payload()),
            initial: state.clone(),
            initial_f1: None,
            created_at: now_ms(),
            config,
        };
        let mut session = Session::from_parts(dir, record, features, texts);
        session.record.initial_f1 = session.evaluate(0)?;
        session.f1_history.extend(session.record.initial_f1);
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{RECORD_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&session.record)?)?;
        fs::rename(&tmp, dir.join(RECORD_FILE))?;
        Ok(session)
    }

    /// Rebuild a session from its directory.
    pub fn open(dir: &Path) -> Result<Session> {
        let record: SessionRecord = serde_json::from_slice(&fs::read(dir.join(RECORD_FILE))?)?;
        let file = read_embedding_file(&record.config.embeddings)?;
        let sum = checksum(&file.payload());
        if sum != record.embedding_checksum {
            return Err(ServiceError::Corrupt(format!(
                "{} changed since the session was created (checksum {sum}, recorded {})",
                record.config.embeddings.display(),
                record.embedding_checksum
            )));
        }
        let features = FeatureMatrix::with_sequential_ids(file.to_matrix()?)?;
        let texts = record.config.texts.as_deref().map(|p| read_texts(p, features.n())).transpose()?;
        let mut session = Session::from_parts(dir, record, features, texts);
        session.f1_history.extend(session.record.initial_f1);
        for (i, event) in read_jsonl::<Event>(&session.events_path())?.iter().enumerate() {
            session.apply(event).map_err(|e| replay_error(i + 1, &e.to_string()))?;
        }
        // a crash between the last label and the completion record
        if session.batch.as_ref().is_some_and(Batch::is_resolved) {
            session.complete_cycle()?;
        }
        Ok(session)
    }

    fn from_parts(dir: &Path, record: SessionRecord, features: FeatureMatrix, texts: Option<Vec<String>>) -> Session {
        Session {
            dir: dir.to_path_buf(),
            state: record.initial.clone(),
            record,
            features,
            texts,
            batch: None,
            f1_history: Vec::new(),
            cutoff_multipliers: Vec::new(),
            batches_created: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &SessionConfig {
        &self.record.config
    }

    pub fn state(&self) -> &PoolState {
        &self.state
    }

    pub fn batch(&self) -> Option<&Batch> {
        self.batch.as_ref()
    }

    fn events_path(&self) -> PathBuf {
        self.dir.join(EVENTS_FILE)
    }

    /// Size of the next batch: `min(m, budget − labeled, pool)`.
    fn next_batch_size(&self) -> usize {
        let c = &self.record.config;
        c.draw_size.min(c.budget.saturating_sub(self.state.labeled.len())).min(self.state.pool.len())
    }

    pub fn is_complete(&self) -> bool {
        self.batch.is_none() && self.next_batch_size() == 0
    }

    /// Macro-F1 on the test labels of a model trained on the current
    /// labeled set, seeded as the selection at `cycle` would train it.
    fn evaluate(&self, cycle: usize) -> Result<Option<f64>> {
        if self.state.test.is_empty() {
            return Ok(None);
        }
        let c = &self.record.config;
        let ids: Vec<SampleId> = self.state.labeled.keys().copied().collect();
        if ids.is_empty() {
            return Ok(None);
        }
        let y: Vec<usize> = self.state.labeled.values().copied().collect();
        let config = c.options(cycle, c.draw_size).train_config(cycle_seed(c.seed, cycle));
        let model = train(&self.features.subset(&ids)?, &y, &config)?;
        let test_ids: Vec<SampleId> = self.state.test.keys().copied().collect();
        let truth: Vec<usize> = self.state.test.values().copied().collect();
        let predicted = predict(&model, &self.features.subset(&test_ids)?)?;
        Ok(Some(macro_f1(&predicted, &truth, c.classes)?))
    }

    fn record(&mut self, event: Event) -> Result<()> {
        append_jsonl(&self.events_path(), &event)?;
        self.apply(&event)
    }

    fn apply(&mut self, event: &Event) -> Result<()> {
        let mismatch = |m: &str| Err(ServiceError::Corrupt(m.to_string()));
        match event {
            Event::BatchCreated { batch_id, cycle, ids, cutoff_multipliers, .. } => {
                if self.batch.is_some() || *batch_id != self.batches_created || *cycle != self.state.cycle {
                    return mismatch("batch created out of order");
                }
                if let Some(id) = ids.iter().find(|id| !self.state.pool.contains(id)) {
                    return Err(ServiceError::Corrupt(format!("batch holds sample {id}, which is not in the pool")));
                }
                let texts = ids.iter().map(|id| (*id, self.display_text(*id))).collect();
                self.batch = Some(Batch {
                    id: *batch_id,
                    cycle: *cycle,
                    ids: ids.clone(),
                    status: ids.iter().map(|id| (*id, SampleStatus::Pending)).collect(),
                    texts,
                });
                self.batches_created += 1;
                self.cutoff_multipliers = cutoff_multipliers.clone();
            }
            Event::Labeled { batch_id, id, label, .. } => {
                self.resolve(*batch_id, *id, SampleStatus::Labeled)?;
                self.state.pool.remove(id);
                self.state.labeled.insert(*id, *label);
            }
            Event::Skipped { batch_id, id, .. } => self.resolve(*batch_id, *id, SampleStatus::Skipped)?,
            Event::CycleCompleted { batch_id, cycle, f1, .. } => {
                match &self.batch {
                    Some(b) if b.id == *batch_id && b.is_resolved() && *cycle == self.state.cycle + 1 => {}
                    _ => return mismatch("cycle completed before its batch"),
                }
                self.batch = None;
                self.state.cycle = *cycle;
                self.f1_history.extend(f1);
            }
        }
        Ok(())
    }

    fn resolve(&mut self, batch_id: u64, id: SampleId, to: SampleStatus) -> Result<()> {
        let status = self
            .batch
            .as_mut()
            .filter(|b| b.id == batch_id)
            .and_then(|b| b.status.get_mut(&id))
            .filter(|s| **s == SampleStatus::Pending)
            .ok_or_else(|| ServiceError::Corrupt(format!("sample {id} is not pending in batch {batch_id}")))?;
        *status = to;
        Ok(())
    }

    /// The sample's text, or else its id and nearest labeled neighbours.
    fn display_text(&self, id: SampleId) -> String {
        let row = id.0 as usize;
        if let Some(texts) = &self.texts {
            return texts[row].clone();
        }
        let x = self.features.row(row);
        let mut near: Vec<(f64, SampleId, usize)> = self
            .state
            .labeled
            .iter()
            .map(|(&other, &label)| {
                let y = self.features.row(other.0 as usize);
                let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                (dot(&diff, &diff).sqrt(), other, label)
            })
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let names = self.record.config.names();
        let context: Vec<String> = near
            .iter()
            .take(CONTEXT_NEIGHBORS)
            .map(|(d, other, label)| format!("{other} ({}, distance {d:.3})", names[*label]))
            .collect();
        if context.is_empty() {
            format!("sample {id}")
        } else {
            format!("sample {id}; nearest labeled: {}", context.join(", "))
        }
    }

    /// Create the next batch unless one is pending or the session is done.
    fn ensure_batch(&mut self) -> Result<()> {
        let size = self.next_batch_size();
        if self.batch.is_some() || size == 0 {
            return Ok(());
        }
        let c = &self.record.config;
        let cycle = self.state.cycle;
        let exclude: BTreeSet<SampleId> = self
            .features
            .ids()
            .iter()
            .filter(|id| !self.state.pool.contains(id) && !self.state.labeled.contains_key(id))
            .copied()
            .collect();
        let (selection, _) = select_unlabeled(
            &self.features,
            &self.state.labeled,
            &exclude,
            &c.options(cycle, size),
            None,
            cycle_seed(c.seed, cycle),
        )?;
        if let Some(report) = &selection.report {
            warn!("session {}: {report}", self.record.id);
        }
        self.record(Event::BatchCreated {
            batch_id: self.batches_created,
            cycle,
            ids: selection.selected,
            alpha: c.alpha(cycle),
            cutoff_multipliers: selection.score.cutoff_multipliers(),
            at: now_ms(),
        })
    }

    fn complete_cycle(&mut self) -> Result<()> {
        let Some(batch) = &self.batch else { return Ok(()) };
        let batch_id = batch.id;
        let cycle = self.state.cycle + 1;
        let f1 = self.evaluate(cycle)?;
        self.record(Event::CycleCompleted { batch_id, cycle, f1, at: now_ms() })
    }

    pub fn current_batch(&mut self) -> Result<BatchView> {
        self.ensure_batch()?;
        let samples = match &self.batch {
            Some(b) => b
                .ids
                .iter()
                .map(|id| SampleView { id: *id, text: b.texts[id].clone(), status: b.status[id] })
                .collect(),
            None => Vec::new(),
        };
        Ok(BatchView {
            batch_id: self.batch.as_ref().map(|b| b.id),
            cycle: self.state.cycle,
            samples,
            class_names: self.record.config.names(),
            complete: self.is_complete(),
        })
    }

    /// Apply `{id: class | "skip"}` entries one at a time; invalid entries
    /// are rejected individually. A resolved batch completes the cycle and
    /// the next batch is prepared.
    pub fn submit(&mut self, labels: &BTreeMap<String, Value>) -> Result<SubmitOutcome> {
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        let k = self.record.config.classes;
        for (key, value) in labels {
            let reject = |error: String| Rejection { id: key.clone(), error };
            let Ok(id) = key.parse::<SampleId>() else {
                rejected.push(reject("not a sample id".into()));
                continue;
            };
            let Some(batch) = &self.batch else {
                rejected.push(reject("no pending batch".into()));
                continue;
            };
            match batch.status.get(&id) {
                None => {
                    rejected.push(reject(format!("sample {id} is not in the pending batch")));
                    continue;
                }
                Some(SampleStatus::Pending) => {}
                Some(done) => {
                    let done = serde_json::to_value(done)?;
                    rejected.push(reject(format!("sample {id} is already {}", done.as_str().unwrap_or("resolved"))));
                    continue;
                }
            }
            let batch_id = batch.id;
            let event = match value {
                Value::String(s) if s == "skip" => Event::Skipped { batch_id, id, at: now_ms() },
                Value::Number(n) => match n.as_u64().filter(|&c| (c as usize) < k) {
                    Some(c) => Event::Labeled { batch_id, id, label: c as usize, at: now_ms() },
                    None => {
                        rejected.push(reject(format!("label {n} outside 0..{}", k - 1)));
                        continue;
                    }
                },
                other => {
                    rejected.push(reject(format!("expected a class index or \"skip\", found {other}")));
                    continue;
                }
            };
            self.record(event)?;
            accepted.push(id);
        }
        let mut completed_cycle = None;
        if self.batch.as_ref().is_some_and(Batch::is_resolved) {
            self.complete_cycle()?;
            completed_cycle = Some(self.state.cycle);
            self.ensure_batch()?;
        }
        Ok(SubmitOutcome { accepted, rejected, completed_cycle, progress: self.progress() })
    }

    pub fn progress(&self) -> Progress {
        let c = &self.record.config;
        let cycle = self.state.cycle;
        Progress {
            labeled: self.state.labeled.len(),
            budget: c.budget,
            f1_history: (!self.state.test.is_empty()).then(|| self.f1_history.clone()),
            alpha: c.alpha(cycle),
            alpha_history: (c.strategy == Strategy::NdsPlus)
                .then(|| (0..=cycle).map(|t| c.mixing(t).alpha()).collect()),
            cycle,
            cutoff_multipliers: self.cutoff_multipliers.clone(),
            pending: self.batch.as_ref().map_or(0, Batch::pending),
            complete: self.is_complete(),
        }
    }
}
