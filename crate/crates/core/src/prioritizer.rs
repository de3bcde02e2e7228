//! Call priority `P = w_S·S + w_F·F + w_D·D` and the dispatcher queue.
//!
//! `S` is the raw severity score, `F` measures how many open calls look like
//! the same incident and `D` rescales the emotion level to `[0, 1]`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::triage::{check_simplex, Severity, SeverityAssessment};

/// Calls within this window of each other may count as one incident.
pub const RELATED_WINDOW_MS: u64 = 10 * 60 * 1000;
/// Shared signature terms needed for two calls to be related.
pub const RELATED_MIN_SHARED: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueueError {
    #[error("no waiting calls")]
    EmptyQueue,
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("session {session_id}: cannot go from {from} to {to}")]
    IllegalTransition { session_id: String, from: CallStatus, to: CallStatus },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorityWeights {
    pub w_s: f64,
    pub w_f: f64,
    pub w_d: f64,
}

impl Default for PriorityWeights {
    fn default() -> Self {
        Self { w_s: 0.6, w_f: 0.2, w_d: 0.2 }
    }
}

impl PriorityWeights {
    pub fn validate(&self) -> Result<(), QueueError> {
        check_simplex("priority", &[self.w_s, self.w_f, self.w_d]).map_err(QueueError::InvalidWeights)
    }
}

pub fn priority_score(s: f64, f: f64, d: f64, w: &PriorityWeights) -> f64 {
    w.w_s * s + w.w_f * f + w.w_d * d
}

/// `(E − 1) / 3`: Mild 0, Moderate 1/3, Severe 1.
pub fn distress_score(assessment: &SeverityAssessment) -> f64 {
    (assessment.features.emotion.value() - 1.0) / 3.0
}

/// `min(1, (n_related − 1) / 4)`, where `n_related` counts the call itself.
pub fn frequency_from_count(n_related: usize) -> f64 {
    (n_related.saturating_sub(1) as f64 / 4.0).min(1.0)
}

/// What a call is about: matched keywords plus its intent label.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IncidentSignature {
    pub terms: BTreeSet<String>,
    pub at_ms: u64,
}

impl IncidentSignature {
    pub fn new(terms: impl IntoIterator<Item = String>, at_ms: u64) -> Self {
        Self { terms: terms.into_iter().collect(), at_ms }
    }

    pub fn related(&self, other: &IncidentSignature) -> bool {
        self.at_ms.abs_diff(other.at_ms) <= RELATED_WINDOW_MS
            && self.terms.intersection(&other.terms).count() >= RELATED_MIN_SHARED
    }
}

/// Frequency score of `session` against the other open calls.
pub fn frequency_score<'a>(session: &IncidentSignature, open: impl IntoIterator<Item = &'a IncidentSignature>) -> f64 {
    frequency_from_count(1 + open.into_iter().filter(|o| session.related(o)).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Waiting,
    Claimed,
    Resolved,
}

impl std::fmt::Display for CallStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CallStatus::Waiting => "waiting",
            CallStatus::Claimed => "claimed",
            CallStatus::Resolved => "resolved",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityEntry {
    pub session_id: String,
    pub severity_score: f64,
    pub severity_level: Severity,
    pub frequency_score: f64,
    pub distress_score: f64,
    pub priority: f64,
    pub enqueued_at: u64,
    pub status: CallStatus,
}

/// Queue order: priority descending, then earlier arrival, then session id.
pub fn queue_order(a: &PriorityEntry, b: &PriorityEntry) -> Ordering {
    b.priority
        .total_cmp(&a.priority)
        .then(a.enqueued_at.cmp(&b.enqueued_at))
        .then_with(|| a.session_id.cmp(&b.session_id))
}

/// Fresh inputs for one call from its latest assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityUpdate {
    pub session_id: String,
    pub severity_score: f64,
    pub severity_level: Severity,
    pub distress_score: f64,
    pub signature: IncidentSignature,
    /// Used only when the session is new to the queue.
    pub enqueued_at: u64,
}

impl PriorityUpdate {
    pub fn from_assessment(
        session_id: &str,
        assessment: &SeverityAssessment,
        signature: IncidentSignature,
        enqueued_at: u64,
    ) -> Self {
        Self {
            session_id: session_id.to_string(),
            severity_score: assessment.score,
            severity_level: assessment.level,
            distress_score: distress_score(assessment),
            signature,
            enqueued_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    entry: PriorityEntry,
    signature: IncidentSignature,
}

/// The dispatcher queue. Every mutation recomputes frequency and priority for
/// all calls so entries always agree with the current weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorityQueue {
    weights: PriorityWeights,
    slots: BTreeMap<String, Slot>,
}

impl PriorityQueue {
    pub fn new(weights: PriorityWeights) -> Self {
        Self { weights, slots: BTreeMap::new() }
    }

    pub fn weights(&self) -> PriorityWeights {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, session_id: &str) -> Option<&PriorityEntry> {
        self.slots.get(session_id).map(|s| &s.entry)
    }

    fn rescore(&mut self) {
        let open: Vec<(String, IncidentSignature)> = self
            .slots
            .iter()
            .filter(|(_, s)| s.entry.status != CallStatus::Resolved)
            .map(|(id, s)| (id.clone(), s.signature.clone()))
            .collect();
        let w = self.weights;
        for (id, slot) in self.slots.iter_mut() {
            let e = &mut slot.entry;
            e.frequency_score = if e.status == CallStatus::Resolved {
                0.0
            } else {
                frequency_score(&slot.signature, open.iter().filter(|(o, _)| o != id).map(|(_, s)| s))
            };
            e.priority = priority_score(e.severity_score, e.frequency_score, e.distress_score, &w);
        }
    }

    /// Insert a call or re-score it in place, keeping its status and arrival time.
    pub fn upsert(&mut self, update: PriorityUpdate) -> PriorityEntry {
        let id = update.session_id.clone();
        match self.slots.get_mut(&id) {
            Some(slot) => {
                slot.entry.severity_score = update.severity_score;
                slot.entry.severity_level = update.severity_level;
                slot.entry.distress_score = update.distress_score;
                slot.signature = update.signature;
            }
            None => {
                let entry = PriorityEntry {
                    session_id: id.clone(),
                    severity_score: update.severity_score,
                    severity_level: update.severity_level,
                    frequency_score: 0.0,
                    distress_score: update.distress_score,
                    priority: 0.0,
                    enqueued_at: update.enqueued_at,
                    status: CallStatus::Waiting,
                };
                self.slots.insert(id.clone(), Slot { entry, signature: update.signature });
            }
        }
        self.rescore();
        self.slots[&id].entry.clone()
    }

    pub fn set_weights(&mut self, weights: PriorityWeights) -> Result<(), QueueError> {
        weights.validate()?;
        self.weights = weights;
        self.rescore();
        Ok(())
    }

    fn transition(&mut self, session_id: &str, from: CallStatus, to: CallStatus) -> Result<PriorityEntry, QueueError> {
        let slot = self.slots.get_mut(session_id).ok_or_else(|| QueueError::NotFound(session_id.to_string()))?;
        if slot.entry.status != from {
            return Err(QueueError::IllegalTransition { session_id: session_id.to_string(), from: slot.entry.status, to });
        }
        slot.entry.status = to;
        self.rescore();
        Ok(self.slots[session_id].entry.clone())
    }

    pub fn claim(&mut self, session_id: &str) -> Result<PriorityEntry, QueueError> {
        self.transition(session_id, CallStatus::Waiting, CallStatus::Claimed)
    }

    pub fn resolve(&mut self, session_id: &str) -> Result<PriorityEntry, QueueError> {
        self.transition(session_id, CallStatus::Claimed, CallStatus::Resolved)
    }

    /// Claim and return the highest waiting call.
    pub fn pop_highest(&mut self) -> Result<PriorityEntry, QueueError> {
        let head = self
            .slots
            .values()
            .map(|s| &s.entry)
            .filter(|e| e.status == CallStatus::Waiting)
            .min_by(|a, b| queue_order(a, b))
            .ok_or(QueueError::EmptyQueue)?
            .session_id
            .clone();
        self.claim(&head)
    }

    /// All calls in queue order.
    pub fn snapshot(&self) -> Vec<PriorityEntry> {
        let mut out: Vec<PriorityEntry> = self.slots.values().map(|s| s.entry.clone()).collect();
        out.sort_by(queue_order);
        out
    }
}
