//! The dispatch desk: every call record and the priority queue, mutated only
//! through [`Desk::apply`] and the dispatcher commands.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use super::config::{ConfigError, RuntimeConfig};
use super::driver::DeskMsg;
use super::events::{EventSequencer, LiveEvent, LiveEventKind};
use crate::knowledge::{IntentPrediction, ReconstructionResult};
use crate::media_gateway::{CallSession, SessionState};
use crate::prioritizer::{IncidentSignature, PriorityEntry, PriorityQueue, PriorityUpdate, QueueError};
use crate::triage::assess_features;

/// Everything known about one call.
#[derive(Debug, Clone, Serialize)]
pub struct CallRecord {
    #[serde(flatten)]
    pub session: CallSession,
    pub scenario: Option<String>,
    pub reconstruction: Option<ReconstructionResult>,
    pub intent: Option<IntentPrediction>,
    #[serde(skip)]
    signature: Option<IncidentSignature>,
}

impl CallRecord {
    fn new(session_id: &str, started_at: u64) -> Self {
        Self {
            session: CallSession::new(session_id, started_at),
            scenario: None,
            reconstruction: None,
            intent: None,
            signature: None,
        }
    }
}

/// Immutable view handed to readers.
#[derive(Debug, Clone, Serialize)]
pub struct DeskSnapshot {
    pub config: RuntimeConfig,
    pub queue: Vec<PriorityEntry>,
    pub calls: BTreeMap<String, CallRecord>,
}

#[derive(Debug, Clone)]
pub struct Desk {
    config: RuntimeConfig,
    queue: PriorityQueue,
    calls: BTreeMap<String, CallRecord>,
    sequencer: EventSequencer,
}

impl Desk {
    pub fn new(config: RuntimeConfig) -> Self {
        let queue = PriorityQueue::new(config.priority);
        Self { config, queue, calls: BTreeMap::new(), sequencer: EventSequencer::default() }
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.config
    }

    fn record(&mut self, session_id: &str) -> &mut CallRecord {
        self.calls.entry(session_id.to_string()).or_insert_with(|| CallRecord::new(session_id, 0))
    }

    /// Fold one session message in and return the events it produced.
    pub fn apply(&mut self, msg: DeskMsg) -> Vec<LiveEvent> {
        match msg {
            DeskMsg::Started { session_id, stream_id, scenario, started_at } => {
                let mut rec = CallRecord::new(&session_id, started_at);
                rec.session.state = SessionState::Streaming;
                rec.session.stream_id = Some(stream_id.clone());
                rec.scenario = scenario.clone();
                self.calls.insert(session_id.clone(), rec);
                let payload = json!({"stream_id": stream_id, "scenario": scenario, "started_at": started_at});
                vec![self.sequencer.stamp(&session_id, LiveEventKind::CallStarted, payload)]
            }
            DeskMsg::Transcript(t) => {
                let kind = if t.is_final() { LiveEventKind::TranscriptFinal } else { LiveEventKind::TranscriptPartial };
                let session_id = t.session_id.clone();
                self.record(&session_id).session.transcript_buffer.push(t.clone());
                vec![self.sequencer.stamp(&session_id, kind, &t)]
            }
            DeskMsg::Analysis { session_id, analysis, signature } => {
                let weights = self.config.triage.weights;
                let assessment = assess_features(analysis.features, analysis.rationale.clone(), &weights);
                let started_at = {
                    let rec = self.record(&session_id);
                    rec.reconstruction = Some(analysis.reconstruction.clone());
                    rec.intent = Some(analysis.intent.clone());
                    rec.session.current_assessment = Some(assessment.clone());
                    rec.signature = Some(signature.clone());
                    rec.session.started_at
                };
                let entry = self.queue.upsert(PriorityUpdate::from_assessment(&session_id, &assessment, signature, started_at));
                self.record(&session_id).session.current_priority = Some(entry.clone());
                vec![
                    self.sequencer.stamp(&session_id, LiveEventKind::Reconstruction, &analysis.reconstruction),
                    self.sequencer.stamp(
                        &session_id,
                        LiveEventKind::SeverityUpdate,
                        json!({"assessment": assessment, "intent": analysis.intent}),
                    ),
                    self.sequencer.stamp(&session_id, LiveEventKind::PriorityUpdate, &entry),
                ]
            }
            DeskMsg::Closed { session_id, frames_received } => {
                let rec = self.record(&session_id);
                rec.session.state = SessionState::Closed;
                rec.session.frames_received = frames_received;
                vec![self.sequencer.stamp(&session_id, LiveEventKind::CallClosed, json!({"frames_received": frames_received}))]
            }
        }
    }

    pub fn claim(&mut self, session_id: &str) -> Result<PriorityEntry, QueueError> {
        self.queue.claim(session_id)
    }

    pub fn resolve(&mut self, session_id: &str) -> Result<PriorityEntry, QueueError> {
        self.queue.resolve(session_id)
    }

    pub fn pop_highest(&mut self) -> Result<PriorityEntry, QueueError> {
        self.queue.pop_highest()
    }

    /// Swap in new parameters and re-score every call from its stored
    /// features. Nothing changes if validation fails.
    pub fn set_config(&mut self, config: RuntimeConfig) -> Result<(), ConfigError> {
        config.validate()?;
        let mut queue = self.queue.clone();
        queue.set_weights(config.priority).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut calls = self.calls.clone();
        for (id, rec) in calls.iter_mut() {
            let (Some(old), Some(sig)) = (&rec.session.current_assessment, &rec.signature) else { continue };
            let fresh = assess_features(old.features, old.rationale.clone(), &config.triage.weights);
            queue.upsert(PriorityUpdate::from_assessment(id, &fresh, sig.clone(), rec.session.started_at));
            rec.session.current_assessment = Some(fresh);
        }
        self.queue = queue;
        self.calls = calls;
        self.config = config;
        Ok(())
    }

    pub fn snapshot(&self) -> DeskSnapshot {
        let mut calls = self.calls.clone();
        for (id, rec) in calls.iter_mut() {
            if let Some(entry) = self.queue.get(id) {
                rec.session.current_priority = Some(entry.clone());
            }
        }
        DeskSnapshot { config: self.config.clone(), queue: self.queue.snapshot(), calls }
    }
}
