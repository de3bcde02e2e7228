//! One-shot scenario replay through the full pipeline with mock recognition.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::desk::Desk;
use super::driver::{SessionDriver, TranscriberFactory};
use super::events::LiveEvent;
use super::pipeline::Pipeline;
use super::config::RuntimeConfig;
use crate::knowledge::{IntentPrediction, ReconstructionResult};
use crate::media_gateway::{replay_with_stream_id, stream_id_for, GatewayError, ReplayError, ScenarioFile, SessionInput};
use crate::netsim::{ChannelConfig, ChannelError};
use crate::prioritizer::PriorityEntry;
use crate::transcription::MockTranscriber;
use crate::triage::SeverityAssessment;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("bad channel override: {0}")]
    BadOverride(String),
}

/// Scenario names are file stems inside the scenario directory.
pub fn load_named_scenario(dir: &Path, name: &str) -> Result<ScenarioFile, SimulateError> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(SimulateError::UnknownScenario(name.to_string()));
    }
    let path = dir.join(format!("{name}.json"));
    if !path.is_file() {
        return Err(SimulateError::UnknownScenario(name.to_string()));
    }
    Ok(ScenarioFile::load(&path)?)
}

/// Overlay a partial JSON object on `base`; unknown keys are rejected.
pub fn apply_channel_overrides(base: &ChannelConfig, overrides: &Value) -> Result<ChannelConfig, SimulateError> {
    let Value::Object(over) = overrides else {
        return Err(SimulateError::BadOverride("channel overrides must be an object".into()));
    };
    let mut merged = serde_json::to_value(base).expect("channel config serializes");
    let target = merged.as_object_mut().expect("object");
    for (k, v) in over {
        if !target.contains_key(k) {
            return Err(SimulateError::BadOverride(format!("unknown channel field `{k}`")));
        }
        target.insert(k.clone(), v.clone());
    }
    let cfg: ChannelConfig = serde_json::from_value(merged).map_err(|e| SimulateError::BadOverride(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// A recognizer that follows the scenario's word timings.
pub fn scripted_factory(scenario: &ScenarioFile) -> TranscriberFactory {
    let words = scenario.words.clone();
    Arc::new(move |id, _| Box::new(MockTranscriber::new(id, words.clone())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub stream_id: String,
    pub channel: ChannelConfig,
    pub frames_sent: usize,
    pub frames_delivered: usize,
    pub empirical_loss: f64,
    pub final_transcript: String,
    pub reconstruction: Option<ReconstructionResult>,
    pub intent: Option<IntentPrediction>,
    pub assessment: Option<SeverityAssessment>,
    pub priority: Option<PriorityEntry>,
    pub events: Vec<LiveEvent>,
}

/// Replay `scenario` over `channel` on a private desk. Time is the call's
/// own audio clock, so equal inputs give equal reports.
pub fn run_simulation(
    pipeline: Arc<Pipeline>,
    runtime: &RuntimeConfig,
    scenario: &ScenarioFile,
    channel: &ChannelConfig,
) -> Result<SimulationReport, SimulateError> {
    channel.validate()?;
    let stream_id = stream_id_for(scenario, channel.seed);
    let replay = replay_with_stream_id(scenario, channel, &stream_id)?;
    let mut desk = Desk::new(runtime.clone());
    let mut driver = SessionDriver::new(stream_id.clone(), 0, pipeline, scripted_factory(scenario));
    let rules = runtime.triage.keywords.clone();
    let mut events = Vec::new();
    let inputs = replay.events.iter().cloned().map(SessionInput::Event).chain([SessionInput::SocketClosed]);
    for input in inputs {
        for msg in driver.handle(input, &rules)? {
            events.extend(desk.apply(msg));
        }
    }
    for msg in driver.abort() {
        events.extend(desk.apply(msg));
    }
    let snap = desk.snapshot();
    let rec = snap.calls.get(&stream_id);
    let final_transcript = rec
        .map(|r| r.session.transcript_buffer.iter().filter(|t| t.is_final()).map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    Ok(SimulationReport {
        scenario: scenario.name.clone(),
        stream_id: stream_id.clone(),
        channel: channel.clone(),
        frames_sent: replay.trace.total(),
        frames_delivered: replay.trace.delivered.len(),
        empirical_loss: replay.trace.empirical_loss_rate,
        final_transcript,
        reconstruction: rec.and_then(|r| r.reconstruction.clone()),
        intent: rec.and_then(|r| r.intent.clone()),
        assessment: rec.and_then(|r| r.session.current_assessment.clone()),
        priority: snap.queue.iter().find(|e| e.session_id == stream_id).cloned(),
        events,
    })
}
