//! One call from socket input to desk messages, without any I/O.

use std::sync::Arc;

use super::pipeline::{Analysis, Pipeline};
use crate::media_gateway::{advance_session, CallSession, GatewayError, MediaEvent, SessionAction, SessionInput, SessionState};
use crate::prioritizer::IncidentSignature;
use crate::transcription::{AudioFrame, TranscriberBackend, TranscriptEvent};
use crate::triage::KeywordRules;

/// What a session reports to the dispatch desk.
#[derive(Debug, Clone, PartialEq)]
pub enum DeskMsg {
    Started { session_id: String, stream_id: String, scenario: Option<String>, started_at: u64 },
    Transcript(TranscriptEvent),
    Analysis { session_id: String, analysis: Box<Analysis>, signature: IncidentSignature },
    Closed { session_id: String, frames_received: u64 },
}

impl DeskMsg {
    /// Partials may be dropped under backpressure; nothing else may.
    pub fn is_droppable(&self) -> bool {
        matches!(self, DeskMsg::Transcript(t) if !t.is_final())
    }
}

/// Builds a recognizer once the `start` event names the stream.
pub type TranscriberFactory = Arc<dyn Fn(&str, &MediaEvent) -> Box<dyn TranscriberBackend> + Send + Sync>;

pub struct SessionDriver {
    session: CallSession,
    pipeline: Arc<Pipeline>,
    factory: TranscriberFactory,
    transcriber: Option<Box<dyn TranscriberBackend>>,
    finals: Vec<String>,
}

impl SessionDriver {
    pub fn new(session_id: impl Into<String>, started_at: u64, pipeline: Arc<Pipeline>, factory: TranscriberFactory) -> Self {
        Self { session: CallSession::new(session_id, started_at), pipeline, factory, transcriber: None, finals: Vec::new() }
    }

    pub fn session(&self) -> &CallSession {
        &self.session
    }

    pub fn is_closed(&self) -> bool {
        self.session.state == SessionState::Closed
    }

    /// Apply socket input. Protocol violations leave the session untouched.
    pub fn handle(&mut self, input: SessionInput, rules: &KeywordRules) -> Result<Vec<DeskMsg>, GatewayError> {
        if self.is_closed() && matches!(input, SessionInput::SocketClosed) {
            return Ok(Vec::new());
        }
        let start_event = match &input {
            SessionInput::Event(e) => Some(e.clone()),
            _ => None,
        };
        let actions = advance_session(&mut self.session, input)?;
        let mut out = Vec::new();
        for action in actions {
            match action {
                SessionAction::LogConnected => tracing::debug!(session = %self.session.session_id, "media socket connected"),
                SessionAction::StreamStarted { stream_id } => {
                    let event = start_event.as_ref().expect("start comes from an event");
                    self.transcriber = Some((self.factory)(&self.session.session_id, event));
                    let scenario = event
                        .custom_parameters()
                        .and_then(|p| p.get("scenario"))
                        .and_then(|v| v.as_str())
                        .map(str::to_string);
                    out.push(DeskMsg::Started {
                        session_id: self.session.session_id.clone(),
                        stream_id,
                        scenario,
                        started_at: self.session.started_at,
                    });
                }
                SessionAction::ForwardAudio { sequence, timestamp_ms, payload } => {
                    if let Some(t) = self.transcriber.as_mut() {
                        if let Err(e) = t.push_audio(AudioFrame::mulaw(sequence, timestamp_ms, payload)) {
                            tracing::warn!(session = %self.session.session_id, error = %e, "audio not accepted");
                        }
                    }
                }
                SessionAction::FlushTranscriber => {
                    if let Some(t) = self.transcriber.as_mut() {
                        if let Err(e) = t.flush() {
                            tracing::warn!(session = %self.session.session_id, error = %e, "flush failed");
                        }
                    }
                }
                SessionAction::Closed => out.push(self.closed_msg()),
            }
        }
        out.extend(self.tick(rules));
        Ok(out)
    }

    /// Collect recognizer output and close once the last final is in.
    pub fn tick(&mut self, rules: &KeywordRules) -> Vec<DeskMsg> {
        let mut out = Vec::new();
        let Some(t) = self.transcriber.as_mut() else { return out };
        let events = t.poll_events();
        let finished = t.is_finished();
        for event in events {
            self.session.transcript_buffer.push(event.clone());
            let is_final = event.is_final();
            let received_at = event.received_at;
            if is_final {
                self.finals.push(event.text.clone());
            }
            out.push(DeskMsg::Transcript(event));
            if is_final {
                out.push(self.analyze(rules, received_at));
            }
        }
        if finished && self.session.state == SessionState::AwaitingFinal {
            if let Ok(actions) = advance_session(&mut self.session, SessionInput::TranscriberDone) {
                if actions.contains(&SessionAction::Closed) {
                    out.push(self.closed_msg());
                }
            }
        }
        out
    }

    /// Force the session shut, e.g. when a recognizer never delivers its final.
    pub fn abort(&mut self) -> Vec<DeskMsg> {
        if self.is_closed() {
            return Vec::new();
        }
        self.session.state = SessionState::Closed;
        vec![self.closed_msg()]
    }

    fn closed_msg(&self) -> DeskMsg {
        DeskMsg::Closed { session_id: self.session.session_id.clone(), frames_received: self.session.frames_received }
    }

    /// Severity always looks at everything said so far.
    fn analyze(&self, rules: &KeywordRules, received_at: u64) -> DeskMsg {
        let transcript = self.finals.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ");
        let analysis = self.pipeline.analyze(&transcript, rules);
        let signature = IncidentSignature::new(analysis.signature_terms(), self.session.started_at + received_at);
        DeskMsg::Analysis { session_id: self.session.session_id.clone(), analysis: Box::new(analysis), signature }
    }
}
