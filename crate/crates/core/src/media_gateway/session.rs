//! Per-call session lifecycle driven by media-stream events.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::events::{EventKind, MediaEvent};
use crate::prioritizer::PriorityEntry;
use crate::transcription::TranscriptEvent;
use crate::triage::SeverityAssessment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Connecting,
    Streaming,
    AwaitingFinal,
    Closed,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("protocol violation in state {state:?}: {reason}")]
    ProtocolViolation { state: SessionState, reason: String },
}

/// Anything that can move a session forward.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionInput {
    Event(MediaEvent),
    /// The socket went away. Handled like `stop` so the call still finalizes.
    SocketClosed,
    /// The transcriber delivered its last final after a flush.
    TranscriberDone,
}

/// Side effects requested by a state transition.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionAction {
    LogConnected,
    StreamStarted { stream_id: String },
    /// Decode the payload and hand it to the transcriber.
    ForwardAudio { sequence: u64, timestamp_ms: u64, payload: Vec<u8> },
    FlushTranscriber,
    Closed,
}

/// One live call.
#[derive(Debug, Clone, Serialize)]
pub struct CallSession {
    pub session_id: String,
    pub state: SessionState,
    pub started_at: u64,
    pub stream_id: Option<String>,
    pub frames_received: u64,
    last_sequence: Option<u64>,
    pub transcript_buffer: Vec<TranscriptEvent>,
    pub current_assessment: Option<SeverityAssessment>,
    pub current_priority: Option<PriorityEntry>,
}

impl CallSession {
    pub fn new(session_id: impl Into<String>, started_at: u64) -> Self {
        Self {
            session_id: session_id.into(),
            state: SessionState::Connecting,
            started_at,
            stream_id: None,
            frames_received: 0,
            last_sequence: None,
            transcript_buffer: Vec::new(),
            current_assessment: None,
            current_priority: None,
        }
    }

    fn violation(&self, reason: impl Into<String>) -> GatewayError {
        GatewayError::ProtocolViolation { state: self.state, reason: reason.into() }
    }
}

/// Apply one input to the session, returning the actions it triggers.
///
/// On error the session is left unchanged.
pub fn advance_session(session: &mut CallSession, input: SessionInput) -> Result<Vec<SessionAction>, GatewayError> {
    use SessionState::*;
    if session.state == Closed {
        return Err(session.violation("session already closed"));
    }
    match input {
        SessionInput::Event(event) => {
            if let (Some(ours), Some(theirs)) = (&session.stream_id, &event.stream_id) {
                if ours != theirs {
                    return Err(session.violation(format!("stream {theirs} on a socket bound to {ours}")));
                }
            }
            match (session.state, event.kind) {
                (Connecting, EventKind::Connected) => Ok(vec![SessionAction::LogConnected]),
                (Connecting, EventKind::Start) => {
                    let stream_id = event.stream_id.clone().ok_or_else(|| session.violation("start without streamSid"))?;
                    session.stream_id = Some(stream_id.clone());
                    session.last_sequence = event.sequence;
                    session.state = Streaming;
                    Ok(vec![SessionAction::StreamStarted { stream_id }])
                }
                (Streaming, EventKind::Media) => {
                    let sequence = event.sequence.ok_or_else(|| session.violation("media without sequenceNumber"))?;
                    if let Some(prev) = session.last_sequence {
                        if sequence <= prev {
                            return Err(session.violation(format!("sequence {sequence} after {prev}")));
                        }
                    }
                    let payload = event.payload().map_err(|e| session.violation(e.to_string()))?;
                    session.last_sequence = Some(sequence);
                    session.frames_received += 1;
                    Ok(vec![SessionAction::ForwardAudio {
                        sequence,
                        timestamp_ms: event.timestamp_ms.unwrap_or(0),
                        payload,
                    }])
                }
                (Streaming, EventKind::Stop) => {
                    session.state = AwaitingFinal;
                    Ok(vec![SessionAction::FlushTranscriber])
                }
                (state, kind) => Err(session.violation(format!("`{}` not allowed in {state:?}", kind.as_str()))),
            }
        }
        SessionInput::SocketClosed => match session.state {
            Connecting => {
                session.state = Closed;
                Ok(vec![SessionAction::Closed])
            }
            Streaming => {
                session.state = AwaitingFinal;
                Ok(vec![SessionAction::FlushTranscriber])
            }
            // Already flushing; the final is still on its way.
            _ => Ok(vec![]),
        },
        SessionInput::TranscriberDone => match session.state {
            AwaitingFinal => {
                session.state = Closed;
                Ok(vec![SessionAction::Closed])
            }
            _ => Err(session.violation("transcriber finished before stop")),
        },
    }
}
