//! Media-stream termination: wire events, mu-law decoding, per-call
//! session lifecycle and simulated replay.

mod events;
pub mod mulaw;
mod replay;
mod session;

pub use events::{parse_media_event, EventError, EventKind, MediaEvent};
pub use mulaw::{decode as decode_mulaw, encode as encode_mulaw};
pub use replay::{
    replay_scenario, replay_with_stream_id, stream_id_for, Replay, ReplayError, ScenarioFile, ScriptWord,
};
pub use session::{advance_session, CallSession, GatewayError, SessionAction, SessionInput, SessionState};
