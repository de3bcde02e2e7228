//! The triage service: configuration, per-call orchestration, the dispatch
//! desk and the HTTP/WebSocket API.

pub mod config;
pub mod desk;
pub mod driver;
pub mod events;
pub mod http;
pub mod pipeline;
pub mod runtime;
pub mod simulate;

pub use config::{BackendKind, ConfigError, RuntimeConfig, ServiceConfig};
pub use desk::{CallRecord, Desk, DeskSnapshot};
pub use driver::{DeskMsg, SessionDriver, TranscriberFactory};
pub use events::{LiveEvent, LiveEventKind};
pub use pipeline::{Analysis, Pipeline};
pub use simulate::{run_simulation, SimulationReport};
pub use runtime::{spawn_session, spawn_simulation, AppState, DeskHandle};
