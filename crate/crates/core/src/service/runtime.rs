//! Async shell around the desk: one owner task mutates it, readers get
//! immutable snapshots, and every call session runs on its own worker thread.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc as std_mpsc, Arc};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use tokio::sync::{broadcast, mpsc, oneshot, watch};

use super::config::{BackendKind, ConfigError, RuntimeConfig, ServiceConfig};
use super::desk::{Desk, DeskSnapshot};
use super::driver::{DeskMsg, SessionDriver, TranscriberFactory};
use super::events::LiveEvent;
use super::pipeline::Pipeline;
use super::simulate::{load_named_scenario, scripted_factory};
use crate::media_gateway::{replay_with_stream_id, stream_id_for, MediaEvent, ScenarioFile, SessionInput};
use crate::netsim::ChannelConfig;
use crate::prioritizer::{PriorityEntry, QueueError};
use crate::transcription::live::LiveTranscriber;
use crate::transcription::{MockTranscriber, TranscriberBackend};

/// A stalled desk may hold partials back this long before they are dropped.
pub const PARTIAL_STALL_LIMIT: Duration = Duration::from_secs(5);
/// How long a closed socket may wait for the recognizer's last final.
pub const FINAL_GRACE: Duration = Duration::from_secs(15);
const DESK_CAPACITY: usize = 256;
const EVENT_CAPACITY: usize = 1024;
const WORKER_TICK: Duration = Duration::from_millis(20);

enum Command {
    Msg(DeskMsg),
    Claim(String, oneshot::Sender<Result<PriorityEntry, QueueError>>),
    Resolve(String, oneshot::Sender<Result<PriorityEntry, QueueError>>),
    SetConfig(RuntimeConfig, oneshot::Sender<Result<RuntimeConfig, ConfigError>>),
}

/// Cheap, cloneable access to the desk owner task.
#[derive(Clone)]
pub struct DeskHandle {
    tx: mpsc::Sender<Command>,
    snapshot: watch::Receiver<Arc<DeskSnapshot>>,
}

impl DeskHandle {
    /// Start the owner task on the current tokio runtime.
    pub fn spawn(config: RuntimeConfig, events: broadcast::Sender<LiveEvent>) -> Self {
        Self::spawn_with_capacity(config, events, DESK_CAPACITY)
    }

    fn spawn_with_capacity(config: RuntimeConfig, events: broadcast::Sender<LiveEvent>, capacity: usize) -> Self {
        let mut desk = Desk::new(config);
        let (snap_tx, snapshot) = watch::channel(Arc::new(desk.snapshot()));
        let (tx, mut rx) = mpsc::channel(capacity);
        tokio::spawn(async move {
            while let Some(cmd) = rx.recv().await {
                match cmd {
                    Command::Msg(msg) => {
                        for event in desk.apply(msg) {
                            // No subscribers is fine.
                            let _ = events.send(event);
                        }
                    }
                    Command::Claim(id, reply) => {
                        let _ = reply.send(desk.claim(&id));
                    }
                    Command::Resolve(id, reply) => {
                        let _ = reply.send(desk.resolve(&id));
                    }
                    Command::SetConfig(cfg, reply) => {
                        let _ = reply.send(desk.set_config(cfg).map(|()| desk.config().clone()));
                    }
                }
                snap_tx.send_replace(Arc::new(desk.snapshot()));
            }
        });
        Self { tx, snapshot }
    }

    pub fn snapshot(&self) -> Arc<DeskSnapshot> {
        self.snapshot.borrow().clone()
    }

    /// Resolves once a snapshot newer than the last seen one is published.
    pub fn subscribe(&self) -> watch::Receiver<Arc<DeskSnapshot>> {
        self.snapshot.clone()
    }

    fn sender(&self) -> mpsc::Sender<Command> {
        self.tx.clone()
    }

    async fn request<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Command) -> T {
        let (reply, rx) = oneshot::channel();
        self.tx.send(make(reply)).await.expect("desk task is alive");
        rx.await.expect("desk task replies")
    }

    pub async fn claim(&self, session_id: &str) -> Result<PriorityEntry, QueueError> {
        let id = session_id.to_string();
        self.request(|r| Command::Claim(id, r)).await
    }

    pub async fn resolve(&self, session_id: &str) -> Result<PriorityEntry, QueueError> {
        let id = session_id.to_string();
        self.request(|r| Command::Resolve(id, r)).await
    }

    pub async fn set_config(&self, config: RuntimeConfig) -> Result<RuntimeConfig, ConfigError> {
        self.request(|r| Command::SetConfig(config, r)).await
    }
}

/// Pushes session output to the desk. Finals always wait for room; partials
/// are retried while the desk has been stalled for less than the limit.
struct Forwarder {
    tx: mpsc::Sender<Command>,
    stall_limit: Duration,
    stalled_since: Option<Instant>,
    dropped: u64,
}

impl Forwarder {
    fn new(tx: mpsc::Sender<Command>, stall_limit: Duration) -> Self {
        Self { tx, stall_limit, stalled_since: None, dropped: 0 }
    }

    fn forward(&mut self, msg: DeskMsg) {
        if !msg.is_droppable() {
            // Blocking is fine: workers run on their own threads.
            let _ = self.tx.blocking_send(Command::Msg(msg));
            self.stalled_since = None;
            return;
        }
        let mut cmd = Command::Msg(msg);
        loop {
            match self.tx.try_send(cmd) {
                Ok(()) => {
                    self.stalled_since = None;
                    return;
                }
                Err(mpsc::error::TrySendError::Closed(_)) => return,
                Err(mpsc::error::TrySendError::Full(back)) => {
                    let since = *self.stalled_since.get_or_insert_with(Instant::now);
                    if since.elapsed() >= self.stall_limit {
                        self.dropped += 1;
                        return;
                    }
                    cmd = back;
                    std::thread::sleep(Duration::from_millis(2));
                }
            }
        }
    }
}

/// Shared state behind every HTTP and WebSocket handler.
pub struct AppState {
    pub desk: DeskHandle,
    pub events: broadcast::Sender<LiveEvent>,
    pub pipeline: Arc<Pipeline>,
    pub config: Arc<ServiceConfig>,
    next_call: AtomicU64,
}

impl AppState {
    /// Must be called inside a tokio runtime.
    pub fn new(config: ServiceConfig, pipeline: Pipeline) -> Arc<Self> {
        let (events, _) = broadcast::channel(EVENT_CAPACITY);
        let desk = DeskHandle::spawn(config.runtime(), events.clone());
        Arc::new(Self { desk, events, pipeline: Arc::new(pipeline), config: Arc::new(config), next_call: AtomicU64::new(1) })
    }

    pub fn next_session_id(&self) -> String {
        format!("call-{}", self.next_call.fetch_add(1, Ordering::Relaxed))
    }

    /// Recognizer choice for carrier calls on `/media`.
    pub fn media_factory(&self) -> TranscriberFactory {
        let stt = self.config.backends.stt;
        let live_cfg = self.config.stt.clone();
        let scenarios = self.config.paths.scenarios.clone();
        Arc::new(move |id: &str, start: &MediaEvent| -> Box<dyn TranscriberBackend> {
            if stt == BackendKind::Live {
                match LiveTranscriber::connect(id, &live_cfg) {
                    Ok(t) => return Box::new(t),
                    Err(e) => tracing::warn!(session = id, error = %e, "live recognizer unavailable, transcripts will be empty"),
                }
            }
            let words = start
                .custom_parameters()
                .and_then(|p| p.get("scenario"))
                .and_then(|v| v.as_str())
                .and_then(|name| load_named_scenario(&scenarios, name).ok())
                .map(|s| s.words)
                .unwrap_or_default();
            Box::new(MockTranscriber::new(id, words))
        })
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// One session's driver plus its link to the desk.
struct Worker {
    driver: SessionDriver,
    desk: DeskHandle,
    out: Forwarder,
}

impl Worker {
    fn new(state: &AppState, session_id: String, factory: TranscriberFactory, stall_limit: Duration) -> Self {
        let driver = SessionDriver::new(session_id, now_ms(), state.pipeline.clone(), factory);
        Self { driver, desk: state.desk.clone(), out: Forwarder::new(state.desk.sender(), stall_limit) }
    }

    fn emit(&mut self, msgs: Vec<DeskMsg>) {
        for m in msgs {
            self.out.forward(m);
        }
    }

    fn feed(&mut self, input: SessionInput) {
        // Rules are read per input so a PUT /config applies to the next final.
        let rules = self.desk.snapshot().config.triage.keywords.clone();
        match self.driver.handle(input, &rules) {
            Ok(msgs) => self.emit(msgs),
            Err(e) => tracing::warn!(session = %self.driver.session().session_id, error = %e, "media event rejected"),
        }
    }

    fn tick(&mut self) {
        let rules = self.desk.snapshot().config.triage.keywords.clone();
        let msgs = self.driver.tick(&rules);
        self.emit(msgs);
    }

    /// After the socket is gone: wait for the last final, then give up.
    fn finish(&mut self) {
        self.feed(SessionInput::SocketClosed);
        let deadline = Instant::now() + FINAL_GRACE;
        while !self.driver.is_closed() && Instant::now() < deadline {
            std::thread::sleep(WORKER_TICK);
            self.tick();
        }
        let msgs = self.driver.abort();
        self.emit(msgs);
        if self.out.dropped > 0 {
            tracing::info!(session = %self.driver.session().session_id, dropped = self.out.dropped, "partials dropped under backpressure");
        }
    }
}

/// Input side of a running session worker.
pub struct SessionFeed {
    pub session_id: String,
    tx: std_mpsc::Sender<SessionInput>,
}

impl SessionFeed {
    /// False once the worker has shut down.
    pub fn send(&self, input: SessionInput) -> bool {
        self.tx.send(input).is_ok()
    }
}

/// Spawn a worker thread fed from a socket. Dropping the feed counts as the
/// socket closing.
pub fn spawn_session(state: &Arc<AppState>, factory: TranscriberFactory) -> SessionFeed {
    let session_id = state.next_session_id();
    let (tx, rx) = std_mpsc::channel::<SessionInput>();
    let mut worker = Worker::new(state, session_id.clone(), factory, PARTIAL_STALL_LIMIT);
    std::thread::Builder::new()
        .name(format!("session-{session_id}"))
        .spawn(move || {
            loop {
                match rx.recv_timeout(WORKER_TICK) {
                    Ok(SessionInput::SocketClosed) | Err(std_mpsc::RecvTimeoutError::Disconnected) => break,
                    Ok(input) => worker.feed(input),
                    Err(std_mpsc::RecvTimeoutError::Timeout) => worker.tick(),
                }
                if worker.driver.is_closed() {
                    break;
                }
            }
            worker.finish();
        })
        .expect("spawn session thread");
    SessionFeed { session_id, tx }
}

/// A replay accepted by the service.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SimulationTicket {
    pub session_id: String,
    pub stream_id: String,
    pub frames_sent: usize,
    pub frames_delivered: usize,
}

/// Replay `scenario` as a new call. With `realtime`, media is paced by its
/// timestamps; otherwise it is fed as fast as the worker takes it.
pub fn spawn_simulation(
    state: &Arc<AppState>,
    scenario: ScenarioFile,
    channel: &ChannelConfig,
    realtime: bool,
) -> Result<SimulationTicket, super::simulate::SimulateError> {
    channel.validate()?;
    let stream_id = stream_id_for(&scenario, channel.seed);
    let replay = replay_with_stream_id(&scenario, channel, &stream_id)?;
    let session_id = state.next_session_id();
    let ticket = SimulationTicket {
        session_id: session_id.clone(),
        stream_id,
        frames_sent: replay.trace.total(),
        frames_delivered: replay.trace.delivered.len(),
    };
    let mut worker = Worker::new(state, session_id.clone(), scripted_factory(&scenario), PARTIAL_STALL_LIMIT);
    std::thread::Builder::new()
        .name(format!("sim-{session_id}"))
        .spawn(move || {
            let origin = Instant::now();
            for event in replay.events {
                if realtime {
                    if let Some(ts) = event.timestamp_ms {
                        let due = origin + Duration::from_millis(ts);
                        if let Some(wait) = due.checked_duration_since(Instant::now()) {
                            std::thread::sleep(wait);
                        }
                    }
                }
                worker.feed(SessionInput::Event(event));
            }
            worker.finish();
        })
        .expect("spawn simulation thread");
    Ok(ticket)
}

/// Build the shared state from a loaded config.
pub fn build_state(config: ServiceConfig) -> Result<Arc<AppState>, ConfigError> {
    let pipeline = Pipeline::from_config(&config)?;
    Ok(AppState::new(config, pipeline))
}
