//! Adapter for a hosted real-time recognizer speaking a JSON-over-WebSocket
//! protocol:
//!
//! * client sends `{"audio_data": "<base64 audio>"}` per chunk and
//!   `{"terminate_session": true}` to finish;
//! * server sends `{"message_type": "PartialTranscript" | "FinalTranscript",
//!   "text": ..., "confidence": ...}` and `{"message_type": "SessionTerminated"}`.
//!
//! Audio is re-encoded to the backend's declared capabilities before
//! sending. The API key is read from `TRIAGE_STT_API_KEY`.

use std::io::ErrorKind;
use std::net::TcpStream;
use std::sync::mpsc;
use std::thread::JoinHandle;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tungstenite::client::IntoClientRequest;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::{
    Ack, AudioEncoding, AudioFrame, Capabilities, TranscriberBackend, TranscriberError, TranscriptEvent,
    TranscriptKind,
};
use crate::media_gateway::mulaw;

pub const API_KEY_ENV: &str = "TRIAGE_STT_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveSttConfig {
    pub url: String,
    pub sample_rate: u32,
    pub encoding: AudioEncoding,
}

impl Default for LiveSttConfig {
    fn default() -> Self {
        Self {
            url: "wss://api.assemblyai.com/v2/realtime/ws".into(),
            sample_rate: 16000,
            encoding: AudioEncoding::Pcm16,
        }
    }
}

impl LiveSttConfig {
    pub fn capabilities(&self) -> Capabilities {
        Capabilities { sample_rate: self.sample_rate, encoding: self.encoding }
    }

    /// Connection URL with the negotiated audio parameters as query arguments.
    pub fn connect_url(&self) -> String {
        let encoding = match self.encoding {
            AudioEncoding::Pcm16 => "pcm_s16le",
            AudioEncoding::Mulaw => "pcm_mulaw",
        };
        let sep = if self.url.contains('?') { '&' } else { '?' };
        format!("{}{sep}sample_rate={}&encoding={encoding}", self.url, self.sample_rate)
    }
}

/// Linear-interpolation resampler for 16-bit mono audio.
pub fn resample(samples: &[i16], from_rate: u32, to_rate: u32) -> Vec<i16> {
    if from_rate == to_rate || samples.is_empty() {
        return samples.to_vec();
    }
    let out_len = (samples.len() as u64 * to_rate as u64 / from_rate as u64) as usize;
    let step = from_rate as f64 / to_rate as f64;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let idx = pos.floor() as usize;
            let frac = pos - idx as f64;
            let a = samples[idx.min(samples.len() - 1)] as f64;
            let b = samples[(idx + 1).min(samples.len() - 1)] as f64;
            (a + (b - a) * frac).round() as i16
        })
        .collect()
}

/// Bytes to put on the wire for `frame` under `caps`.
pub fn encode_for_backend(frame: &AudioFrame, caps: Capabilities) -> Vec<u8> {
    let pcm = resample(&frame.payload.to_pcm16(), frame.sample_rate, caps.sample_rate);
    match caps.encoding {
        AudioEncoding::Pcm16 => pcm.iter().flat_map(|s| s.to_le_bytes()).collect(),
        AudioEncoding::Mulaw => mulaw::encode(&pcm),
    }
}

pub fn audio_message(bytes: &[u8]) -> String {
    json!({ "audio_data": STANDARD.encode(bytes) }).to_string()
}

pub fn terminate_message() -> String {
    json!({ "terminate_session": true }).to_string()
}

/// What one server message means to the adapter.
#[derive(Debug, Clone, PartialEq)]
pub enum ServerMessage {
    Transcript { kind: TranscriptKind, text: String, confidence: f64 },
    SessionBegins,
    SessionTerminated,
    Error(String),
    Other,
}

pub fn parse_server_message(text: &str) -> ServerMessage {
    let Ok(v) = serde_json::from_str::<Value>(text) else {
        return ServerMessage::Error(format!("unparseable message: {text}"));
    };
    if let Some(err) = v.get("error").and_then(Value::as_str) {
        return ServerMessage::Error(err.to_string());
    }
    let transcript = |kind| ServerMessage::Transcript {
        kind,
        text: v.get("text").and_then(Value::as_str).unwrap_or_default().to_string(),
        confidence: v.get("confidence").and_then(Value::as_f64).unwrap_or(0.0).clamp(0.0, 1.0),
    };
    match v.get("message_type").and_then(Value::as_str) {
        Some("PartialTranscript") => transcript(TranscriptKind::Partial),
        Some("FinalTranscript") => transcript(TranscriptKind::Final),
        Some("SessionBegins") => ServerMessage::SessionBegins,
        Some("SessionTerminated") => ServerMessage::SessionTerminated,
        _ => ServerMessage::Other,
    }
}

/// Text message channel to the recognizer.
pub trait RealtimeTransport: Send {
    fn send(&mut self, text: String) -> Result<(), TranscriberError>;
    fn try_recv(&mut self) -> Result<Option<String>, TranscriberError>;
}

enum Outgoing {
    Text(String),
}

/// WebSocket transport. A background thread owns the socket and shuttles
/// messages through channels so the session task never blocks on reads.
pub struct WsTransport {
    outgoing: Option<mpsc::Sender<Outgoing>>,
    incoming: mpsc::Receiver<Result<String, String>>,
    worker: Option<JoinHandle<()>>,
}

fn set_read_timeout(socket: &mut WebSocket<MaybeTlsStream<TcpStream>>, timeout: Duration) -> std::io::Result<()> {
    match socket.get_mut() {
        MaybeTlsStream::Plain(s) => s.set_read_timeout(Some(timeout)),
        MaybeTlsStream::Rustls(s) => s.get_mut().set_read_timeout(Some(timeout)),
        _ => Ok(()),
    }
}

impl WsTransport {
    pub fn connect(url: &str, api_key: Option<&str>) -> Result<Self, TranscriberError> {
        let transport = |e: &dyn std::fmt::Display| TranscriberError::Transport(e.to_string());
        let mut request = url.into_client_request().map_err(|e| transport(&e))?;
        if let Some(key) = api_key {
            let value = key.parse().map_err(|e| transport(&e))?;
            request.headers_mut().insert("Authorization", value);
        }
        let (mut socket, _) = tungstenite::connect(request).map_err(|e| transport(&e))?;
        set_read_timeout(&mut socket, Duration::from_millis(10)).map_err(|e| transport(&e))?;

        let (out_tx, out_rx) = mpsc::channel::<Outgoing>();
        let (in_tx, in_rx) = mpsc::channel();
        let worker = std::thread::spawn(move || {
            let mut sender_gone = false;
            loop {
                loop {
                    match out_rx.try_recv() {
                        Ok(Outgoing::Text(t)) => {
                            if let Err(e) = socket.send(Message::text(t)) {
                                let _ = in_tx.send(Err(e.to_string()));
                                return;
                            }
                        }
                        Err(mpsc::TryRecvError::Empty) => break,
                        Err(mpsc::TryRecvError::Disconnected) => {
                            sender_gone = true;
                            break;
                        }
                    }
                }
                match socket.read() {
                    Ok(Message::Text(t)) => {
                        if in_tx.send(Ok(t.to_string())).is_err() {
                            return;
                        }
                    }
                    Ok(Message::Close(_)) => return,
                    Ok(_) => {}
                    Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                        if sender_gone {
                            let _ = socket.close(None);
                            let _ = socket.flush();
                            return;
                        }
                    }
                    Err(tungstenite::Error::ConnectionClosed) => return,
                    Err(e) => {
                        let _ = in_tx.send(Err(e.to_string()));
                        return;
                    }
                }
            }
        });
        Ok(Self { outgoing: Some(out_tx), incoming: in_rx, worker: Some(worker) })
    }
}

impl RealtimeTransport for WsTransport {
    fn send(&mut self, text: String) -> Result<(), TranscriberError> {
        let tx = self.outgoing.as_ref().ok_or(TranscriberError::BackendClosed)?;
        tx.send(Outgoing::Text(text)).map_err(|_| TranscriberError::Transport("socket worker stopped".into()))
    }

    fn try_recv(&mut self) -> Result<Option<String>, TranscriberError> {
        match self.incoming.try_recv() {
            Ok(Ok(text)) => Ok(Some(text)),
            Ok(Err(e)) => Err(TranscriberError::Transport(e)),
            Err(_) => Ok(None),
        }
    }
}

impl Drop for WsTransport {
    fn drop(&mut self) {
        self.outgoing.take();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

/// Streaming recognizer client over any [`RealtimeTransport`].
pub struct LiveTranscriber<T: RealtimeTransport> {
    session_id: String,
    caps: Capabilities,
    transport: T,
    pending: Vec<TranscriptEvent>,
    frames: u64,
    flushed: bool,
    terminated: bool,
    clock_ms: u64,
}

impl LiveTranscriber<WsTransport> {
    /// Connect using `TRIAGE_STT_API_KEY`.
    pub fn connect(session_id: impl Into<String>, cfg: &LiveSttConfig) -> Result<Self, TranscriberError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| TranscriberError::MissingCredential(API_KEY_ENV))?;
        let transport = WsTransport::connect(&cfg.connect_url(), Some(&key))?;
        Ok(Self::with_transport(session_id, cfg.capabilities(), transport))
    }
}

impl<T: RealtimeTransport> LiveTranscriber<T> {
    pub fn with_transport(session_id: impl Into<String>, caps: Capabilities, transport: T) -> Self {
        Self {
            session_id: session_id.into(),
            caps,
            transport,
            pending: Vec::new(),
            frames: 0,
            flushed: false,
            terminated: false,
            clock_ms: 0,
        }
    }

    fn pump(&mut self) {
        loop {
            match self.transport.try_recv() {
                Ok(Some(text)) => match parse_server_message(&text) {
                    ServerMessage::Transcript { kind, text, confidence } => {
                        // Empty finals mark silence between utterances.
                        if kind == TranscriptKind::Final && text.trim().is_empty() && !self.flushed {
                            continue;
                        }
                        self.pending.push(TranscriptEvent {
                            session_id: self.session_id.clone(),
                            kind,
                            text,
                            confidence,
                            received_at: self.clock_ms,
                        });
                    }
                    ServerMessage::SessionTerminated => self.terminated = true,
                    ServerMessage::Error(e) => tracing::warn!(session = %self.session_id, "recognizer error: {e}"),
                    ServerMessage::SessionBegins | ServerMessage::Other => {}
                },
                Ok(None) => break,
                Err(e) => {
                    tracing::warn!(session = %self.session_id, "recognizer transport failed: {e}");
                    self.terminated = true;
                    break;
                }
            }
        }
    }
}

impl<T: RealtimeTransport> TranscriberBackend for LiveTranscriber<T> {
    fn capabilities(&self) -> Capabilities {
        self.caps
    }

    fn push_audio(&mut self, frame: AudioFrame) -> Result<Ack, TranscriberError> {
        if self.flushed || self.terminated {
            return Err(TranscriberError::BackendClosed);
        }
        self.clock_ms = self.clock_ms.max(frame.timestamp_ms);
        let bytes = encode_for_backend(&frame, self.caps);
        self.transport.send(audio_message(&bytes))?;
        self.frames += 1;
        self.pump();
        Ok(Ack { frames_queued: self.frames })
    }

    fn flush(&mut self) -> Result<(), TranscriberError> {
        if self.flushed {
            return Err(TranscriberError::BackendClosed);
        }
        self.flushed = true;
        if self.terminated {
            return Ok(());
        }
        self.transport.send(terminate_message())
    }

    fn poll_events(&mut self) -> Vec<TranscriptEvent> {
        self.pump();
        std::mem::take(&mut self.pending)
    }

    fn is_finished(&self) -> bool {
        self.flushed && self.terminated && self.pending.is_empty()
    }
}
