//! Media-stream wire protocol: one JSON message per WebSocket frame with
//! `connected`, `start`, `media` and `stop` events.
//!
//! Field names follow the telephony vendor's media stream format:
//! `event`, `streamSid`, `sequenceNumber`, `media.payload`,
//! `media.timestamp`. Numeric fields travel as decimal strings. Fields this
//! module does not interpret are kept verbatim so that parsing and
//! re-serializing a message is the identity.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("message is not a JSON object: {0}")]
    InvalidJson(String),
    #[error("unknown event kind `{0}`")]
    UnknownEvent(String),
    #[error("media payload is not valid base64 audio: {0}")]
    MalformedPayload(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` has an invalid value")]
    InvalidField { field: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Connected,
    Start,
    Media,
    Stop,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Connected => "connected",
            EventKind::Start => "start",
            EventKind::Media => "media",
            EventKind::Stop => "stop",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "connected" => EventKind::Connected,
            "start" => EventKind::Start,
            "media" => EventKind::Media,
            "stop" => EventKind::Stop,
            _ => return None,
        })
    }
}

/// A parsed protocol message.
#[derive(Debug, Clone, PartialEq)]
pub struct MediaEvent {
    pub kind: EventKind,
    pub stream_id: Option<String>,
    pub sequence: Option<u64>,
    /// Base64 mu-law bytes, media events only. Decode with [`MediaEvent::payload`].
    pub payload_b64: Option<String>,
    pub timestamp_ms: Option<u64>,
    /// Uninterpreted members of the `media` object (track, chunk, ...).
    media_extra: Map<String, Value>,
    /// Uninterpreted top-level members (`start`, `stop`, `protocol`, ...).
    extra: Map<String, Value>,
}

fn numeric(value: &Value, field: &'static str) -> Result<u64, EventError> {
    match value {
        Value::String(s) => s.parse().map_err(|_| EventError::InvalidField { field }),
        Value::Number(n) => n.as_u64().ok_or(EventError::InvalidField { field }),
        _ => Err(EventError::InvalidField { field }),
    }
}

fn decode_payload(b64: &str) -> Result<Vec<u8>, EventError> {
    let bytes = STANDARD.decode(b64).map_err(|e| EventError::MalformedPayload(e.to_string()))?;
    if bytes.is_empty() {
        return Err(EventError::MalformedPayload("empty payload".into()));
    }
    Ok(bytes)
}

impl MediaEvent {
    pub fn connected() -> Self {
        let mut extra = Map::new();
        extra.insert("protocol".into(), Value::from("Call"));
        extra.insert("version".into(), Value::from("1.0.0"));
        Self::bare(EventKind::Connected, None, None, extra)
    }

    /// A `start` event; `start` is the metadata object carried under the `start` key.
    pub fn start(stream_id: &str, sequence: u64, start: Value) -> Self {
        let mut extra = Map::new();
        extra.insert("start".into(), start);
        Self::bare(EventKind::Start, Some(stream_id.into()), Some(sequence), extra)
    }

    pub fn media(stream_id: &str, sequence: u64, timestamp_ms: u64, chunk: u64, payload: &[u8]) -> Self {
        let mut media_extra = Map::new();
        media_extra.insert("track".into(), Value::from("inbound"));
        media_extra.insert("chunk".into(), Value::from(chunk.to_string()));
        Self {
            kind: EventKind::Media,
            stream_id: Some(stream_id.into()),
            sequence: Some(sequence),
            payload_b64: Some(STANDARD.encode(payload)),
            timestamp_ms: Some(timestamp_ms),
            media_extra,
            extra: Map::new(),
        }
    }

    pub fn stop(stream_id: &str, sequence: u64) -> Self {
        let mut stop = Map::new();
        stop.insert("streamSid".into(), Value::from(stream_id));
        let mut extra = Map::new();
        extra.insert("stop".into(), Value::Object(stop));
        Self::bare(EventKind::Stop, Some(stream_id.into()), Some(sequence), extra)
    }

    fn bare(kind: EventKind, stream_id: Option<String>, sequence: Option<u64>, extra: Map<String, Value>) -> Self {
        Self { kind, stream_id, sequence, payload_b64: None, timestamp_ms: None, media_extra: Map::new(), extra }
    }

    /// Decoded mu-law bytes of a media event.
    pub fn payload(&self) -> Result<Vec<u8>, EventError> {
        let b64 = self.payload_b64.as_deref().ok_or(EventError::MissingField("media.payload"))?;
        decode_payload(b64)
    }

    /// `start.customParameters`, if present.
    pub fn custom_parameters(&self) -> Option<&Map<String, Value>> {
        self.extra.get("start")?.get("customParameters")?.as_object()
    }

    pub fn media_chunk(&self) -> Option<u64> {
        self.media_extra.get("chunk").and_then(|v| numeric(v, "media.chunk").ok())
    }

    /// Serialize back to the wire form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("map of JSON values always serializes")
    }

    pub fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("event".into(), Value::from(self.kind.as_str()));
        if let Some(id) = &self.stream_id {
            obj.insert("streamSid".into(), Value::from(id.as_str()));
        }
        if let Some(seq) = self.sequence {
            obj.insert("sequenceNumber".into(), Value::from(seq.to_string()));
        }
        if self.kind == EventKind::Media {
            let mut media = self.media_extra.clone();
            if let Some(ts) = self.timestamp_ms {
                media.insert("timestamp".into(), Value::from(ts.to_string()));
            }
            if let Some(p) = &self.payload_b64 {
                media.insert("payload".into(), Value::from(p.as_str()));
            }
            obj.insert("media".into(), Value::Object(media));
        }
        for (k, v) in &self.extra {
            obj.insert(k.clone(), v.clone());
        }
        Value::Object(obj)
    }
}

/// Parse one complete protocol message.
pub fn parse_media_event(text: &str) -> Result<MediaEvent, EventError> {
    let value: Value = serde_json::from_str(text).map_err(|e| EventError::InvalidJson(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(EventError::InvalidJson("top-level value is not an object".into()));
    };
    let kind_str = match obj.remove("event") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(EventError::InvalidField { field: "event" }),
        None => return Err(EventError::MissingField("event")),
    };
    let kind = EventKind::parse(&kind_str).ok_or(EventError::UnknownEvent(kind_str))?;

    let stream_id = match obj.remove("streamSid") {
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(EventError::InvalidField { field: "streamSid" }),
        None => None,
    };
    let sequence = obj.remove("sequenceNumber").map(|v| numeric(&v, "sequenceNumber")).transpose()?;

    let mut event = MediaEvent::bare(kind, stream_id, sequence, Map::new());
    if kind == EventKind::Media {
        let mut media = match obj.remove("media") {
            Some(Value::Object(m)) => m,
            Some(_) => return Err(EventError::InvalidField { field: "media" }),
            None => return Err(EventError::MissingField("media")),
        };
        let payload = match media.remove("payload") {
            Some(Value::String(p)) => p,
            Some(_) => return Err(EventError::MalformedPayload("payload is not a string".into())),
            None => return Err(EventError::MissingField("media.payload")),
        };
        decode_payload(&payload)?;
        let timestamp = media
            .remove("timestamp")
            .map(|v| numeric(&v, "media.timestamp"))
            .transpose()?
            .ok_or(EventError::MissingField("media.timestamp"))?;
        if event.stream_id.is_none() {
            return Err(EventError::MissingField("streamSid"));
        }
        if event.sequence.is_none() {
            return Err(EventError::MissingField("sequenceNumber"));
        }
        event.payload_b64 = Some(payload);
        event.timestamp_ms = Some(timestamp);
        event.media_extra = media;
    } else if matches!(kind, EventKind::Start | EventKind::Stop) && event.stream_id.is_none() {
        return Err(EventError::MissingField("streamSid"));
    }
    event.extra = obj;
    Ok(event)
}
