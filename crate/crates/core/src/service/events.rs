//! Events pushed to dispatcher consoles over `WS /live`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiveEventKind {
    CallStarted,
    TranscriptPartial,
    TranscriptFinal,
    Reconstruction,
    SeverityUpdate,
    PriorityUpdate,
    CallClosed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveEvent {
    /// Per-session counter starting at 1, without gaps.
    pub seq: u64,
    pub session_id: String,
    pub kind: LiveEventKind,
    pub payload: Value,
}

/// Hands out gap-free per-session sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct EventSequencer {
    next: HashMap<String, u64>,
}

impl EventSequencer {
    pub fn stamp(&mut self, session_id: &str, kind: LiveEventKind, payload: impl Serialize) -> LiveEvent {
        let seq = self.next.entry(session_id.to_string()).or_insert(0);
        *seq += 1;
        LiveEvent {
            seq: *seq,
            session_id: session_id.to_string(),
            kind,
            payload: serde_json::to_value(payload).expect("event payloads serialize"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sequences_are_per_session() {
        let mut s = EventSequencer::default();
        let a1 = s.stamp("a", LiveEventKind::CallStarted, json!({}));
        let b1 = s.stamp("b", LiveEventKind::CallStarted, json!({}));
        let a2 = s.stamp("a", LiveEventKind::CallClosed, json!({}));
        assert_eq!((a1.seq, b1.seq, a2.seq), (1, 1, 2));
    }

    #[test]
    fn wire_shape() {
        let mut s = EventSequencer::default();
        let e = s.stamp("call-1", LiveEventKind::SeverityUpdate, json!({"level": "severe"}));
        assert_eq!(
            serde_json::to_value(&e).unwrap(),
            json!({"seq": 1, "session_id": "call-1", "kind": "severity_update", "payload": {"level": "severe"}})
        );
    }
}
