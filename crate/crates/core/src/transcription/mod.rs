//! Speech-to-text behind a pluggable backend.
//!
//! [`MockTranscriber`] models how packet loss punches holes in a transcript:
//! it knows the word-timed script of a call and emits a word only when at
//! least half of that word's 20 ms frames reached it. [`live`] holds the
//! adapter for a hosted streaming recognizer.

pub mod live;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media_gateway::{mulaw, ScriptWord};
use crate::netsim::{DeliveryTrace, FRAME_MS};

/// Fraction of a word's frames that must arrive for the mock to emit it.
pub const WORD_COVERAGE_THRESHOLD: f64 = 0.5;
/// Audio time between mock partials.
pub const PARTIAL_INTERVAL_MS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptKind {
    Partial,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub session_id: String,
    pub kind: TranscriptKind,
    pub text: String,
    pub confidence: f64,
    pub received_at: u64,
}

impl TranscriptEvent {
    pub fn is_final(&self) -> bool {
        self.kind == TranscriptKind::Final
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioEncoding {
    Mulaw,
    Pcm16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub sample_rate: u32,
    pub encoding: AudioEncoding,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AudioPayload {
    Mulaw(Vec<u8>),
    Pcm16(Vec<i16>),
}

impl AudioPayload {
    pub fn encoding(&self) -> AudioEncoding {
        match self {
            AudioPayload::Mulaw(_) => AudioEncoding::Mulaw,
            AudioPayload::Pcm16(_) => AudioEncoding::Pcm16,
        }
    }

    pub fn to_pcm16(&self) -> Vec<i16> {
        match self {
            AudioPayload::Mulaw(bytes) => mulaw::decode(bytes),
            AudioPayload::Pcm16(samples) => samples.clone(),
        }
    }
}

/// One chunk of call audio, stamped with its position in the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrame {
    pub sequence: u64,
    pub timestamp_ms: u64,
    pub sample_rate: u32,
    pub payload: AudioPayload,
}

impl AudioFrame {
    /// 8 kHz mu-law frame as delivered by the media stream.
    pub fn mulaw(sequence: u64, timestamp_ms: u64, bytes: Vec<u8>) -> Self {
        Self { sequence, timestamp_ms, sample_rate: 8000, payload: AudioPayload::Mulaw(bytes) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub frames_queued: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranscriberError {
    #[error("transcriber backend is closed")]
    BackendClosed,
    #[error("backend expects {expected:?} at {expected_rate} Hz, got {got:?} at {got_rate} Hz")]
    EncodingMismatch { expected: AudioEncoding, expected_rate: u32, got: AudioEncoding, got_rate: u32 },
    #[error("transport: {0}")]
    Transport(String),
    #[error("missing credential {0}")]
    MissingCredential(&'static str),
}

/// A streaming recognizer driven from one session's task.
pub trait TranscriberBackend: Send {
    fn capabilities(&self) -> Capabilities;
    fn push_audio(&mut self, frame: AudioFrame) -> Result<Ack, TranscriberError>;
    /// No more audio; the backend finishes the open utterance with a final.
    fn flush(&mut self) -> Result<(), TranscriberError>;
    /// Drain transcript events produced so far, in order.
    fn poll_events(&mut self) -> Vec<TranscriptEvent>;
    /// True once flushed and the last final has been handed out.
    fn is_finished(&self) -> bool;
}

/// Frame indices spanned by a word at 20 ms alignment.
fn word_frames(word: &ScriptWord) -> std::ops::Range<u64> {
    let first = word.start_ms / FRAME_MS;
    let end = word.end_ms.div_ceil(FRAME_MS).max(first + 1);
    first..end
}

fn coverage(word: &ScriptWord, delivered: &BTreeSet<u64>) -> f64 {
    let frames = word_frames(word);
    let total = frames.end - frames.start;
    let got = delivered.range(frames).count() as u64;
    got as f64 / total as f64
}

/// Text and confidence of the final transcript given the delivered frame indices.
pub fn transcribe_coverage(script: &[ScriptWord], delivered: &BTreeSet<u64>) -> (String, f64) {
    let mut words = Vec::new();
    let mut coverages = Vec::new();
    for word in script {
        let c = coverage(word, delivered);
        if c >= WORD_COVERAGE_THRESHOLD {
            words.push(word.text.as_str());
            coverages.push(c);
        }
    }
    let confidence = if coverages.is_empty() { 0.0 } else { coverages.iter().sum::<f64>() / coverages.len() as f64 };
    (words.join(" "), confidence)
}

/// Deterministic final transcript of `script` after the channel produced `trace`.
pub fn mock_transcribe(session_id: &str, script: &[ScriptWord], trace: &DeliveryTrace) -> TranscriptEvent {
    let delivered: BTreeSet<u64> = trace.delivered.iter().map(|(seq, _)| *seq).collect();
    let (text, confidence) = transcribe_coverage(script, &delivered);
    TranscriptEvent {
        session_id: session_id.into(),
        kind: TranscriptKind::Final,
        text,
        confidence,
        received_at: script.iter().map(|w| w.end_ms).max().unwrap_or(0),
    }
}

/// Only finals move on to reconstruction; partials stay with the UI.
pub fn forward_policy(events: impl IntoIterator<Item = TranscriptEvent>) -> impl Iterator<Item = TranscriptEvent> {
    events.into_iter().filter(TranscriptEvent::is_final)
}

/// Script-driven stand-in for a streaming recognizer.
#[derive(Debug, Clone)]
pub struct MockTranscriber {
    session_id: String,
    script: Vec<ScriptWord>,
    delivered: BTreeSet<u64>,
    audio_clock_ms: u64,
    next_partial_ms: u64,
    pending: Vec<TranscriptEvent>,
    frames: u64,
    flushed: bool,
}

impl MockTranscriber {
    pub fn new(session_id: impl Into<String>, script: Vec<ScriptWord>) -> Self {
        Self {
            session_id: session_id.into(),
            script,
            delivered: BTreeSet::new(),
            audio_clock_ms: 0,
            next_partial_ms: PARTIAL_INTERVAL_MS,
            pending: Vec::new(),
            frames: 0,
            flushed: false,
        }
    }

    /// Leading script words that already have enough coverage. Later audio
    /// can only add coverage, so this is always a prefix of the final text.
    fn partial_text(&self) -> String {
        self.script
            .iter()
            .take_while(|w| coverage(w, &self.delivered) >= WORD_COVERAGE_THRESHOLD)
            .map(|w| w.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn emit(&mut self, kind: TranscriptKind, text: String, confidence: f64, at: u64) {
        self.pending.push(TranscriptEvent { session_id: self.session_id.clone(), kind, text, confidence, received_at: at });
    }
}

impl TranscriberBackend for MockTranscriber {
    fn capabilities(&self) -> Capabilities {
        Capabilities { sample_rate: 8000, encoding: AudioEncoding::Mulaw }
    }

    fn push_audio(&mut self, frame: AudioFrame) -> Result<Ack, TranscriberError> {
        if self.flushed {
            return Err(TranscriberError::BackendClosed);
        }
        let caps = self.capabilities();
        if frame.payload.encoding() != caps.encoding || frame.sample_rate != caps.sample_rate {
            return Err(TranscriberError::EncodingMismatch {
                expected: caps.encoding,
                expected_rate: caps.sample_rate,
                got: frame.payload.encoding(),
                got_rate: frame.sample_rate,
            });
        }
        self.delivered.insert(frame.timestamp_ms / FRAME_MS);
        self.frames += 1;
        self.audio_clock_ms = self.audio_clock_ms.max(frame.timestamp_ms + FRAME_MS);
        while self.audio_clock_ms >= self.next_partial_ms {
            let at = self.next_partial_ms;
            self.next_partial_ms += PARTIAL_INTERVAL_MS;
            let text = self.partial_text();
            if !text.is_empty() {
                self.emit(TranscriptKind::Partial, text, 0.5, at);
            }
        }
        Ok(Ack { frames_queued: self.frames })
    }

    fn flush(&mut self) -> Result<(), TranscriberError> {
        if self.flushed {
            return Err(TranscriberError::BackendClosed);
        }
        self.flushed = true;
        let (text, confidence) = transcribe_coverage(&self.script, &self.delivered);
        let at = self.script.iter().map(|w| w.end_ms).max().unwrap_or(0).max(self.audio_clock_ms);
        self.emit(TranscriptKind::Final, text, confidence, at);
        Ok(())
    }

    fn poll_events(&mut self) -> Vec<TranscriptEvent> {
        std::mem::take(&mut self.pending)
    }

    fn is_finished(&self) -> bool {
        self.flushed && self.pending.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media_gateway::ScenarioFile;

    fn script(text: &str, frames_per_word: u64) -> Vec<ScriptWord> {
        ScenarioFile::from_text("t", text, frames_per_word).words
    }

    fn trace_dropping(total: u64, dropped: impl Fn(u64) -> bool) -> DeliveryTrace {
        let delivered: Vec<(u64, f64)> = (0..total).filter(|s| !dropped(*s)).map(|s| (s, (s * 20) as f64)).collect();
        let dropped: Vec<u64> = (0..total).filter(|s| dropped(*s)).collect();
        let rate = dropped.len() as f64 / total.max(1) as f64;
        DeliveryTrace { delivered, dropped, empirical_loss_rate: rate }
    }

    #[test]
    fn zero_loss_gives_full_text() {
        let s = script("there's a guy with a gun", 5);
        let ev = mock_transcribe("c", &s, &trace_dropping(30, |_| false));
        assert_eq!(ev.text, "there's a guy with a gun");
        assert_eq!(ev.confidence, 1.0);
        assert!(ev.is_final());
    }

    #[test]
    fn total_loss_gives_empty_text() {
        let s = script("there's a guy with a gun", 5);
        let ev = mock_transcribe("c", &s, &trace_dropping(30, |_| true));
        assert_eq!(ev.text, "");
        assert_eq!(ev.confidence, 0.0);
    }

    #[test]
    fn lost_words_disappear() {
        // Frames 15..=24 carry "with" and "a".
        let s = script("there's a guy with a gun", 5);
        let ev = mock_transcribe("c", &s, &trace_dropping(30, |f| (15..=24).contains(&f)));
        assert_eq!(ev.text, "there's a guy gun");
    }

    #[test]
    fn half_coverage_is_enough() {
        let s = script("help", 4);
        let ev = mock_transcribe("c", &s, &trace_dropping(4, |f| f >= 2));
        assert_eq!(ev.text, "help");
        assert_eq!(ev.confidence, 0.5);
        let ev = mock_transcribe("c", &s, &trace_dropping(4, |f| f >= 1));
        assert_eq!(ev.text, "");
    }

    #[test]
    fn forward_policy_keeps_finals_only() {
        let ev = |kind, text: &str| TranscriptEvent {
            session_id: "s".into(),
            kind,
            text: text.into(),
            confidence: 1.0,
            received_at: 0,
        };
        let out: Vec<_> = forward_policy(vec![
            ev(TranscriptKind::Partial, "a"),
            ev(TranscriptKind::Partial, "a b"),
            ev(TranscriptKind::Final, "a b c"),
        ])
        .collect();
        assert_eq!(out, vec![ev(TranscriptKind::Final, "a b c")]);
        assert_eq!(forward_policy(Vec::new()).count(), 0);
        let out: Vec<_> = forward_policy(vec![
            ev(TranscriptKind::Final, "x"),
            ev(TranscriptKind::Partial, "y"),
            ev(TranscriptKind::Final, "z"),
        ])
        .map(|e| e.text)
        .collect();
        assert_eq!(out, vec!["x", "z"]);
    }

    #[test]
    fn mock_backend_emits_partials_then_final() {
        let words = script("help my house is on fire please hurry", 25);
        let mut t = MockTranscriber::new("c", words.clone());
        for seq in 0..200u64 {
            t.push_audio(AudioFrame::mulaw(seq, seq * 20, vec![0xFF; 160])).unwrap();
        }
        let partials = t.poll_events();
        assert_eq!(partials.len(), 4);
        assert!(partials[0].text.starts_with("help"));
        assert!(!t.is_finished());
        t.flush().unwrap();
        let finals = t.poll_events();
        assert_eq!(finals.len(), 1);
        assert_eq!(finals[0].text, "help my house is on fire please hurry");
        for p in &partials {
            assert!(finals[0].text.starts_with(&p.text));
        }
        assert!(t.is_finished());
    }

    #[test]
    fn closed_and_mismatched_backends_reject_audio() {
        let mut t = MockTranscriber::new("c", script("help", 5));
        let pcm = AudioFrame { sequence: 1, timestamp_ms: 0, sample_rate: 8000, payload: AudioPayload::Pcm16(vec![0; 160]) };
        assert!(matches!(t.push_audio(pcm), Err(TranscriberError::EncodingMismatch { .. })));
        t.flush().unwrap();
        assert_eq!(
            t.push_audio(AudioFrame::mulaw(2, 20, vec![0xFF; 160])),
            Err(TranscriberError::BackendClosed)
        );
        assert_eq!(t.flush(), Err(TranscriberError::BackendClosed));
    }
}
