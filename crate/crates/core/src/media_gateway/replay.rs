//! Scenario replay: turn a word-timed script (or a raw mu-law fixture) into
//! the event stream a live call would produce over a degraded channel.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::events::MediaEvent;
use super::mulaw;
use crate::netsim::{self, ChannelConfig, ChannelError, DeliveryTrace, PacketFrame, FRAME_BYTES, FRAME_MS};
use crate::triage::Severity;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("scenario not found: {0}")]
    ScenarioNotFound(PathBuf),
    #[error("bad scenario file {path}: {reason}")]
    BadScenario { path: PathBuf, reason: String },
    #[error("bad audio fixture {path}: {reason}")]
    BadFixture { path: PathBuf, reason: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptWord {
    pub text: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub words: Vec<ScriptWord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_fixture: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_severity: Option<Severity>,
}

impl ScenarioFile {
    /// Load a scenario; a relative `audio_fixture` is resolved against the
    /// scenario file's directory.
    pub fn load(path: &Path) -> Result<Self, ReplayError> {
        let raw = std::fs::read_to_string(path).map_err(|_| ReplayError::ScenarioNotFound(path.to_path_buf()))?;
        let mut scenario: ScenarioFile = serde_json::from_str(&raw)
            .map_err(|e| ReplayError::BadScenario { path: path.to_path_buf(), reason: e.to_string() })?;
        if let Some(fixture) = &scenario.audio_fixture {
            if fixture.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                scenario.audio_fixture = Some(base.join(fixture));
            }
        }
        Ok(scenario)
    }

    /// Script with words spaced evenly at `frames_per_word` frames each.
    pub fn from_text(name: &str, text: &str, frames_per_word: u64) -> Self {
        let step = frames_per_word * FRAME_MS;
        let words = text
            .split_whitespace()
            .enumerate()
            .map(|(i, w)| ScriptWord { text: w.to_string(), start_ms: i as u64 * step, end_ms: (i as u64 + 1) * step })
            .collect();
        Self { name: name.into(), words, audio_fixture: None, expected_severity: None }
    }

    pub fn script_text(&self) -> String {
        self.words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    /// Number of 20 ms frames needed to cover the last word.
    pub fn script_frame_count(&self) -> usize {
        let end = self.words.iter().map(|w| w.end_ms).max().unwrap_or(0);
        end.div_ceil(FRAME_MS) as usize
    }

    /// The audio frames of this scenario, from the fixture when one is set.
    pub fn frames(&self) -> Result<Vec<PacketFrame>, ReplayError> {
        match &self.audio_fixture {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| ReplayError::BadFixture { path: path.clone(), reason: e.to_string() })?;
                if bytes.is_empty() || bytes.len() % FRAME_BYTES != 0 {
                    return Err(ReplayError::BadFixture {
                        path: path.clone(),
                        reason: format!("{} bytes is not a whole number of {FRAME_BYTES}-byte frames", bytes.len()),
                    });
                }
                let chunks: Vec<&[u8]> = bytes.chunks(FRAME_BYTES).collect();
                Ok(PacketFrame::stream(chunks.len(), |seq| chunks[seq as usize].to_vec()))
            }
            None => Ok(PacketFrame::stream(self.script_frame_count(), |seq| self.synth_frame(seq))),
        }
    }

    /// A 440 Hz tone while a word is spoken, silence otherwise.
    fn synth_frame(&self, seq: u64) -> Vec<u8> {
        let t0 = seq * FRAME_MS;
        let speaking = self.words.iter().any(|w| w.start_ms < t0 + FRAME_MS && t0 < w.end_ms);
        if !speaking {
            return vec![0xFF; FRAME_BYTES];
        }
        let samples: Vec<i16> = (0..FRAME_BYTES)
            .map(|i| {
                let t = (seq as f64 * FRAME_BYTES as f64 + i as f64) / 8000.0;
                (8000.0 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()) as i16
            })
            .collect();
        mulaw::encode(&samples)
    }
}

/// Everything a replay produced.
#[derive(Debug, Clone)]
pub struct Replay {
    pub stream_id: String,
    pub events: Vec<MediaEvent>,
    pub trace: DeliveryTrace,
    pub frame_count: usize,
}

impl Replay {
    pub fn media_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind == super::EventKind::Media).count()
    }

    /// Newline-delimited wire messages.
    pub fn to_wire(&self) -> String {
        self.events.iter().map(|e| e.to_json() + "\n").collect()
    }
}

pub fn stream_id_for(scenario: &ScenarioFile, seed: u64) -> String {
    format!("SIM-{}-{seed}", scenario.name)
}

/// Replay a scenario through the channel: `start`, the surviving `media`
/// frames in arrival order, then `stop`. Deterministic given the seed.
pub fn replay_scenario(scenario: &ScenarioFile, cfg: &ChannelConfig) -> Result<Replay, ReplayError> {
    replay_with_stream_id(scenario, cfg, &stream_id_for(scenario, cfg.seed))
}

pub fn replay_with_stream_id(scenario: &ScenarioFile, cfg: &ChannelConfig, stream_id: &str) -> Result<Replay, ReplayError> {
    let frames = scenario.frames()?;
    let trace = netsim::transmit(&frames, cfg)?;

    let start_meta = json!({
        "streamSid": stream_id,
        "callSid": format!("CA-{}", scenario.name),
        "tracks": ["inbound"],
        "mediaFormat": {"encoding": "audio/x-mulaw", "sampleRate": 8000, "channels": 1},
        "customParameters": {"scenario": scenario.name},
    });
    let mut sequence = 1u64;
    let mut events = vec![MediaEvent::start(stream_id, sequence, start_meta)];
    for &(seq, _) in &trace.delivered {
        sequence += 1;
        let frame = &frames[seq as usize];
        events.push(MediaEvent::media(stream_id, sequence, frame.send_time_ms, frame.seq + 1, &frame.payload));
    }
    sequence += 1;
    events.push(MediaEvent::stop(stream_id, sequence));
    Ok(Replay { stream_id: stream_id.to_string(), events, trace, frame_count: frames.len() })
}
