//! Emergency call triage over degraded VoIP audio.
//!
//! Calls arrive as media-stream events, pass through a simulated lossy
//! channel, get transcribed, reconstructed against a corpus of past calls,
//! scored for severity and ranked in a dispatcher queue.

pub mod evalkit;
pub mod knowledge;
pub mod media_gateway;
pub mod netsim;
pub mod prioritizer;
pub mod service;
pub mod text;
pub mod transcription;
pub mod triage;
