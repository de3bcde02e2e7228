//! Simulated VoIP transport: random and bursty packet loss, delay with
//! jitter, and bandwidth admission for concurrent calls.
//!
//! Loss has two sources. Independent per-packet loss with probability
//! `p_random`, and a two-state Gilbert-Elliott chain that moves between a
//! good and a bad state and drops with probability `burst_loss` while bad.
//! Both sources draw from the same uniform variate per frame, so the per-frame
//! drop probability is exactly `min(1, p_random + burst_loss * [bad])` and the
//! long-run loss rate is the additive `P_r + P_b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Duration of one audio frame.
pub const FRAME_MS: u64 = 20;
/// Bytes of 8 kHz mu-law audio in one frame.
pub const FRAME_BYTES: usize = 160;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("{field} must be a probability in [0, 1], got {value}")]
    NotAProbability { field: &'static str, value: f64 },
    #[error("{field} must be nonnegative and finite, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("{field} must be positive and finite, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("burst_exit must be > 0 when burst_enter > 0 (bad state would be absorbing)")]
    AbsorbingBadState,
    #[error("frame sequence numbers must strictly increase (saw {next} after {prev})")]
    NonMonotonicSeq { prev: u64, next: u64 },
    #[error("frame {seq} carries {got} payload bytes, stream uses {expected}")]
    PayloadLengthChanged { seq: u64, expected: usize, got: usize },
}

/// Parameters of the simulated network path for one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub p_random: f64,
    pub burst_enter: f64,
    pub burst_exit: f64,
    pub burst_loss: f64,
    pub delay_mean_ms: f64,
    pub jitter_std_ms: f64,
    pub bandwidth_avail_kbps: f64,
    pub per_call_kbps: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            p_random: 0.0,
            burst_enter: 0.0,
            burst_exit: 1.0,
            burst_loss: 0.0,
            delay_mean_ms: 0.0,
            jitter_std_ms: 0.0,
            bandwidth_avail_kbps: 10_000.0,
            per_call_kbps: 64.0,
            seed: 0,
        }
    }
}

fn check_prob(field: &'static str, value: f64) -> Result<(), ChannelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ChannelError::NotAProbability { field, value })
    }
}

impl ChannelConfig {
    /// Lossless, jitter-free channel with the given seed.
    pub fn lossless(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        check_prob("p_random", self.p_random)?;
        check_prob("burst_enter", self.burst_enter)?;
        check_prob("burst_exit", self.burst_exit)?;
        check_prob("burst_loss", self.burst_loss)?;
        for (field, value) in [("delay_mean_ms", self.delay_mean_ms), ("jitter_std_ms", self.jitter_std_ms)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ChannelError::Negative { field, value });
            }
        }
        for (field, value) in [
            ("bandwidth_avail_kbps", self.bandwidth_avail_kbps),
            ("per_call_kbps", self.per_call_kbps),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ChannelError::NotPositive { field, value });
            }
        }
        if self.burst_enter > 0.0 && self.burst_exit == 0.0 {
            return Err(ChannelError::AbsorbingBadState);
        }
        Ok(())
    }

    /// Copy of this config with `extra` added to the random loss, clamped to 1.
    pub fn with_extra_random_loss(&self, extra: f64) -> Self {
        Self { p_random: (self.p_random + extra.max(0.0)).min(1.0), ..self.clone() }
    }

    /// Stationary probability of the Gilbert-Elliott bad state.
    pub fn bad_state_occupancy(&self) -> f64 {
        if self.burst_enter == 0.0 {
            0.0
        } else {
            self.burst_enter / (self.burst_enter + self.burst_exit)
        }
    }

    /// Long-run bursty loss `P_b`.
    pub fn burst_loss_probability(&self) -> f64 {
        self.burst_loss * self.bad_state_occupancy()
    }
}

/// `P_l = P_r + P_b`, clamped to 1.
pub fn effective_loss_probability(cfg: &ChannelConfig) -> f64 {
    (cfg.p_random + cfg.burst_loss_probability()).clamp(0.0, 1.0)
}

/// `R_p = 1 - P_l`.
pub fn reception_rate(p_loss: f64) -> f64 {
    1.0 - p_loss
}

/// One audio frame on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketFrame {
    pub seq: u64,
    pub send_time_ms: u64,
    pub payload: Vec<u8>,
}

impl PacketFrame {
    /// `count` frames at the default 20 ms cadence starting at seq 0, with
    /// payloads produced by `payload(seq)`.
    pub fn stream(count: usize, mut payload: impl FnMut(u64) -> Vec<u8>) -> Vec<PacketFrame> {
        (0..count as u64)
            .map(|seq| PacketFrame { seq, send_time_ms: seq * FRAME_MS, payload: payload(seq) })
            .collect()
    }
}

/// Outcome of pushing a frame stream through a [`Channel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryTrace {
    /// `(seq, arrival_time_ms)` in arrival order.
    pub delivered: Vec<(u64, f64)>,
    /// Dropped sequence numbers in send order.
    pub dropped: Vec<u64>,
    pub empirical_loss_rate: f64,
}

impl DeliveryTrace {
    pub fn total(&self) -> usize {
        self.delivered.len() + self.dropped.len()
    }

    pub fn is_delivered(&self, seq: u64) -> bool {
        self.delivered.iter().any(|(s, _)| *s == seq)
    }

    /// Lengths of maximal runs of consecutive dropped sequence numbers.
    pub fn drop_bursts(&self) -> Vec<usize> {
        let mut bursts = Vec::new();
        let mut run = 0usize;
        let mut prev: Option<u64> = None;
        for &seq in &self.dropped {
            match prev {
                Some(p) if seq == p + 1 => run += 1,
                _ => {
                    if run > 0 {
                        bursts.push(run);
                    }
                    run = 1;
                }
            }
            prev = Some(seq);
        }
        if run > 0 {
            bursts.push(run);
        }
        bursts
    }

    pub fn mean_burst_length(&self) -> f64 {
        let bursts = self.drop_bursts();
        if bursts.is_empty() {
            0.0
        } else {
            bursts.iter().sum::<usize>() as f64 / bursts.len() as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    Random,
    Burst,
}

/// Fate of a single frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameFate {
    Delivered { arrival_time_ms: f64 },
    Dropped(DropCause),
}

/// Stateful per-stream channel. Not shared across threads; run one per call.
#[derive(Debug, Clone)]
pub struct Channel {
    cfg: ChannelConfig,
    rng: ChaCha8Rng,
    bad: bool,
    last_seq: Option<u64>,
    payload_len: Option<usize>,
}

impl Channel {
    pub fn new(cfg: ChannelConfig) -> Result<Self, ChannelError> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self { cfg, rng, bad: false, last_seq: None, payload_len: None })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn in_bad_state(&self) -> bool {
        self.bad
    }

    /// Push one frame through the channel.
    ///
    /// Every call consumes exactly three random draws regardless of outcome,
    /// so the fate of frame `k` depends only on the seed and `k`.
    pub fn send(&mut self, frame: &PacketFrame) -> Result<FrameFate, ChannelError> {
        if let Some(prev) = self.last_seq {
            if frame.seq <= prev {
                return Err(ChannelError::NonMonotonicSeq { prev, next: frame.seq });
            }
        }
        match self.payload_len {
            Some(expected) if expected != frame.payload.len() => {
                return Err(ChannelError::PayloadLengthChanged {
                    seq: frame.seq,
                    expected,
                    got: frame.payload.len(),
                });
            }
            _ => self.payload_len = Some(frame.payload.len()),
        }
        self.last_seq = Some(frame.seq);

        let u_state: f64 = self.rng.random();
        let u_loss: f64 = self.rng.random();
        let z: f64 = self.rng.sample(StandardNormal);

        self.bad = if self.bad { u_state >= self.cfg.burst_exit } else { u_state < self.cfg.burst_enter };

        if u_loss < self.cfg.p_random {
            return Ok(FrameFate::Dropped(DropCause::Random));
        }
        if self.bad && u_loss < self.cfg.p_random + self.cfg.burst_loss {
            return Ok(FrameFate::Dropped(DropCause::Burst));
        }
        let send = frame.send_time_ms as f64;
        let arrival = (send + self.cfg.delay_mean_ms + self.cfg.jitter_std_ms * z).max(send);
        Ok(FrameFate::Delivered { arrival_time_ms: arrival })
    }
}

/// Push a whole frame stream through a fresh channel built from `cfg`.
pub fn transmit<'a>(
    frames: impl IntoIterator<Item = &'a PacketFrame>,
    cfg: &ChannelConfig,
) -> Result<DeliveryTrace, ChannelError> {
    let mut channel = Channel::new(cfg.clone())?;
    let mut delivered = Vec::new();
    let mut dropped = Vec::new();
    for frame in frames {
        match channel.send(frame)? {
            FrameFate::Delivered { arrival_time_ms } => delivered.push((frame.seq, arrival_time_ms)),
            FrameFate::Dropped(_) => dropped.push(frame.seq),
        }
    }
    // Stable sort keeps send order among equal arrival times.
    delivered.sort_by(|a, b| a.1.total_cmp(&b.1));
    let total = delivered.len() + dropped.len();
    let empirical_loss_rate = if total == 0 { 0.0 } else { dropped.len() as f64 / total as f64 };
    Ok(DeliveryTrace { delivered, dropped, empirical_loss_rate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionStatus {
    Admitted,
    Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub status: AdmissionStatus,
    pub utilized_kbps: f64,
    /// `(utilized - avail) / utilized` when degraded, else 0. Added to the
    /// random loss of frames sent while over capacity.
    pub overflow_fraction: f64,
}

/// Check `N * B_call <= B_avail` for `active_calls` concurrent calls.
pub fn bandwidth_admission(active_calls: usize, cfg: &ChannelConfig) -> Admission {
    let utilized = active_calls as f64 * cfg.per_call_kbps;
    if utilized <= cfg.bandwidth_avail_kbps {
        Admission { status: AdmissionStatus::Admitted, utilized_kbps: utilized, overflow_fraction: 0.0 }
    } else {
        Admission {
            status: AdmissionStatus::Degraded,
            utilized_kbps: utilized,
            overflow_fraction: (utilized - cfg.bandwidth_avail_kbps) / utilized,
        }
    }
}

/// Channel config to use for new frames given the current admission state.
pub fn degrade_for_admission(cfg: &ChannelConfig, admission: &Admission) -> ChannelConfig {
    cfg.with_extra_random_loss(admission.overflow_fraction)
}
