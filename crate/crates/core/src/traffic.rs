//! Application sources and per-flow packet queues.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto};

use crate::error::{Error, Result};

/// QoS class identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Qci(pub u8);

impl Qci {
    pub const VOIP: Qci = Qci(1);
    pub const VIDEO: Qci = Qci(2);
    pub const WEB: Qci = Qci(9);
}

impl fmt::Display for Qci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The three applications every UE runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficClass {
    Voip,
    Video,
    Web,
}

impl TrafficClass {
    /// All classes in scheduling priority order.
    pub const ALL: [TrafficClass; 3] = [TrafficClass::Voip, TrafficClass::Video, TrafficClass::Web];

    pub fn qci(self) -> Qci {
        match self {
            TrafficClass::Voip => Qci::VOIP,
            TrafficClass::Video => Qci::VIDEO,
            TrafficClass::Web => Qci::WEB,
        }
    }

    /// Lower is served first.
    pub fn priority(self) -> u8 {
        match self {
            TrafficClass::Voip => 2,
            TrafficClass::Video => 4,
            TrafficClass::Web => 9,
        }
    }

    pub fn is_realtime(self) -> bool {
        !matches!(self, TrafficClass::Web)
    }

    /// Position in [`TrafficClass::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TrafficClass::Voip => "voip",
            TrafficClass::Video => "video",
            TrafficClass::Web => "web",
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Source and queue parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub video_rate_kbps: f64,
    pub video_frame_interval_ms: u64,
    pub video_delay_budget_ms: u64,
    pub voip_rate_kbps: f64,
    pub voip_interval_ms: u64,
    pub voip_delay_budget_ms: u64,
    pub web_pareto_shape: f64,
    pub web_mean_page_bytes: f64,
    pub web_max_page_bytes: f64,
    pub web_packet_bytes: u32,
    pub web_reading_mean_s: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            video_rate_kbps: 440.0,
            video_frame_interval_ms: 40,
            video_delay_budget_ms: 150,
            voip_rate_kbps: 64.0,
            voip_interval_ms: 20,
            voip_delay_budget_ms: 100,
            web_pareto_shape: 1.2,
            web_mean_page_bytes: 100_000.0,
            web_max_page_bytes: 2_000_000.0,
            web_packet_bytes: 1500,
            web_reading_mean_s: 5.0,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("video_rate_kbps", self.video_rate_kbps),
            ("voip_rate_kbps", self.voip_rate_kbps),
            ("web_mean_page_bytes", self.web_mean_page_bytes),
            ("web_max_page_bytes", self.web_max_page_bytes),
            ("web_reading_mean_s", self.web_reading_mean_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        if self.video_frame_interval_ms == 0 || self.voip_interval_ms == 0 {
            return Err(Error::param(
                "interval",
                "packet intervals must be at least 1 ms",
            ));
        }
        if !(self.web_pareto_shape.is_finite() && self.web_pareto_shape > 1.0) {
            return Err(Error::param(
                "web_pareto_shape",
                "shape must exceed 1 for a finite mean",
            ));
        }
        if self.web_packet_bytes == 0 {
            return Err(Error::param("web_packet_bytes", "must be positive"));
        }
        if self.video_frame_bytes() == 0 || self.voip_packet_bytes() == 0 {
            return Err(Error::param("rate", "packet size rounds to zero bytes"));
        }
        Ok(())
    }

    pub fn video_frame_bytes(&self) -> u32 {
        (self.video_rate_kbps * self.video_frame_interval_ms as f64 / 8.0).round() as u32
    }

    pub fn voip_packet_bytes(&self) -> u32 {
        (self.voip_rate_kbps * self.voip_interval_ms as f64 / 8.0).round() as u32
    }

    /// Pareto scale giving `web_mean_page_bytes` before truncation.
    pub fn web_pareto_scale(&self) -> f64 {
        self.web_mean_page_bytes * (self.web_pareto_shape - 1.0) / self.web_pareto_shape
    }

    pub fn delay_budget(&self, class: TrafficClass) -> Option<u64> {
        match class {
            TrafficClass::Voip => Some(self.voip_delay_budget_ms),
            TrafficClass::Video => Some(self.video_delay_budget_ms),
            TrafficClass::Web => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub size: u32,
    /// Arrival TTI.
    pub arrival: u64,
    /// Bytes not yet transmitted.
    pub remaining: u32,
}

impl Packet {
    pub fn new(size: u32, arrival: u64) -> Self {
        debug_assert!(size >= 1);
        Self {
            size,
            arrival,
            remaining: size,
        }
    }
}

/// Constant-size packets every `interval` TTIs, offset by `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicSource {
    pub size: u32,
    pub interval: u64,
    pub phase: u64,
}

impl PeriodicSource {
    pub fn video(cfg: &TrafficConfig, phase: u64) -> Self {
        Self {
            size: cfg.video_frame_bytes(),
            interval: cfg.video_frame_interval_ms,
            phase: phase % cfg.video_frame_interval_ms,
        }
    }

    pub fn voip(cfg: &TrafficConfig, phase: u64) -> Self {
        Self {
            size: cfg.voip_packet_bytes(),
            interval: cfg.voip_interval_ms,
            phase: phase % cfg.voip_interval_ms,
        }
    }

    /// Packet size due at `tti`, if any.
    pub fn arrivals(&self, tti: u64) -> Option<u32> {
        (tti % self.interval == self.phase).then_some(self.size)
    }
}

/// Renewal web source: a Pareto-sized page arrives as one burst of packets,
/// followed by an exponential reading time.
#[derive(Debug, Clone)]
pub struct WebSource {
    page_size: Pareto<f64>,
    reading: Exp<f64>,
    max_page: f64,
    packet_bytes: u32,
    next_page: u64,
}

impl WebSource {
    /// The first page arrives one reading time after `start`.
    pub fn new<R: Rng + ?Sized>(cfg: &TrafficConfig, start: u64, rng: &mut R) -> Result<Self> {
        let page_size = Pareto::new(cfg.web_pareto_scale(), cfg.web_pareto_shape)
            .map_err(|e| Error::param("web_pareto", e.to_string()))?;
        let reading = Exp::new(1.0 / (cfg.web_reading_mean_s * 1000.0))
            .map_err(|e| Error::param("web_reading_mean_s", e.to_string()))?;
        let mut src = Self {
            page_size,
            reading,
            max_page: cfg.web_max_page_bytes,
            packet_bytes: cfg.web_packet_bytes,
            next_page: 0,
        };
        src.next_page = start + src.reading_time(rng);
        Ok(src)
    }

    fn reading_time<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        (self.reading.sample(rng).round() as u64).max(1)
    }

    /// Draw one page size in bytes, capped at the configured maximum.
    pub fn draw_page<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        (self.page_size.sample(rng).min(self.max_page).ceil() as u64).max(1)
    }

    pub fn next_page(&self) -> u64 {
        self.next_page
    }

    /// Packets (sizes) arriving at `tti`. Randomness is only drawn on page
    /// boundaries.
    pub fn arrivals<R: Rng + ?Sized>(&mut self, tti: u64, rng: &mut R) -> Vec<u32> {
        if tti < self.next_page {
            return Vec::new();
        }
        let page = self.draw_page(rng);
        self.next_page = tti + self.reading_time(rng);
        segment(page, self.packet_bytes)
    }
}

/// Split `bytes` into `mtu`-sized packets, the last one holding the remainder.
pub fn segment(bytes: u64, mtu: u32) -> Vec<u32> {
    let full = bytes / mtu as u64;
    let rest = (bytes % mtu as u64) as u32;
    let mut out = vec![mtu; full as usize];
    if rest > 0 {
        out.push(rest);
    }
    out
}

/// Running per-flow delay statistics over delivered packets.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DelayStats {
    pub count: u64,
    pub sum_ms: u64,
    pub max_ms: u64,
    last_ms: u64,
    pub jitter_sum_ms: u64,
}

impl DelayStats {
    pub fn record(&mut self, delay_ms: u64) {
        if self.count > 0 {
            self.jitter_sum_ms += delay_ms.abs_diff(self.last_ms);
        }
        self.count += 1;
        self.sum_ms += delay_ms;
        self.max_ms = self.max_ms.max(delay_ms);
        self.last_ms = delay_ms;
    }

    /// Mean |d_i − d_{i−1}|, or `None` below two packets.
    pub fn mean_jitter(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.jitter_sum_ms as f64 / (self.count - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounters {
    pub arrived_packets: u64,
    pub arrived_bytes: u64,
    /// Packets whose last byte was transmitted.
    pub served_packets: u64,
    /// Every transmitted byte, including bytes of packets later dropped.
    pub served_bytes: u64,
    pub dropped_packets: u64,
    /// Untransmitted bytes of dropped packets.
    pub dropped_bytes: u64,
}

/// Outcome of one transmission opportunity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TxOutcome {
    pub bytes: u64,
    pub packets_completed: u64,
    pub delay_sum_ms: u64,
}

/// One application stream of one UE.
#[derive(Debug, Clone)]
pub struct Flow {
    pub class: TrafficClass,
    pub ue: usize,
    delay_budget: Option<u64>,
    queue: VecDeque<Packet>,
    queued_bytes: u64,
    pub counters: FlowCounters,
    pub delays: DelayStats,
}

impl Flow {
    pub fn new(class: TrafficClass, ue: usize, delay_budget: Option<u64>) -> Self {
        Self {
            class,
            ue,
            delay_budget,
            queue: VecDeque::new(),
            queued_bytes: 0,
            counters: FlowCounters::default(),
            delays: DelayStats::default(),
        }
    }

    pub fn delay_budget(&self) -> Option<u64> {
        self.delay_budget
    }

    pub fn enqueue(&mut self, size: u32, now: u64) {
        self.queue.push_back(Packet::new(size, now));
        self.queued_bytes += size as u64;
        self.counters.arrived_packets += 1;
        self.counters.arrived_bytes += size as u64;
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    pub fn queued_packets(&self) -> usize {
        self.queue.len()
    }

    pub fn is_backlogged(&self) -> bool {
        self.queued_bytes > 0
    }

    pub fn head(&self) -> Option<&Packet> {
        self.queue.front()
    }

    /// Drop every head-of-line packet that has waited strictly longer than the
    /// delay budget. Returns the number of packets dropped.
    pub fn expire(&mut self, now: u64) -> u64 {
        let Some(budget) = self.delay_budget else {
            return 0;
        };
        let mut dropped = 0;
        while let Some(p) = self.queue.front() {
            if now.saturating_sub(p.arrival) <= budget {
                break;
            }
            self.queued_bytes -= p.remaining as u64;
            self.counters.dropped_bytes += p.remaining as u64;
            self.counters.dropped_packets += 1;
            self.queue.pop_front();
            dropped += 1;
        }
        dropped
    }

    /// Transmit up to `bits` from the head of the queue at TTI `now`.
    /// A packet's delay is `now − arrival`, recorded when its last byte leaves.
    pub fn transmit(&mut self, bits: u64, now: u64) -> TxOutcome {
        let mut budget = bits / 8;
        let mut out = TxOutcome::default();
        while budget > 0 {
            let Some(p) = self.queue.front_mut() else {
                break;
            };
            let take = budget.min(p.remaining as u64);
            p.remaining -= take as u32;
            budget -= take;
            out.bytes += take;
            if p.remaining == 0 {
                let delay = now - p.arrival;
                self.delays.record(delay);
                out.packets_completed += 1;
                out.delay_sum_ms += delay;
                self.queue.pop_front();
            }
        }
        self.queued_bytes -= out.bytes;
        self.counters.served_bytes += out.bytes;
        self.counters.served_packets += out.packets_completed;
        out
    }

    /// arrived = served + dropped + queued, for packets and bytes.
    pub fn check_conservation(&self) -> bool {
        let c = &self.counters;
        c.arrived_packets == c.served_packets + c.dropped_packets + self.queue.len() as u64
            && c.arrived_bytes == c.served_bytes + c.dropped_bytes + self.queued_bytes
    }
}
