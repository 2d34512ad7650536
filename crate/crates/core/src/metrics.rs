//! Evaluation quantities: throughput, delay, jitter, packet loss, Jain
//! fairness and throughput CDFs.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::traffic::{Flow, FlowCounters, TrafficClass};

/// Jain's index (Σx)² / (n·Σx²). An all-zero or empty input is reported as
/// 1.0: nobody got more than anybody else.
pub fn jain_fairness(values: &[f64]) -> Result<f64> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::param(
            "values",
            "throughputs must be finite and non-negative",
        ));
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Ok(1.0);
    }
    Ok(sum * sum / (values.len() as f64 * sum_sq))
}

/// Mean |d_i − d_{i−1}| per flow, averaged over flows with at least two
/// delivered packets. `None` when no flow qualifies.
pub fn mean_jitter(per_flow_delays: &[&[f64]]) -> Option<f64> {
    let per_flow: Vec<f64> = per_flow_delays
        .iter()
        .filter(|d| d.len() >= 2)
        .map(|d| d.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (d.len() - 1) as f64)
        .collect();
    (!per_flow.is_empty()).then(|| per_flow.iter().sum::<f64>() / per_flow.len() as f64)
}

/// Dropped over arrived packets; 0 when nothing arrived.
pub fn plr(c: &FlowCounters) -> f64 {
    if c.arrived_packets == 0 {
        0.0
    } else {
        c.dropped_packets as f64 / c.arrived_packets as f64
    }
}

/// Empirical CDF of `values` at each grid point.
pub fn cdf(values: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::param("values", "empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&t| (t, sorted.partition_point(|&v| v <= t) as f64 / n))
        .collect())
}

/// Grid from 0 in `step` increments up to the first multiple at or above the
/// largest value, so the CDF always ends at 1.0.
pub fn cdf_grid(values: &[f64], step: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let points = (max / step).ceil() as usize;
    (0..=points).map(|i| i as f64 * step).collect()
}

pub const CDF_STEP_KBPS: f64 = 10.0;

/// Aggregates for one traffic class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: TrafficClass,
    /// Mean over UEs of served throughput (Kbps) over the traffic window.
    pub thr_kbps: f64,
    /// Mean delay over delivered packets (ms).
    pub delay_ms: f64,
    pub jitter_ms: f64,
    pub plr: f64,
    /// Jain index over per-UE throughputs of this class.
    pub fairness: f64,
    pub max_delay_ms: u64,
    pub per_ue_thr_kbps: Vec<f64>,
    pub served_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub num_ues: usize,
    pub classes: Vec<ClassMetrics>,
}

impl RunMetrics {
    /// Aggregate final flow state; throughput is normalized by `window_ms`.
    pub fn from_flows(flows: &[Flow], num_ues: usize, window_ms: u64) -> Result<Self> {
        if window_ms == 0 {
            return Err(Error::param("traffic window", "must be positive"));
        }
        let classes = TrafficClass::ALL
            .into_iter()
            .map(|class| {
                let members: Vec<&Flow> = flows.iter().filter(|f| f.class == class).collect();
                let mut per_ue = vec![0.0; num_ues];
                let mut totals = FlowCounters::default();
                let (mut delay_sum, mut delivered, mut max_delay) = (0u64, 0u64, 0u64);
                let mut jitters = Vec::new();
                for f in &members {
                    // bits per ms == Kbps
                    per_ue[f.ue] += f.counters.served_bytes as f64 * 8.0 / window_ms as f64;
                    totals.arrived_packets += f.counters.arrived_packets;
                    totals.dropped_packets += f.counters.dropped_packets;
                    totals.served_bytes += f.counters.served_bytes;
                    delay_sum += f.delays.sum_ms;
                    delivered += f.delays.count;
                    max_delay = max_delay.max(f.delays.max_ms);
                    jitters.extend(f.delays.mean_jitter());
                }
                let mean = |v: &[f64]| {
                    if v.is_empty() {
                        0.0
                    } else {
                        v.iter().sum::<f64>() / v.len() as f64
                    }
                };
                Ok(ClassMetrics {
                    class,
                    thr_kbps: mean(&per_ue),
                    delay_ms: if delivered == 0 {
                        0.0
                    } else {
                        delay_sum as f64 / delivered as f64
                    },
                    jitter_ms: mean(&jitters),
                    plr: plr(&totals),
                    fairness: jain_fairness(&per_ue)?,
                    max_delay_ms: max_delay,
                    per_ue_thr_kbps: per_ue,
                    served_bytes: totals.served_bytes,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { num_ues, classes })
    }

    pub fn class(&self, class: TrafficClass) -> &ClassMetrics {
        &self.classes[class.index()]
    }

    pub fn video_fairness(&self) -> f64 {
        self.class(TrafficClass::Video).fairness
    }

    /// CDF table of per-UE throughput for `class`; `None` without UEs.
    pub fn throughput_cdf(&self, class: TrafficClass) -> Option<Vec<(f64, f64)>> {
        let v = &self.class(class).per_ue_thr_kbps;
        cdf(v, &cdf_grid(v, CDF_STEP_KBPS)).ok()
    }
}

pub const SUMMARY_HEADER: &str =
    "scheduler,ues,seed,class,thr_kbps,delay_ms,jitter_ms,plr,fairness";

/// `summary.csv` rows (no header) for one run.
pub fn summary_rows(scheduler: &str, seed: u64, m: &RunMetrics) -> String {
    let mut out = String::new();
    for c in &m.classes {
        let _ = writeln!(
            out,
            "{scheduler},{},{seed},{},{:.3},{:.3},{:.3},{:.6},{:.6}",
            m.num_ues, c.class, c.thr_kbps, c.delay_ms, c.jitter_ms, c.plr, c.fairness
        );
    }
    out
}

pub fn cdf_csv(table: &[(f64, f64)]) -> String {
    let mut out = String::from("thr_kbps,fraction\n");
    for (t, p) in table {
        let _ = writeln!(out, "{t:.1},{p:.6}");
    }
    out
}
