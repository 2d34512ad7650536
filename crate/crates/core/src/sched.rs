//! Per-TTI resource-block allocation.
//!
//! Four allocators share one [`Allocation`] result type:
//!
//! * [`rr_allocate`]: channel-unaware round robin, one RB per turn, with the
//!   cyclic pointer persisting across TTIs.
//! * [`pf_allocate`]: proportional fair, per RB the flow maximizing
//!   deliverable bits over its smoothed throughput.
//! * [`fls_allocate`]: two-level frame scheduling. Once per frame each
//!   real-time flow gets a byte quota proportional to its queue; each TTI the
//!   real-time flows drain their quotas on their best RBs, then the rest goes
//!   to non-real-time flows by PF.
//! * [`budgeted_allocate`]: classes in QCI priority order, each limited to its
//!   learned RB cap, PF within the class. Unused RBs stay available to later
//!   classes.

use std::fmt;
use std::str::FromStr;

use crate::budget::ClassBudget;
use crate::error::{Error, Result};
use crate::radio::ChannelSnapshot;
use crate::traffic::{Flow, TrafficClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchedulerKind {
    Rr,
    Pf,
    Fls,
    MdpQl,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 4] = [
        SchedulerKind::Rr,
        SchedulerKind::Pf,
        SchedulerKind::Fls,
        SchedulerKind::MdpQl,
    ];

    pub fn token(self) -> &'static str {
        match self {
            SchedulerKind::Rr => "rr",
            SchedulerKind::Pf => "pf",
            SchedulerKind::Fls => "fls",
            SchedulerKind::MdpQl => "mdp-ql",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchedulerKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::param("scheduler", format!("unknown scheduler {s:?}")))
    }
}

/// RB assignment for one TTI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    /// Owning flow per RB.
    pub rb_owner: Vec<Option<usize>>,
    /// Deliverable bits granted per flow.
    pub granted_bits: Vec<u64>,
    /// RB count per traffic class, indexed by [`TrafficClass::index`].
    pub class_rbs: [usize; 3],
}

impl Allocation {
    pub fn empty(num_rbs: usize, num_flows: usize) -> Self {
        Self {
            rb_owner: vec![None; num_rbs],
            granted_bits: vec![0; num_flows],
            class_rbs: [0; 3],
        }
    }

    pub fn assigned_rbs(&self) -> usize {
        self.rb_owner.iter().filter(|o| o.is_some()).count()
    }

    pub fn rbs_of(&self, flow: usize) -> usize {
        self.rb_owner.iter().filter(|&&o| o == Some(flow)).count()
    }

    fn assign(&mut self, rb: usize, flow_id: usize, flow: &Flow, bits: u32) {
        debug_assert!(self.rb_owner[rb].is_none());
        self.rb_owner[rb] = Some(flow_id);
        self.granted_bits[flow_id] += bits as u64;
        self.class_rbs[flow.class.index()] += 1;
    }

    /// Queued bits of `flow_id` not yet covered by grants.
    fn uncovered(&self, flow_id: usize, flow: &Flow) -> u64 {
        (flow.queued_bytes() * 8).saturating_sub(self.granted_bits[flow_id])
    }

    fn free_rbs(&self) -> usize {
        self.rb_owner.iter().filter(|o| o.is_none()).count()
    }
}

/// Exponentially smoothed per-flow throughput (bits/TTI).
#[derive(Debug, Clone, PartialEq)]
pub struct PfState {
    avg: Vec<f64>,
    time_constant: f64,
}

pub const PF_INITIAL_AVG: f64 = 1.0;

impl PfState {
    pub fn new(num_flows: usize, time_constant: f64) -> Result<Self> {
        if !(time_constant.is_finite() && time_constant >= 1.0) {
            return Err(Error::param("pf_time_constant", "must be at least 1 TTI"));
        }
        Ok(Self {
            avg: vec![PF_INITIAL_AVG; num_flows],
            time_constant,
        })
    }

    pub fn average(&self, flow: usize) -> f64 {
        self.avg[flow]
    }

    pub fn set_average(&mut self, flow: usize, v: f64) {
        self.avg[flow] = v;
    }

    /// T̄ ← (1 − 1/t_c)·T̄ + (1/t_c)·bits, for every flow.
    pub fn update(&mut self, served_bits: &[u64]) {
        let w = 1.0 / self.time_constant;
        for (a, &b) in self.avg.iter_mut().zip(served_bits) {
            *a = (1.0 - w) * *a + w * b as f64;
        }
    }
}

/// Persistent cyclic pointer for round robin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RrState {
    next: usize,
}

pub fn rr_allocate(
    flows: &[Flow],
    channel: &ChannelSnapshot,
    num_rbs: usize,
    state: &mut RrState,
) -> Allocation {
    let mut alloc = Allocation::empty(num_rbs, flows.len());
    if flows.is_empty() {
        return alloc;
    }
    for rb in 0..num_rbs {
        let pick = (0..flows.len())
            .map(|k| (state.next + k) % flows.len())
            .find(|&f| alloc.uncovered(f, &flows[f]) > 0);
        let Some(f) = pick else {
            break;
        };
        alloc.assign(rb, f, &flows[f], channel.bits(flows[f].ue, rb));
        state.next = (f + 1) % flows.len();
    }
    alloc
}

/// Fill free RBs (index order) from `candidates` by the PF metric, using at
/// most `max_rbs` RBs. Flows leave the candidate set once their queue is
/// covered. Returns the number of RBs used.
fn pf_fill(
    flows: &[Flow],
    channel: &ChannelSnapshot,
    pf: &PfState,
    alloc: &mut Allocation,
    candidates: &mut Vec<usize>,
    max_rbs: usize,
) -> usize {
    let mut used = 0;
    candidates.retain(|&f| alloc.uncovered(f, &flows[f]) > 0);
    for rb in 0..alloc.rb_owner.len() {
        if used == max_rbs || candidates.is_empty() {
            break;
        }
        if alloc.rb_owner[rb].is_some() {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, &f) in candidates.iter().enumerate() {
            let bits = channel.bits(flows[f].ue, rb);
            if bits == 0 {
                continue;
            }
            let metric = bits as f64 / pf.average(f);
            if best.is_none_or(|(_, m)| metric > m) {
                best = Some((k, metric));
            }
        }
        let Some((k, _)) = best else {
            continue;
        };
        let f = candidates[k];
        alloc.assign(rb, f, &flows[f], channel.bits(flows[f].ue, rb));
        used += 1;
        if alloc.uncovered(f, &flows[f]) == 0 {
            candidates.remove(k);
        }
    }
    used
}

pub fn pf_allocate(
    flows: &[Flow],
    channel: &ChannelSnapshot,
    pf: &PfState,
    num_rbs: usize,
) -> Allocation {
    let mut alloc = Allocation::empty(num_rbs, flows.len());
    let mut candidates: Vec<usize> = (0..flows.len()).collect();
    pf_fill(flows, channel, pf, &mut alloc, &mut candidates, num_rbs);
    alloc
}

/// Frame-level quota state.
#[derive(Debug, Clone, PartialEq)]
pub struct FlsState {
    frame_ttis: u64,
    drain: f64,
    /// Unmet quota per flow (bits) for the current frame.
    quota_bits: Vec<u64>,
}

impl FlsState {
    pub fn new(num_flows: usize, frame_ttis: u64, drain: f64) -> Result<Self> {
        if frame_ttis == 0 {
            return Err(Error::param("fls_frame_tti", "must be at least 1"));
        }
        if !(drain > 0.0 && drain <= 1.0) {
            return Err(Error::param("fls_drain", format!("{drain} not in (0, 1]")));
        }
        Ok(Self {
            frame_ttis,
            drain,
            quota_bits: vec![0; num_flows],
        })
    }

    /// Frame quota for a queue of `queued_bytes`: ⌈c·q⌉ bytes.
    pub fn quota_bytes(&self, queued_bytes: u64) -> u64 {
        (self.drain * queued_bytes as f64).ceil() as u64
    }

    pub fn unmet_quota_bits(&self, flow: usize) -> u64 {
        self.quota_bits[flow]
    }

    fn start_frame(&mut self, flows: &[Flow]) {
        for (i, f) in flows.iter().enumerate() {
            self.quota_bits[i] = if f.class.is_realtime() {
                8 * self.quota_bytes(f.queued_bytes())
            } else {
                0
            };
        }
    }
}

pub fn fls_allocate(
    flows: &[Flow],
    channel: &ChannelSnapshot,
    fls: &mut FlsState,
    pf: &PfState,
    num_rbs: usize,
    tti: u64,
) -> Allocation {
    if tti.is_multiple_of(fls.frame_ttis) {
        fls.start_frame(flows);
    }
    let mut alloc = Allocation::empty(num_rbs, flows.len());
    let frame = (tti / fls.frame_ttis) as usize;

    let mut free = num_rbs;
    for class in TrafficClass::ALL.into_iter().filter(|c| c.is_realtime()) {
        let members: Vec<usize> = (0..flows.len())
            .filter(|&f| flows[f].class == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        // rotate the within-class start so no UE is permanently first
        let start = frame % members.len();
        for k in 0..members.len() {
            if free == 0 {
                break;
            }
            let f = members[(start + k) % members.len()];
            let ue = flows[f].ue;
            loop {
                let need = fls.quota_bits[f].min(alloc.uncovered(f, &flows[f]));
                if need == 0 || free == 0 {
                    break;
                }
                let best = (0..num_rbs)
                    .filter(|&rb| alloc.rb_owner[rb].is_none() && channel.bits(ue, rb) > 0)
                    .max_by(|&a, &b| {
                        channel
                            .gain(ue, a)
                            .total_cmp(&channel.gain(ue, b))
                            .then(b.cmp(&a))
                    });
                let Some(rb) = best else {
                    break;
                };
                let bits = channel.bits(ue, rb);
                alloc.assign(rb, f, &flows[f], bits);
                fls.quota_bits[f] = fls.quota_bits[f].saturating_sub(bits as u64);
                free -= 1;
            }
        }
    }

    let mut non_rt: Vec<usize> = (0..flows.len())
        .filter(|&f| !flows[f].class.is_realtime())
        .collect();
    pf_fill(flows, channel, pf, &mut alloc, &mut non_rt, free);
    alloc
}

/// Class-prioritized PF under per-class RB caps. `budgets` must be in QCI
/// priority order; classes without a budget entry get no RBs.
pub fn budgeted_allocate(
    flows: &[Flow],
    budgets: &[ClassBudget],
    channel: &ChannelSnapshot,
    pf: &PfState,
    num_rbs: usize,
) -> Allocation {
    let mut alloc = Allocation::empty(num_rbs, flows.len());
    for budget in budgets {
        let remaining = alloc.free_rbs();
        if remaining == 0 {
            break;
        }
        let mut members: Vec<usize> = (0..flows.len())
            .filter(|&f| flows[f].class.qci() == budget.qci)
            .collect();
        pf_fill(
            flows,
            channel,
            pf,
            &mut alloc,
            &mut members,
            budget.rbs.min(remaining),
        );
    }
    alloc
}
