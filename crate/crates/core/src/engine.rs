//! The per-TTI simulation loop.
//!
//! Each TTI runs the same fixed sequence:
//!
//! 1. advance the clock;
//! 2. move every UE and regenerate the channel snapshot;
//! 3. generate arrivals (inside the traffic window only);
//! 4. expire packets past their delay budget, then draw the per-RB fading of
//!    every UE that still has data queued;
//! 5. (mdp-ql) reward the previous decision from the metrics window ending at
//!    the previous TTI, then choose this TTI's class budgets;
//! 6. allocate RBs;
//! 7. transmit granted bits and update the PF averages;
//! 8. record this TTI into the reward window.
//!
//! RB conservation, cap compliance and packet conservation are checked after
//! every TTI; a violation aborts the run with [`Error::Invariant`].

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::Rng;

use crate::budget::{
    compute_reward, decide_budgets, feedback, BudgetStateSpace, ClassAgent, ClassBudget,
    RewardInputs,
};
use crate::error::{Error, Result};
use crate::metrics::RunMetrics;
use crate::radio::{CellConfig, Channel, ChannelSnapshot, TRACE_HEADER};
use crate::rl::{LearnerConfig, QTable};
use crate::rng::{stream, SimRng, Stream};
use crate::sched::{
    budgeted_allocate, fls_allocate, pf_allocate, rr_allocate, Allocation, FlsState, PfState,
    RrState, SchedulerKind,
};
use crate::traffic::{Flow, PeriodicSource, Qci, TrafficClass, TrafficConfig, WebSource};

pub const MAX_UES: usize = 500;

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub duration_ms: u64,
    /// Traffic window length; `None` means 90% of the run.
    pub traffic_duration_ms: Option<u64>,
    /// Traffic window start; `None` centres the window in the run.
    pub traffic_start_ms: Option<u64>,
    pub num_ues: usize,
    pub seed: u64,
    pub scheduler: SchedulerKind,
    pub cell: CellConfig,
    pub learner: LearnerConfig,
    pub traffic: TrafficConfig,
    pub sigma: usize,
    pub reward_window_tti: usize,
    pub ue_speed_kmh: f64,
    pub heading_interval_ms: u64,
    pub pf_time_constant: f64,
    pub fls_drain: f64,
    pub fls_frame_tti: u64,
    /// Record a channel trace for this many leading TTIs.
    pub channel_trace_ttis: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration_ms: 60_000,
            traffic_duration_ms: None,
            traffic_start_ms: None,
            num_ues: 10,
            seed: 1,
            scheduler: SchedulerKind::MdpQl,
            cell: CellConfig::default(),
            learner: LearnerConfig::default(),
            traffic: TrafficConfig::default(),
            sigma: 20,
            reward_window_tti: 100,
            ue_speed_kmh: 30.0,
            heading_interval_ms: 5_000,
            pf_time_constant: 1000.0,
            fls_drain: 0.5,
            fls_frame_tti: 10,
            channel_trace_ttis: 0,
        }
    }
}

impl RunConfig {
    /// `[start, end)` of the traffic window in TTIs.
    pub fn traffic_window(&self) -> (u64, u64) {
        let len = self
            .traffic_duration_ms
            .unwrap_or(self.duration_ms * 9 / 10);
        let start = self
            .traffic_start_ms
            .unwrap_or((self.duration_ms.saturating_sub(len)) / 2);
        (start, start + len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_ms == 0 {
            return Err(Error::param("duration_s", "must be positive"));
        }
        let (start, end) = self.traffic_window();
        if end <= start {
            return Err(Error::param("traffic_duration_s", "must be positive"));
        }
        if end > self.duration_ms {
            return Err(Error::param(
                "traffic_duration_s",
                format!(
                    "traffic window [{start}, {end}) ms exceeds the {} ms run",
                    self.duration_ms
                ),
            ));
        }
        if self.num_ues > MAX_UES {
            return Err(Error::param(
                "ues",
                format!("{} exceeds {MAX_UES}", self.num_ues),
            ));
        }
        self.cell.validate()?;
        LearnerConfig::new(
            self.learner.alpha,
            self.learner.gamma,
            self.learner.epsilon,
            self.learner.initial_q,
        )?;
        self.traffic.validate()?;
        BudgetStateSpace::new(self.cell.num_rbs, self.sigma)?;
        if self.reward_window_tti == 0 {
            return Err(Error::param("reward_window_tti", "must be at least 1"));
        }
        if !(self.ue_speed_kmh.is_finite() && self.ue_speed_kmh >= 0.0) {
            return Err(Error::param("ue_speed_kmh", "must be non-negative"));
        }
        if self.heading_interval_ms == 0 {
            return Err(Error::param("heading_interval_s", "must be positive"));
        }
        PfState::new(0, self.pf_time_constant)?;
        FlsState::new(0, self.fls_frame_tti, self.fls_drain)?;
        Ok(())
    }
}

/// Position (km, eNB at the origin), heading and speed of one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    /// km per TTI.
    pub step_km: f64,
}

impl UeState {
    /// Advance one TTI, reflecting off the cell edge.
    pub fn advance(&mut self, radius: f64) {
        let (dx, dy) = (
            self.step_km * self.heading.cos(),
            self.step_km * self.heading.sin(),
        );
        let (nx, ny) = (self.x + dx, self.y + dy);
        let r = nx.hypot(ny);
        if r <= radius {
            self.x = nx;
            self.y = ny;
            return;
        }
        // mirror the overshoot back inside and reflect the heading about the normal
        let (ux, uy) = (nx / r, ny / r);
        let back = (2.0 * radius - r).max(0.0);
        self.x = ux * back;
        self.y = uy * back;
        let dot = dx * ux + dy * uy;
        let (rx, ry) = (dx - 2.0 * dot * ux, dy - 2.0 * dot * uy);
        self.heading = ry.atan2(rx);
    }
}

/// Uniform positions over a disc: r = R·√u, θ uniform.
pub fn place_ues<R: Rng + ?Sized>(num: usize, radius: f64, rng: &mut R) -> Vec<(f64, f64)> {
    (0..num)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = TAU * rng.random::<f64>();
            (r * theta.cos(), r * theta.sin())
        })
        .collect()
}

/// Read-only view handed to a [`TtiObserver`] after each TTI.
pub struct TtiView<'a> {
    pub tti: u64,
    /// Flow state after transmission.
    pub flows: &'a [Flow],
    pub allocation: &'a Allocation,
    /// Queued bytes per flow at allocation time (before transmission).
    pub queued_before_tx: &'a [u64],
    pub budgets: Option<&'a [ClassBudget]>,
    /// Reward fed back this TTI and the last TTI of the window it was built from.
    pub reward: Option<(f64, u64)>,
    pub channel: &'a ChannelSnapshot,
    pub num_rbs: usize,
}

pub trait TtiObserver {
    fn on_tti(&mut self, view: &TtiView<'_>);
}

impl TtiObserver for () {
    fn on_tti(&mut self, _view: &TtiView<'_>) {}
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    /// Final flows, `ue * 3 + class index`.
    pub flows: Vec<Flow>,
    /// Learned tables for mdp-ql, in QCI priority order.
    pub qtables: Vec<(Qci, QTable)>,
    /// CSV (with header) when a channel trace was requested.
    pub channel_trace: Option<String>,
    pub ttis: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct WindowEntry {
    served_bits: u64,
    delivered: u64,
    delay_sum_ms: u64,
    dropped: u64,
}

/// Sliding window of the last `len` TTIs.
#[derive(Debug)]
struct RewardWindow {
    len: usize,
    entries: VecDeque<WindowEntry>,
    sum: WindowEntry,
    last_tti: Option<u64>,
}

impl RewardWindow {
    fn new(len: usize) -> Self {
        Self {
            len,
            entries: VecDeque::with_capacity(len + 1),
            sum: WindowEntry::default(),
            last_tti: None,
        }
    }

    fn push(&mut self, tti: u64, e: WindowEntry) {
        self.entries.push_back(e);
        self.sum.served_bits += e.served_bits;
        self.sum.delivered += e.delivered;
        self.sum.delay_sum_ms += e.delay_sum_ms;
        self.sum.dropped += e.dropped;
        if self.entries.len() > self.len {
            let old = self.entries.pop_front().expect("non-empty");
            self.sum.served_bits -= old.served_bits;
            self.sum.delivered -= old.delivered;
            self.sum.delay_sum_ms -= old.delay_sum_ms;
            self.sum.dropped -= old.dropped;
        }
        self.last_tti = Some(tti);
    }

    fn inputs(&self, num_flows: usize) -> RewardInputs {
        let ttis = self.entries.len().max(1) as f64;
        let s = &self.sum;
        RewardInputs {
            // bits per ms per flow == Kbps per flow
            avg_throughput: if num_flows == 0 {
                0.0
            } else {
                s.served_bits as f64 / (ttis * num_flows as f64)
            },
            avg_delay: if s.delivered == 0 {
                0.0
            } else {
                s.delay_sum_ms as f64 / s.delivered as f64
            },
            avg_plr: if s.delivered + s.dropped == 0 {
                0.0
            } else {
                s.dropped as f64 / (s.delivered + s.dropped) as f64
            },
        }
    }
}

enum SchedState {
    Rr(RrState),
    Pf,
    Fls(FlsState),
    MdpQl {
        agents: Vec<ClassAgent>,
        space: BudgetStateSpace,
        explore: Box<SimRng>,
    },
}

/// Run one simulation to completion.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_with_observer(config, &mut ())
}

pub fn run_with_observer<O: TtiObserver + ?Sized>(
    config: &RunConfig,
    observer: &mut O,
) -> Result<RunOutput> {
    config.validate()?;
    let n_rbs = config.cell.num_rbs;
    let seed = config.seed;
    let (win_start, win_end) = config.traffic_window();

    let positions = place_ues(
        config.num_ues,
        config.cell.radius_km,
        &mut stream(seed, Stream::Placement),
    );
    let mut mobility = stream(seed, Stream::Mobility);
    let step_km = config.ue_speed_kmh / 3600.0 / 1000.0;
    let mut ues: Vec<UeState> = positions
        .iter()
        .map(|&(x, y)| UeState {
            x,
            y,
            heading: TAU * mobility.random::<f64>(),
            step_km,
        })
        .collect();

    let mut phase_rng = stream(seed, Stream::SourcePhase);
    let mut web_rng = stream(seed, Stream::WebTraffic);
    let mut video = Vec::with_capacity(config.num_ues);
    let mut voip = Vec::with_capacity(config.num_ues);
    let mut web = Vec::with_capacity(config.num_ues);
    let mut flows = Vec::with_capacity(3 * config.num_ues);
    for ue in 0..config.num_ues {
        video.push(PeriodicSource::video(
            &config.traffic,
            phase_rng.random_range(0..config.traffic.video_frame_interval_ms),
        ));
        voip.push(PeriodicSource::voip(
            &config.traffic,
            phase_rng.random_range(0..config.traffic.voip_interval_ms),
        ));
        web.push(WebSource::new(&config.traffic, win_start, &mut web_rng)?);
        for class in TrafficClass::ALL {
            flows.push(Flow::new(class, ue, config.traffic.delay_budget(class)));
        }
    }

    let mut channel = Channel::new(&config.cell, seed)?;
    let mut snap = ChannelSnapshot::default();
    let mut pf = PfState::new(flows.len(), config.pf_time_constant)?;
    let mut sched = match config.scheduler {
        SchedulerKind::Rr => SchedState::Rr(RrState::default()),
        SchedulerKind::Pf => SchedState::Pf,
        SchedulerKind::Fls => SchedState::Fls(FlsState::new(
            flows.len(),
            config.fls_frame_tti,
            config.fls_drain,
        )?),
        SchedulerKind::MdpQl => {
            let space = BudgetStateSpace::new(n_rbs, config.sigma)?;
            let agents = TrafficClass::ALL
                .iter()
                .map(|c| ClassAgent::new(c.qci(), &space, &config.learner))
                .collect::<Result<Vec<_>>>()?;
            SchedState::MdpQl {
                agents,
                space,
                explore: Box::new(stream(seed, Stream::Exploration)),
            }
        }
    };

    let mut window = RewardWindow::new(config.reward_window_tti);
    let mut trace = (config.channel_trace_ttis > 0).then(|| format!("{TRACE_HEADER}\n"));
    let mut positions = positions;
    let mut queued_before = vec![0u64; flows.len()];
    let mut served_bits = vec![0u64; flows.len()];

    for tti in 0..config.duration_ms {
        // (2) mobility and channel
        if tti > 0 && tti.is_multiple_of(config.heading_interval_ms) {
            for ue in ues.iter_mut() {
                ue.heading = TAU * mobility.random::<f64>();
            }
        }
        for (ue, p) in ues.iter_mut().zip(positions.iter_mut()) {
            ue.advance(config.cell.radius_km);
            *p = (ue.x, ue.y);
        }
        channel.snapshot_into(tti, &positions, &mut snap)?;
        if let Some(t) = trace.as_mut() {
            if tti < config.channel_trace_ttis {
                channel.fill_all_rows(tti, &mut snap);
                let mut buf = Vec::new();
                snap.write_trace(tti, &mut buf)?;
                t.push_str(&String::from_utf8_lossy(&buf));
            }
        }

        // (3) arrivals
        if (win_start..win_end).contains(&tti) {
            for ue in 0..config.num_ues {
                if let Some(size) = voip[ue].arrivals(tti) {
                    flows[3 * ue + TrafficClass::Voip.index()].enqueue(size, tti);
                }
                if let Some(size) = video[ue].arrivals(tti) {
                    flows[3 * ue + TrafficClass::Video.index()].enqueue(size, tti);
                }
                for size in web[ue].arrivals(tti, &mut web_rng) {
                    flows[3 * ue + TrafficClass::Web.index()].enqueue(size, tti);
                }
            }
        }

        // (4) expiry
        let mut entry = WindowEntry::default();
        for f in flows.iter_mut() {
            entry.dropped += f.expire(tti);
        }
        for f in flows.iter().filter(|f| f.is_backlogged()) {
            channel.fill_row(tti, f.ue, &mut snap);
        }

        // (5) learning feedback for the previous epoch, then this epoch's budgets
        let mut reward = None;
        let budgets = match &mut sched {
            SchedState::MdpQl {
                agents,
                space,
                explore,
            } => {
                if let Some(last) = window.last_tti {
                    let r = compute_reward(&window.inputs(flows.len()))?;
                    feedback(agents, r, &config.learner)?;
                    reward = Some((r, last));
                }
                Some(decide_budgets(
                    agents,
                    space,
                    config.learner.epsilon,
                    explore,
                )?)
            }
            _ => None,
        };

        // (6) allocation
        for (q, f) in queued_before.iter_mut().zip(&flows) {
            *q = f.queued_bytes();
        }
        let alloc = match &mut sched {
            SchedState::Rr(st) => rr_allocate(&flows, &snap, n_rbs, st),
            SchedState::Pf => pf_allocate(&flows, &snap, &pf, n_rbs),
            SchedState::Fls(st) => fls_allocate(&flows, &snap, st, &pf, n_rbs, tti),
            SchedState::MdpQl { .. } => budgeted_allocate(
                &flows,
                budgets.as_deref().expect("mdp-ql decides budgets"),
                &snap,
                &pf,
                n_rbs,
            ),
        };
        check_allocation(tti, &alloc, &flows, budgets.as_deref(), n_rbs)?;

        // (7) transmission
        for (i, f) in flows.iter_mut().enumerate() {
            served_bits[i] = 0;
            if alloc.granted_bits[i] > 0 {
                let out = f.transmit(alloc.granted_bits[i], tti);
                served_bits[i] = out.bytes * 8;
                entry.served_bits += out.bytes * 8;
                entry.delivered += out.packets_completed;
                entry.delay_sum_ms += out.delay_sum_ms;
            }
        }
        pf.update(&served_bits);
        if let Some(bad) = flows.iter().position(|f| !f.check_conservation()) {
            return Err(Error::Invariant {
                tti,
                reason: format!("packet conservation broken for flow {bad}"),
            });
        }

        // (8) record
        window.push(tti, entry);
        observer.on_tti(&TtiView {
            tti,
            flows: &flows,
            allocation: &alloc,
            queued_before_tx: &queued_before,
            budgets: budgets.as_deref(),
            reward,
            channel: &snap,
            num_rbs: n_rbs,
        });
    }

    let metrics = RunMetrics::from_flows(&flows, config.num_ues, win_end - win_start)?;
    let qtables = match sched {
        SchedState::MdpQl { agents, .. } => agents
            .into_iter()
            .map(|a| (a.qci(), a.table().clone()))
            .collect(),
        _ => Vec::new(),
    };
    Ok(RunOutput {
        metrics,
        flows,
        qtables,
        channel_trace: trace,
        ttis: config.duration_ms,
    })
}

fn check_allocation(
    tti: u64,
    alloc: &Allocation,
    flows: &[Flow],
    budgets: Option<&[ClassBudget]>,
    n_rbs: usize,
) -> Result<()> {
    let fail = |reason: String| Err(Error::Invariant { tti, reason });
    if alloc.rb_owner.len() != n_rbs || alloc.assigned_rbs() > n_rbs {
        return fail("more RBs assigned than exist".into());
    }
    for (rb, owner) in alloc.rb_owner.iter().enumerate() {
        if let Some(f) = *owner {
            if !flows[f].is_backlogged() {
                return fail(format!("RB {rb} given to idle flow {f}"));
            }
        }
    }
    if let Some(budgets) = budgets {
        for b in budgets {
            let class = TrafficClass::ALL
                .into_iter()
                .find(|c| c.qci() == b.qci)
                .expect("budget for a known class");
            if alloc.class_rbs[class.index()] > b.rbs {
                return fail(format!(
                    "class {class} used {} RBs over its cap {}",
                    alloc.class_rbs[class.index()],
                    b.rbs
                ));
            }
        }
    }
    Ok(())
}
