//! Shared per-TTI auditing for the integration tests.

#![allow(dead_code)]

use mdpql::engine::{run_with_observer, RunConfig, RunOutput, TtiObserver, TtiView};
use mdpql::sched::SchedulerKind;
use mdpql::traffic::TrafficClass;

pub fn config(scheduler: SchedulerKind, ues: usize, duration_ms: u64, seed: u64) -> RunConfig {
    RunConfig {
        scheduler,
        num_ues: ues,
        duration_ms,
        seed,
        ..RunConfig::default()
    }
}

/// Checks every TTI against the allocation and queue state it was handed.
#[derive(Default)]
pub struct Auditor {
    pub ttis: u64,
    /// Total invariant violations; only the first few are kept in `failures`.
    pub violations: u64,
    pub failures: Vec<String>,
    pub rewards: u64,
    pub hash: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl TtiObserver for Auditor {
    fn on_tti(&mut self, v: &TtiView<'_>) {
        if self.ttis == 0 {
            self.hash = FNV_OFFSET;
        }
        self.ttis += 1;
        let a = v.allocation;
        let tti = v.tti;
        let (violations, failures) = (&mut self.violations, &mut self.failures);
        let mut fail = |msg: String| {
            *violations += 1;
            if failures.len() < 20 {
                failures.push(format!("tti {tti}: {msg}"));
            }
        };

        if a.rb_owner.len() != v.num_rbs {
            fail(format!("{} RB slots", a.rb_owner.len()));
        }
        let mut per_flow_bits = vec![0u64; v.flows.len()];
        let mut per_class = [0usize; 3];
        for (rb, owner) in a.rb_owner.iter().enumerate() {
            if let Some(f) = *owner {
                if v.queued_before_tx[f] == 0 {
                    fail(format!("RB {rb} given to empty flow {f}"));
                }
                per_flow_bits[f] += v.channel.bits(v.flows[f].ue, rb) as u64;
                per_class[v.flows[f].class.index()] += 1;
            }
        }
        if per_flow_bits != a.granted_bits {
            fail("granted bits differ from the sum over owned RBs".into());
        }
        if per_class != a.class_rbs {
            fail("class RB counts are inconsistent".into());
        }
        if let Some(budgets) = v.budgets {
            if budgets.len() != 3 {
                fail(format!("{} budgets", budgets.len()));
            }
            for (b, class) in budgets.iter().zip(TrafficClass::ALL) {
                if b.qci != class.qci() || a.class_rbs[class.index()] > b.rbs {
                    fail(format!("class {class} over cap"));
                }
            }
        }
        for f in v.flows {
            if !f.check_conservation() {
                fail(format!("conservation broken for UE {} {}", f.ue, f.class));
            }
        }
        if let Some((r, last)) = v.reward {
            self.rewards += 1;
            if last + 1 != v.tti {
                fail(format!("reward built from window ending at {last}"));
            }
            if !r.is_finite() || r.abs() > 12.0 {
                fail(format!("reward {r}"));
            }
        }

        let mut h = self.hash;
        for o in &a.rb_owner {
            h = fnv(h, &o.map_or(u32::MAX, |f| f as u32).to_le_bytes());
        }
        for g in &a.granted_bits {
            h = fnv(h, &g.to_le_bytes());
        }
        self.hash = h;
    }
}

/// Run `cfg` under an [`Auditor`] without asserting anything.
pub fn audited_run(cfg: &RunConfig) -> (mdpql::Result<RunOutput>, Auditor) {
    let mut obs = Auditor::default();
    let out = run_with_observer(cfg, &mut obs);
    (out, obs)
}

/// Run `cfg` and panic on the first broken invariant.
pub fn audit(cfg: &RunConfig) -> Auditor {
    let (out, obs) = audited_run(cfg);
    out.expect("run succeeds");
    assert_eq!(obs.ttis, cfg.duration_ms);
    assert_eq!(obs.violations, 0, "{:#?}", obs.failures);
    obs
}
