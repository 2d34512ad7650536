mod common;

use common::{audit, config};
use mdpql::engine::{run, run_with_observer, TtiObserver, TtiView};
use mdpql::sched::SchedulerKind;
use mdpql::traffic::TrafficClass;

#[test]
fn every_scheduler_keeps_invariants_under_load() {
    for kind in SchedulerKind::ALL {
        audit(&config(kind, 100, 3000, 11));
    }
}

#[test]
fn reward_uses_only_completed_ttis() {
    let obs = audit(&config(SchedulerKind::MdpQl, 20, 500, 2));
    // every TTI after the first gets feedback
    assert_eq!(obs.rewards, 499);
    let obs = audit(&config(SchedulerKind::Pf, 20, 500, 2));
    assert_eq!(obs.rewards, 0);
}

#[test]
fn allocation_trace_is_frozen() {
    // FNV-1a over the per-TTI RB owners and grants of a short run. A change
    // here means the simulated trajectory changed.
    let expected = [
        (SchedulerKind::Rr, 0x7864_6274_e207_2006u64),
        (SchedulerKind::Pf, 0x215b_aa0a_c7a5_5098),
        (SchedulerKind::Fls, 0xed2f_d0f2_5111_5547),
        (SchedulerKind::MdpQl, 0x273e_fa34_e7f5_ad2c),
    ];
    let got: Vec<(SchedulerKind, u64)> = expected
        .iter()
        .map(|&(k, _)| (k, audit(&config(k, 30, 1000, 5)).hash))
        .collect();
    assert_eq!(got, expected, "got {got:#x?}");
}

#[test]
fn same_seed_same_run_different_seed_different_run() {
    let a = run(&config(SchedulerKind::MdpQl, 20, 1500, 3)).unwrap();
    let b = run(&config(SchedulerKind::MdpQl, 20, 1500, 3)).unwrap();
    let c = run(&config(SchedulerKind::MdpQl, 20, 1500, 4)).unwrap();
    assert_eq!(a.qtables, b.qtables);
    assert_eq!(format!("{:?}", a.metrics), format!("{:?}", b.metrics));
    assert_ne!(a.qtables, c.qtables);
}

#[test]
fn sources_emit_their_nominal_rates() {
    let cfg = config(SchedulerKind::Pf, 5, 10_000, 8);
    let (start, end) = cfg.traffic_window();
    let secs = (end - start) as f64 / 1000.0;
    let out = run(&cfg).unwrap();
    for f in &out.flows {
        let kbps = f.counters.arrived_bytes as f64 * 8.0 / secs / 1000.0;
        match f.class {
            TrafficClass::Video => assert!((kbps - 440.0).abs() <= 2200.0 * 8.0 / secs / 1000.0),
            TrafficClass::Voip => assert!((kbps - 64.0).abs() <= 160.0 * 8.0 / secs / 1000.0),
            TrafficClass::Web => {}
        }
    }
}

#[test]
fn no_traffic_outside_the_window() {
    let mut cfg = config(SchedulerKind::Rr, 10, 2000, 1);
    cfg.traffic_start_ms = Some(500);
    cfg.traffic_duration_ms = Some(1000);
    struct Idle(Vec<u64>);
    impl TtiObserver for Idle {
        fn on_tti(&mut self, v: &TtiView<'_>) {
            if v.tti < 500 && v.queued_before_tx.iter().any(|&q| q > 0) {
                self.0.push(v.tti);
            }
        }
    }
    let mut obs = Idle(Vec::new());
    let out = run_with_observer(&cfg, &mut obs).unwrap();
    assert!(obs.0.is_empty(), "traffic before the window at {:?}", obs.0);
    let arrived: u64 = out.flows.iter().map(|f| f.counters.arrived_bytes).sum();
    assert!(arrived > 0);
}

#[test]
fn channel_trace_has_every_rb_of_every_ue() {
    let mut cfg = config(SchedulerKind::Pf, 4, 50, 1);
    cfg.channel_trace_ttis = 3;
    let out = run(&cfg).unwrap();
    let trace = out.channel_trace.unwrap();
    assert_eq!(trace.lines().count(), 1 + 3 * 4 * 100);
}

#[test]
fn empty_cell_yields_empty_metrics() {
    for kind in SchedulerKind::ALL {
        let out = run(&config(kind, 0, 100, 1)).unwrap();
        for c in &out.metrics.classes {
            assert_eq!(c.thr_kbps, 0.0);
            assert_eq!(c.plr, 0.0);
            assert_eq!(c.fairness, 1.0);
            assert!(c.per_ue_thr_kbps.is_empty());
        }
    }
}
