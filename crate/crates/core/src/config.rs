//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; missing
//! keys keep their defaults. List-valued keys (`ues`, `scheduler`, `seed`)
//! take comma-separated values and define the sweep.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::radio::rbs_for_bandwidth;
use crate::sched::SchedulerKind;

/// A validated sweep: base run configuration × ue counts × schedulers × seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: RunConfig,
    pub ues: Vec<usize>,
    pub schedulers: Vec<SchedulerKind>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            base: RunConfig::default(),
            ues: vec![10, 40, 80, 120],
            schedulers: SchedulerKind::ALL.to_vec(),
            seeds: vec![1],
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ues.is_empty() {
            return Err(Error::param("ues", "empty sweep list"));
        }
        if self.schedulers.is_empty() {
            return Err(Error::param("scheduler", "empty sweep list"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("seed", "empty sweep list"));
        }
        for &ues in &self.ues {
            RunConfig {
                num_ues: ues,
                ..self.base.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    /// Every run of the sweep, in (scheduler token, ues, seed) order.
    pub fn cells(&self) -> Vec<RunConfig> {
        let mut scheds = self.schedulers.clone();
        scheds.sort_by_key(|s| s.token());
        scheds.dedup();
        let mut ues = self.ues.clone();
        ues.sort_unstable();
        ues.dedup();
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        let mut out = Vec::new();
        for &scheduler in &scheds {
            for &num_ues in &ues {
                for &seed in &seeds {
                    out.push(RunConfig {
                        scheduler,
                        num_ues,
                        seed,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse {v:?}"))
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = parse_num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{v:?} is not finite"))
    }
}

/// Seconds to whole milliseconds.
fn parse_ms(v: &str) -> std::result::Result<u64, String> {
    let s = parse_f64(v)?;
    let ms = s * 1000.0;
    if ms < 0.0 || (ms - ms.round()).abs() > 1e-6 {
        return Err(format!("{v} s is not a non-negative whole number of ms"));
    }
    Ok(ms.round() as u64)
}

fn parse_list<T, F>(v: &str, f: F) -> std::result::Result<Vec<T>, String>
where
    F: Fn(&str) -> std::result::Result<T, String>,
{
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn secs(ms: u64) -> String {
    format!("{}", ms as f64 / 1000.0)
}

/// Apply one `key = value` pair.
fn apply(spec: &mut ExperimentSpec, key: &str, v: &str) -> std::result::Result<(), String> {
    let b = &mut spec.base;
    match key {
        "duration_s" => b.duration_ms = parse_ms(v)?,
        "traffic_duration_s" => b.traffic_duration_ms = Some(parse_ms(v)?),
        "traffic_start_s" => b.traffic_start_ms = Some(parse_ms(v)?),
        "ues" => spec.ues = parse_list(v, parse_num)?,
        "scheduler" => {
            spec.schedulers = parse_list(v, |s| s.parse().map_err(|e: Error| e.to_string()))?
        }
        "seed" => spec.seeds = parse_list(v, parse_num)?,
        "out" => spec.out_dir = PathBuf::from(v),
        "cell_radius_km" => b.cell.radius_km = parse_f64(v)?,
        "enb_power_dbm" => b.cell.enb_power_dbm = parse_f64(v)?,
        "bandwidth_mhz" => {
            let mhz = parse_f64(v)?;
            b.cell.num_rbs = rbs_for_bandwidth(mhz)
                .ok_or_else(|| format!("{mhz} MHz is not an LTE bandwidth"))?;
            b.cell.bandwidth_mhz = mhz;
        }
        "noise_density_dbm_hz" => b.cell.noise_density_dbm_hz = parse_f64(v)?,
        "noise_figure_db" => b.cell.noise_figure_db = parse_f64(v)?,
        "carrier_ghz" => b.cell.carrier_ghz = parse_f64(v)?,
        "shadowing_sigma_db" => b.cell.shadowing_sigma_db = parse_f64(v)?,
        "shadowing_decorrelation_m" => b.cell.shadowing_decorrelation_m = parse_f64(v)?,
        "ue_speed_kmh" => b.ue_speed_kmh = parse_f64(v)?,
        "heading_interval_s" => b.heading_interval_ms = parse_ms(v)?,
        "sigma" => b.sigma = parse_num(v)?,
        "alpha" => b.learner.alpha = parse_f64(v)?,
        "gamma" => b.learner.gamma = parse_f64(v)?,
        "epsilon" => b.learner.epsilon = parse_f64(v)?,
        "initial_q" => b.learner.initial_q = parse_f64(v)?,
        "reward_window_tti" => b.reward_window_tti = parse_num(v)?,
        "video_rate_kbps" => b.traffic.video_rate_kbps = parse_f64(v)?,
        "video_frame_interval_ms" => b.traffic.video_frame_interval_ms = parse_num(v)?,
        "video_delay_budget_ms" => b.traffic.video_delay_budget_ms = parse_num(v)?,
        "voip_rate_kbps" => b.traffic.voip_rate_kbps = parse_f64(v)?,
        "voip_interval_ms" => b.traffic.voip_interval_ms = parse_num(v)?,
        "voip_delay_budget_ms" => b.traffic.voip_delay_budget_ms = parse_num(v)?,
        "web_pareto_shape" => b.traffic.web_pareto_shape = parse_f64(v)?,
        "web_mean_page_bytes" => b.traffic.web_mean_page_bytes = parse_f64(v)?,
        "web_max_page_bytes" => b.traffic.web_max_page_bytes = parse_f64(v)?,
        "web_packet_bytes" => b.traffic.web_packet_bytes = parse_num(v)?,
        "web_reading_mean_s" => b.traffic.web_reading_mean_s = parse_f64(v)?,
        "pf_time_constant" => b.pf_time_constant = parse_f64(v)?,
        "fls_drain" => b.fls_drain = parse_f64(v)?,
        "fls_frame_tti" => b.fls_frame_tti = parse_num(v)?,
        "channel_trace_ttis" => b.channel_trace_ttis = parse_num(v)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Validation errors name parameters; map them back to the config key that
/// set them.
fn key_for_param(name: &str) -> &str {
    match name {
        "num_rbs" => "bandwidth_mhz",
        "interval" => "video_frame_interval_ms",
        "rate" => "video_rate_kbps",
        "web_pareto" => "web_pareto_shape",
        other => other,
    }
}

/// Parse and validate a config text.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    let mut lines_of: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                reason: format!("expected `key = value`, got {content:?}"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        apply(&mut spec, key, value).map_err(|reason| Error::Config { line, reason })?;
        lines_of.insert(key.to_string(), line);
    }
    spec.validate().map_err(|e| {
        let name = match &e {
            Error::InvalidParameter { name, .. } | Error::NonFinite(name) => Some(*name),
            _ => None,
        };
        let line = name
            .and_then(|n| lines_of.get(key_for_param(n)).copied())
            .unwrap_or(0);
        Error::Config {
            line,
            reason: e.to_string(),
        }
    })?;
    Ok(spec)
}

/// Render `spec` so that [`parse_config`] reproduces it exactly.
pub fn serialize_config(spec: &ExperimentSpec) -> String {
    let b = &spec.base;
    let join = |v: Vec<String>| v.join(",");
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("duration_s", secs(b.duration_ms));
    if let Some(ms) = b.traffic_duration_ms {
        kv("traffic_duration_s", secs(ms));
    }
    if let Some(ms) = b.traffic_start_ms {
        kv("traffic_start_s", secs(ms));
    }
    kv(
        "ues",
        join(spec.ues.iter().map(|u| u.to_string()).collect()),
    );
    kv(
        "scheduler",
        join(
            spec.schedulers
                .iter()
                .map(|s| s.token().to_string())
                .collect(),
        ),
    );
    kv(
        "seed",
        join(spec.seeds.iter().map(|s| s.to_string()).collect()),
    );
    kv("out", spec.out_dir.display().to_string());
    kv("cell_radius_km", b.cell.radius_km.to_string());
    kv("enb_power_dbm", b.cell.enb_power_dbm.to_string());
    kv("bandwidth_mhz", b.cell.bandwidth_mhz.to_string());
    kv(
        "noise_density_dbm_hz",
        b.cell.noise_density_dbm_hz.to_string(),
    );
    kv("noise_figure_db", b.cell.noise_figure_db.to_string());
    kv("carrier_ghz", b.cell.carrier_ghz.to_string());
    kv("shadowing_sigma_db", b.cell.shadowing_sigma_db.to_string());
    kv(
        "shadowing_decorrelation_m",
        b.cell.shadowing_decorrelation_m.to_string(),
    );
    kv("ue_speed_kmh", b.ue_speed_kmh.to_string());
    kv("heading_interval_s", secs(b.heading_interval_ms));
    kv("sigma", b.sigma.to_string());
    kv("alpha", b.learner.alpha.to_string());
    kv("gamma", b.learner.gamma.to_string());
    kv("epsilon", b.learner.epsilon.to_string());
    kv("initial_q", b.learner.initial_q.to_string());
    kv("reward_window_tti", b.reward_window_tti.to_string());
    let t = &b.traffic;
    kv("video_rate_kbps", t.video_rate_kbps.to_string());
    kv(
        "video_frame_interval_ms",
        t.video_frame_interval_ms.to_string(),
    );
    kv("video_delay_budget_ms", t.video_delay_budget_ms.to_string());
    kv("voip_rate_kbps", t.voip_rate_kbps.to_string());
    kv("voip_interval_ms", t.voip_interval_ms.to_string());
    kv("voip_delay_budget_ms", t.voip_delay_budget_ms.to_string());
    kv("web_pareto_shape", t.web_pareto_shape.to_string());
    kv("web_mean_page_bytes", t.web_mean_page_bytes.to_string());
    kv("web_max_page_bytes", t.web_max_page_bytes.to_string());
    kv("web_packet_bytes", t.web_packet_bytes.to_string());
    kv("web_reading_mean_s", t.web_reading_mean_s.to_string());
    kv("pf_time_constant", b.pf_time_constant.to_string());
    kv("fls_drain", b.fls_drain.to_string());
    kv("fls_frame_tti", b.fls_frame_tti.to_string());
    kv("channel_trace_ttis", b.channel_trace_ttis.to_string());
    out
}
