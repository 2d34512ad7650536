//! Single-cell downlink link budget.
//!
//! distance → urban macro pathloss → per-RB SINR → truncated-Shannon spectral
//! efficiency → deliverable bits per RB per TTI. There is one eNB and no
//! inter-cell interference.

use std::io::Write;

use rand::RngCore;
use rand_distr::{Distribution, Exp1, Normal};

use crate::error::{Error, Result};
use crate::rng::{mix64, stream, SimRng, Stream};

/// Pathloss distances are floored here (km).
pub const MIN_DISTANCE_KM: f64 = 0.01;
/// Usable resource elements per RB per TTI after control/reference overhead.
pub const DATA_RE_PER_RB: f64 = 120.0;
pub const SHANNON_ATTENUATION: f64 = 0.75;
pub const MAX_EFFICIENCY: f64 = 5.55;
/// Below this SINR nothing can be decoded.
pub const MIN_SINR_DB: f64 = -6.5;
pub const RB_BANDWIDTH_HZ: f64 = 180_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    pub radius_km: f64,
    pub enb_power_dbm: f64,
    pub bandwidth_mhz: f64,
    pub num_rbs: usize,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub carrier_ghz: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_decorrelation_m: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            radius_km: 1.0,
            enb_power_dbm: 46.0,
            bandwidth_mhz: 20.0,
            num_rbs: 100,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            carrier_ghz: 2.0,
            shadowing_sigma_db: 8.0,
            shadowing_decorrelation_m: 50.0,
        }
    }
}

/// Standard LTE channel bandwidths and their RB counts.
pub fn rbs_for_bandwidth(mhz: f64) -> Option<usize> {
    [
        (1.4, 6),
        (3.0, 15),
        (5.0, 25),
        (10.0, 50),
        (15.0, 75),
        (20.0, 100),
    ]
    .iter()
    .find(|(bw, _)| (bw - mhz).abs() < 1e-9)
    .map(|&(_, n)| n)
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_km.is_finite() && self.radius_km > 0.0) {
            return Err(Error::param("cell_radius_km", "must be positive"));
        }
        match rbs_for_bandwidth(self.bandwidth_mhz) {
            Some(n) if n == self.num_rbs => {}
            Some(n) => {
                return Err(Error::param(
                    "num_rbs",
                    format!(
                        "{} MHz carries {n} RBs, not {}",
                        self.bandwidth_mhz, self.num_rbs
                    ),
                ))
            }
            None => {
                return Err(Error::param(
                    "bandwidth_mhz",
                    format!("{} is not an LTE channel bandwidth", self.bandwidth_mhz),
                ))
            }
        }
        for (name, v) in [
            ("enb_power_dbm", self.enb_power_dbm),
            ("noise_density_dbm_hz", self.noise_density_dbm_hz),
            ("noise_figure_db", self.noise_figure_db),
            ("carrier_ghz", self.carrier_ghz),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::param("shadowing_sigma_db", "must be non-negative"));
        }
        if !(self.shadowing_decorrelation_m.is_finite() && self.shadowing_decorrelation_m > 0.0) {
            return Err(Error::param(
                "shadowing_decorrelation_m",
                "must be positive",
            ));
        }
        Ok(())
    }

    /// eNB power per RB with an even split (dBm).
    pub fn tx_per_rb_dbm(&self) -> f64 {
        self.enb_power_dbm - 10.0 * (self.num_rbs as f64).log10()
    }

    /// Thermal noise plus noise figure over one RB (dBm).
    pub fn noise_per_rb_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * RB_BANDWIDTH_HZ.log10() + self.noise_figure_db
    }
}

/// Urban macro pathloss, 128.1 + 37.6·log10(d), d in km.
pub fn pathloss_db(d_km: f64) -> Result<f64> {
    if d_km.is_nan() || d_km <= 0.0 || !d_km.is_finite() {
        return Err(Error::param("distance", format!("{d_km} km")));
    }
    Ok(128.1 + 37.6 * d_km.max(MIN_DISTANCE_KM).log10())
}

pub fn sinr_db(
    tx_dbm_per_rb: f64,
    pathloss_db: f64,
    shadow_db: f64,
    fading_db: f64,
    noise_dbm_per_rb: f64,
) -> f64 {
    tx_dbm_per_rb - pathloss_db - shadow_db + fading_db - noise_dbm_per_rb
}

/// Spectral efficiency (bits per resource element) for a SINR in dB.
pub fn efficiency(sinr_db: f64) -> f64 {
    if sinr_db < MIN_SINR_DB {
        0.0
    } else {
        (SHANNON_ATTENUATION * (1.0 + 10f64.powf(sinr_db / 10.0)).log2()).min(MAX_EFFICIENCY)
    }
}

pub fn rb_capacity_bits(eff: f64) -> u32 {
    (eff.max(0.0) * DATA_RE_PER_RB).floor() as u32
}

/// Per-TTI channel state.
///
/// Large-scale terms (pathloss, shadowing, mean SINR) are filled for every UE.
/// Per-RB rows (fading gain and bits) are filled on demand with
/// [`Channel::fill_row`], because most UEs have nothing queued in a given TTI.
#[derive(Debug, Clone, Default)]
pub struct ChannelSnapshot {
    pub num_rbs: usize,
    pub distance_km: Vec<f64>,
    pub pathloss_db: Vec<f64>,
    pub shadowing_db: Vec<f64>,
    /// SINR without fading.
    pub mean_sinr_db: Vec<f64>,
    mean_sinr_lin: Vec<f64>,
    /// Row-major `[ue][rb]` Rayleigh power gain.
    gain: Vec<f64>,
    bits: Vec<u32>,
    ready: Vec<bool>,
}

impl ChannelSnapshot {
    /// Snapshot with fixed per-(ue, rb) capacities and fading gain equal to the
    /// capacity. Useful for driving schedulers without a radio model.
    pub fn from_bits(bits: Vec<Vec<u32>>) -> Self {
        let ues = bits.len();
        let n = bits.first().map_or(0, Vec::len);
        let flat: Vec<u32> = bits.into_iter().flatten().collect();
        assert_eq!(flat.len(), ues * n, "ragged capacity matrix");
        Self {
            num_rbs: n,
            distance_km: vec![MIN_DISTANCE_KM; ues],
            pathloss_db: vec![0.0; ues],
            shadowing_db: vec![0.0; ues],
            mean_sinr_db: vec![0.0; ues],
            mean_sinr_lin: vec![1.0; ues],
            gain: flat.iter().map(|&b| b as f64).collect(),
            bits: flat,
            ready: vec![true; ues],
        }
    }

    pub fn num_ues(&self) -> usize {
        self.distance_km.len()
    }

    pub fn is_ready(&self, ue: usize) -> bool {
        self.ready[ue]
    }

    #[inline]
    pub fn bits(&self, ue: usize, rb: usize) -> u32 {
        debug_assert!(self.ready[ue], "row for UE {ue} not filled");
        self.bits[ue * self.num_rbs + rb]
    }

    #[inline]
    pub fn gain(&self, ue: usize, rb: usize) -> f64 {
        debug_assert!(self.ready[ue], "row for UE {ue} not filled");
        self.gain[ue * self.num_rbs + rb]
    }

    pub fn fading_db(&self, ue: usize, rb: usize) -> f64 {
        10.0 * self.gain(ue, rb).log10()
    }

    pub fn sinr(&self, ue: usize, rb: usize) -> f64 {
        self.mean_sinr_db[ue] + self.fading_db(ue, rb)
    }

    pub fn ue_bits(&self, ue: usize) -> &[u32] {
        debug_assert!(self.ready[ue], "row for UE {ue} not filled");
        &self.bits[ue * self.num_rbs..(ue + 1) * self.num_rbs]
    }

    /// Append `tti,ue,rb,sinr_db,bits` rows. Every row must be filled.
    pub fn write_trace<W: Write>(&self, tti: u64, out: &mut W) -> std::io::Result<()> {
        for ue in 0..self.num_ues() {
            for rb in 0..self.num_rbs {
                writeln!(
                    out,
                    "{tti},{ue},{rb},{:.4},{}",
                    self.sinr(ue, rb),
                    self.bits(ue, rb)
                )?;
            }
        }
        Ok(())
    }
}

pub const TRACE_HEADER: &str = "tti,ue,rb,sinr_db,bits";

/// SplitMix64 generator for one (tti, ue) fading row.
struct RowRng(u64);

impl RngCore for RowRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.0)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand::rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

#[derive(Debug, Clone)]
struct Shadow {
    value_db: f64,
    anchor: (f64, f64),
}

/// Channel generator: log-normal shadowing per UE, redrawn after moving past
/// the decorrelation distance, and i.i.d. Rayleigh block fading per UE per RB
/// per TTI.
#[derive(Debug, Clone)]
pub struct Channel {
    cfg: CellConfig,
    fading_key: u64,
    shadow_rng: SimRng,
    shadow_dist: Normal<f64>,
    shadows: Vec<Shadow>,
    tx_per_rb: f64,
    noise_per_rb: f64,
}

impl Channel {
    pub fn new(cfg: &CellConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            fading_key: mix64(seed ^ mix64(Stream::Fading as u64)),
            shadow_rng: stream(seed, Stream::Shadowing),
            shadow_dist: Normal::new(0.0, cfg.shadowing_sigma_db)
                .map_err(|e| Error::param("shadowing_sigma_db", e.to_string()))?,
            shadows: Vec::new(),
            tx_per_rb: cfg.tx_per_rb_dbm(),
            noise_per_rb: cfg.noise_per_rb_dbm(),
        })
    }

    /// Fading generator for one (tti, ue); the gains of RBs 0, 1, ... are
    /// consecutive Exp(1) draws. A pure function of the seed and coordinates.
    fn row_rng(&self, tti: u64, ue: usize) -> RowRng {
        RowRng(mix64(self.fading_key ^ mix64(tti ^ ((ue as u64) << 40))))
    }

    /// Rayleigh fading gain |h|² for one (tti, ue, rb).
    pub fn fading_gain(&self, tti: u64, ue: usize, rb: usize) -> f64 {
        let mut rng = self.row_rng(tti, ue);
        let mut g = 0.0;
        for _ in 0..=rb {
            g = Exp1.sample(&mut rng);
        }
        g
    }

    fn shadow_for(&mut self, ue: usize, pos: (f64, f64)) -> f64 {
        let decor_km = self.cfg.shadowing_decorrelation_m / 1000.0;
        if ue >= self.shadows.len() {
            let v = self.shadow_dist.sample(&mut self.shadow_rng);
            self.shadows.push(Shadow {
                value_db: v,
                anchor: pos,
            });
        } else {
            let s = &self.shadows[ue];
            let moved = (pos.0 - s.anchor.0).hypot(pos.1 - s.anchor.1);
            if moved > decor_km {
                let v = self.shadow_dist.sample(&mut self.shadow_rng);
                self.shadows[ue] = Shadow {
                    value_db: v,
                    anchor: pos,
                };
            }
        }
        self.shadows[ue].value_db
    }

    /// Update the large-scale state of `snap` for TTI `tti` given UE positions
    /// (km, eNB at origin). Per-RB rows are left unfilled.
    pub fn snapshot_into(
        &mut self,
        _tti: u64,
        positions: &[(f64, f64)],
        snap: &mut ChannelSnapshot,
    ) -> Result<()> {
        let n = self.cfg.num_rbs;
        let ues = positions.len();
        snap.num_rbs = n;
        snap.distance_km.resize(ues, 0.0);
        snap.pathloss_db.resize(ues, 0.0);
        snap.shadowing_db.resize(ues, 0.0);
        snap.mean_sinr_db.resize(ues, 0.0);
        snap.mean_sinr_lin.resize(ues, 0.0);
        snap.gain.resize(ues * n, 0.0);
        snap.bits.resize(ues * n, 0);
        snap.ready.clear();
        snap.ready.resize(ues, false);
        for (ue, &pos) in positions.iter().enumerate() {
            let d = pos.0.hypot(pos.1).max(MIN_DISTANCE_KM);
            let pl = pathloss_db(d)?;
            let sh = self.shadow_for(ue, pos);
            let mean_db = sinr_db(self.tx_per_rb, pl, sh, 0.0, self.noise_per_rb);
            snap.distance_km[ue] = d;
            snap.pathloss_db[ue] = pl;
            snap.shadowing_db[ue] = sh;
            snap.mean_sinr_db[ue] = mean_db;
            snap.mean_sinr_lin[ue] = 10f64.powf(mean_db / 10.0);
        }
        Ok(())
    }

    /// Draw the fading row of `ue` for TTI `tti` and derive its capacities.
    pub fn fill_row(&self, tti: u64, ue: usize, snap: &mut ChannelSnapshot) {
        if snap.ready[ue] {
            return;
        }
        let n = snap.num_rbs;
        let mean_lin = snap.mean_sinr_lin[ue];
        // below this gain the SINR is under the decoding threshold
        let min_gain = 10f64.powf((MIN_SINR_DB - snap.mean_sinr_db[ue]) / 10.0);
        // at or above this gain the efficiency is capped
        let cap_gain = ((MAX_EFFICIENCY / SHANNON_ATTENUATION).exp2() - 1.0) / mean_lin;
        let cap_bits = rb_capacity_bits(MAX_EFFICIENCY);
        let mut rng = self.row_rng(tti, ue);
        let row = ue * n..(ue + 1) * n;
        for (g, b) in snap.gain[row.clone()].iter_mut().zip(&mut snap.bits[row]) {
            *g = Exp1.sample(&mut rng);
            *b = if *g < min_gain {
                0
            } else if *g >= cap_gain {
                cap_bits
            } else {
                let eff = (SHANNON_ATTENUATION * (1.0 + mean_lin * *g).log2()).min(MAX_EFFICIENCY);
                rb_capacity_bits(eff)
            };
        }
        snap.ready[ue] = true;
    }

    pub fn fill_all_rows(&self, tti: u64, snap: &mut ChannelSnapshot) {
        for ue in 0..snap.num_ues() {
            self.fill_row(tti, ue, snap);
        }
    }

    /// Fully materialized snapshot for TTI `tti`.
    pub fn snapshot(&mut self, tti: u64, positions: &[(f64, f64)]) -> Result<ChannelSnapshot> {
        let mut snap = ChannelSnapshot::default();
        self.snapshot_into(tti, positions, &mut snap)?;
        self.fill_all_rows(tti, &mut snap);
        Ok(snap)
    }
}
