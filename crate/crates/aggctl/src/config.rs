//! Scenario configuration: typed description of a simulated network plus a
//! line-based `key = value` text format with `[section]` headers.
//!
//! The same key setters back both the file parser and dotted sweep-axis
//! paths (`station.1.send_rate`), so anything printable by `to_text` can be
//! parsed back and anything parseable can be swept over.

use std::fmt::Write as _;

use thiserror::Error;

/// Default packet payload length in bits (1500-byte UDP datagrams).
pub const DEFAULT_PACKET_LEN: f64 = 12_000.0;
/// 802.11ac MCS 9 over an 80 MHz channel, long guard interval, per spatial stream.
pub const MCS9_PER_STREAM: f64 = 390.0e6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), msg: msg.into() }
    }
}

/// Access-point MAC parameters. One per BSS; stations reference an AP by id.
#[derive(Debug, Clone, PartialEq)]
pub struct ApConfig {
    pub id: u16,
    /// Maximum packets aggregated into one frame (64 AMPDU, 128 AMSDU mode).
    pub n_max: u32,
    /// Per-station queue capacity in packets.
    pub queue_capacity: u32,
    /// Fixed per-frame PHY/MAC overhead: preamble, SIFS, block-ack, seconds.
    pub phy_overhead: f64,
    pub difs: f64,
    pub slot_time: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    /// Per-packet link-layer error probability.
    pub error_prob: f64,
    /// Errors apply only before this time; `None` means the whole run.
    pub error_until: Option<f64>,
    /// Link-layer retransmission attempts before a packet is dropped.
    pub retry_limit: u32,
    pub beacon_pps: f64,
    pub beacon_airtime: f64,
}

impl Default for ApConfig {
    fn default() -> Self {
        ApConfig {
            id: 1,
            n_max: 64,
            queue_capacity: 1000,
            phy_overhead: 160e-6,
            difs: 34e-6,
            slot_time: 9e-6,
            cw_min: 16,
            cw_max: 1024,
            error_prob: 0.0,
            error_until: None,
            retry_limit: 7,
            beacon_pps: 10.0,
            beacon_airtime: 300e-6,
        }
    }
}

impl ApConfig {
    /// Mean contention cost for a collision-free access: DIFS plus the
    /// expected backoff with the minimum contention window.
    pub fn mean_access_overhead(&self) -> f64 {
        self.difs + (self.cw_min.saturating_sub(1) as f64) / 2.0 * self.slot_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationMode {
    /// Paced downlink flow; rate driven by `send_rate`/schedule or the controller.
    Controlled,
    /// Saturated legacy flow: sender pushes at MCS rate, queue stays backlogged.
    Legacy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationConfig {
    pub id: u16,
    pub ap: u16,
    /// PHY rate for this station's frames, bits/s.
    pub mcs_rate: f64,
    /// Packet payload length, bits.
    pub packet_len: f64,
    pub mode: StationMode,
    /// Initial downlink send rate, bits/s.
    pub send_rate: f64,
    /// Open-loop send-rate changes as (time s, bits/s), applied in order.
    pub rate_schedule: Vec<(f64, f64)>,
    /// Scheduled MCS changes as (time s, bits/s).
    pub mcs_schedule: Vec<(f64, f64)>,
}

impl StationConfig {
    pub fn new(id: u16) -> Self {
        StationConfig {
            id,
            ap: 1,
            mcs_rate: 2.0 * MCS9_PER_STREAM,
            packet_len: DEFAULT_PACKET_LEN,
            mode: StationMode::Controlled,
            send_rate: 50.0e6,
            rate_schedule: Vec::new(),
            mcs_schedule: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulConfig {
    /// Ethernet link rate feeding the AP, bits/s.
    pub link_rate: f64,
    /// Drop-tail queue length in packets.
    pub queue_len: u32,
    /// Cross-traffic rate while active, bits/s.
    pub cross_rate: f64,
    pub cross_packet_len: f64,
    /// Cross-traffic on/off toggles as (time s, active). Inactive until the
    /// first entry unless one is scheduled at t=0.
    pub cross_schedule: Vec<(f64, bool)>,
}

impl Default for BackhaulConfig {
    fn default() -> Self {
        BackhaulConfig {
            link_rate: 1.0e9,
            queue_len: 100,
            cross_rate: 0.0,
            cross_packet_len: DEFAULT_PACKET_LEN,
            cross_schedule: Vec::new(),
        }
    }
}

/// Which aggregation measurement drives the multi-station rate update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMeasurement {
    /// Regulate on the aggregation reported by the highest-MCS station.
    MaxMcs,
    /// Alternate reading: regulate on the mean aggregation across stations.
    MeanAgg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Base feedback gain, Mb/s per packet of aggregation error. The
    /// effective per-update gain is `gain / n` for n stations.
    pub gain: f64,
    /// Report/update interval, seconds.
    pub interval: f64,
    /// Target aggregation level, packets.
    pub target_agg: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Report transit delay from receiver to sender, seconds.
    pub feedback_delay: f64,
    /// Uplink airtime consumed by each report frame, seconds.
    pub feedback_airtime: f64,
    pub measurement: ControlMeasurement,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            gain: 1.0,
            interval: 0.5,
            target_agg: 32.0,
            x_min: 1.0e6,
            x_max: 10.0e9,
            feedback_delay: 2e-3,
            feedback_airtime: 200e-6,
            measurement: ControlMeasurement::MaxMcs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContenderMode {
    /// Transmission attempts arrive as a Poisson process at `rate_pps`.
    Poisson,
    /// Always has a frame pending.
    Saturated,
}

/// An uplink/other-WLAN transmitter that only consumes airtime.
#[derive(Debug, Clone, PartialEq)]
pub struct ContenderConfig {
    pub id: u16,
    /// Channel occupancy per transmission, seconds.
    pub airtime: f64,
    pub mode: ContenderMode,
    /// Attempt rate while active (Poisson mode), attempts/s.
    pub rate_pps: f64,
    /// Mean active dwell, seconds (exponential). 0 disables toggling (always on).
    pub on_mean: f64,
    /// Mean inactive dwell, seconds (exponential).
    pub off_mean: f64,
}

impl ContenderConfig {
    pub fn new(id: u16) -> Self {
        ContenderConfig {
            id,
            airtime: 1e-3,
            mode: ContenderMode::Poisson,
            rate_pps: 50.0,
            on_mean: 0.0,
            off_mean: 0.0,
        }
    }
}

/// Parameters of the kernel receive-timestamp noise model applied to traces.
///
/// Below `poll_lo_pps` the host runs interrupt-per-frame and frame boundaries
/// show as clean gaps; above `poll_hi_pps` it is fully polled and timestamps
/// decouple from frames (stalls inside frames, merged boundaries). In between
/// the two effects blend with weight lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelNoiseConfig {
    pub isr_latency_us: f64,
    pub intra_min_us: f64,
    pub intra_max_us: f64,
    pub poll_lo_pps: f64,
    pub poll_hi_pps: f64,
    /// Per-packet stall probability at full polling (scaled by lambda).
    pub stall_prob_max: f64,
    pub stall_min_us: f64,
    pub stall_max_us: f64,
    /// Per-frame boundary-merge probability at full polling (scaled by lambda^3).
    pub merge_prob_max: f64,
    pub boundary_jitter_us: f64,
    /// Packets used for the local rate estimate selecting the regime.
    pub rate_window: u32,
}

impl Default for KernelNoiseConfig {
    fn default() -> Self {
        KernelNoiseConfig {
            isr_latency_us: 30.0,
            intra_min_us: 0.5,
            intra_max_us: 2.0,
            poll_lo_pps: 25_000.0,
            poll_hi_pps: 40_000.0,
            stall_prob_max: 0.35,
            stall_min_us: 25.0,
            stall_max_us: 900.0,
            merge_prob_max: 0.5,
            boundary_jitter_us: 8.0,
            rate_window: 64,
        }
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub seed: u64,
    pub aps: Vec<ApConfig>,
    pub stations: Vec<StationConfig>,
    pub backhaul: Option<BackhaulConfig>,
    pub controller: Option<ControllerConfig>,
    pub contenders: Vec<ContenderConfig>,
    pub kernel_noise: KernelNoiseConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            duration: 60.0,
            seed: 1,
            aps: vec![ApConfig::default()],
            stations: vec![StationConfig::new(1)],
            backhaul: None,
            controller: None,
            contenders: Vec::new(),
            kernel_noise: KernelNoiseConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn ap(&self, id: u16) -> Option<&ApConfig> {
        self.aps.iter().find(|a| a.id == id)
    }

    pub fn station(&self, id: u16) -> Option<&StationConfig> {
        self.stations.iter().find(|s| s.id == id)
    }

    /// Field-level validation. Every rejected field is named by its config path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(ConfigError::invalid("duration", "must be positive and finite"));
        }
        if self.aps.is_empty() {
            return Err(ConfigError::invalid("ap", "at least one AP required"));
        }
        for ap in &self.aps {
            let f = |k: &str| format!("ap.{}.{}", ap.id, k);
            if ap.n_max != 64 && ap.n_max != 128 {
                return Err(ConfigError::invalid(f("n_max"), "must be 64 (AMPDU) or 128 (AMSDU)"));
            }
            if ap.queue_capacity <= ap.n_max {
                return Err(ConfigError::invalid(f("queue_capacity"), "must exceed n_max"));
            }
            if !(ap.phy_overhead > 0.0) || !(ap.difs > 0.0) || !(ap.slot_time > 0.0) {
                return Err(ConfigError::invalid(f("phy_overhead_us"), "timing constants must be positive"));
            }
            if ap.cw_min < 2 || ap.cw_max < ap.cw_min {
                return Err(ConfigError::invalid(f("cw_min"), "need 2 <= cw_min <= cw_max"));
            }
            if !(0.0..=1.0).contains(&ap.error_prob) {
                return Err(ConfigError::invalid(f("error_prob"), "must lie in [0,1]"));
            }
            if self.aps.iter().filter(|a| a.id == ap.id).count() > 1 {
                return Err(ConfigError::invalid(f("id"), "duplicate AP id"));
            }
        }
        if self.stations.is_empty() {
            return Err(ConfigError::invalid("station", "at least one station required"));
        }
        for st in &self.stations {
            let f = |k: &str| format!("station.{}.{}", st.id, k);
            if self.ap(st.ap).is_none() {
                return Err(ConfigError::invalid(f("ap"), "references an undefined AP"));
            }
            if !(st.mcs_rate > 0.0) {
                return Err(ConfigError::invalid(f("mcs_rate"), "must be positive"));
            }
            if !(st.packet_len > 0.0) {
                return Err(ConfigError::invalid(f("packet_len"), "must be positive"));
            }
            if st.send_rate < 0.0 || !st.send_rate.is_finite() {
                return Err(ConfigError::invalid(f("send_rate"), "must be >= 0 and finite"));
            }
            for (sched, key) in [(&st.rate_schedule, "rate_schedule"), (&st.mcs_schedule, "mcs_schedule")] {
                let mut prev = 0.0f64;
                for &(t, v) in sched.iter() {
                    if t < 0.0 || t > self.duration {
                        return Err(ConfigError::invalid(f(key), "schedule time outside [0, duration]"));
                    }
                    if t < prev {
                        return Err(ConfigError::invalid(f(key), "schedule times must be non-decreasing"));
                    }
                    prev = t;
                    if v < 0.0 || (key == "mcs_schedule" && v == 0.0) {
                        return Err(ConfigError::invalid(f(key), "scheduled value must be positive"));
                    }
                }
            }
            if self.stations.iter().filter(|s| s.id == st.id).count() > 1 {
                return Err(ConfigError::invalid(f("id"), "duplicate station id"));
            }
        }
        if let Some(b) = &self.backhaul {
            if !(b.link_rate > 0.0) {
                return Err(ConfigError::invalid("backhaul.link_rate", "must be positive"));
            }
            if b.queue_len == 0 {
                return Err(ConfigError::invalid("backhaul.queue_len", "must be positive"));
            }
            if b.cross_rate < 0.0 {
                return Err(ConfigError::invalid("backhaul.cross_rate", "must be >= 0"));
            }
            if b.cross_rate > 0.0 && !(b.cross_packet_len > 0.0) {
                return Err(ConfigError::invalid("backhaul.cross_packet_len", "must be positive"));
            }
            for &(t, _) in &b.cross_schedule {
                if t < 0.0 || t > self.duration {
                    return Err(ConfigError::invalid("backhaul.cross_schedule", "toggle time outside [0, duration]"));
                }
            }
        }
        if let Some(c) = &self.controller {
            if !(c.gain > 0.0) {
                return Err(ConfigError::invalid("controller.gain", "must be positive"));
            }
            if !(c.interval > 0.0) {
                return Err(ConfigError::invalid("controller.interval_ms", "must be positive"));
            }
            let n_max = self.aps.iter().map(|a| a.n_max).max().unwrap_or(64) as f64;
            if !(c.target_agg >= 1.0 && c.target_agg <= n_max) {
                return Err(ConfigError::invalid("controller.target_agg", "must lie in [1, n_max]"));
            }
            if !(c.x_min > 0.0 && c.x_min < c.x_max) {
                return Err(ConfigError::invalid("controller.x_min", "need 0 < x_min < x_max"));
            }
            if c.feedback_delay < 0.0 {
                return Err(ConfigError::invalid("controller.feedback_delay_ms", "must be >= 0"));
            }
        }
        for ct in &self.contenders {
            let f = |k: &str| format!("contender.{}.{}", ct.id, k);
            if !(ct.airtime > 0.0) {
                return Err(ConfigError::invalid(f("airtime_us"), "must be positive"));
            }
            if ct.mode == ContenderMode::Poisson && !(ct.rate_pps > 0.0) {
                return Err(ConfigError::invalid(f("rate_pps"), "must be positive in poisson mode"));
            }
            if ct.on_mean < 0.0 || ct.off_mean < 0.0 {
                return Err(ConfigError::invalid(f("on_ms"), "dwells must be >= 0"));
            }
        }
        let kn = &self.kernel_noise;
        if !(kn.poll_lo_pps > 0.0 && kn.poll_hi_pps > kn.poll_lo_pps) {
            return Err(ConfigError::invalid("kernel_noise.poll_lo_pps", "need 0 < poll_lo < poll_hi"));
        }
        if !(0.0..=1.0).contains(&kn.stall_prob_max) || !(0.0..=1.0).contains(&kn.merge_prob_max) {
            return Err(ConfigError::invalid("kernel_noise.stall_prob_max", "probabilities must lie in [0,1]"));
        }
        if kn.rate_window < 2 {
            return Err(ConfigError::invalid("kernel_noise.rate_window", "must be >= 2"));
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical text form; used to tag output files.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Set one field by dotted path, e.g. `station.1.send_rate = 2e8`.
    /// Paths mirror the text format: `<section>[.<id>].<key>`.
    pub fn set_field(&mut self, path: &str, value: &str) -> Result<(), ConfigError> {
        let parts: Vec<&str> = path.split('.').collect();
        let bad = |msg: &str| ConfigError::invalid(path, msg);
        match parts.as_slice() {
            ["duration"] => self.duration = parse_f64(value, 0, "duration").map_err(|e| promote(e, path))?,
            ["seed"] => self.seed = parse_u64(value, 0, "seed").map_err(|e| promote(e, path))?,
            [sec, key] if *sec == "ap" || *sec == "backhaul" || *sec == "controller" || *sec == "kernel_noise" => {
                return self.apply_key(sec, None, key, value, 0).map_err(|e| promote(e, path));
            }
            [sec, id, key] => {
                let id: u16 = id.parse().map_err(|_| bad("section id must be an integer"))?;
                return self.apply_key(sec, Some(id), key, value, 0).map_err(|e| promote(e, path));
            }
            _ => return Err(bad("unknown field path")),
        }
        Ok(())
    }

    /// Apply one `key = value` pair to a section. `id` selects (or creates)
    /// the instance for ap/station/contender sections.
    fn apply_key(
        &mut self,
        section: &str,
        id: Option<u16>,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), ConfigError> {
        let err_unknown = || ConfigError::Parse {
            line,
            msg: format!("unknown key `{key}` in [{section}]"),
        };
        match section {
            "ap" => {
                let id = id.unwrap_or(1);
                if self.ap(id).is_none() {
                    self.aps.push(ApConfig { id, ..ApConfig::default() });
                }
                let ap = self.aps.iter_mut().find(|a| a.id == id).unwrap();
                match key {
                    "n_max" => ap.n_max = parse_u32(value, line, key)?,
                    "queue_capacity" => ap.queue_capacity = parse_u32(value, line, key)?,
                    "phy_overhead_us" => ap.phy_overhead = parse_f64(value, line, key)? * 1e-6,
                    "difs_us" => ap.difs = parse_f64(value, line, key)? * 1e-6,
                    "slot_us" => ap.slot_time = parse_f64(value, line, key)? * 1e-6,
                    "cw_min" => ap.cw_min = parse_u32(value, line, key)?,
                    "cw_max" => ap.cw_max = parse_u32(value, line, key)?,
                    "error_prob" => ap.error_prob = parse_f64(value, line, key)?,
                    "error_until_s" => {
                        ap.error_until =
                            if value == "none" { None } else { Some(parse_f64(value, line, key)?) }
                    }
                    "retry_limit" => ap.retry_limit = parse_u32(value, line, key)?,
                    "beacon_pps" => ap.beacon_pps = parse_f64(value, line, key)?,
                    "beacon_airtime_us" => ap.beacon_airtime = parse_f64(value, line, key)? * 1e-6,
                    _ => return Err(err_unknown()),
                }
            }
            "station" => {
                let id = id.ok_or_else(|| ConfigError::Parse {
                    line,
                    msg: "[station] requires an id, e.g. [station 1]".into(),
                })?;
                if self.station(id).is_none() {
                    self.stations.push(StationConfig::new(id));
                }
                let st = self.stations.iter_mut().find(|s| s.id == id).unwrap();
                match key {
                    "ap" => st.ap = parse_u32(value, line, key)? as u16,
                    "mcs_rate" => st.mcs_rate = parse_f64(value, line, key)?,
                    "packet_len" => st.packet_len = parse_f64(value, line, key)?,
                    "send_rate" => st.send_rate = parse_f64(value, line, key)?,
                    "mode" => {
                        st.mode = match value {
                            "controlled" => StationMode::Controlled,
                            "legacy" => StationMode::Legacy,
                            _ => {
                                return Err(ConfigError::Parse {
                                    line,
                                    msg: format!("mode must be controlled|legacy, got `{value}`"),
                                })
                            }
                        }
                    }
                    "rate_schedule" => st.rate_schedule = parse_schedule(value, line, key)?,
                    "mcs_schedule" => st.mcs_schedule = parse_schedule(value, line, key)?,
                    _ => return Err(err_unknown()),
                }
            }
            "backhaul" => {
                let b = self.backhaul.get_or_insert_with(BackhaulConfig::default);
                match key {
                    "link_rate" => b.link_rate = parse_f64(value, line, key)?,
                    "queue_len" => b.queue_len = parse_u32(value, line, key)?,
                    "cross_rate" => b.cross_rate = parse_f64(value, line, key)?,
                    "cross_packet_len" => b.cross_packet_len = parse_f64(value, line, key)?,
                    "cross_schedule" => b.cross_schedule = parse_toggle_schedule(value, line, key)?,
                    _ => return Err(err_unknown()),
                }
            }
            "controller" => {
                let c = self.controller.get_or_insert_with(ControllerConfig::default);
                match key {
                    "gain" => c.gain = parse_f64(value, line, key)?,
                    "interval_ms" => c.interval = parse_f64(value, line, key)? * 1e-3,
                    "target_agg" => c.target_agg = parse_f64(value, line, key)?,
                    "x_min" => c.x_min = parse_f64(value, line, key)?,
                    "x_max" => c.x_max = parse_f64(value, line, key)?,
                    "feedback_delay_ms" => c.feedback_delay = parse_f64(value, line, key)? * 1e-3,
                    "feedback_airtime_us" => c.feedback_airtime = parse_f64(value, line, key)? * 1e-6,
                    "measurement" => {
                        c.measurement = match value {
                            "max_mcs" => ControlMeasurement::MaxMcs,
                            "mean_agg" => ControlMeasurement::MeanAgg,
                            _ => {
                                return Err(ConfigError::Parse {
                                    line,
                                    msg: format!("measurement must be max_mcs|mean_agg, got `{value}`"),
                                })
                            }
                        }
                    }
                    _ => return Err(err_unknown()),
                }
            }
            "contender" => {
                let id = id.ok_or_else(|| ConfigError::Parse {
                    line,
                    msg: "[contender] requires an id, e.g. [contender 1]".into(),
                })?;
                if !self.contenders.iter().any(|c| c.id == id) {
                    self.contenders.push(ContenderConfig::new(id));
                }
                let ct = self.contenders.iter_mut().find(|c| c.id == id).unwrap();
                match key {
                    "airtime_us" => ct.airtime = parse_f64(value, line, key)? * 1e-6,
                    "rate_pps" => ct.rate_pps = parse_f64(value, line, key)?,
                    "on_ms" => ct.on_mean = parse_f64(value, line, key)? * 1e-3,
                    "off_ms" => ct.off_mean = parse_f64(value, line, key)? * 1e-3,
                    "mode" => {
                        ct.mode = match value {
                            "poisson" => ContenderMode::Poisson,
                            "saturated" => ContenderMode::Saturated,
                            _ => {
                                return Err(ConfigError::Parse {
                                    line,
                                    msg: format!("mode must be poisson|saturated, got `{value}`"),
                                })
                            }
                        }
                    }
                    _ => return Err(err_unknown()),
                }
            }
            "kernel_noise" => {
                let k = &mut self.kernel_noise;
                match key {
                    "isr_latency_us" => k.isr_latency_us = parse_f64(value, line, key)?,
                    "intra_min_us" => k.intra_min_us = parse_f64(value, line, key)?,
                    "intra_max_us" => k.intra_max_us = parse_f64(value, line, key)?,
                    "poll_lo_pps" => k.poll_lo_pps = parse_f64(value, line, key)?,
                    "poll_hi_pps" => k.poll_hi_pps = parse_f64(value, line, key)?,
                    "stall_prob_max" => k.stall_prob_max = parse_f64(value, line, key)?,
                    "stall_min_us" => k.stall_min_us = parse_f64(value, line, key)?,
                    "stall_max_us" => k.stall_max_us = parse_f64(value, line, key)?,
                    "merge_prob_max" => k.merge_prob_max = parse_f64(value, line, key)?,
                    "boundary_jitter_us" => k.boundary_jitter_us = parse_f64(value, line, key)?,
                    "rate_window" => k.rate_window = parse_u32(value, line, key)?,
                    _ => return Err(err_unknown()),
                }
            }
            _ => {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("unknown section `[{section}]`"),
                })
            }
        }
        Ok(())
    }

    /// Parse the text form. Unknown sections/keys and malformed values are
    /// rejected with the offending line number.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig {
            aps: Vec::new(),
            stations: Vec::new(),
            ..ScenarioConfig::default()
        };
        let mut section: Option<(String, Option<u16>)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let trimmed = stripped.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(inner) = trimmed.strip_prefix('[') {
                let inner = inner.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                    line,
                    msg: "unterminated section header".into(),
                })?;
                let mut it = inner.split_whitespace();
                let name = it.next().unwrap_or("").to_string();
                let id = match it.next() {
                    Some(tok) => Some(tok.parse::<u16>().map_err(|_| ConfigError::Parse {
                        line,
                        msg: format!("section id must be an integer, got `{tok}`"),
                    })?),
                    None => None,
                };
                if it.next().is_some() {
                    return Err(ConfigError::Parse { line, msg: "trailing tokens in section header".into() });
                }
                if name.is_empty() {
                    return Err(ConfigError::Parse { line, msg: "empty section header".into() });
                }
                // Instantiate sections that carry defaults even with no keys.
                match name.as_str() {
                    "ap" => {
                        let id = id.unwrap_or(1);
                        if cfg.ap(id).is_none() {
                            cfg.aps.push(ApConfig { id, ..ApConfig::default() });
                        }
                    }
                    "station" => {
                        let id = id.ok_or_else(|| ConfigError::Parse {
                            line,
                            msg: "[station] requires an id".into(),
                        })?;
                        if cfg.station(id).is_none() {
                            cfg.stations.push(StationConfig::new(id));
                        }
                    }
                    "backhaul" => {
                        cfg.backhaul.get_or_insert_with(BackhaulConfig::default);
                    }
                    "controller" => {
                        cfg.controller.get_or_insert_with(ControllerConfig::default);
                    }
                    "contender" => {
                        let id = id.ok_or_else(|| ConfigError::Parse {
                            line,
                            msg: "[contender] requires an id".into(),
                        })?;
                        if !cfg.contenders.iter().any(|c| c.id == id) {
                            cfg.contenders.push(ContenderConfig::new(id));
                        }
                    }
                    "kernel_noise" => {}
                    _ => {
                        return Err(ConfigError::Parse {
                            line,
                            msg: format!("unknown section `[{name}]`"),
                        })
                    }
                }
                section = Some((name, id));
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse { line, msg: "empty key".into() });
            }
            match &section {
                None => match key {
                    "duration" => cfg.duration = parse_f64(value, line, key)?,
                    "seed" => cfg.seed = parse_u64(value, line, key)?,
                    _ => {
                        return Err(ConfigError::Parse {
                            line,
                            msg: format!("unknown top-level key `{key}`"),
                        })
                    }
                },
                Some((name, id)) => cfg.apply_key(name, *id, key, value, line)?,
            }
        }
        if cfg.aps.is_empty() {
            cfg.aps.push(ApConfig::default());
        }
        if cfg.stations.is_empty() {
            cfg.stations.push(StationConfig::new(1));
        }
        Ok(cfg)
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "duration = {:?}", self.duration);
        let _ = writeln!(s, "seed = {}", self.seed);
        for ap in &self.aps {
            let _ = writeln!(s, "\n[ap {}]", ap.id);
            let _ = writeln!(s, "n_max = {}", ap.n_max);
            let _ = writeln!(s, "queue_capacity = {}", ap.queue_capacity);
            let _ = writeln!(s, "phy_overhead_us = {:?}", ap.phy_overhead * 1e6);
            let _ = writeln!(s, "difs_us = {:?}", ap.difs * 1e6);
            let _ = writeln!(s, "slot_us = {:?}", ap.slot_time * 1e6);
            let _ = writeln!(s, "cw_min = {}", ap.cw_min);
            let _ = writeln!(s, "cw_max = {}", ap.cw_max);
            let _ = writeln!(s, "error_prob = {:?}", ap.error_prob);
            match ap.error_until {
                Some(t) => {
                    let _ = writeln!(s, "error_until_s = {t:?}");
                }
                None => {
                    let _ = writeln!(s, "error_until_s = none");
                }
            }
            let _ = writeln!(s, "retry_limit = {}", ap.retry_limit);
            let _ = writeln!(s, "beacon_pps = {:?}", ap.beacon_pps);
            let _ = writeln!(s, "beacon_airtime_us = {:?}", ap.beacon_airtime * 1e6);
        }
        for st in &self.stations {
            let _ = writeln!(s, "\n[station {}]", st.id);
            let _ = writeln!(s, "ap = {}", st.ap);
            let _ = writeln!(s, "mcs_rate = {:?}", st.mcs_rate);
            let _ = writeln!(s, "packet_len = {:?}", st.packet_len);
            let mode = match st.mode {
                StationMode::Controlled => "controlled",
                StationMode::Legacy => "legacy",
            };
            let _ = writeln!(s, "mode = {mode}");
            let _ = writeln!(s, "send_rate = {:?}", st.send_rate);
            if !st.rate_schedule.is_empty() {
                let _ = writeln!(s, "rate_schedule = {}", fmt_schedule(&st.rate_schedule));
            }
            if !st.mcs_schedule.is_empty() {
                let _ = writeln!(s, "mcs_schedule = {}", fmt_schedule(&st.mcs_schedule));
            }
        }
        if let Some(b) = &self.backhaul {
            let _ = writeln!(s, "\n[backhaul]");
            let _ = writeln!(s, "link_rate = {:?}", b.link_rate);
            let _ = writeln!(s, "queue_len = {}", b.queue_len);
            let _ = writeln!(s, "cross_rate = {:?}", b.cross_rate);
            let _ = writeln!(s, "cross_packet_len = {:?}", b.cross_packet_len);
            if !b.cross_schedule.is_empty() {
                let toks: Vec<String> = b
                    .cross_schedule
                    .iter()
                    .map(|(t, on)| format!("{:?}:{}", t, if *on { "on" } else { "off" }))
                    .collect();
                let _ = writeln!(s, "cross_schedule = {}", toks.join(","));
            }
        }
        if let Some(c) = &self.controller {
            let _ = writeln!(s, "\n[controller]");
            let _ = writeln!(s, "gain = {:?}", c.gain);
            let _ = writeln!(s, "interval_ms = {:?}", c.interval * 1e3);
            let _ = writeln!(s, "target_agg = {:?}", c.target_agg);
            let _ = writeln!(s, "x_min = {:?}", c.x_min);
            let _ = writeln!(s, "x_max = {:?}", c.x_max);
            let _ = writeln!(s, "feedback_delay_ms = {:?}", c.feedback_delay * 1e3);
            let _ = writeln!(s, "feedback_airtime_us = {:?}", c.feedback_airtime * 1e6);
            let m = match c.measurement {
                ControlMeasurement::MaxMcs => "max_mcs",
                ControlMeasurement::MeanAgg => "mean_agg",
            };
            let _ = writeln!(s, "measurement = {m}");
        }
        for ct in &self.contenders {
            let _ = writeln!(s, "\n[contender {}]", ct.id);
            let _ = writeln!(s, "airtime_us = {:?}", ct.airtime * 1e6);
            let mode = match ct.mode {
                ContenderMode::Poisson => "poisson",
                ContenderMode::Saturated => "saturated",
            };
            let _ = writeln!(s, "mode = {mode}");
            let _ = writeln!(s, "rate_pps = {:?}", ct.rate_pps);
            let _ = writeln!(s, "on_ms = {:?}", ct.on_mean * 1e3);
            let _ = writeln!(s, "off_ms = {:?}", ct.off_mean * 1e3);
        }
        let k = &self.kernel_noise;
        let _ = writeln!(s, "\n[kernel_noise]");
        let _ = writeln!(s, "isr_latency_us = {:?}", k.isr_latency_us);
        let _ = writeln!(s, "intra_min_us = {:?}", k.intra_min_us);
        let _ = writeln!(s, "intra_max_us = {:?}", k.intra_max_us);
        let _ = writeln!(s, "poll_lo_pps = {:?}", k.poll_lo_pps);
        let _ = writeln!(s, "poll_hi_pps = {:?}", k.poll_hi_pps);
        let _ = writeln!(s, "stall_prob_max = {:?}", k.stall_prob_max);
        let _ = writeln!(s, "stall_min_us = {:?}", k.stall_min_us);
        let _ = writeln!(s, "stall_max_us = {:?}", k.stall_max_us);
        let _ = writeln!(s, "merge_prob_max = {:?}", k.merge_prob_max);
        let _ = writeln!(s, "boundary_jitter_us = {:?}", k.boundary_jitter_us);
        let _ = writeln!(s, "rate_window = {}", k.rate_window);
        s
    }
}

fn promote(e: ConfigError, path: &str) -> ConfigError {
    match e {
        ConfigError::Parse { msg, .. } => ConfigError::invalid(path, msg),
        other => other,
    }
}

fn parse_f64(v: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("{key}: expected a number, got `{v}`"),
    })?;
    if !x.is_finite() {
        return Err(ConfigError::Parse { line, msg: format!("{key}: must be finite") });
    }
    Ok(x)
}

fn parse_u64(v: &str, line: usize, key: &str) -> Result<u64, ConfigError> {
    v.parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("{key}: expected a non-negative integer, got `{v}`"),
    })
}

fn parse_u32(v: &str, line: usize, key: &str) -> Result<u32, ConfigError> {
    v.parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("{key}: expected a non-negative integer, got `{v}`"),
    })
}

fn parse_schedule(v: &str, line: usize, key: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    let mut out = Vec::new();
    for tok in v.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let (t, val) = tok.split_once(':').ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("{key}: expected `time:value`, got `{tok}`"),
        })?;
        out.push((parse_f64(t.trim(), line, key)?, parse_f64(val.trim(), line, key)?));
    }
    Ok(out)
}

fn parse_toggle_schedule(v: &str, line: usize, key: &str) -> Result<Vec<(f64, bool)>, ConfigError> {
    let mut out = Vec::new();
    for tok in v.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let (t, val) = tok.split_once(':').ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("{key}: expected `time:on|off`, got `{tok}`"),
        })?;
        let on = match val.trim() {
            "on" => true,
            "off" => false,
            other => {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("{key}: expected on|off, got `{other}`"),
                })
            }
        };
        out.push((parse_f64(t.trim(), line, key)?, on));
    }
    Ok(out)
}

fn fmt_schedule(sched: &[(f64, f64)]) -> String {
    let toks: Vec<String> = sched.iter().map(|(t, v)| format!("{t:?}:{v:?}")).collect();
    toks.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_text();
        let parsed = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn full_config_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.stations[0].mcs_schedule = vec![(20.0, 390.0e6)];
        cfg.stations[0].rate_schedule = vec![(5.0, 1.0e8), (20.0, 2.0e8)];
        cfg.stations.push(StationConfig { id: 2, mode: StationMode::Legacy, ..StationConfig::new(2) });
        cfg.backhaul = Some(BackhaulConfig {
            cross_rate: 600.0e6,
            cross_schedule: vec![(10.0, true), (20.0, false)],
            ..BackhaulConfig::default()
        });
        cfg.controller = Some(ControllerConfig::default());
        cfg.contenders.push(ContenderConfig::new(1));
        let parsed = ScenarioConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let text = "duration = 10\nseed = 1\n\n[ap 1]\nbogus = 3\n";
        let err = ScenarioConfig::parse(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn validate_names_offending_field() {
        let mut cfg = ScenarioConfig::default();
        cfg.stations[0].mcs_rate = -1.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("station.1.mcs_rate"), "{err}");

        let mut cfg = ScenarioConfig::default();
        cfg.aps[0].n_max = 100;
        assert!(cfg.validate().unwrap_err().to_string().contains("n_max"));
    }

    #[test]
    fn set_field_dotted_paths() {
        let mut cfg = ScenarioConfig::default();
        cfg.set_field("station.1.send_rate", "2e8").unwrap();
        assert_eq!(cfg.stations[0].send_rate, 2.0e8);
        cfg.set_field("controller.gain", "0.5").unwrap();
        assert_eq!(cfg.controller.as_ref().unwrap().gain, 0.5);
        cfg.set_field("duration", "12.5").unwrap();
        assert_eq!(cfg.duration, 12.5);
        assert!(cfg.set_field("station.1.nope", "1").is_err());
        assert!(cfg.set_field("nope.1.x", "1").is_err());
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# header\nduration = 5 # trailing\n\nseed = 7\n";
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.duration, 5.0);
        assert_eq!(cfg.seed, 7);
    }
}
