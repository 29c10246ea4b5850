//! Trace records produced by a simulation run and their CSV export.
//!
//! All recorded timestamps are integer microseconds (MAC timestamp
//! granularity). A packet is exactly one of: delivered, dropped at the
//! backhaul, dropped at the AP queue, or dropped after exhausting link-layer
//! retries.

use std::fmt::Write as _;

use crate::config::ScenarioConfig;

/// Sentinel for "no value" in compact u32 fields.
pub const NONE_U32: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropKind {
    None,
    Backhaul,
    ApQueue,
    RetryLimit,
}

/// One downlink packet's lifecycle. Times in microseconds since run start.
#[derive(Debug, Clone, Copy)]
pub struct PacketRecord {
    /// Per-station sequence id, assigned in send order.
    pub seq: u32,
    pub station: u16,
    pub t_send_us: u32,
    /// Arrival at the AP ingress; `NONE_U32` if dropped on the backhaul.
    pub t_ap_us: u32,
    /// Frame that finally delivered the packet; `NONE_U32` if never delivered.
    pub frame_id: u32,
    /// MAC receive timestamp (frame end); `NONE_U32` if never delivered.
    pub t_mac_us: u32,
    /// Kernel receive timestamp; `NONE_U32` if never delivered.
    pub t_kernel_us: u32,
    /// Link-layer loss events this packet suffered.
    pub lost_in_frame: u8,
    pub drop: DropKind,
}

impl PacketRecord {
    pub fn delivered(&self) -> bool {
        self.t_mac_us != NONE_U32
    }

    /// One-way delay in seconds, if delivered.
    pub fn delay(&self) -> Option<f64> {
        self.delivered()
            .then(|| (self.t_mac_us.saturating_sub(self.t_send_us)) as f64 * 1e-6)
    }
}

/// One transmitted aggregate frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameRecord {
    pub frame_id: u32,
    pub station: u16,
    pub ap: u16,
    /// Packets carried (transmitted, before any loss).
    pub n_agg: u32,
    /// PHY rate used, bits/s.
    pub mcs_rate: f64,
    pub t_start_us: u32,
    pub t_end_us: u32,
    pub is_retx: bool,
}

/// One controller update, per station.
#[derive(Debug, Clone, Copy)]
pub struct ControlLogRow {
    pub slot: u32,
    pub station: u16,
    /// Mean aggregation reported for the slot; `None` for an empty slot.
    pub mean_agg: Option<f64>,
    pub mean_mcs: f64,
    pub x_before: f64,
    pub x_after: f64,
    pub i_star: u16,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DropCounts {
    pub backhaul: u64,
    pub ap_queue: u64,
    pub retry_limit: u64,
}

/// Complete, replayable output of one scenario run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub config: ScenarioConfig,
    pub scenario_hash: String,
    pub seed: u64,
    /// Packet records in send order.
    pub packets: Vec<PacketRecord>,
    /// Frame records in transmission order.
    pub frames: Vec<FrameRecord>,
    pub controller_log: Vec<ControlLogRow>,
}

impl Trace {
    pub fn drop_counts(&self) -> DropCounts {
        let mut d = DropCounts::default();
        for p in &self.packets {
            match p.drop {
                DropKind::Backhaul => d.backhaul += 1,
                DropKind::ApQueue => d.ap_queue += 1,
                DropKind::RetryLimit => d.retry_limit += 1,
                DropKind::None => {}
            }
        }
        d
    }

    pub fn frame(&self, id: u32) -> Option<&FrameRecord> {
        self.frames.get(id as usize).filter(|f| f.frame_id == id)
    }

    /// Delivered packets of one station in MAC-timestamp order.
    pub fn delivered(&self, station: u16) -> Vec<&PacketRecord> {
        let mut v: Vec<&PacketRecord> = self
            .packets
            .iter()
            .filter(|p| p.station == station && p.delivered())
            .collect();
        v.sort_by_key(|p| (p.t_mac_us, p.seq));
        v
    }

    /// Packet-level CSV: one row per packet, times in integer microseconds,
    /// empty fields where a value does not apply.
    pub fn packets_csv(&self) -> String {
        let mut s = String::with_capacity(64 * self.packets.len() + 128);
        s.push_str("seq,station,t_send,t_ap_arrival,frame_id,n_agg,mcs_rate,t_mac_rx,t_kernel_rx,dropped,is_retx\n");
        for p in &self.packets {
            let _ = write!(s, "{},{},{}", p.seq, p.station, p.t_send_us);
            push_opt(&mut s, p.t_ap_us);
            push_opt(&mut s, p.frame_id);
            match self.frame(p.frame_id) {
                Some(f) => {
                    let _ = write!(s, ",{},{}", f.n_agg, f.mcs_rate.round() as u64);
                }
                None => s.push_str(",,"),
            }
            push_opt(&mut s, p.t_mac_us);
            push_opt(&mut s, p.t_kernel_us);
            let dropped = u8::from(p.drop != DropKind::None);
            let is_retx = self.frame(p.frame_id).map(|f| u8::from(f.is_retx)).unwrap_or(0);
            let _ = writeln!(s, ",{dropped},{is_retx}");
        }
        s
    }

    /// Frame-level CSV.
    pub fn frames_csv(&self) -> String {
        let mut s = String::with_capacity(48 * self.frames.len() + 64);
        s.push_str("frame_id,station,n_agg,mcs_rate,t_start,t_end,is_retx\n");
        for f in &self.frames {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                f.frame_id,
                f.station,
                f.n_agg,
                f.mcs_rate.round() as u64,
                f.t_start_us,
                f.t_end_us,
                u8::from(f.is_retx)
            );
        }
        s
    }

    /// Controller log CSV: slot, station, mean aggregation, mean MCS, rate
    /// before/after the update and the station whose report drove it.
    pub fn controller_csv(&self) -> String {
        let mut s = String::with_capacity(48 * self.controller_log.len() + 64);
        s.push_str("slot,station,mean_agg,mean_mcs,x_before,x_after,i_star\n");
        for r in &self.controller_log {
            let agg = r.mean_agg.map(|a| format!("{a:?}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{:?},{:?},{}",
                r.slot,
                r.station,
                agg,
                r.mean_mcs.round() as u64,
                r.x_before,
                r.x_after,
                r.i_star
            );
        }
        s
    }
}

fn push_opt(s: &mut String, v: u32) {
    if v == NONE_U32 {
        s.push(',');
    } else {
        let _ = write!(s, ",{v}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_and_missing_fields() {
        let tr = Trace {
            config: ScenarioConfig::default(),
            scenario_hash: "0".into(),
            seed: 1,
            packets: vec![PacketRecord {
                seq: 0,
                station: 1,
                t_send_us: 10,
                t_ap_us: 12,
                frame_id: NONE_U32,
                t_mac_us: NONE_U32,
                t_kernel_us: NONE_U32,
                lost_in_frame: 0,
                drop: DropKind::ApQueue,
            }],
            frames: vec![],
            controller_log: vec![],
        };
        let csv = tr.packets_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seq,station,t_send,t_ap_arrival,frame_id,n_agg,mcs_rate,t_mac_rx,t_kernel_rx,dropped,is_retx"
        );
        assert_eq!(lines.next().unwrap(), "0,1,10,12,,,,,,1,0");
    }
}
