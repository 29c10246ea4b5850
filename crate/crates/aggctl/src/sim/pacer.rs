//! Paced packet source. Inter-arrival time is exactly `packet_len / rate`
//! seconds; scheduled rate changes take effect when computing the interval
//! that follows the first emission at or after the change time.

#[derive(Debug, Clone)]
pub struct Pacer {
    pub rate: f64,
    pub packet_len: f64,
    schedule: Vec<(f64, f64)>,
    ptr: usize,
    /// True while an emission/wake event for this source is in the heap.
    pub armed: bool,
}

/// What the source should do after an emission/wake event fired at `now`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacerNext {
    /// Schedule the next emission at this time.
    EmitAt(f64),
    /// Rate is zero; wake (without emitting) at this schedule point.
    WakeAt(f64),
    /// Rate is zero and no future schedule entry exists.
    Idle,
}

impl Pacer {
    pub fn new(rate: f64, packet_len: f64, schedule: Vec<(f64, f64)>) -> Self {
        Pacer { rate, packet_len, schedule, ptr: 0, armed: false }
    }

    /// Whether an event firing at `now` emits a packet (rates are read
    /// before schedule changes at the same instant are applied).
    pub fn emits(&self) -> bool {
        self.rate > 0.0
    }

    /// Apply schedule entries due at or before `now`, then pick the follow-up.
    pub fn after_fire(&mut self, now: f64) -> PacerNext {
        while self.ptr < self.schedule.len() && self.schedule[self.ptr].0 <= now {
            self.rate = self.schedule[self.ptr].1;
            self.ptr += 1;
        }
        if self.rate > 0.0 {
            PacerNext::EmitAt(now + self.packet_len / self.rate)
        } else if self.ptr < self.schedule.len() {
            PacerNext::WakeAt(self.schedule[self.ptr].0)
        } else {
            PacerNext::Idle
        }
    }

    /// Controller override. Returns the emission time to arm if the source
    /// was idle.
    pub fn set_rate(&mut self, rate: f64, now: f64) -> Option<f64> {
        self.rate = rate;
        if !self.armed && rate > 0.0 {
            Some(now + self.packet_len / rate)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_is_len_over_rate() {
        // 12 Mb/s with 12000-bit packets paces at exactly 1 ms.
        let mut p = Pacer::new(12.0e6, 12_000.0, vec![]);
        assert!(p.emits());
        match p.after_fire(0.0) {
            PacerNext::EmitAt(t) => assert_eq!(t, 1.0e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_rate_emits_nothing() {
        let mut p = Pacer::new(0.0, 12_000.0, vec![]);
        assert!(!p.emits());
        assert_eq!(p.after_fire(0.0), PacerNext::Idle);
    }

    #[test]
    fn schedule_applies_at_first_packet_after_change() {
        // 1 ms pacing, rate change at t=20 s: the packet already scheduled for
        // t=20.0005 still emits, the following interval uses the new rate.
        let mut p = Pacer::new(12.0e6, 12_000.0, vec![(20.0, 24.0e6)]);
        let mut t = 19.9995;
        assert!(p.emits());
        match p.after_fire(t) {
            PacerNext::EmitAt(next) => t = next, // 20.0005, old interval
            other => panic!("{other:?}"),
        }
        assert!((t - 20.0005).abs() < 1e-12);
        assert!(p.emits());
        match p.after_fire(t) {
            PacerNext::EmitAt(next) => assert!((next - t - 0.5e-3).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wake_from_zero_rate_schedule() {
        let mut p = Pacer::new(0.0, 12_000.0, vec![(5.0, 1.0e8)]);
        assert!(!p.emits());
        assert_eq!(p.after_fire(0.0), PacerNext::WakeAt(5.0));
        // At the wake the old rate (0) is read, so nothing emits yet.
        assert!(!p.emits());
        match p.after_fire(5.0) {
            PacerNext::EmitAt(t) => assert!((t - 5.00012).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
