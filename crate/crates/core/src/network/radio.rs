use crate::sim::SimTime;

/// Shared radio and MAC parameters. Propagation is a disc of the topology's
/// radio range; carrier and antenna height are recorded but have no effect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadioParams {
    pub carrier_mhz: f64,
    pub antenna_height_m: f64,
    /// Independent per-receiver loss probability.
    pub loss: f64,
    pub base_latency: SimTime,
    /// Uniform jitter in `[0, jitter_max]` added to every hop.
    pub jitter_max: SimTime,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            carrier_mhz: 954.0,
            antenna_height_m: 1.9,
            loss: 0.0,
            base_latency: SimTime::from_millis(2),
            jitter_max: SimTime::from_millis(2),
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(format!("loss probability {} outside [0, 1]", self.loss));
        }
        Ok(())
    }
}

/// On-air packet sizes in bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketSizes {
    pub data: u32,
    pub control: u32,
}

impl Default for PacketSizes {
    fn default() -> Self {
        PacketSizes { data: 64, control: 36 }
    }
}

/// Network-wide byte counts per sampling interval.
///
/// `Δ_out` accumulates bytes put on the air, `Δ_in` bytes received, each
/// attributed to the interval containing the event time.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkByteLedger {
    interval: SimTime,
    duration: SimTime,
    bytes_in: Vec<u64>,
    bytes_out: Vec<u64>,
    /// Link speed in bits per second.
    pub speed_bps: u64,
}

impl LinkByteLedger {
    pub fn new(interval: SimTime, duration: SimTime, speed_bps: u64) -> Self {
        assert!(interval > SimTime::ZERO, "sampling interval must be positive");
        let n = duration.as_nanos().div_ceil(interval.as_nanos()) as usize;
        LinkByteLedger {
            interval,
            duration,
            bytes_in: vec![0; n],
            bytes_out: vec![0; n],
            speed_bps,
        }
    }

    fn slot(&self, t: SimTime) -> Option<usize> {
        if t >= self.duration {
            return None;
        }
        Some((t.as_nanos() / self.interval.as_nanos()) as usize)
    }

    pub fn record_out(&mut self, t: SimTime, bytes: u32) {
        if let Some(i) = self.slot(t) {
            self.bytes_out[i] += bytes as u64;
        }
    }

    pub fn record_in(&mut self, t: SimTime, bytes: u32) {
        if let Some(i) = self.slot(t) {
            self.bytes_in[i] += bytes as u64;
        }
    }

    pub fn interval(&self) -> SimTime {
        self.interval
    }

    /// `(Δ_in, Δ_out, length)` for each contiguous sampling cycle. The last
    /// cycle is shorter when the duration is not a whole multiple.
    pub fn cycles(&self) -> impl Iterator<Item = (u64, u64, SimTime)> + '_ {
        (0..self.bytes_in.len()).map(move |i| {
            let start = self.interval.as_nanos() * i as u64;
            let end = (start + self.interval.as_nanos()).min(self.duration.as_nanos());
            (
                self.bytes_in[i],
                self.bytes_out[i],
                SimTime::from_nanos(end - start),
            )
        })
    }

    pub fn total_in(&self) -> u64 {
        self.bytes_in.iter().sum()
    }

    pub fn total_out(&self) -> u64 {
        self.bytes_out.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_cover_duration() {
        let mut l = LinkByteLedger::new(SimTime::from_millis(100), SimTime::from_millis(250), 1);
        l.record_out(SimTime::from_millis(0), 10);
        l.record_in(SimTime::from_millis(199), 7);
        l.record_in(SimTime::from_millis(249), 1);
        l.record_in(SimTime::from_millis(250), 99);
        let c: Vec<_> = l.cycles().collect();
        assert_eq!(
            c,
            vec![
                (0, 10, SimTime::from_millis(100)),
                (7, 0, SimTime::from_millis(100)),
                (1, 0, SimTime::from_millis(50)),
            ]
        );
        assert_eq!((l.total_in(), l.total_out()), (8, 10));
    }

    #[test]
    fn loss_is_validated() {
        let r = RadioParams { loss: 1.5, ..Default::default() };
        assert!(r.validate().is_err());
        assert!(RadioParams::default().validate().is_ok());
    }
}
