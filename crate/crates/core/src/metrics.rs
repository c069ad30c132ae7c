//! Comparison metrics computed from a run's ledger: average energy
//! consumption, routing overhead, delivery ratio and bandwidth utilisation.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::network::{EnergyAccount, LinkByteLedger, NodeId};
use crate::protocol::PacketKind;
use crate::sim::SimTime;

/// Counters accumulated while a run executes.
#[derive(Clone, Debug)]
pub struct MetricsLedger {
    /// Routing packets transmitted per node (`T_p`).
    pub tx_routing: Vec<u64>,
    pub tx_data: Vec<u64>,
    pub tx_by_kind: BTreeMap<PacketKind, u64>,
    /// Data samples generated by the source.
    pub sent: u64,
    /// Data receptions at the consumer, duplicates included.
    pub received: u64,
    pub duplicates: u64,
    unique: BTreeSet<(NodeId, u32)>,
    pub routing_failures: u64,
    pub energy: Vec<EnergyAccount>,
    pub bytes: LinkByteLedger,
}

impl MetricsLedger {
    pub fn new(energy: Vec<EnergyAccount>, bytes: LinkByteLedger) -> Self {
        let n = energy.len();
        MetricsLedger {
            tx_routing: vec![0; n],
            tx_data: vec![0; n],
            tx_by_kind: BTreeMap::new(),
            sent: 0,
            received: 0,
            duplicates: 0,
            unique: BTreeSet::new(),
            routing_failures: 0,
            energy,
            bytes,
        }
    }

    pub fn record_tx(&mut self, node: NodeId, kind: PacketKind) {
        if kind.is_routing() {
            self.tx_routing[node] += 1;
        } else {
            self.tx_data[node] += 1;
        }
        *self.tx_by_kind.entry(kind).or_default() += 1;
    }

    /// Counts a consumer reception; returns true if it was a duplicate.
    pub fn consume(&mut self, id: (NodeId, u32)) -> bool {
        self.received += 1;
        let dup = !self.unique.insert(id);
        if dup {
            self.duplicates += 1;
        }
        dup
    }

    pub fn unique_delivered(&self) -> u64 {
        self.unique.len() as u64
    }

    pub fn tx_of(&self, kind: PacketKind) -> u64 {
        self.tx_by_kind.get(&kind).copied().unwrap_or(0)
    }

    pub fn total_tx(&self) -> u64 {
        self.tx_routing.iter().sum::<u64>() + self.tx_data.iter().sum::<u64>()
    }
}

/// Mean over all deployed nodes of `initial - final` energy, in joules.
pub fn avg_energy(ledger: &MetricsLedger) -> f64 {
    mean_consumed(&ledger.energy)
}

pub fn mean_consumed(accounts: &[EnergyAccount]) -> f64 {
    if accounts.is_empty() {
        return 0.0;
    }
    let total: u128 = accounts
        .iter()
        .map(|a| a.consumed().picojoules() as u128)
        .sum();
    total as f64 / accounts.len() as f64 / 1e12
}

/// Population variance of per-node consumed energy, in J².
pub fn consumed_energy_variance(accounts: &[EnergyAccount]) -> f64 {
    if accounts.is_empty() {
        return 0.0;
    }
    let mean = mean_consumed(accounts);
    accounts
        .iter()
        .map(|a| {
            let d = a.consumed().joules() - mean;
            d * d
        })
        .sum::<f64>()
        / accounts.len() as f64
}

/// `R_OH = Σ_k T_p,k`.
pub fn routing_overhead(ledger: &MetricsLedger) -> u64 {
    routing_overhead_of(&ledger.tx_routing)
}

pub fn routing_overhead_of(per_node: &[u64]) -> u64 {
    per_node.iter().sum()
}

/// `Dr = P_rec / P_sent`; duplicates push it above one. Undefined when
/// nothing was sent.
pub fn delivery_ratio(ledger: &MetricsLedger) -> Option<f64> {
    delivery_ratio_of(ledger.sent, ledger.received)
}

pub fn delivery_ratio_of(sent: u64, received: u64) -> Option<f64> {
    (sent > 0).then(|| received as f64 / sent as f64)
}

/// Fraction of generated samples that reached the consumer at least once.
pub fn unique_delivery_fraction(ledger: &MetricsLedger) -> Option<f64> {
    (ledger.sent > 0).then(|| ledger.unique_delivered() as f64 / ledger.sent as f64)
}

/// Utilisation of one sampling cycle in percent:
/// `max(Δ_in, Δ_out)·8·100 / (seconds·N_speed)`. `None` for empty cycles.
pub fn cycle_utilization(bytes_in: u64, bytes_out: u64, length: SimTime, speed_bps: u64) -> Option<f64> {
    if length == SimTime::ZERO || speed_bps == 0 {
        return None;
    }
    let peak = bytes_in.max(bytes_out) as f64;
    Some(peak * 8.0 * 100.0 / (length.as_secs_f64() * speed_bps as f64))
}

/// Mean utilisation over all complete or partial sampling cycles.
pub fn bandwidth_utilization(ledger: &MetricsLedger) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, o, len) in ledger.bytes.cycles() {
        if let Some(u) = cycle_utilization(i, o, len, ledger.bytes.speed_bps) {
            sum += u;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Summary of one completed run; one CSV row. Equality ignores
/// `wall_time`, which is not part of the result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub protocol: String,
    pub nodes: usize,
    pub seed: u64,
    pub e_avg_j: f64,
    pub r_oh: u64,
    pub dr: Option<f64>,
    pub band_util_pct: f64,
    pub duplicates: u64,
    pub sent: u64,
    pub received: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for RunResult {
    fn eq(&self, o: &Self) -> bool {
        self.protocol == o.protocol
            && self.nodes == o.nodes
            && self.seed == o.seed
            && self.e_avg_j == o.e_avg_j
            && self.r_oh == o.r_oh
            && self.dr == o.dr
            && self.band_util_pct == o.band_util_pct
            && self.duplicates == o.duplicates
            && self.sent == o.sent
            && self.received == o.received
    }
}

impl RunResult {
    pub fn from_ledger(protocol: &str, nodes: usize, seed: u64, ledger: &MetricsLedger, wall: Duration) -> Self {
        RunResult {
            protocol: protocol.to_string(),
            nodes,
            seed,
            e_avg_j: avg_energy(ledger),
            r_oh: routing_overhead(ledger),
            dr: delivery_ratio(ledger),
            band_util_pct: bandwidth_utilization(ledger).unwrap_or(0.0),
            duplicates: ledger.duplicates,
            sent: ledger.sent,
            received: ledger.received,
            wall_time: wall,
        }
    }

    pub fn unique(&self) -> u64 {
        self.received - self.duplicates
    }

    pub fn unique_fraction(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.unique() as f64 / self.sent as f64)
    }
}
