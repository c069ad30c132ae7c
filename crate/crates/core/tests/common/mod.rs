//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use dissem::network::{Energy, EnergyModel, Topology};
use dissem::protocol::PacketKind;
use dissem::runtime::{SimConfig, TraceRecord};
use dissem::sim::SimTime;

/// Cheapest total transmit cost from every node to the consumer, with each
/// link weighted by one unicast of `bits` over its length.
pub fn dijkstra_to_consumer(topo: &Topology, model: &EnergyModel, bits: u64) -> Vec<Energy> {
    let n = topo.len();
    let mut dist = vec![u64::MAX; n];
    let Some(sink) = topo.consumer() else {
        return vec![Energy::INFINITE; n];
    };
    let mut heap = BinaryHeap::new();
    dist[sink] = 0;
    heap.push(Reverse((0u64, sink)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for v in 0..n {
            if v == u || !topo.are_neighbors(u, v) {
                continue;
            }
            let w = model.tx_cost(bits, topo.position(u).dist(topo.position(v))).picojoules();
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist.into_iter()
        .map(|d| if d == u64::MAX { Energy::INFINITE } else { Energy::from_picojoules(d) })
        .collect()
}

/// Metrics rebuilt from the raw radio records of one run.
#[derive(Debug, PartialEq)]
pub struct Recomputed {
    pub consumed: Vec<Energy>,
    pub e_avg_j: f64,
    pub r_oh: u64,
    pub dr: Option<f64>,
    pub band_util_pct: Option<f64>,
}

pub fn recompute(records: &[TraceRecord], nodes: usize, cfg: &SimConfig) -> Recomputed {
    let mut consumed = vec![0u64; nodes];
    let mut r_oh = 0;
    let mut generated = 0u64;
    let mut delivered = 0u64;
    let slots = cfg.duration.as_nanos().div_ceil(cfg.sampling_interval.as_nanos()) as usize;
    let mut bytes_in = vec![0u64; slots];
    let mut bytes_out = vec![0u64; slots];
    let slot = |t: SimTime| {
        (t < cfg.duration).then(|| (t.as_nanos() / cfg.sampling_interval.as_nanos()) as usize)
    };
    for r in records {
        match *r {
            TraceRecord::Tx { time, node, kind, bytes, energy, .. } => {
                consumed[node] += energy.picojoules();
                if kind != PacketKind::Data {
                    r_oh += 1;
                }
                if let Some(i) = slot(time) {
                    bytes_out[i] += bytes as u64;
                }
            }
            TraceRecord::Rx { time, node, bytes, energy, .. } => {
                consumed[node] += energy.picojoules();
                if let Some(i) = slot(time) {
                    bytes_in[i] += bytes as u64;
                }
            }
            TraceRecord::Generated { .. } => generated += 1,
            TraceRecord::Consumed { .. } => delivered += 1,
        }
    }
    let total: u128 = consumed.iter().map(|&c| c as u128).sum();
    let mut util = Vec::new();
    for i in 0..slots {
        let start = cfg.sampling_interval.as_nanos() * i as u64;
        let end = (start + cfg.sampling_interval.as_nanos()).min(cfg.duration.as_nanos());
        let secs = SimTime::from_nanos(end - start).as_secs_f64();
        let peak = bytes_in[i].max(bytes_out[i]) as f64;
        util.push(peak * 8.0 * 100.0 / (secs * cfg.link_speed_bps as f64));
    }
    Recomputed {
        consumed: consumed.into_iter().map(Energy::from_picojoules).collect(),
        e_avg_j: total as f64 / nodes as f64 / 1e12,
        r_oh,
        dr: (generated > 0).then(|| delivered as f64 / generated as f64),
        band_util_pct: (!util.is_empty()).then(|| util.iter().sum::<f64>() / util.len() as f64),
    }
}

/// Unique sequence numbers consumed per generation time window.
pub fn unique_after(records: &[TraceRecord], from: SimTime) -> (usize, usize) {
    let mut born: BTreeMap<u32, SimTime> = BTreeMap::new();
    let mut got = std::collections::BTreeSet::new();
    for r in records {
        match *r {
            TraceRecord::Generated { time, seq } => {
                born.insert(seq, time);
            }
            TraceRecord::Consumed { seq, .. } => {
                got.insert(seq);
            }
            _ => {}
        }
    }
    let window: Vec<u32> = born.iter().filter(|(_, &t)| t >= from).map(|(&s, _)| s).collect();
    (window.iter().filter(|s| got.contains(s)).count(), window.len())
}
