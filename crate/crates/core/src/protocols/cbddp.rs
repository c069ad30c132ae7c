//! Credit broadcast: the consumer floods a minimum-cost field, and data is
//! broadcast downhill along it. Each packet carries a budget of
//! `(1 + beta)` times the source's cost; a node rebroadcasts only while the
//! unspent fraction of the extra credit stays above a threshold, so data
//! spreads over a mesh of near-optimal paths instead of a single one.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::network::{Energy, NodeId};
use crate::protocol::{NodeCtx, NodeProtocol, Packet, PacketKind, Role};
use crate::sim::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct CbddpParams {
    pub beta: f64,
    pub threshold: f64,
    /// Consumer re-floods the cost field after this long without data.
    pub refresh_timeout: SimTime,
    /// Rebroadcast delay per joule of advertised cost; cheap nodes settle
    /// first, which keeps the number of corrective rebroadcasts small.
    pub backoff_s_per_joule: f64,
}

impl Default for CbddpParams {
    fn default() -> Self {
        CbddpParams {
            beta: 0.5,
            threshold: 0.0,
            refresh_timeout: SimTime::from_secs(10),
            backoff_s_per_joule: 10.0,
        }
    }
}

/// Credit state carried by every data packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CreditHeader {
    pub cost_source: Energy,
    pub beta: f64,
    /// Link energy spent by this packet so far.
    pub e_current: Energy,
    /// Cost of the node that sent this copy.
    pub e_min: Energy,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Header {
    Advert { epoch: u32, cost: Energy },
    Data(CreditHeader),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Timer {
    Rebroadcast,
    Gap,
}

/// Fraction of the extra credit not yet consumed:
/// `((1 + beta)·Cs - E_cur - C_N) / (beta·Cs)`. Negative infinity for a
/// node without a finite cost.
pub fn remaining_ratio(h: &CreditHeader, node_cost: Energy) -> f64 {
    if node_cost.is_infinite() || h.cost_source.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let cs = h.cost_source.picojoules() as f64;
    let budget = (1.0 + h.beta) * cs;
    let used = h.e_current.picojoules() as f64 + node_cost.picojoules() as f64;
    (budget - used) / (h.beta * cs)
}

/// Rebroadcast rule: strictly downhill and credit left. With zero credit
/// only nodes on a minimum-cost path qualify, decided in exact integers.
pub fn should_forward(h: &CreditHeader, node_cost: Energy, threshold: f64) -> bool {
    if node_cost.is_infinite() || node_cost >= h.e_min {
        return false;
    }
    if h.beta <= 0.0 {
        return h.e_current.picojoules() as u128 + node_cost.picojoules() as u128
            <= h.cost_source.picojoules() as u128;
    }
    remaining_ratio(h, node_cost) > threshold
}

pub struct Cbddp {
    id: NodeId,
    role: Role,
    params: Arc<CbddpParams>,
    epoch: Option<u32>,
    cost: Energy,
    pending: bool,
    seen: BTreeSet<(NodeId, u32)>,
    refreshes: u64,
}

impl Cbddp {
    pub fn cost(&self) -> Energy {
        self.cost
    }

    /// Cost-field floods started by this node (consumer only), the initial
    /// setup included.
    pub fn setups(&self) -> u64 {
        self.refreshes
    }

    fn flood_field(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        let epoch = self.epoch.map_or(0, |e| e + 1);
        self.epoch = Some(epoch);
        self.cost = Energy::ZERO;
        self.refreshes += 1;
        let p = ctx.packet(
            PacketKind::Advertisement,
            self.id,
            epoch,
            Header::Advert {
                epoch,
                cost: Energy::ZERO,
            },
        );
        ctx.broadcast(p);
        ctx.set_timer(self.params.refresh_timeout, Timer::Gap);
    }

    fn on_advert(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, epoch: u32, cost: Energy) {
        if self.role == Role::Consumer {
            return;
        }
        match self.epoch {
            Some(e) if epoch < e => return,
            Some(e) if epoch == e => {}
            _ => {
                self.epoch = Some(epoch);
                self.cost = Energy::INFINITE;
            }
        }
        let candidate = cost.saturating_add(ctx.data_link_cost(from));
        if candidate < self.cost {
            self.cost = candidate;
            if !self.pending {
                self.pending = true;
                let delay = SimTime::from_secs_f64(candidate.joules() * self.params.backoff_s_per_joule);
                ctx.set_timer(delay, Timer::Rebroadcast);
            }
        }
    }

    fn on_data_packet(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        if self.role == Role::Consumer {
            ctx.set_timer(self.params.refresh_timeout, Timer::Gap);
            return;
        }
        let Header::Data(mut h) = p.header else {
            return;
        };
        // Each packet is rebroadcast at most once, by the first copy that
        // qualifies; copies with too little credit leave the node free.
        if self.seen.contains(&p.id()) {
            return;
        }
        h.e_current = h.e_current.saturating_add(ctx.data_link_cost(from));
        if should_forward(&h, self.cost, self.params.threshold) {
            self.seen.insert(p.id());
            h.e_min = self.cost;
            ctx.broadcast(Packet {
                hop_count: 0,
                header: Header::Data(h),
                ..p
            });
        }
    }
}

impl NodeProtocol for Cbddp {
    type Shared = CbddpParams;
    type Timer = Timer;
    type Header = Header;

    fn new(id: NodeId, role: Role, shared: &Arc<CbddpParams>) -> Self {
        Cbddp {
            id,
            role,
            params: Arc::clone(shared),
            epoch: None,
            cost: Energy::INFINITE,
            pending: false,
            seen: BTreeSet::new(),
            refreshes: 0,
        }
    }

    fn on_start(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        if self.role == Role::Consumer {
            self.flood_field(ctx);
        }
    }

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, tag: Timer) {
        match tag {
            Timer::Rebroadcast => {
                self.pending = false;
                let epoch = self.epoch.unwrap_or(0);
                let p = ctx.packet(
                    PacketKind::Advertisement,
                    self.id,
                    epoch,
                    Header::Advert {
                        epoch,
                        cost: self.cost,
                    },
                );
                ctx.broadcast(p);
            }
            Timer::Gap => self.flood_field(ctx),
        }
    }

    fn on_packet(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        match (&p.kind, &p.header) {
            (PacketKind::Advertisement, &Header::Advert { epoch, cost }) => {
                self.on_advert(ctx, from, epoch, cost)
            }
            (PacketKind::Data, _) => self.on_data_packet(ctx, from, p),
            _ => {}
        }
    }

    fn on_data(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, seq: u32) {
        if self.cost.is_infinite() {
            ctx.routing_failure();
            return;
        }
        self.seen.insert((self.id, seq));
        let h = CreditHeader {
            cost_source: self.cost,
            beta: self.params.beta,
            e_current: Energy::ZERO,
            e_min: self.cost,
        };
        let p = ctx.packet(PacketKind::Data, self.id, seq, Header::Data(h));
        ctx.broadcast(p);
    }

    fn dump_state(&self) -> String {
        if self.cost.is_infinite() {
            format!("node {} cost inf", self.id)
        } else {
            format!("node {} cost {}", self.id, self.cost.picojoules())
        }
    }
}

/// Reference minimum-cost field from `consumer`, using the same link
/// weights the protocol uses.
pub fn dijkstra_costs(
    topology: &crate::network::Topology,
    model: &crate::network::EnergyModel,
    data_bits: u64,
) -> Vec<Energy> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut dist = vec![Energy::INFINITE; topology.len()];
    let Some(c) = topology.consumer() else {
        return dist;
    };
    dist[c] = Energy::ZERO;
    let mut heap = BinaryHeap::from([Reverse((Energy::ZERO, c))]);
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &v in topology.neighbors_of(u) {
            let nd = d.saturating_add(model.tx_cost_sq(data_bits, topology.dist_sq(u, v)));
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EnergyModel, Point, Topology};
    use crate::protocols::fixtures;
    use crate::runtime::{Fault, SimConfig, Simulation, TraceRecord};

    fn run_with(topo: Arc<Topology>, params: CbddpParams, cfg: SimConfig) -> Simulation<Cbddp> {
        let mut sim = Simulation::new(topo, cfg, Arc::new(params));
        sim.run().unwrap();
        sim
    }

    fn cfg(secs: u64) -> SimConfig {
        SimConfig {
            duration: SimTime::from_secs(secs),
            record_trace: true,
            ..Default::default()
        }
    }

    fn costs(sim: &Simulation<Cbddp>) -> Vec<Energy> {
        sim.nodes().iter().map(|n| n.cost()).collect()
    }

    #[test]
    fn line_costs_accumulate_per_hop() {
        let sim = run_with(fixtures::line3(), CbddpParams::default(), cfg(1));
        let w = EnergyModel::default().tx_cost(512, 50.0);
        assert_eq!(costs(&sim), vec![w + w, w, Energy::ZERO]);
    }

    #[test]
    fn lone_consumer_field() {
        let topo = Arc::new(Topology::from_positions(
            10.0,
            10.0,
            5.0,
            vec![Point::new(1.0, 1.0)],
            None,
            Some(0),
        ));
        let sim = run_with(topo, CbddpParams::default(), cfg(1));
        assert_eq!(costs(&sim), vec![Energy::ZERO]);
    }

    #[test]
    fn field_matches_dijkstra() {
        for seed in 1..=4 {
            let topo = Arc::new(Topology::generate(40, 511.0, 511.0, 271.3, seed));
            let sim = run_with(topo.clone(), CbddpParams::default(), cfg(2));
            assert_eq!(costs(&sim), dijkstra_costs(&topo, &EnergyModel::default(), 512));
        }
    }

    #[test]
    fn single_setup_when_lossless() {
        let topo = Arc::new(Topology::generate(40, 511.0, 511.0, 271.3, 2));
        let sim = run_with(topo.clone(), CbddpParams::default(), cfg(500));
        assert_eq!(sim.node(topo.consumer().unwrap()).setups(), 1);
    }

    #[test]
    fn refresh_is_idempotent() {
        // The source sits outside radio range, so no data ever arrives and
        // the consumer keeps re-flooding an unchanged field.
        let mut pos: Vec<Point> = (0..5).map(|i| Point::new(100.0 + 40.0 * i as f64, 50.0)).collect();
        pos.push(Point::new(0.0, 0.0));
        let topo = Arc::new(Topology::from_positions(300.0, 100.0, 50.0, pos, Some(5), Some(0)));
        let sim = run_with(topo.clone(), CbddpParams::default(), cfg(60));
        assert!(sim.node(0).setups() >= 5);
        let want = dijkstra_costs(&topo, &EnergyModel::default(), 512);
        assert!(want[5].is_infinite());
        assert_eq!(costs(&sim), want);
    }

    #[test]
    fn remaining_ratio_examples() {
        let h = |cs, e| CreditHeader {
            cost_source: Energy::from_picojoules(cs),
            beta: 0.5,
            e_current: Energy::from_picojoules(e),
            e_min: Energy::INFINITE,
        };
        assert_eq!(remaining_ratio(&h(10, 0), Energy::from_picojoules(10)), 1.0);
        assert_eq!(remaining_ratio(&h(10, 9), Energy::from_picojoules(6)), 0.0);
        assert!((remaining_ratio(&h(10, 6), Energy::from_picojoules(6)) - 0.6).abs() < 1e-12);
        assert_eq!(remaining_ratio(&h(10, 0), Energy::INFINITE), f64::NEG_INFINITY);
    }

    #[test]
    fn forwarding_requires_downhill() {
        let h = CreditHeader {
            cost_source: Energy::from_picojoules(100),
            beta: 1.0,
            e_current: Energy::from_picojoules(10),
            e_min: Energy::from_picojoules(50),
        };
        assert!(should_forward(&h, Energy::from_picojoules(40), 0.0));
        assert!(!should_forward(&h, Energy::from_picojoules(50), 0.0));
        assert!(!should_forward(&h, Energy::INFINITE, 0.0));
    }

    #[test]
    fn zero_credit_on_unique_path_has_no_duplicates() {
        let p = CbddpParams {
            beta: 0.0,
            ..Default::default()
        };
        let sim = run_with(fixtures::line(6, 50.0), p, cfg(100));
        assert_eq!(sim.ledger().duplicates, 0);
        // The first sample leaves before the field reaches the source.
        assert!(sim.ledger().received >= sim.ledger().sent - 1);
    }

    #[test]
    fn diamond_delivers_two_copies() {
        let sim = run_with(fixtures::diamond(), CbddpParams { beta: 2.0, ..Default::default() }, cfg(100));
        let l = sim.ledger();
        let dr = l.received as f64 / l.sent as f64;
        assert!(dr > 1.9, "{dr}");
    }

    #[test]
    fn diamond_survives_arm_failure_without_refresh() {
        let mut c = cfg(200);
        c.faults = vec![Fault {
            node: 1,
            at: SimTime::from_secs(100),
        }];
        let sim = run_with(fixtures::diamond(), CbddpParams::default(), c);
        assert_eq!(sim.node(3).setups(), 1);
        let after: BTreeSet<u32> = sim
            .records()
            .unwrap()
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Consumed { seq, .. } if *seq >= 50 => Some(*seq),
                _ => None,
            })
            .collect();
        assert_eq!(after.len(), 50);
    }

    #[test]
    fn duplicates_grow_with_credit() {
        let topo = Arc::new(Topology::generate(40, 511.0, 511.0, 271.3, 7));
        let dups: Vec<u64> = [0.0, 0.25, 0.5, 1.0]
            .iter()
            .map(|&beta| {
                let p = CbddpParams {
                    beta,
                    ..Default::default()
                };
                run_with(topo.clone(), p, cfg(100)).ledger().duplicates
            })
            .collect();
        assert!(dups.windows(2).all(|w| w[0] <= w[1]), "{dups:?}");
    }

    #[test]
    fn forwarders_are_strictly_downhill() {
        let topo = Arc::new(Topology::generate(40, 511.0, 511.0, 271.3, 9));
        let sim = run_with(topo.clone(), CbddpParams::default(), cfg(40));
        let c = costs(&sim);
        let src = topo.source().unwrap();
        for r in sim.records().unwrap() {
            if let TraceRecord::Tx { node, kind: PacketKind::Data, .. } = r {
                assert!(*node == src || c[*node] < c[src]);
            }
        }
    }
}
