//! Forwarding diffusion: interest flooding installs gradients, the source
//! probes all gradients with exploratory packets, the consumer reinforces
//! the neighbour that delivered the first copy, and data then follows the
//! single reinforced path. A node whose reinforced next hop stops
//! acknowledging probes for a replacement with a local repair flood.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::network::NodeId;
use crate::protocol::{NodeCtx, NodeProtocol, Packet, PacketKind, Role};
use crate::sim::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct FdddpParams {
    pub interest_interval: SimTime,
    /// One exploratory probe per this many data samples.
    pub exploratory_every: u32,
    /// Minimum spacing between two repair probes from the same node.
    pub repair_timeout: SimTime,
    /// Data packets held while no reinforced path exists.
    pub buffer_len: usize,
    /// Advertised rate in packets per second.
    pub data_rate: f64,
}

impl Default for FdddpParams {
    fn default() -> Self {
        FdddpParams {
            interest_interval: SimTime::from_secs(30),
            exploratory_every: 10,
            repair_timeout: SimTime::from_secs(6),
            buffer_len: 16,
            data_rate: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub toward: NodeId,
    pub data_rate: f64,
    pub established_at: SimTime,
}

/// Probe epoch: `(origin, seq)` of an exploratory or repair flood.
pub type Epoch = (NodeId, u32);

#[derive(Clone, Debug, PartialEq)]
pub enum Header {
    Interest { data_rate: f64 },
    Probe,
    Reinforce { epoch: Epoch },
    Data,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Timer {
    Interest,
}

const REPAIR_SEQ_BASE: u32 = 1 << 31;

pub struct Fdddp {
    id: NodeId,
    role: Role,
    params: Arc<FdddpParams>,
    next_interest: u32,
    interest_round: Option<u32>,
    gradients: BTreeMap<NodeId, Gradient>,
    reinforced: Option<NodeId>,
    first_sender: BTreeMap<Epoch, NodeId>,
    buffer: VecDeque<Packet<Header>>,
    pending_explore: Option<u32>,
    last_repair: Option<SimTime>,
    repair_seq: u32,
    repairs_sent: u64,
}

impl Fdddp {
    pub fn gradients(&self) -> impl Iterator<Item = &Gradient> {
        self.gradients.values()
    }

    pub fn reinforced(&self) -> Option<NodeId> {
        self.reinforced
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn repairs_sent(&self) -> u64 {
        self.repairs_sent
    }

    fn explore(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, seq: u32) {
        self.first_sender.insert((self.id, seq), self.id);
        let p = ctx.packet(PacketKind::Exploratory, self.id, seq, Header::Probe);
        ctx.broadcast(p);
    }

    fn send_or_buffer(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, packet: Packet<Header>) {
        match self.reinforced {
            Some(next) => ctx.unicast(next, packet),
            None if self.role == Role::Source => self.hold(ctx, packet),
            None => ctx.routing_failure(),
        }
    }

    fn hold(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, packet: Packet<Header>) {
        if self.buffer.len() >= self.params.buffer_len {
            self.buffer.pop_front();
            ctx.routing_failure();
        }
        self.buffer.push_back(packet);
    }

    fn flush(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        if let Some(next) = self.reinforced {
            for p in self.buffer.drain(..) {
                ctx.unicast(next, p);
            }
        }
    }

    fn on_interest(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        if self.role == Role::Consumer || self.interest_round.is_some_and(|r| p.seq < r) {
            return;
        }
        let fresh = self.interest_round != Some(p.seq);
        if fresh {
            self.interest_round = Some(p.seq);
            self.gradients.clear();
        }
        let data_rate = match p.header {
            Header::Interest { data_rate } => data_rate,
            _ => self.params.data_rate,
        };
        self.gradients.entry(from).or_insert(Gradient {
            toward: from,
            data_rate,
            established_at: ctx.now(),
        });
        if fresh {
            ctx.broadcast(Packet { hop_count: 0, ..p });
        }
        if let Some(seq) = self.pending_explore.take() {
            self.explore(ctx, seq);
        }
    }

    fn on_probe(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        let epoch = p.id();
        if self.first_sender.contains_key(&epoch) {
            return;
        }
        self.first_sender.insert(epoch, from);
        if self.role == Role::Consumer {
            let r = ctx.packet(PacketKind::Reinforcement, self.id, 0, Header::Reinforce { epoch });
            ctx.unicast(from, r);
        } else if !self.gradients.is_empty() {
            ctx.broadcast(Packet { hop_count: 0, ..p });
        }
    }

    fn on_reinforce(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        let Header::Reinforce { epoch } = p.header else {
            return;
        };
        self.reinforced = Some(from);
        let rate = self.params.data_rate;
        self.gradients.entry(from).or_insert(Gradient {
            toward: from,
            data_rate: rate,
            established_at: ctx.now(),
        });
        if epoch.0 != self.id {
            if let Some(&up) = self.first_sender.get(&epoch) {
                ctx.unicast(up, Packet { hop_count: 0, ..p });
            }
        }
        self.flush(ctx);
    }

    fn repair(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        let now = ctx.now();
        if self
            .last_repair
            .is_some_and(|t| now.saturating_sub(t) < self.params.repair_timeout)
        {
            return;
        }
        self.last_repair = Some(now);
        let seq = REPAIR_SEQ_BASE + self.repair_seq;
        self.repair_seq += 1;
        self.repairs_sent += 1;
        self.first_sender.insert((self.id, seq), self.id);
        let p = ctx.packet(PacketKind::Repair, self.id, seq, Header::Probe);
        ctx.broadcast(p);
    }
}

impl NodeProtocol for Fdddp {
    type Shared = FdddpParams;
    type Timer = Timer;
    type Header = Header;

    fn new(id: NodeId, role: Role, shared: &Arc<FdddpParams>) -> Self {
        Fdddp {
            id,
            role,
            params: Arc::clone(shared),
            next_interest: 0,
            interest_round: None,
            gradients: BTreeMap::new(),
            reinforced: None,
            first_sender: BTreeMap::new(),
            buffer: VecDeque::new(),
            pending_explore: None,
            last_repair: None,
            repair_seq: 0,
            repairs_sent: 0,
        }
    }

    fn on_start(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        if self.role == Role::Consumer {
            self.on_timer(ctx, Timer::Interest);
        }
    }

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, tag: Timer) {
        match tag {
            Timer::Interest => {
                let header = Header::Interest {
                    data_rate: self.params.data_rate,
                };
                let p = ctx.packet(PacketKind::Interest, self.id, self.next_interest, header);
                self.next_interest += 1;
                ctx.broadcast(p);
                ctx.set_timer(self.params.interest_interval, Timer::Interest);
            }
        }
    }

    fn on_packet(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        match p.kind {
            PacketKind::Interest => self.on_interest(ctx, from, p),
            PacketKind::Exploratory | PacketKind::Repair => self.on_probe(ctx, from, p),
            PacketKind::Reinforcement => self.on_reinforce(ctx, from, p),
            PacketKind::Data if self.role != Role::Consumer => self.send_or_buffer(ctx, p),
            _ => {}
        }
    }

    fn on_data(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, seq: u32) {
        if self.params.exploratory_every > 0 && seq % self.params.exploratory_every == 0 {
            if self.gradients.is_empty() {
                self.pending_explore = Some(seq);
            } else {
                self.explore(ctx, seq);
            }
        }
        let p = ctx.packet(PacketKind::Data, self.id, seq, Header::Data);
        self.send_or_buffer(ctx, p);
    }

    fn on_link_failure(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, to: NodeId, p: Packet<Header>) {
        if p.kind != PacketKind::Data {
            return;
        }
        self.gradients.remove(&to);
        if self.reinforced == Some(to) {
            self.reinforced = None;
        }
        self.hold(ctx, p);
        self.repair(ctx);
    }

    fn dump_state(&self) -> String {
        let mut s = format!("node {} gradients [", self.id);
        for (i, g) in self.gradients.keys().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{g}");
        }
        s.push(']');
        match self.reinforced {
            Some(r) => {
                let _ = write!(s, " reinforced {r}");
            }
            None => s.push_str(" reinforced -"),
        }
        s
    }
}

/// Follows reinforced pointers from `start`; `None` if the chain repeats a
/// node before ending.
pub fn reinforced_path(nodes: &[Fdddp], start: NodeId) -> Option<Vec<NodeId>> {
    let mut path = vec![start];
    let mut seen = BTreeSet::from([start]);
    let mut at = start;
    while let Some(next) = nodes[at].reinforced {
        if !seen.insert(next) {
            return None;
        }
        path.push(next);
        at = next;
    }
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Topology;
    use crate::protocols::fixtures;
    use crate::runtime::{Fault, SimConfig, Simulation, TraceRecord};

    fn cfg(secs: u64) -> SimConfig {
        SimConfig {
            duration: SimTime::from_secs(secs),
            record_trace: true,
            ..Default::default()
        }
    }

    fn run(topo: Arc<Topology>, cfg: SimConfig) -> Simulation<Fdddp> {
        let mut sim = Simulation::new(topo, cfg, Arc::new(FdddpParams::default()));
        sim.run().unwrap();
        sim
    }

    fn grads(sim: &Simulation<Fdddp>, n: NodeId) -> Vec<NodeId> {
        sim.node(n).gradients().map(|g| g.toward).collect()
    }

    fn tx_count(sim: &Simulation<Fdddp>, kind: PacketKind, after: SimTime) -> usize {
        sim.records()
            .unwrap()
            .iter()
            .filter(|r| matches!(r, TraceRecord::Tx { kind: k, time, .. } if *k == kind && *time >= after))
            .count()
    }

    #[test]
    fn line_gradients_point_toward_consumer() {
        let sim = run(fixtures::line3(), cfg(1));
        assert_eq!(grads(&sim, 1), vec![0, 2]);
        assert!(grads(&sim, 0).contains(&1));
        assert_eq!(reinforced_path(sim.nodes(), 0), Some(vec![0, 1, 2]));
    }

    #[test]
    fn single_node_has_no_gradients() {
        let sim = run(fixtures::single(), cfg(60));
        assert_eq!(grads(&sim, 0), Vec::<NodeId>::new());
        assert_eq!(sim.ledger().total_tx(), 0);
    }

    #[test]
    fn diamond_source_holds_two_gradients() {
        let sim = run(fixtures::diamond(), cfg(1));
        assert_eq!(grads(&sim, 0), vec![1, 2]);
        assert!(sim.ledger().tx_routing.iter().sum::<u64>() > 0);
    }

    #[test]
    fn line_exploratory_is_one_copy_per_hop() {
        let sim = run(fixtures::line3(), cfg(1));
        // S originates, A forwards; C consumes without forwarding.
        assert_eq!(sim.ledger().tx_of(PacketKind::Exploratory), 2);
    }

    #[test]
    fn no_interest_no_exploratory() {
        // Consumer unreachable from the source: interests never arrive.
        let topo = Arc::new(Topology::from_positions(
            500.0,
            10.0,
            50.0,
            vec![crate::network::Point::new(0.0, 0.0), crate::network::Point::new(500.0, 0.0)],
            Some(0),
            Some(1),
        ));
        let sim = run(topo, cfg(60));
        assert_eq!(sim.ledger().tx_of(PacketKind::Exploratory), 0);
        assert_eq!(sim.ledger().received, 0);
    }

    #[test]
    fn diamond_reinforces_single_arm() {
        let sim = run(fixtures::diamond(), cfg(100));
        let path = reinforced_path(sim.nodes(), 0).unwrap();
        assert_eq!(path.len(), 3);
        assert_eq!((path[0], path[2]), (0, 3));
        // Each sample is relayed by exactly one arm.
        let relays = sim.ledger().tx_data[1] + sim.ledger().tx_data[2];
        assert_eq!(relays, 50);
        assert_eq!(sim.ledger().sent, 50);
        assert_eq!(sim.ledger().duplicates, 0);
        assert_eq!(sim.ledger().received, 50);
    }

    #[test]
    fn line_delivers_every_sample_once() {
        let sim = run(fixtures::line(6, 50.0), cfg(200));
        assert_eq!(sim.ledger().received, sim.ledger().sent);
        assert_eq!(sim.ledger().duplicates, 0);
        for n in sim.nodes() {
            assert_eq!(n.repairs_sent(), 0);
        }
    }

    #[test]
    fn interest_flood_bounded_by_node_count() {
        let topo = Arc::new(Topology::generate(40, 511.0, 511.0, 271.3, 3));
        let sim = run(topo, cfg(1));
        assert!(sim.ledger().tx_of(PacketKind::Interest) <= 40);
    }

    #[test]
    fn diamond_repair_switches_arm() {
        let topo = fixtures::diamond();
        let probe = run(topo.clone(), cfg(99));
        let arm = reinforced_path(probe.nodes(), 0).unwrap()[1];
        let other = 3 - arm;

        let mut c = cfg(200);
        c.faults = vec![Fault {
            node: arm,
            at: SimTime::from_secs(100),
        }];
        let sim = run(topo, c);
        assert_eq!(reinforced_path(sim.nodes(), 0).unwrap(), vec![0, other, 3]);
        assert!(tx_count(&sim, PacketKind::Repair, SimTime::from_secs(100)) >= 1);
        // Every sample generated after the failure still arrives, within one
        // repair round trip: the failed packet is buffered and replayed.
        let consumed_after: BTreeSet<u32> = sim
            .records()
            .unwrap()
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Consumed { seq, time, .. } if *time >= SimTime::from_secs(100) => Some(*seq),
                _ => None,
            })
            .collect();
        assert_eq!(consumed_after, (50..100).collect());
        let resumed = sim
            .records()
            .unwrap()
            .iter()
            .find_map(|r| match r {
                TraceRecord::Consumed { seq: 50, time, .. } => Some(*time),
                _ => None,
            })
            .unwrap();
        let bound = SimTime::from_secs(100) + FdddpParams::default().repair_timeout;
        assert!(resumed <= bound, "{resumed}");
    }

    #[test]
    fn line_failure_stalls() {
        let mut c = cfg(200);
        c.faults = vec![Fault {
            node: 1,
            at: SimTime::from_secs(100),
        }];
        let sim = run(fixtures::line3(), c);
        assert_eq!(sim.ledger().received, 50);
        assert_eq!(sim.node(0).reinforced(), None);
    }

    #[test]
    fn no_failure_no_repair() {
        let topo = Arc::new(Topology::generate(40, 511.0, 511.0, 271.3, 5));
        let sim = run(topo, cfg(100));
        assert_eq!(sim.ledger().tx_of(PacketKind::Repair), 0);
    }

    #[test]
    fn random_topology_paths_are_acyclic() {
        for seed in 1..=5 {
            let topo = Arc::new(Topology::generate(40, 511.0, 511.0, 271.3, seed));
            let sim = run(topo.clone(), cfg(100));
            let path = reinforced_path(sim.nodes(), topo.source().unwrap()).expect("cycle");
            assert_eq!(path.last().copied(), topo.consumer());
            for w in path.windows(2) {
                assert!(topo.are_neighbors(w[0], w[1]));
            }
            for n in sim.nodes() {
                if let Some(r) = n.reinforced() {
                    assert!(n.gradients().any(|g| g.toward == r));
                }
            }
        }
    }

    #[test]
    fn dump_lists_gradients() {
        let sim = run(fixtures::line3(), cfg(1));
        assert_eq!(sim.node(1).dump_state(), "node 1 gradients [0 2] reinforced 2");
    }
}
