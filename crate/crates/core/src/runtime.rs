//! One simulation run: event loop, abstract MAC and per-node bookkeeping.
//!
//! The MAC has no carrier sense or backoff. Every hop takes a fixed base
//! latency plus uniform jitter drawn from the `MacJitter` stream, and each
//! receiver independently loses the frame with the configured probability.
//! Unicast frames that are not delivered produce a link-failure callback on
//! the sender, standing in for a missing link-layer acknowledgement.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::metrics::MetricsLedger;
use crate::network::{
    Energy, EnergyModel, LinkByteLedger, NodeId, PacketSizes, RadioOp, RadioParams, Topology,
};
use crate::protocol::{Action, Destination, NodeCtx, NodeProtocol, Packet, PacketKind, Role};
use crate::sim::{rng_stream, EventHandle, EventQueue, EventTarget, SimTime, StreamId, TraceLine};

/// Scheduled death of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    pub node: NodeId,
    pub at: SimTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub duration: SimTime,
    pub data_interval: SimTime,
    pub radio: RadioParams,
    pub energy: EnergyModel,
    pub sizes: PacketSizes,
    pub sampling_interval: SimTime,
    pub link_speed_bps: u64,
    pub faults: Vec<Fault>,
    pub record_trace: bool,
    pub wall_budget: Option<Duration>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            duration: SimTime::from_secs(500),
            data_interval: SimTime::from_secs(2),
            radio: RadioParams::default(),
            energy: EnergyModel::default(),
            sizes: PacketSizes::default(),
            sampling_interval: SimTime::from_millis(100),
            link_speed_bps: 2_000_000,
            faults: Vec::new(),
            record_trace: false,
            wall_budget: None,
        }
    }
}

/// Structured record of every radio event, kept when tracing is enabled.
/// Metrics can be recomputed from these records alone.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceRecord {
    Tx {
        time: SimTime,
        node: NodeId,
        kind: PacketKind,
        bytes: u32,
        to: Option<NodeId>,
        amp_dist_sq: f64,
        energy: Energy,
    },
    Rx {
        time: SimTime,
        node: NodeId,
        from: NodeId,
        kind: PacketKind,
        bytes: u32,
        energy: Energy,
    },
    Generated {
        time: SimTime,
        seq: u32,
    },
    Consumed {
        time: SimTime,
        origin: NodeId,
        seq: u32,
    },
}

#[derive(Debug)]
enum Event<T, H> {
    Start(NodeId),
    DataTick(u32),
    Deliver {
        to: NodeId,
        from: NodeId,
        unicast: bool,
        packet: Packet<H>,
    },
    LinkFailure {
        node: NodeId,
        to: NodeId,
        packet: Packet<H>,
    },
    Timer {
        node: NodeId,
        tag: T,
    },
    Kill(NodeId),
}

impl<T, H> Event<T, H> {
    fn label(&self) -> String {
        match self {
            Event::Start(_) => "start".into(),
            Event::DataTick(_) => "data-tick".into(),
            Event::Deliver { packet, .. } => format!("deliver:{}", packet.kind),
            Event::LinkFailure { packet, .. } => format!("link-failure:{}", packet.kind),
            Event::Timer { .. } => "timer".into(),
            Event::Kill(_) => "kill".into(),
        }
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug)]
pub struct RunOutput {
    pub ledger: MetricsLedger,
    pub trace: Option<Vec<TraceLine>>,
    pub records: Option<Vec<TraceRecord>>,
    pub wall_time: Duration,
}

pub struct Simulation<P: NodeProtocol> {
    cfg: SimConfig,
    topology: Arc<Topology>,
    queue: EventQueue<Event<P::Timer, P::Header>>,
    nodes: Vec<P>,
    roles: Vec<Role>,
    alive: Vec<bool>,
    timers: HashMap<(NodeId, P::Timer), EventHandle>,
    mac_rng: ChaCha8Rng,
    loss_rng: ChaCha8Rng,
    ledger: MetricsLedger,
    trace: Option<Vec<TraceLine>>,
    records: Option<Vec<TraceRecord>>,
    actions: Vec<Action<P::Timer, P::Header>>,
    started: Option<Instant>,
    wall_spent: Duration,
    executed: u64,
}

impl<P: NodeProtocol> Simulation<P> {
    pub fn new(topology: Arc<Topology>, cfg: SimConfig, shared: Arc<P::Shared>) -> Self {
        let n = topology.len();
        let roles: Vec<Role> = (0..n)
            .map(|id| {
                if Some(id) == topology.consumer() {
                    Role::Consumer
                } else if Some(id) == topology.source() {
                    Role::Source
                } else {
                    Role::Relay
                }
            })
            .collect();
        let nodes = (0..n).map(|id| P::new(id, roles[id], &shared)).collect();
        let bytes = LinkByteLedger::new(cfg.sampling_interval, cfg.duration, cfg.link_speed_bps);
        let ledger = MetricsLedger::new(vec![cfg.energy.account(); n], bytes);
        let mut queue = EventQueue::new();
        for id in 0..n {
            queue.schedule_in(SimTime::ZERO, EventTarget::Node(id), Event::Start(id));
        }
        for f in &cfg.faults {
            if f.node < n {
                queue
                    .schedule(f.at, EventTarget::Node(f.node), Event::Kill(f.node))
                    .expect("clock is at zero");
            }
        }
        if topology.source().is_some() && cfg.duration > SimTime::ZERO {
            queue.schedule_in(SimTime::ZERO, EventTarget::Harness, Event::DataTick(0));
        }
        Simulation {
            mac_rng: rng_stream(cfg.seed, StreamId::MacJitter),
            loss_rng: rng_stream(cfg.seed, StreamId::Loss),
            trace: cfg.record_trace.then(Vec::new),
            records: cfg.record_trace.then(Vec::new),
            cfg,
            topology,
            queue,
            nodes,
            roles,
            alive: vec![true; n],
            timers: HashMap::new(),
            ledger,
            actions: Vec::new(),
            started: None,
            wall_spent: Duration::ZERO,
            executed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }
    pub fn topology(&self) -> &Topology {
        &self.topology
    }
    pub fn node(&self, id: NodeId) -> &P {
        &self.nodes[id]
    }
    pub fn nodes(&self) -> &[P] {
        &self.nodes
    }
    pub fn is_alive(&self, id: NodeId) -> bool {
        self.alive[id]
    }
    pub fn ledger(&self) -> &MetricsLedger {
        &self.ledger
    }
    pub fn records(&self) -> Option<&[TraceRecord]> {
        self.records.as_deref()
    }
    pub fn executed_events(&self) -> u64 {
        self.executed
    }

    /// Kills `node` immediately (fault injection from tests).
    pub fn kill(&mut self, node: NodeId) {
        self.alive[node] = false;
    }

    /// Charges `amount` to `node` as if spent before the run started.
    pub fn precharge(&mut self, node: NodeId, amount: Energy) {
        self.ledger.energy[node].drain(amount);
    }

    /// Runs to the configured duration.
    pub fn run(&mut self) -> Result<u64, Error> {
        self.run_until(self.cfg.duration)
    }

    /// Executes every event up to and including `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<u64, Error> {
        if t_end < self.queue.now() {
            return Err(crate::error::SimError::ScheduleInPast {
                at: t_end,
                now: self.queue.now(),
            }
            .into());
        }
        let begin = Instant::now();
        self.started.get_or_insert(begin);
        let mut count = 0;
        while let Some(ev) = self.queue.pop_until(t_end) {
            if let Some(trace) = &mut self.trace {
                trace.push(TraceLine {
                    time: ev.fire_at,
                    seq: ev.seq,
                    target: ev.target,
                    kind: ev.payload.label(),
                });
            }
            self.dispatch(ev.payload);
            count += 1;
            self.executed += 1;
            if count % 4096 == 0 {
                if let Some(budget) = self.cfg.wall_budget {
                    let spent = self.wall_spent + begin.elapsed();
                    if spent > budget {
                        return Err(Error::WallBudget {
                            budget,
                            at: self.queue.now(),
                        });
                    }
                }
            }
        }
        self.queue.advance_to(t_end)?;
        self.wall_spent += begin.elapsed();
        Ok(count)
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            ledger: self.ledger,
            trace: self.trace,
            records: self.records,
            wall_time: self.wall_spent,
        }
    }

    fn dispatch(&mut self, ev: Event<P::Timer, P::Header>) {
        match ev {
            Event::Start(id) => {
                if self.alive[id] {
                    self.with_ctx(id, |p, ctx| p.on_start(ctx));
                }
            }
            Event::DataTick(seq) => self.data_tick(seq),
            Event::Deliver {
                to,
                from,
                unicast,
                packet,
            } => self.deliver(to, from, unicast, packet),
            Event::LinkFailure { node, to, packet } => {
                if self.alive[node] {
                    self.with_ctx(node, |p, ctx| p.on_link_failure(ctx, to, packet));
                }
            }
            Event::Timer { node, tag } => {
                self.timers.remove(&(node, tag));
                if self.alive[node] {
                    self.with_ctx(node, |p, ctx| p.on_timer(ctx, tag));
                }
            }
            Event::Kill(id) => self.alive[id] = false,
        }
    }

    fn data_tick(&mut self, seq: u32) {
        let now = self.queue.now();
        let next = now + self.cfg.data_interval;
        if next < self.cfg.duration {
            self.queue
                .schedule(next, EventTarget::Harness, Event::DataTick(seq + 1))
                .expect("future");
        }
        let source = self.topology.source().expect("ticks only scheduled with a source");
        self.ledger.sent += 1;
        if let Some(r) = &mut self.records {
            r.push(TraceRecord::Generated { time: now, seq });
        }
        if self.alive[source] {
            self.with_ctx(source, |p, ctx| p.on_data(ctx, seq));
        }
    }

    fn deliver(&mut self, to: NodeId, from: NodeId, unicast: bool, mut packet: Packet<P::Header>) {
        let now = self.queue.now();
        if !self.alive[to] {
            if unicast {
                self.queue.schedule_in(
                    SimTime::ZERO,
                    EventTarget::Node(from),
                    Event::LinkFailure {
                        node: from,
                        to,
                        packet,
                    },
                );
            }
            return;
        }
        let cost = self.cfg.energy.rx_cost(packet.size as u64 * 8);
        let taken = self.ledger.energy[to].debit(RadioOp::Rx, cost);
        self.ledger.bytes.record_in(now, packet.size);
        if let Some(r) = &mut self.records {
            r.push(TraceRecord::Rx {
                time: now,
                node: to,
                from,
                kind: packet.kind,
                bytes: packet.size,
                energy: taken,
            });
        }
        if self.ledger.energy[to].depleted() {
            self.alive[to] = false;
            return;
        }
        packet.hop_count += 1;
        if packet.kind == PacketKind::Data && self.roles[to] == Role::Consumer {
            self.ledger.consume(packet.id());
            if let Some(r) = &mut self.records {
                r.push(TraceRecord::Consumed {
                    time: now,
                    origin: packet.origin,
                    seq: packet.seq,
                });
            }
        }
        self.with_ctx(to, |p, ctx| p.on_packet(ctx, from, packet));
    }

    fn with_ctx<F>(&mut self, id: NodeId, f: F)
    where
        F: FnOnce(&mut P, &mut NodeCtx<'_, P::Timer, P::Header>),
    {
        let mut actions = std::mem::take(&mut self.actions);
        {
            let mut ctx = NodeCtx::new(
                id,
                self.roles[id],
                self.queue.now(),
                &self.topology,
                self.cfg.sizes,
                &self.cfg.energy,
                self.ledger.energy[id].consumed(),
                &mut actions,
            );
            f(&mut self.nodes[id], &mut ctx);
        }
        for action in actions.drain(..) {
            self.apply(id, action);
        }
        self.actions = actions;
    }

    fn apply(&mut self, id: NodeId, action: Action<P::Timer, P::Header>) {
        match action {
            Action::Send(dest, packet) => self.mac_transmit(id, packet, dest),
            Action::SetTimer(delay, tag) => {
                if let Some(old) = self.timers.remove(&(id, tag)) {
                    self.queue.cancel(old);
                }
                let h = self
                    .queue
                    .schedule_in(delay, EventTarget::Node(id), Event::Timer { node: id, tag });
                self.timers.insert((id, tag), h);
            }
            Action::CancelTimer(tag) => {
                if let Some(h) = self.timers.remove(&(id, tag)) {
                    self.queue.cancel(h);
                }
            }
            Action::RoutingFailure => self.ledger.routing_failures += 1,
        }
    }

    /// Puts `packet` on the air from `sender`, debiting transmit energy and
    /// scheduling one delivery per receiver that does not lose the frame.
    pub fn mac_transmit(&mut self, sender: NodeId, packet: Packet<P::Header>, dest: Destination) {
        if !self.alive[sender] {
            return;
        }
        let now = self.queue.now();
        let (amp_dist_sq, to) = match dest {
            Destination::Broadcast => (self.topology.range() * self.topology.range(), None),
            Destination::Unicast(to) => {
                if !self.topology.are_neighbors(sender, to) {
                    self.ledger.routing_failures += 1;
                    return;
                }
                (self.topology.dist_sq(sender, to), Some(to))
            }
        };
        let bits = packet.size as u64 * 8;
        let cost = self.cfg.energy.tx_cost_sq(bits, amp_dist_sq);
        let taken = self.ledger.energy[sender].debit(RadioOp::Tx, cost);
        self.ledger.record_tx(sender, packet.kind);
        self.ledger.bytes.record_out(now, packet.size);
        if let Some(r) = &mut self.records {
            r.push(TraceRecord::Tx {
                time: now,
                node: sender,
                kind: packet.kind,
                bytes: packet.size,
                to,
                amp_dist_sq,
                energy: taken,
            });
        }
        if self.ledger.energy[sender].depleted() {
            self.alive[sender] = false;
        }

        let jitter_max = self.cfg.radio.jitter_max.as_nanos();
        let loss = self.cfg.radio.loss;
        let receivers: &[NodeId] = match to {
            Some(ref t) => std::slice::from_ref(t),
            None => self.topology.neighbors_of(sender),
        };
        let mut deliveries = Vec::with_capacity(receivers.len());
        for &r in receivers {
            let jitter = if jitter_max > 0 {
                self.mac_rng.gen_range(0..=jitter_max)
            } else {
                0
            };
            let lost = loss > 0.0 && self.loss_rng.gen_bool(loss);
            deliveries.push((r, SimTime::from_nanos(jitter), lost));
        }
        let base = self.cfg.radio.base_latency;
        for (r, jitter, lost) in deliveries {
            let at = base + jitter;
            if lost {
                if to.is_some() {
                    self.queue.schedule_in(
                        at,
                        EventTarget::Node(sender),
                        Event::LinkFailure {
                            node: sender,
                            to: r,
                            packet: packet.clone(),
                        },
                    );
                }
                continue;
            }
            self.queue.schedule_in(
                at,
                EventTarget::Node(r),
                Event::Deliver {
                    to: r,
                    from: sender,
                    unicast: to.is_some(),
                    packet: packet.clone(),
                },
            );
        }
    }
}
