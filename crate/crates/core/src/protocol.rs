//! Common surface every dissemination protocol implements.
//!
//! Each node runs its own protocol instance. Callbacks never touch the
//! network directly; they queue [`Action`]s on the [`NodeCtx`] and the
//! runtime applies them once the callback returns.

use std::fmt::{self, Debug};
use std::hash::Hash;
use std::sync::Arc;

use crate::network::{Energy, EnergyModel, NodeId, PacketSizes, Point, Topology};
use crate::sim::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketKind {
    Interest,
    Exploratory,
    Reinforcement,
    Repair,
    CellConstruction,
    CnClaim,
    CnLink,
    DataAdvert,
    Query,
    Advertisement,
    CostUpdate,
    Data,
}

impl PacketKind {
    pub const ALL: [PacketKind; 12] = [
        PacketKind::Interest,
        PacketKind::Exploratory,
        PacketKind::Reinforcement,
        PacketKind::Repair,
        PacketKind::CellConstruction,
        PacketKind::CnClaim,
        PacketKind::CnLink,
        PacketKind::DataAdvert,
        PacketKind::Query,
        PacketKind::Advertisement,
        PacketKind::CostUpdate,
        PacketKind::Data,
    ];

    pub fn is_routing(self) -> bool {
        self != PacketKind::Data
    }

    /// Kinds that travel with a full data payload on the air.
    pub fn carries_payload(self) -> bool {
        matches!(self, PacketKind::Data | PacketKind::Exploratory)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Interest => "interest",
            PacketKind::Exploratory => "exploratory",
            PacketKind::Reinforcement => "reinforcement",
            PacketKind::Repair => "repair",
            PacketKind::CellConstruction => "cell-construction",
            PacketKind::CnClaim => "cn-claim",
            PacketKind::CnLink => "cn-link",
            PacketKind::DataAdvert => "data-advert",
            PacketKind::Query => "query",
            PacketKind::Advertisement => "advertisement",
            PacketKind::CostUpdate => "cost-update",
            PacketKind::Data => "data",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl PacketSizes {
    pub fn for_kind(&self, kind: PacketKind) -> u32 {
        if kind.carries_payload() {
            self.data
        } else {
            self.control
        }
    }
}

/// A protocol message. `(origin, seq)` names a logical data packet;
/// `hop_count` is incremented by the MAC on every delivery.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet<H> {
    pub kind: PacketKind,
    pub origin: NodeId,
    pub seq: u32,
    pub hop_count: u32,
    pub size: u32,
    pub header: H,
}

impl<H> Packet<H> {
    pub fn id(&self) -> (NodeId, u32) {
        (self.origin, self.seq)
    }
}

/// Routing overhead attribution: everything except data.
pub fn classify_routing_packet<H>(packet: &Packet<H>) -> bool {
    packet.kind.is_routing()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    Consumer,
    Relay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Destination {
    Broadcast,
    Unicast(NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action<T, H> {
    Send(Destination, Packet<H>),
    SetTimer(SimTime, T),
    CancelTimer(T),
    RoutingFailure,
}

/// Read-only node view plus an outbox, handed to every callback.
pub struct NodeCtx<'a, T, H> {
    id: NodeId,
    role: Role,
    now: SimTime,
    topology: &'a Topology,
    sizes: PacketSizes,
    energy_model: &'a EnergyModel,
    consumed: Energy,
    actions: &'a mut Vec<Action<T, H>>,
}

impl<'a, T, H> NodeCtx<'a, T, H> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: NodeId,
        role: Role,
        now: SimTime,
        topology: &'a Topology,
        sizes: PacketSizes,
        energy_model: &'a EnergyModel,
        consumed: Energy,
        actions: &'a mut Vec<Action<T, H>>,
    ) -> Self {
        NodeCtx {
            id,
            role,
            now,
            topology,
            sizes,
            energy_model,
            consumed,
            actions,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }
    pub fn role(&self) -> Role {
        self.role
    }
    pub fn now(&self) -> SimTime {
        self.now
    }
    pub fn topology(&self) -> &'a Topology {
        self.topology
    }
    pub fn position(&self) -> Point {
        self.topology.position(self.id)
    }
    pub fn neighbors(&self) -> &'a [NodeId] {
        self.topology.neighbors_of(self.id)
    }
    pub fn energy_model(&self) -> &'a EnergyModel {
        self.energy_model
    }
    /// Energy this node has consumed so far.
    pub fn consumed_energy(&self) -> Energy {
        self.consumed
    }

    pub fn packet(&self, kind: PacketKind, origin: NodeId, seq: u32, header: H) -> Packet<H> {
        Packet {
            kind,
            origin,
            seq,
            hop_count: 0,
            size: self.sizes.for_kind(kind),
            header,
        }
    }

    /// Energy-model cost of sending a data-sized packet to neighbour `to`.
    pub fn data_link_cost(&self, to: NodeId) -> Energy {
        self.energy_model
            .tx_cost_sq(self.sizes.data as u64 * 8, self.topology.dist_sq(self.id, to))
    }

    pub fn broadcast(&mut self, packet: Packet<H>) {
        self.actions.push(Action::Send(Destination::Broadcast, packet));
    }

    pub fn unicast(&mut self, to: NodeId, packet: Packet<H>) {
        self.actions.push(Action::Send(Destination::Unicast(to), packet));
    }

    /// Arms `tag` to fire after `delay`, replacing a pending timer with the
    /// same tag.
    pub fn set_timer(&mut self, delay: SimTime, tag: T) {
        self.actions.push(Action::SetTimer(delay, tag));
    }

    pub fn cancel_timer(&mut self, tag: T) {
        self.actions.push(Action::CancelTimer(tag));
    }

    /// Records a packet dropped for lack of a route.
    pub fn routing_failure(&mut self) {
        self.actions.push(Action::RoutingFailure);
    }
}

/// Per-node protocol state machine.
pub trait NodeProtocol: Sized + Send {
    /// Run-wide immutable configuration, built once per run.
    type Shared: Send + Sync;
    type Timer: Copy + Eq + Hash + Debug + Send;
    type Header: Clone + Debug + Send;

    fn new(id: NodeId, role: Role, shared: &Arc<Self::Shared>) -> Self;

    fn on_start(&mut self, _ctx: &mut NodeCtx<'_, Self::Timer, Self::Header>) {}

    fn on_packet(
        &mut self,
        ctx: &mut NodeCtx<'_, Self::Timer, Self::Header>,
        from: NodeId,
        packet: Packet<Self::Header>,
    );

    fn on_timer(&mut self, _ctx: &mut NodeCtx<'_, Self::Timer, Self::Header>, _tag: Self::Timer) {}

    /// Called on the source for each generated data sample.
    fn on_data(&mut self, ctx: &mut NodeCtx<'_, Self::Timer, Self::Header>, seq: u32);

    /// A unicast to `to` was not acknowledged (receiver dead or frame lost).
    fn on_link_failure(
        &mut self,
        _ctx: &mut NodeCtx<'_, Self::Timer, Self::Header>,
        _to: NodeId,
        _packet: Packet<Self::Header>,
    ) {
    }

    /// Human-readable routing state for path-shape assertions.
    fn dump_state(&self) -> String {
        String::new()
    }
}
