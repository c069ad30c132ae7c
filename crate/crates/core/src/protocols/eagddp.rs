//! Energy-aware geographic dissemination.
//!
//! Outside the target region a node forwards to the neighbour minimising
//! `value + C`, where `C` is the link transmission cost and `value` is the
//! neighbour's learned cost (or, until it has advertised one, its estimated
//! cost `mu·d + (1 - mu)·e_c`). The forwarder then sets its own learned cost
//! to that minimum, and advertises it when it changes. Inside the region
//! the packet is spread by recursive quadrant splitting.
//!
//! Costs are in metres. Energies are converted with `energy_scale_m_per_j`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::network::{greedy_next_hop, NodeId, Point, Rect, Topology};
use crate::protocol::{NodeCtx, NodeProtocol, Packet, PacketKind, Role};
use crate::sim::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct EagddpParams {
    pub mu: f64,
    /// Side of the square target region centred on the consumer; twice the
    /// radio range when unset.
    pub region_side_m: Option<f64>,
    pub advert_interval: SimTime,
    pub energy_scale_m_per_j: f64,
    /// Packets travelling more than this many hops per node are dropped.
    pub hop_limit_factor: u32,
}

impl Default for EagddpParams {
    fn default() -> Self {
        EagddpParams {
            mu: 0.5,
            region_side_m: None,
            advert_interval: SimTime::from_secs(10),
            energy_scale_m_per_j: 1000.0,
            hop_limit_factor: 4,
        }
    }
}

/// `e = mu·d + (1 - mu)·e_c`, with `e_c` already in cost units.
pub fn estimated_cost(distance: f64, consumed: f64, mu: f64) -> f64 {
    mu * distance + (1.0 - mu) * consumed
}

/// Index into `candidates` of the minimum `l + C`, ties to the lowest id.
pub fn select_next_hop(candidates: &[(NodeId, f64, f64)]) -> Option<NodeId> {
    candidates
        .iter()
        .min_by(|a, b| (a.1 + a.2).total_cmp(&(b.1 + b.2)).then(a.0.cmp(&b.0)))
        .map(|c| c.0)
}

/// `l(N) = l(N_min) + C(N, N_min)`.
pub fn updated_cost(l_min: f64, link: f64) -> f64 {
    l_min + link
}

const MAX_DEPTH: u8 = 30;

/// Sub-rectangle of the region named by successive quadrant indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct QuadPath {
    bits: u64,
    depth: u8,
}

impl QuadPath {
    pub fn child(self, q: u8) -> Self {
        QuadPath {
            bits: self.bits | (q as u64) << (2 * self.depth),
            depth: self.depth + 1,
        }
    }

    pub fn depth(self) -> u8 {
        self.depth
    }

    fn steps(self) -> impl Iterator<Item = u8> {
        (0..self.depth).map(move |i| ((self.bits >> (2 * i)) & 3) as u8)
    }
}

#[derive(Debug)]
pub struct EagddpShared {
    pub params: EagddpParams,
    pub region: Rect,
    /// Nodes inside the region, by id.
    pub members: Vec<NodeId>,
    positions: Vec<Point>,
    hop_limit: u32,
}

impl EagddpShared {
    pub fn new(params: EagddpParams, topology: &Topology) -> Self {
        let side = params.region_side_m.unwrap_or(2.0 * topology.range());
        let center = topology
            .consumer()
            .map(|c| topology.position(c))
            .unwrap_or(Point::new(topology.width() / 2.0, topology.height() / 2.0));
        let region = Rect::centered(center, side);
        let members = (0..topology.len())
            .filter(|&n| region.contains(topology.position(n)))
            .collect();
        EagddpShared {
            hop_limit: params.hop_limit_factor * topology.len() as u32,
            params,
            region,
            members,
            positions: topology.positions().to_vec(),
        }
    }

    pub fn centroid(&self) -> Point {
        self.region.centroid()
    }

    /// Rectangle and members at `path`.
    pub fn sub_region(&self, path: QuadPath) -> (Rect, Vec<NodeId>) {
        let mut rect = self.region;
        let mut members = self.members.clone();
        for q in path.steps() {
            members.retain(|&n| rect.quadrant_index(self.positions[n]) == q);
            rect = rect.quadrant(q);
        }
        (rect, members)
    }

    /// Next step of the recursion at `path` for a node holding the packet:
    /// one `(child path, target)` per non-empty quadrant that contains some
    /// node other than `holder`.
    pub fn split(&self, path: QuadPath, holder: NodeId) -> Vec<(QuadPath, NodeId)> {
        if path.depth >= MAX_DEPTH {
            return Vec::new();
        }
        let (rect, members) = self.sub_region(path);
        let mut out = Vec::new();
        for q in 0..4u8 {
            let sub = rect.quadrant(q);
            let inside: Vec<NodeId> = members
                .iter()
                .copied()
                .filter(|&n| rect.quadrant_index(self.positions[n]) == q)
                .collect();
            if inside.is_empty() || inside == [holder] {
                continue;
            }
            let c = sub.centroid();
            let target = inside
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    self.positions[a]
                        .dist_sq(c)
                        .total_cmp(&self.positions[b].dist_sq(c))
                        .then(a.cmp(&b))
                })
                .expect("nonempty");
            out.push((path.child(q), target));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    ToRegion,
    /// `detour` is set once greedy relaying has stalled; from then on the
    /// packet follows hop-count shortest paths, which cannot loop.
    Restricted { path: QuadPath, target: NodeId, detour: bool },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Header {
    /// Sender's learned cost and consumed energy in joules.
    Advert { l: f64, e_c: f64 },
    Data { l: f64, e_c: f64, mode: Mode },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Timer {
    Advert,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Neighbor {
    learned: Option<f64>,
    e_c: f64,
    dead: bool,
}

pub struct Eagddp {
    id: NodeId,
    shared: Arc<EagddpShared>,
    inside: bool,
    learned: Option<f64>,
    table: BTreeMap<NodeId, Neighbor>,
    last_advert: Option<SimTime>,
    advertised: Option<(f64, f64)>,
    advert_pending: bool,
    max_depth: u8,
}

impl Eagddp {
    /// Learned cost, if this node has forwarded anything yet.
    pub fn learned(&self) -> Option<f64> {
        if self.inside {
            Some(0.0)
        } else {
            self.learned
        }
    }

    pub fn max_depth(&self) -> u8 {
        self.max_depth
    }

    fn scale(&self) -> f64 {
        self.shared.params.energy_scale_m_per_j
    }

    fn value(&self, topo: &Topology, n: NodeId) -> f64 {
        let mu = self.shared.params.mu;
        let info = self.table.get(&n).copied().unwrap_or_default();
        let e_c = self.scale() * info.e_c;
        if self.shared.region.contains(topo.position(n)) {
            return (1.0 - mu) * e_c;
        }
        match info.learned {
            Some(l) => l + (1.0 - mu) * e_c,
            None => estimated_cost(topo.position(n).dist(self.shared.centroid()), e_c, mu),
        }
    }

    fn link_cost(&self, ctx: &NodeCtx<'_, Timer, Header>, to: NodeId) -> f64 {
        self.scale() * ctx.data_link_cost(to).joules()
    }

    fn header(&self, ctx: &NodeCtx<'_, Timer, Header>, mode: Mode) -> Header {
        Header::Data {
            l: self.learned().unwrap_or(f64::INFINITY),
            e_c: ctx.consumed_energy().joules(),
            mode,
        }
    }

    /// `from` is skipped unless it is the only live neighbour, so a packet
    /// does not bounce between two nodes whose learned costs lag.
    fn route_to_region(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: Option<NodeId>, p: Packet<Header>) {
        if p.hop_count > self.shared.hop_limit {
            ctx.routing_failure();
            return;
        }
        let topo = ctx.topology();
        let mut candidates: Vec<(NodeId, f64, f64)> = ctx
            .neighbors()
            .iter()
            .copied()
            .filter(|n| !self.table.get(n).is_some_and(|i| i.dead))
            .map(|n| (n, self.value(topo, n), self.link_cost(ctx, n)))
            .collect();
        if candidates.len() > 1 {
            candidates.retain(|c| Some(c.0) != from);
        }
        let Some(next) = select_next_hop(&candidates) else {
            ctx.routing_failure();
            return;
        };
        let (_, v, c) = candidates.iter().find(|c| c.0 == next).copied().expect("chosen");
        self.learned = Some(updated_cost(v, c));
        self.maybe_advert(ctx);
        let header = self.header(ctx, Mode::ToRegion);
        ctx.unicast(next, Packet { header, ..p });
    }

    fn restricted(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, path: QuadPath, p: &Packet<Header>) {
        self.max_depth = self.max_depth.max(path.depth());
        for (child, target) in self.shared.split(path, self.id) {
            if target == self.id {
                self.restricted(ctx, child, p);
            } else {
                self.toward(ctx, child, target, false, p.clone());
            }
        }
        self.maybe_advert(ctx);
    }

    /// Geographic relay toward a restricted-forwarding target. Falls back
    /// to a hop-count shortest path where greedy progress stalls.
    fn toward(
        &mut self,
        ctx: &mut NodeCtx<'_, Timer, Header>,
        path: QuadPath,
        target: NodeId,
        mut detour: bool,
        p: Packet<Header>,
    ) {
        let topo = ctx.topology();
        let dead = |n: NodeId| self.table.get(&n).is_some_and(|i| i.dead);
        if p.hop_count > self.shared.hop_limit || dead(target) {
            ctx.routing_failure();
            return;
        }
        let next = if topo.are_neighbors(self.id, target) {
            Some(target)
        } else {
            let greedy = (!detour)
                .then(|| greedy_next_hop(topo, self.id, topo.position(target), dead))
                .flatten();
            greedy.or_else(|| {
                detour = true;
                bfs_next_hop(topo, self.id, target, dead)
            })
        };
        match next {
            Some(n) => {
                let header = self.header(ctx, Mode::Restricted { path, target, detour });
                ctx.unicast(n, Packet { header, ..p });
            }
            None => ctx.routing_failure(),
        }
    }

    fn maybe_advert(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        if self.advert_pending {
            return;
        }
        let interval = self.shared.params.advert_interval;
        match self.last_advert {
            Some(t) if ctx.now().saturating_sub(t) < interval => {
                self.advert_pending = true;
                ctx.set_timer(t + interval - ctx.now(), Timer::Advert);
            }
            _ => self.advertise(ctx),
        }
    }

    fn advertise(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        let Some(l) = self.learned() else { return };
        let state = (l, ctx.consumed_energy().joules());
        if self.advertised == Some(state) {
            return;
        }
        self.advertised = Some(state);
        self.last_advert = Some(ctx.now());
        let p = ctx.packet(
            PacketKind::CostUpdate,
            self.id,
            0,
            Header::Advert { l: state.0, e_c: state.1 },
        );
        ctx.broadcast(p);
    }

    fn handle(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: Option<NodeId>, p: Packet<Header>, mode: Mode) {
        match mode {
            Mode::ToRegion if self.inside => self.restricted(ctx, QuadPath::default(), &p),
            Mode::ToRegion => self.route_to_region(ctx, from, p),
            Mode::Restricted { path, target, .. } if target == self.id => self.restricted(ctx, path, &p),
            Mode::Restricted { path, target, detour } => self.toward(ctx, path, target, detour, p),
        }
    }
}

fn bfs_next_hop(topo: &Topology, from: NodeId, to: NodeId, dead: impl Fn(NodeId) -> bool) -> Option<NodeId> {
    let mut prev = vec![usize::MAX; topo.len()];
    let mut queue = std::collections::VecDeque::from([to]);
    prev[to] = to;
    while let Some(u) = queue.pop_front() {
        for &v in topo.neighbors_of(u) {
            if prev[v] != usize::MAX || (dead(v) && v != from) {
                continue;
            }
            prev[v] = u;
            if v == from {
                return Some(u);
            }
            queue.push_back(v);
        }
    }
    None
}

impl NodeProtocol for Eagddp {
    type Shared = EagddpShared;
    type Timer = Timer;
    type Header = Header;

    fn new(id: NodeId, _role: Role, shared: &Arc<EagddpShared>) -> Self {
        Eagddp {
            id,
            inside: shared.members.binary_search(&id).is_ok(),
            shared: Arc::clone(shared),
            learned: None,
            table: BTreeMap::new(),
            last_advert: None,
            advertised: None,
            advert_pending: false,
            max_depth: 0,
        }
    }

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, Timer::Advert: Timer) {
        self.advert_pending = false;
        self.advertise(ctx);
    }

    fn on_packet(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        let (l, e_c) = match p.header {
            Header::Advert { l, e_c } | Header::Data { l, e_c, .. } => (l, e_c),
        };
        let entry = self.table.entry(from).or_default();
        entry.learned = l.is_finite().then_some(l);
        entry.e_c = e_c;
        entry.dead = false;
        if let Header::Data { mode, .. } = p.header {
            self.handle(ctx, Some(from), p, mode);
        }
    }

    fn on_data(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, seq: u32) {
        let header = self.header(ctx, Mode::ToRegion);
        let p = ctx.packet(PacketKind::Data, self.id, seq, header);
        self.handle(ctx, None, p, Mode::ToRegion);
    }

    fn on_link_failure(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, to: NodeId, p: Packet<Header>) {
        self.table.entry(to).or_default().dead = true;
        if let Header::Data { mode, .. } = p.header {
            self.handle(ctx, None, p, mode);
        }
    }

    fn dump_state(&self) -> String {
        match self.learned() {
            Some(l) => format!("node {} learned {l:.3}", self.id),
            None => format!("node {} learned -", self.id),
        }
    }
}

/// Synchronous iteration of the update rule over every node with frozen
/// consumed energies. Returns the learned costs and whether a fixpoint was
/// reached within `rounds`.
pub fn iterate_fixpoint(
    topo: &Topology,
    shared: &EagddpShared,
    link_cost: impl Fn(NodeId, NodeId) -> f64,
    consumed: &[f64],
    rounds: usize,
) -> (Vec<Option<f64>>, bool) {
    let mu = shared.params.mu;
    let scale = shared.params.energy_scale_m_per_j;
    let inside: BTreeSet<NodeId> = shared.members.iter().copied().collect();
    let mut l: Vec<Option<f64>> = (0..topo.len())
        .map(|n| inside.contains(&n).then_some(0.0))
        .collect();
    for _ in 0..rounds {
        let mut next = l.clone();
        let mut changed = false;
        for n in 0..topo.len() {
            if inside.contains(&n) {
                continue;
            }
            let best = topo
                .neighbors_of(n)
                .iter()
                .map(|&m| {
                    let e_c = scale * consumed[m];
                    let v = match l[m] {
                        Some(lm) => lm + (1.0 - mu) * e_c,
                        None => estimated_cost(topo.position(m).dist(shared.centroid()), e_c, mu),
                    };
                    v + link_cost(n, m)
                })
                .min_by(f64::total_cmp);
            if best != next[n] && best.is_some() {
                next[n] = best;
                changed = true;
            }
        }
        l = next;
        if !changed {
            return (l, true);
        }
    }
    (l, false)
}
