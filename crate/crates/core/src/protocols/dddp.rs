//! Decentralised dissemination over a cell grid.
//!
//! The consumer periodically floods a construction message. Nodes near the
//! midpoint of each shared cell edge (a border point) claim it, and the
//! nearest claimant becomes that border point's centralized node (CN). The
//! source advertises its data to the CNs of its own cell. Queries are
//! flooded only inside the consumer's cell; CNs relay them across the grid
//! by greedy geographic forwarding toward adjacent border points until a
//! data-bearing CN sends them on to the source. Data returns along the
//! reverse pointers the query left behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::network::{greedy_next_hop, table_row, NodeId, Point, Rect, Topology};
use crate::protocol::{NodeCtx, NodeProtocol, Packet, PacketKind, Role};
use crate::sim::SimTime;

/// `(row, col)`; rows run along y, columns along x.
pub type Cell = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellGrid {
    pub width: f64,
    pub height: f64,
    pub rows: usize,
    pub cols: usize,
}

/// Midpoint of an edge shared by two cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BorderPoint {
    pub point: Point,
    pub cells: [Cell; 2],
}

impl CellGrid {
    /// Grid with `rows * cols` as close as possible to `target`, rows taken
    /// from `floor(sqrt)` or `ceil(sqrt)` of the target; ties go to the
    /// squarer grid, then to fewer rows.
    pub fn for_target(width: f64, height: f64, target: usize) -> Self {
        let target = target.max(1);
        let root = (target as f64).sqrt();
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for rows in [root.floor() as usize, root.ceil() as usize] {
            let rows = rows.max(1);
            let cols = ((target as f64 / rows as f64).round() as usize).max(1);
            let key = (rows * cols).abs_diff(target);
            let squareness = rows.abs_diff(cols);
            let cand = (key, squareness, rows, cols);
            if best.is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                best = Some(cand);
            }
        }
        let (_, _, rows, cols) = best.expect("two candidates");
        CellGrid {
            width,
            height,
            rows,
            cols,
        }
    }

    /// Grid of roughly square cells of side `side`.
    pub fn for_side(width: f64, height: f64, side: f64) -> Self {
        let n = |extent: f64| ((extent / side).round() as usize).max(1);
        CellGrid {
            width,
            height,
            rows: n(height),
            cols: n(width),
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self) -> f64 {
        self.width / self.cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.height / self.rows as f64
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        let idx = |v: f64, size: f64, n: usize| ((v / size).floor().max(0.0) as usize).min(n - 1);
        (
            idx(p.y, self.cell_height(), self.rows),
            idx(p.x, self.cell_width(), self.cols),
        )
    }

    pub fn cell_rect(&self, (r, c): Cell) -> Rect {
        let (w, h) = (self.cell_width(), self.cell_height());
        Rect::new(
            Point::new(c as f64 * w, r as f64 * h),
            Point::new((c + 1) as f64 * w, (r + 1) as f64 * h),
        )
    }

    /// Chebyshev distance between cells, in cells.
    pub fn ring_distance(a: Cell, b: Cell) -> usize {
        a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
    }

    pub fn max_ring(&self) -> usize {
        self.rows.max(self.cols) - 1
    }

    pub fn border_points(&self) -> Vec<BorderPoint> {
        let (w, h) = (self.cell_width(), self.cell_height());
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols.saturating_sub(1) {
                out.push(BorderPoint {
                    point: Point::new((c + 1) as f64 * w, (r as f64 + 0.5) * h),
                    cells: [(r, c), (r, c + 1)],
                });
            }
        }
        for r in 0..self.rows.saturating_sub(1) {
            for c in 0..self.cols {
                out.push(BorderPoint {
                    point: Point::new((c as f64 + 0.5) * w, (r + 1) as f64 * h),
                    cells: [(r, c), (r + 1, c)],
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DddpParams {
    /// Target number of cells; the table row default when neither this
    /// nor `cell_side_m` is set.
    pub cells: Option<usize>,
    pub cell_side_m: Option<f64>,
    pub grid_refresh: SimTime,
    pub query_interval: SimTime,
    pub first_query: SimTime,
    /// Nodes within this fraction of the radio range of a border point
    /// compete to become its CN.
    pub claim_radius_frac: f64,
    pub election_window: SimTime,
    /// Widen the query flood by one ring when no data arrives this long
    /// after a query.
    pub escalation_timeout: SimTime,
}

impl Default for DddpParams {
    fn default() -> Self {
        DddpParams {
            cells: None,
            cell_side_m: None,
            grid_refresh: SimTime::from_secs(12),
            query_interval: SimTime::from_secs(60),
            first_query: SimTime::from_secs(1),
            claim_radius_frac: 0.5,
            election_window: SimTime::from_millis(500),
            escalation_timeout: SimTime::from_secs(4),
        }
    }
}

/// Cell side used when a topology matches no table row.
const FALLBACK_CELL_SIDE_M: f64 = 170.0;

/// Run-wide grid geometry.
#[derive(Debug)]
pub struct DddpShared {
    pub params: DddpParams,
    pub grid: CellGrid,
    pub border: Vec<BorderPoint>,
    /// Border points sharing a cell with each border point.
    pub adjacent: Vec<Vec<usize>>,
    pub claim_radius: f64,
    consumer: Option<NodeId>,
    consumer_cell: Option<Cell>,
    source_pos: Option<Point>,
}

impl DddpShared {
    pub fn new(params: DddpParams, topology: &Topology) -> Result<Self> {
        let (w, h) = (topology.width(), topology.height());
        let grid = match (params.cells, params.cell_side_m) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dddp.cells and dddp.cell_side_m are mutually exclusive".into(),
                ))
            }
            (Some(0), _) => return Err(Error::Config("dddp.cells must be positive".into())),
            (Some(n), None) => CellGrid::for_target(w, h, n),
            (None, Some(s)) if s > 0.0 => CellGrid::for_side(w, h, s),
            (None, Some(_)) => return Err(Error::Config("dddp.cell_side_m must be positive".into())),
            (None, None) => match table_row(topology.len()) {
                Some(row) => CellGrid::for_target(w, h, row.dddp_cells),
                None => CellGrid::for_side(w, h, FALLBACK_CELL_SIDE_M),
            },
        };
        let border = grid.border_points();
        let adjacent = border
            .iter()
            .enumerate()
            .map(|(i, b)| {
                border
                    .iter()
                    .enumerate()
                    .filter(|&(j, o)| j != i && o.cells.iter().any(|c| b.cells.contains(c)))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Ok(DddpShared {
            claim_radius: params.claim_radius_frac * topology.range(),
            consumer: topology.consumer(),
            consumer_cell: topology.consumer().map(|c| grid.cell_of(topology.position(c))),
            source_pos: topology.source().map(|s| topology.position(s)),
            params,
            grid,
            border,
            adjacent,
        })
    }

    fn in_ring(&self, cell: Cell, ring: usize) -> bool {
        self.consumer_cell
            .is_some_and(|cc| CellGrid::ring_distance(cc, cell) <= ring)
    }

    fn border_in_ring(&self, bp: usize, ring: usize) -> bool {
        self.border[bp].cells.iter().any(|&c| self.in_ring(c, ring))
    }

    fn border_inside_ring(&self, bp: usize, ring: usize) -> bool {
        self.border[bp].cells.iter().all(|&c| self.in_ring(c, ring))
    }

    /// Ring distance of the farther of the point's two cells.
    fn border_ring(&self, bp: usize) -> usize {
        let Some(cc) = self.consumer_cell else { return 0 };
        self.border[bp]
            .cells
            .iter()
            .map(|&c| CellGrid::ring_distance(cc, c))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QueryRoute {
    Flood,
    ToBorder(usize),
    ToSource(Point),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Header {
    Construction { epoch: u32 },
    Claim { epoch: u32, border: usize, dist: f64 },
    Link { from_border: usize, to_border: usize },
    Advert { border: usize, source_cell: Cell },
    Query { ring: usize, route: QueryRoute },
    Data,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Timer {
    Construct,
    Claim(usize),
    ElectionClose,
    Advert,
    Query,
    Escalate,
}

pub struct Dddp {
    id: NodeId,
    role: Role,
    shared: Arc<DddpShared>,
    cell: Option<Cell>,
    epoch: Option<u32>,
    candidacy: Vec<(usize, f64)>,
    best_claim: BTreeMap<usize, (f64, NodeId)>,
    cn_links: BTreeSet<(usize, NodeId)>,
    data_bearing: BTreeMap<usize, Cell>,
    latest_query: Option<u32>,
    reverse: Option<NodeId>,
    flooded: BTreeSet<u32>,
    cn_seen: BTreeSet<(u32, usize)>,
    next_query: u32,
    ring: usize,
    data_since_query: bool,
}

impl Dddp {
    pub fn cell(&self) -> Option<Cell> {
        self.cell
    }

    pub fn reverse(&self) -> Option<NodeId> {
        self.reverse
    }

    pub fn ring(&self) -> usize {
        self.ring
    }

    /// Border points this node currently serves as CN.
    pub fn cn_of(&self) -> Vec<usize> {
        self.candidacy
            .iter()
            .filter(|(b, _)| self.is_cn(*b))
            .map(|(b, _)| *b)
            .collect()
    }

    pub fn cn_links(&self) -> &BTreeSet<(usize, NodeId)> {
        &self.cn_links
    }

    pub fn is_data_bearing(&self) -> bool {
        !self.data_bearing.is_empty()
    }

    fn is_cn(&self, bp: usize) -> bool {
        let Some(&(_, d)) = self.candidacy.iter().find(|(b, _)| *b == bp) else {
            return false;
        };
        self.best_claim.get(&bp).is_some_and(|&best| best == (d, self.id))
    }

    fn has_grid(&self) -> bool {
        !self.shared.border.is_empty()
    }

    fn begin_epoch(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, epoch: u32) {
        self.epoch = Some(epoch);
        self.best_claim.clear();
        self.cn_links.clear();
        self.data_bearing.clear();
        let here = ctx.position();
        let radius = self.shared.claim_radius;
        self.candidacy = self
            .shared
            .border
            .iter()
            .enumerate()
            .map(|(i, b)| (i, here.dist(b.point)))
            .filter(|&(_, d)| d <= radius)
            .collect();
        // Closer claimants speak first, so farther ones usually stay quiet.
        for &(bp, d) in &self.candidacy {
            let delay = SimTime::from_millis(5) + SimTime::from_secs_f64(0.2 * d / radius.max(1e-9));
            ctx.set_timer(delay, Timer::Claim(bp));
        }
        ctx.set_timer(self.shared.params.election_window, Timer::ElectionClose);
        if self.role == Role::Source {
            ctx.set_timer(
                self.shared.params.election_window + SimTime::from_millis(200),
                Timer::Advert,
            );
        }
    }

    fn note_claim(&mut self, bp: usize, dist: f64, node: NodeId) {
        let e = self.best_claim.entry(bp).or_insert((dist, node));
        if (dist, node) < *e {
            *e = (dist, node);
        }
    }

    /// Greedy unicast toward `target`; `false` when this node is already
    /// the closest one it knows.
    fn greedy(&self, ctx: &mut NodeCtx<'_, Timer, Header>, target: Point, p: Packet<Header>) -> bool {
        match greedy_next_hop(ctx.topology(), self.id, target, |_| false) {
            Some(next) => {
                ctx.unicast(next, Packet { hop_count: p.hop_count, ..p });
                true
            }
            None => false,
        }
    }

    fn issue_query(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        let seq = self.next_query;
        self.next_query += 1;
        self.latest_query = Some(seq);
        self.reverse = None;
        self.data_since_query = false;
        self.flooded.insert(seq);
        let ring = self.ring;
        let p = ctx.packet(
            PacketKind::Query,
            self.id,
            seq,
            Header::Query {
                ring,
                route: QueryRoute::Flood,
            },
        );
        ctx.broadcast(p);
        for bp in self.cn_of() {
            if self.shared.border_in_ring(bp, ring) {
                self.cn_process(ctx, seq, ring, bp);
            }
        }
        ctx.set_timer(self.shared.params.escalation_timeout, Timer::Escalate);
    }

    fn cn_process(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, seq: u32, ring: usize, bp: usize) {
        if !self.cn_seen.insert((seq, bp)) {
            return;
        }
        let source_cell = self.data_bearing.get(&bp).copied();
        if let Some(cell) = source_cell {
            if self.shared.in_ring(cell, ring) {
                return;
            }
            if let Some(src) = self.shared.source_pos {
                let p = ctx.packet(
                    PacketKind::Query,
                    self.shared.consumer.unwrap_or(self.id),
                    seq,
                    Header::Query {
                        ring,
                        route: QueryRoute::ToSource(src),
                    },
                );
                if !self.greedy(ctx, src, p) {
                    ctx.routing_failure();
                }
            }
            return;
        }
        // Queries only move outward from the consumer's cell.
        let here = self.shared.border_ring(bp);
        let adjacent = self.shared.adjacent[bp].clone();
        for next in adjacent {
            if self.shared.border_inside_ring(next, ring) || self.shared.border_ring(next) < here {
                continue;
            }
            if self.is_cn(next) {
                self.cn_process(ctx, seq, ring, next);
                continue;
            }
            let target = self.shared.border[next].point;
            let p = ctx.packet(
                PacketKind::Query,
                self.shared.consumer.unwrap_or(self.id),
                seq,
                Header::Query {
                    ring,
                    route: QueryRoute::ToBorder(next),
                },
            );
            self.greedy(ctx, target, p);
        }
    }

    fn on_query(
        &mut self,
        ctx: &mut NodeCtx<'_, Timer, Header>,
        from: NodeId,
        p: Packet<Header>,
        ring: usize,
        route: QueryRoute,
    ) {
        if self.role == Role::Consumer {
            return;
        }
        let seq = p.seq;
        match self.latest_query {
            Some(q) if seq < q => return,
            Some(q) if seq == q => {}
            _ => {
                self.latest_query = Some(seq);
                self.reverse = Some(from);
            }
        }
        if self.role == Role::Source {
            return;
        }
        match route {
            QueryRoute::Flood => {
                if self.flooded.insert(seq) {
                    if self.cell.is_some_and(|c| self.shared.in_ring(c, ring)) {
                        ctx.broadcast(Packet { hop_count: 0, ..p });
                    }
                    for bp in self.cn_of() {
                        if self.shared.border_in_ring(bp, ring) {
                            self.cn_process(ctx, seq, ring, bp);
                        }
                    }
                }
            }
            QueryRoute::ToBorder(bp) => {
                let target = self.shared.border[bp].point;
                if !self.greedy(ctx, target, p) && self.is_cn(bp) {
                    self.cn_process(ctx, seq, ring, bp);
                }
            }
            QueryRoute::ToSource(target) => {
                if !self.greedy(ctx, target, p) {
                    ctx.routing_failure();
                }
            }
        }
    }

    fn on_link(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, p: Packet<Header>, from_border: usize, to_border: usize) {
        let target = self.shared.border[to_border].point;
        let origin = p.origin;
        if !self.greedy(ctx, target, p) && self.is_cn(to_border) {
            self.cn_links.insert((from_border, origin));
        }
    }

    fn on_advert(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, p: Packet<Header>, bp: usize, source_cell: Cell) {
        let target = self.shared.border[bp].point;
        if !self.greedy(ctx, target, p) && self.is_cn(bp) {
            self.data_bearing.insert(bp, source_cell);
        }
    }

    fn send_links(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        // One announcement per adjacent pair, from the lower-numbered point.
        for bp in self.cn_of() {
            for &next in self.shared.adjacent[bp].iter().filter(|&&n| n > bp) {
                if self.is_cn(next) {
                    self.cn_links.insert((bp, self.id));
                    continue;
                }
                let p = ctx.packet(
                    PacketKind::CnLink,
                    self.id,
                    self.epoch.unwrap_or(0),
                    Header::Link {
                        from_border: bp,
                        to_border: next,
                    },
                );
                self.greedy(ctx, self.shared.border[next].point, p);
            }
        }
    }

    fn send_adverts(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        let Some(cell) = self.cell else { return };
        let epoch = self.epoch.unwrap_or(0);
        for (bp, b) in self.shared.border.iter().enumerate() {
            if !b.cells.contains(&cell) {
                continue;
            }
            let p = ctx.packet(
                PacketKind::DataAdvert,
                self.id,
                epoch,
                Header::Advert {
                    border: bp,
                    source_cell: cell,
                },
            );
            if !self.greedy(ctx, b.point, p) && self.is_cn(bp) {
                self.data_bearing.insert(bp, cell);
            }
        }
    }
}

impl NodeProtocol for Dddp {
    type Shared = DddpShared;
    type Timer = Timer;
    type Header = Header;

    fn new(id: NodeId, role: Role, shared: &Arc<DddpShared>) -> Self {
        Dddp {
            id,
            role,
            shared: Arc::clone(shared),
            cell: None,
            epoch: None,
            candidacy: Vec::new(),
            best_claim: BTreeMap::new(),
            cn_links: BTreeSet::new(),
            data_bearing: BTreeMap::new(),
            latest_query: None,
            reverse: None,
            flooded: BTreeSet::new(),
            cn_seen: BTreeSet::new(),
            next_query: 0,
            ring: 0,
            data_since_query: false,
        }
    }

    fn on_start(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>) {
        self.cell = Some(self.shared.grid.cell_of(ctx.position()));
        if self.role == Role::Consumer {
            if self.has_grid() {
                self.on_timer(ctx, Timer::Construct);
            }
            ctx.set_timer(self.shared.params.first_query, Timer::Query);
        }
    }

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, tag: Timer) {
        match tag {
            Timer::Construct => {
                let epoch = self.epoch.map_or(0, |e| e + 1);
                let p = ctx.packet(PacketKind::CellConstruction, self.id, epoch, Header::Construction { epoch });
                ctx.broadcast(p);
                self.begin_epoch(ctx, epoch);
                ctx.set_timer(self.shared.params.grid_refresh, Timer::Construct);
            }
            Timer::Claim(bp) => {
                let epoch = self.epoch.unwrap_or(0);
                let Some(&(_, dist)) = self.candidacy.iter().find(|(b, _)| *b == bp) else {
                    return;
                };
                // A nearer claim already heard settles this point.
                if self.best_claim.get(&bp).is_some_and(|&b| b < (dist, self.id)) {
                    return;
                }
                self.note_claim(bp, dist, self.id);
                let p = ctx.packet(
                    PacketKind::CnClaim,
                    self.id,
                    epoch,
                    Header::Claim {
                        epoch,
                        border: bp,
                        dist,
                    },
                );
                ctx.broadcast(p);
            }
            Timer::ElectionClose => self.send_links(ctx),
            Timer::Advert => self.send_adverts(ctx),
            Timer::Query => {
                self.issue_query(ctx);
                ctx.set_timer(self.shared.params.query_interval, Timer::Query);
            }
            Timer::Escalate => {
                if !self.data_since_query && self.ring < self.shared.grid.max_ring() {
                    self.ring += 1;
                    self.issue_query(ctx);
                }
            }
        }
    }

    fn on_packet(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, from: NodeId, p: Packet<Header>) {
        match p.header.clone() {
            Header::Construction { epoch } => {
                if self.epoch.is_none_or(|e| epoch > e) {
                    ctx.broadcast(Packet { hop_count: 0, ..p });
                    self.begin_epoch(ctx, epoch);
                }
            }
            Header::Claim { epoch, border, dist } => {
                if self.epoch == Some(epoch) {
                    self.note_claim(border, dist, p.origin);
                }
            }
            Header::Link {
                from_border,
                to_border,
            } => self.on_link(ctx, p, from_border, to_border),
            Header::Advert { border, source_cell } => self.on_advert(ctx, p, border, source_cell),
            Header::Query { ring, route } => self.on_query(ctx, from, p, ring, route),
            Header::Data => match self.role {
                Role::Consumer => {
                    self.data_since_query = true;
                    ctx.cancel_timer(Timer::Escalate);
                }
                _ => match self.reverse {
                    Some(next) => ctx.unicast(next, p),
                    None => ctx.routing_failure(),
                },
            },
        }
    }

    fn on_data(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, seq: u32) {
        match self.reverse {
            Some(next) => {
                let p = ctx.packet(PacketKind::Data, self.id, seq, Header::Data);
                ctx.unicast(next, p);
            }
            None => ctx.routing_failure(),
        }
    }

    fn on_link_failure(&mut self, ctx: &mut NodeCtx<'_, Timer, Header>, _to: NodeId, p: Packet<Header>) {
        if p.kind == PacketKind::Data {
            ctx.routing_failure();
        }
    }

    fn dump_state(&self) -> String {
        let mut s = format!("node {}", self.id);
        if let Some((r, c)) = self.cell {
            let _ = write!(s, " cell {r},{c}");
        }
        let cn = self.cn_of();
        if !cn.is_empty() {
            let _ = write!(s, " cn {cn:?}");
        }
        match self.reverse {
            Some(r) => {
                let _ = write!(s, " reverse {r}");
            }
            None => s.push_str(" reverse -"),
        }
        s
    }
}

/// Follows reverse pointers from `start`; `None` on a cycle.
pub fn reverse_path(nodes: &[Dddp], start: NodeId) -> Option<Vec<NodeId>> {
    let mut path = vec![start];
    let mut seen = BTreeSet::from([start]);
    let mut at = start;
    while let Some(next) = nodes[at].reverse {
        if !seen.insert(next) {
            return None;
        }
        path.push(next);
        at = next;
    }
    Some(path)
}
