use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::ParseError;
use crate::network::geo::Point;
use crate::sim::{rng_stream, StreamId};

pub type NodeId = usize;

/// Radio range giving an expected neighbourhood of 40 on the 20-node row.
pub const DEFAULT_RANGE_M: f64 = 271.3;

/// One of the eight benchmark topology rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRow {
    pub nodes: usize,
    pub side_m: f64,
    /// DDDP cell count used for this row.
    pub dddp_cells: usize,
}

pub const TABLE_ROWS: [TableRow; 8] = [
    TableRow { nodes: 20, side_m: 340.0, dddp_cells: 4 },
    TableRow { nodes: 40, side_m: 511.0, dddp_cells: 9 },
    TableRow { nodes: 60, side_m: 626.0, dddp_cells: 12 },
    TableRow { nodes: 80, side_m: 713.0, dddp_cells: 20 },
    TableRow { nodes: 100, side_m: 810.0, dddp_cells: 23 },
    TableRow { nodes: 120, side_m: 886.0, dddp_cells: 28 },
    TableRow { nodes: 140, side_m: 911.0, dddp_cells: 32 },
    TableRow { nodes: 160, side_m: 994.0, dddp_cells: 37 },
];

pub fn table_row(nodes: usize) -> Option<TableRow> {
    TABLE_ROWS.iter().copied().find(|r| r.nodes == nodes)
}

/// Expected number of nodes within nominal range: `S·π·r²/a`.
pub fn sninda(node_count: usize, area_m2: f64, range_m: f64) -> f64 {
    assert!(area_m2 > 0.0, "area must be positive");
    node_count as f64 * PI * range_m * range_m / area_m2
}

/// Range that yields the requested SNINDA for a given node count and area.
pub fn range_for_sninda(node_count: usize, area_m2: f64, target: f64) -> f64 {
    (target * area_m2 / (node_count as f64 * PI)).sqrt()
}

/// Static node placement plus the derived disc-model neighbour graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    width: f64,
    height: f64,
    range: f64,
    positions: Vec<Point>,
    source: Option<NodeId>,
    consumer: Option<NodeId>,
    neighbors: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Places `node_count` nodes uniformly at random using the placement
    /// stream of `seed`. The source is the node nearest `(0, 0)` and the
    /// consumer the node nearest `(width, height)`.
    pub fn generate(node_count: usize, width: f64, height: f64, range: f64, seed: u64) -> Self {
        assert!(width > 0.0 && height > 0.0, "dimensions must be positive");
        let mut rng = rng_stream(seed, StreamId::Placement);
        let positions: Vec<Point> = (0..node_count)
            .map(|_| Point::new(rng.gen_range(0.0..=width), rng.gen_range(0.0..=height)))
            .collect();
        let source = nearest(&positions, Point::new(0.0, 0.0));
        let consumer = nearest(&positions, Point::new(width, height));
        Topology::build(width, height, range, positions, source, consumer)
    }

    /// Builds a topology from explicit positions. Panics if a coordinate lies
    /// outside the area or an endpoint id is out of range.
    pub fn from_positions(
        width: f64,
        height: f64,
        range: f64,
        positions: Vec<Point>,
        source: Option<NodeId>,
        consumer: Option<NodeId>,
    ) -> Self {
        for p in &positions {
            assert!(
                (0.0..=width).contains(&p.x) && (0.0..=height).contains(&p.y),
                "node {p} outside {width}x{height}"
            );
        }
        for id in [source, consumer].into_iter().flatten() {
            assert!(id < positions.len(), "endpoint {id} out of range");
        }
        Topology::build(width, height, range, positions, source, consumer)
    }

    fn build(
        width: f64,
        height: f64,
        range: f64,
        positions: Vec<Point>,
        source: Option<NodeId>,
        consumer: Option<NodeId>,
    ) -> Self {
        assert!(range > 0.0, "radio range must be positive");
        let neighbors = bucketed_neighbors(&positions, range);
        Topology {
            width,
            height,
            range,
            positions,
            source,
            consumer,
            neighbors,
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
    pub fn range(&self) -> f64 {
        self.range
    }
    pub fn len(&self) -> usize {
        self.positions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
    pub fn source(&self) -> Option<NodeId> {
        self.source
    }
    pub fn consumer(&self) -> Option<NodeId> {
        self.consumer
    }
    pub fn position(&self, id: NodeId) -> Point {
        self.positions[id]
    }
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Other nodes within radio range, sorted by id.
    pub fn neighbors_of(&self, id: NodeId) -> &[NodeId] {
        &self.neighbors[id]
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.positions[a].dist(self.positions[b])
    }

    pub fn dist_sq(&self, a: NodeId, b: NodeId) -> f64 {
        self.positions[a].dist_sq(self.positions[b])
    }

    pub fn mean_degree(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.neighbors.iter().map(Vec::len).sum::<usize>() as f64 / self.len() as f64
    }

    pub fn sninda(&self) -> f64 {
        sninda(self.len(), self.area(), self.range)
    }

    /// Text dump: header `width height range source consumer`, then one
    /// `id x y` line per node. Missing endpoints are written as `-`.
    pub fn dump(&self) -> String {
        let ep = |e: Option<NodeId>| e.map_or_else(|| "-".to_string(), |v| v.to_string());
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.width,
            self.height,
            self.range,
            ep(self.source),
            ep(self.consumer)
        );
        for (id, p) in self.positions.iter().enumerate() {
            let _ = writeln!(out, "{id} {} {}", p.x, p.y);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty topology file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(ParseError::new(
                hline,
                "header must be `width height range source consumer`",
            ));
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| ParseError::new(hline, format!("bad {what} `{s}`")))
        };
        let width = num(fields[0], "width")?;
        let height = num(fields[1], "height")?;
        let range = num(fields[2], "range")?;
        if !(width > 0.0 && height > 0.0 && range > 0.0) {
            return Err(ParseError::new(hline, "width, height and range must be positive"));
        }
        let endpoint = |s: &str| -> Result<Option<NodeId>, ParseError> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| ParseError::new(hline, format!("bad endpoint `{s}`")))
            }
        };
        let source = endpoint(fields[3])?;
        let consumer = endpoint(fields[4])?;

        let mut positions = Vec::new();
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(ParseError::new(ln, "node line must be `id x y`"));
            }
            let id: usize = f[0]
                .parse()
                .map_err(|_| ParseError::new(ln, format!("bad node id `{}`", f[0])))?;
            if id != positions.len() {
                return Err(ParseError::new(
                    ln,
                    format!("node ids must be 0..n in order; expected {}", positions.len()),
                ));
            }
            let x: f64 = f[1].parse().map_err(|_| ParseError::new(ln, "bad x coordinate"))?;
            let y: f64 = f[2].parse().map_err(|_| ParseError::new(ln, "bad y coordinate"))?;
            if !(0.0..=width).contains(&x) || !(0.0..=height).contains(&y) {
                return Err(ParseError::new(ln, format!("node {id} lies outside the area")));
            }
            positions.push(Point::new(x, y));
        }
        for e in [source, consumer].into_iter().flatten() {
            if e >= positions.len() {
                return Err(ParseError::new(hline, format!("endpoint {e} is not a node")));
            }
        }
        Ok(Topology::build(width, height, range, positions, source, consumer))
    }
}

fn nearest(positions: &[Point], target: Point) -> Option<NodeId> {
    positions
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.dist_sq(target)
                .total_cmp(&b.dist_sq(target))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
}

/// Neighbour lists via a uniform bucket grid of side `range`.
fn bucketed_neighbors(positions: &[Point], range: f64) -> Vec<Vec<NodeId>> {
    use std::collections::HashMap;
    let cell = |p: Point| ((p.x / range).floor() as i64, (p.y / range).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<NodeId>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        buckets.entry(cell(*p)).or_default().push(i);
    }
    let r2 = range * range;
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (cx, cy) = cell(*p);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(ids) = buckets.get(&(cx + dx, cy + dy)) {
                        out.extend(ids.iter().copied().filter(|&j| j != i && positions[j].dist_sq(*p) <= r2));
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_node_row_stays_in_bounds() {
        let t = Topology::generate(20, 340.0, 340.0, DEFAULT_RANGE_M, 1);
        assert_eq!(t.len(), 20);
        assert!(t
            .positions()
            .iter()
            .all(|p| (0.0..=340.0).contains(&p.x) && (0.0..=340.0).contains(&p.y)));
        assert_ne!(t.source(), t.consumer());
    }

    #[test]
    fn empty_topology_has_no_endpoints() {
        let t = Topology::generate(0, 100.0, 100.0, 50.0, 3);
        assert!(t.is_empty());
        assert_eq!(t.source(), None);
        assert_eq!(t.consumer(), None);
    }

    #[test]
    fn area_per_node_on_largest_row() {
        assert!((994.0f64 * 994.0 / 160.0 - 6175.2).abs() < 0.1);
    }

    #[test]
    fn sninda_values() {
        assert!((sninda(20, 340.0 * 340.0, 271.3) - 40.0).abs() < 0.05);
        assert_eq!(sninda(20, 1000.0, 0.0), 0.0);
        assert!((sninda(100, 810.0 * 810.0, 271.3) - 35.2).abs() < 0.05);
        let r = range_for_sninda(20, 340.0 * 340.0, 40.0);
        assert!((r - 271.3).abs() < 0.05, "{r}");
    }

    #[test]
    fn disc_neighbourhood() {
        let mk = |y| {
            Topology::from_positions(
                300.0,
                300.0,
                271.3,
                vec![Point::new(0.0, 0.0), Point::new(0.0, y)],
                Some(0),
                Some(1),
            )
        };
        assert_eq!(mk(250.0).neighbors_of(0), &[1]);
        assert!(mk(300.0).neighbors_of(0).is_empty());
    }

    #[test]
    fn source_and_consumer_sit_at_opposite_corners() {
        let t = Topology::generate(60, 626.0, 626.0, DEFAULT_RANGE_M, 9);
        let s = t.position(t.source().unwrap());
        let c = t.position(t.consumer().unwrap());
        assert!(s.x + s.y < c.x + c.y);
        for p in t.positions() {
            assert!(p.dist_sq(Point::new(0.0, 0.0)) >= s.dist_sq(Point::new(0.0, 0.0)));
            assert!(p.dist_sq(Point::new(626.0, 626.0)) >= c.dist_sq(Point::new(626.0, 626.0)));
        }
    }

    #[test]
    fn dump_parse_roundtrip_is_exact() {
        let t = Topology::generate(40, 511.0, 511.0, DEFAULT_RANGE_M, 4);
        let text = t.dump();
        let back = Topology::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.dump(), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Topology::parse("10 10 5 0 1\n0 1 1\n1 20 1\n").unwrap_err();
        assert_eq!(err.line, 3);
        let err = Topology::parse("10 10 5 0\n").unwrap_err();
        assert_eq!(err.line, 1);
    }
}
