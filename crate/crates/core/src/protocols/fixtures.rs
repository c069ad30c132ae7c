//! Small hand-placed topologies used by tests, examples and the guide.

use std::sync::Arc;

use crate::network::{Point, Topology};

/// Source, relay, consumer on a line, 50 m apart with a 60 m range:
/// `S(0) - A(1) - C(2)`.
pub fn line3() -> Arc<Topology> {
    line(3, 50.0)
}

/// `n` nodes on a line at `spacing`, range `1.2 * spacing`. Node 0 is the
/// source and node `n - 1` the consumer.
pub fn line(n: usize, spacing: f64) -> Arc<Topology> {
    let pos = (0..n).map(|i| Point::new(i as f64 * spacing, 0.0)).collect();
    let width = (n.max(2) - 1) as f64 * spacing;
    Arc::new(Topology::from_positions(
        width,
        spacing,
        1.2 * spacing,
        pos,
        (n > 0).then_some(0),
        (n > 0).then(|| n - 1),
    ))
}

/// Source 0, arms A (1) and B (2), consumer 3. The two arms are
/// symmetric, so both source-consumer paths have equal length and energy
/// cost; A and B cannot hear each other and neither can S and C.
pub fn diamond() -> Arc<Topology> {
    let pos = vec![
        Point::new(0.0, 50.0),
        Point::new(50.0, 100.0),
        Point::new(50.0, 0.0),
        Point::new(100.0, 50.0),
    ];
    Arc::new(Topology::from_positions(100.0, 100.0, 75.0, pos, Some(0), Some(3)))
}

/// One node with neither a source nor a consumer role.
pub fn single() -> Arc<Topology> {
    Arc::new(Topology::from_positions(
        10.0,
        10.0,
        5.0,
        vec![Point::new(5.0, 5.0)],
        None,
        None,
    ))
}
