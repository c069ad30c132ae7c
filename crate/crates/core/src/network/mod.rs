//! Topology generation, disc radio model, energy accounting and the
//! byte ledger shared by every protocol. The MAC itself lives in
//! [`crate::runtime`] because it schedules events.

pub mod energy;
pub mod geo;
pub mod radio;
pub mod topology;

pub use energy::{Energy, EnergyAccount, EnergyModel, RadioOp};
pub use geo::{Point, Rect};
pub use radio::{LinkByteLedger, PacketSizes, RadioParams};
pub use topology::{
    range_for_sninda, sninda, table_row, NodeId, TableRow, Topology, DEFAULT_RANGE_M, TABLE_ROWS,
};

/// Greedy geographic forwarding step: the neighbour strictly closer to
/// `target` than `from`, minimising the remaining distance (ties to the
/// lowest id). Neighbours for which `skip` holds are ignored.
pub fn greedy_next_hop(
    topology: &Topology,
    from: NodeId,
    target: Point,
    mut skip: impl FnMut(NodeId) -> bool,
) -> Option<NodeId> {
    let own = topology.position(from).dist_sq(target);
    topology
        .neighbors_of(from)
        .iter()
        .copied()
        .filter(|&n| !skip(n))
        .map(|n| (topology.position(n).dist_sq(target), n))
        .filter(|(d, _)| *d < own)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, n)| n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_picks_closest_progress() {
        let t = Topology::from_positions(
            400.0,
            100.0,
            150.0,
            vec![
                Point::new(0.0, 50.0),
                Point::new(100.0, 50.0),
                Point::new(120.0, 90.0),
                Point::new(300.0, 50.0),
            ],
            Some(0),
            Some(3),
        );
        assert_eq!(greedy_next_hop(&t, 0, t.position(3), |_| false), Some(2));
        assert_eq!(greedy_next_hop(&t, 0, t.position(3), |n| n == 2), Some(1));
        // No neighbour makes progress back towards the origin corner.
        assert_eq!(greedy_next_hop(&t, 0, Point::new(0.0, 0.0), |_| false), None);
    }
}
