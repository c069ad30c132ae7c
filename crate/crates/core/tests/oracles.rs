mod common;

use std::sync::Arc;

use dissem::harness::Scenario;
use dissem::metrics;
use dissem::network::{EnergyModel, Topology};
use dissem::protocols::{Cbddp, CbddpParams, ProtocolKind};
use dissem::runtime::{SimConfig, Simulation};
use dissem::sim::SimTime;

fn ten_nodes(p: ProtocolKind) -> Scenario {
    Scenario::parse(&format!(
        "protocol = {}\nnodes = 10\nwidth = 250\nheight = 250\nduration_s = 60\n",
        p.as_str()
    ))
    .unwrap()
}

#[test]
fn metrics_match_trace_recomputation() {
    for p in ProtocolKind::ALL {
        for seed in 1..=3 {
            let s = ten_nodes(p);
            let out = s.run(seed, None, true).unwrap();
            let got = common::recompute(out.records.as_ref().unwrap(), 10, &s.sim_config(seed));
            let l = &out.ledger;
            let consumed: Vec<_> = l.energy.iter().map(|a| a.consumed()).collect();
            assert_eq!(got.consumed, consumed, "{p:?} seed {seed}");
            assert_eq!(got.e_avg_j, metrics::avg_energy(l), "{p:?} seed {seed}");
            assert_eq!(got.r_oh, metrics::routing_overhead(l), "{p:?} seed {seed}");
            assert_eq!(got.dr, metrics::delivery_ratio(l), "{p:?} seed {seed}");
            assert_eq!(got.band_util_pct, metrics::bandwidth_utilization(l), "{p:?} seed {seed}");
        }
    }
}

#[test]
fn lossy_runs_still_match_trace() {
    let mut s = ten_nodes(ProtocolKind::Fdddp);
    s.loss = 0.2;
    let out = s.run(5, None, true).unwrap();
    let got = common::recompute(out.records.as_ref().unwrap(), 10, &s.sim_config(5));
    assert_eq!(got.e_avg_j, metrics::avg_energy(&out.ledger));
    assert_eq!(got.dr, metrics::delivery_ratio(&out.ledger));
}

#[test]
fn cost_field_matches_dijkstra_on_larger_rows() {
    for (nodes, side) in [(80, 713.0), (120, 886.0)] {
        let topo = Arc::new(Topology::generate(nodes, side, side, 271.3, 11));
        let cfg = SimConfig {
            duration: SimTime::from_secs(5),
            ..Default::default()
        };
        let mut sim: Simulation<Cbddp> = Simulation::new(topo.clone(), cfg, Arc::new(CbddpParams::default()));
        sim.run().unwrap();
        let field: Vec<_> = sim.nodes().iter().map(|n| n.cost()).collect();
        assert_eq!(field, common::dijkstra_to_consumer(&topo, &EnergyModel::default(), 512));
    }
}
