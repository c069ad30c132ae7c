use std::sync::Arc;
use std::time::Duration;

use dissem::harness::{csv, Scenario};
use dissem::metrics::RunResult;
use dissem::network::{Point, Topology};
use dissem::protocols::{run_protocol, ProtocolKind, ProtocolParams};
use dissem::runtime::{SimConfig, TraceRecord};
use dissem::sim::SimTime;
use proptest::prelude::*;

fn protocol() -> impl Strategy<Value = ProtocolKind> {
    prop::sample::select(ProtocolKind::ALL.to_vec())
}

fn small_topology() -> impl Strategy<Value = Topology> {
    (prop::collection::vec((0.0..200.0f64, 0.0..200.0f64), 2..12), 40.0..150.0f64).prop_map(|(pts, range)| {
        let n = pts.len();
        let pos = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        Topology::from_positions(200.0, 200.0, range, pos, Some(n - 1), Some(0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn topology_dump_round_trips(n in 1usize..60, seed in any::<u64>()) {
        let t = Topology::generate(n, 400.0, 300.0, 120.0, seed);
        prop_assert_eq!(Topology::parse(&t.dump()).unwrap().dump(), t.dump());
    }

    #[test]
    fn energy_is_debited_only_by_radio_events(p in protocol(), topo in small_topology(), seed in 1u64..1000) {
        let n = topo.len();
        let cfg = SimConfig {
            seed,
            duration: SimTime::from_secs(30),
            record_trace: true,
            ..Default::default()
        };
        let out = run_protocol(p, &ProtocolParams::default(), Arc::new(topo), cfg).unwrap();
        let mut spent = vec![0u64; n];
        for r in out.records.as_ref().unwrap() {
            match *r {
                TraceRecord::Tx { node, energy, .. } | TraceRecord::Rx { node, energy, .. } => {
                    spent[node] += energy.picojoules();
                }
                _ => {}
            }
        }
        for (i, a) in out.ledger.energy.iter().enumerate() {
            prop_assert_eq!(a.consumed().picojoules(), spent[i]);
            prop_assert_eq!(a.initial().picojoules(), a.remaining().picojoules() + spent[i]);
        }
        prop_assert!(out.ledger.received - out.ledger.duplicates <= out.ledger.sent);
    }

    #[test]
    fn csv_round_trips(rows in prop::collection::vec(
        (protocol(), 1usize..500, any::<u64>(), 0.0..5.0f64, any::<u32>(), prop::option::of(0.0..20.0f64),
         0.0..100.0f64, 0u64..1000, 0u64..1000),
        0..20,
    )) {
        let results: Vec<RunResult> = rows
            .into_iter()
            .map(|(p, nodes, seed, e, r_oh, dr, bu, dups, sent)| RunResult {
                protocol: p.as_str().into(),
                nodes,
                seed,
                e_avg_j: e,
                r_oh: r_oh as u64,
                dr,
                band_util_pct: bu,
                duplicates: dups,
                sent,
                received: sent + dups,
                wall_time: Duration::ZERO,
            })
            .collect();
        let mut buf = Vec::new();
        csv::write_results(&mut buf, &results).unwrap();
        prop_assert_eq!(csv::read_results(buf.as_slice()).unwrap(), results);
    }

    #[test]
    fn scenario_parser_never_panics(text in "[a-z_=0-9., @#\n-]{0,200}") {
        let _ = Scenario::parse(&text);
    }
}
