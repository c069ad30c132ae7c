use dissem::harness::{csv, run_sweep, Scenario, SweepConfig};
use dissem::metrics::RunResult;
use dissem::protocols::ProtocolKind;
use dissem::sim::SimTime;

fn trace_of(s: &Scenario, seed: u64) -> String {
    let out = s.run(seed, None, true).unwrap();
    out.trace.unwrap().iter().map(|l| format!("{l}\n")).collect()
}

fn csv_of(results: &[RunResult]) -> Vec<u8> {
    let mut buf = Vec::new();
    csv::write_results(&mut buf, results).unwrap();
    buf
}

#[test]
fn traces_are_byte_identical() {
    for p in ProtocolKind::ALL {
        let mut s = Scenario::for_row(p, 40).unwrap();
        s.duration = SimTime::from_secs(100);
        s.loss = 0.05;
        assert_eq!(trace_of(&s, 9), trace_of(&s, 9), "{p:?}");
    }
}

#[test]
fn different_seeds_differ() {
    let s = Scenario::for_row(ProtocolKind::Fdddp, 40).unwrap();
    assert_ne!(trace_of(&s, 1), trace_of(&s, 2));
}

#[test]
fn sweep_csv_is_independent_of_thread_count() {
    let cfg = SweepConfig {
        rows: vec![20, 40],
        seeds: (1..=3).collect(),
        duration: SimTime::from_secs(60),
        ..Default::default()
    };
    let parallel = csv_of(&run_sweep(&cfg).unwrap().results);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| csv_of(&run_sweep(&cfg).unwrap().results));
    assert_eq!(parallel, serial);
    assert_eq!(parallel, csv_of(&run_sweep(&cfg).unwrap().results));
}
