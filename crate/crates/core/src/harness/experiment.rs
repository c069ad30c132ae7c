//! Running many scenarios, in parallel, with deterministic output order.

use std::time::Duration;

use rayon::prelude::*;

use crate::error::Result;
use crate::harness::scenario::{Scenario, DEFAULT_WALL_BUDGET};
use crate::metrics::RunResult;
use crate::network::TABLE_ROWS;
use crate::protocols::{ProtocolKind, ProtocolParams};
use crate::sim::SimTime;

/// A run that did not complete, kept so that no run disappears silently.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub protocol: String,
    pub nodes: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Sweep {
    /// Sorted by `(protocol, nodes, seed)`.
    pub results: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
}

impl Sweep {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Protocols × benchmark rows × seeds, all sharing the same defaults.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub rows: Vec<usize>,
    pub protocols: Vec<ProtocolKind>,
    pub seeds: Vec<u64>,
    pub duration: SimTime,
    pub params: ProtocolParams,
    pub wall_budget: Option<Duration>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rows: TABLE_ROWS.iter().map(|r| r.nodes).collect(),
            protocols: ProtocolKind::ALL.to_vec(),
            seeds: (1..=10).collect(),
            duration: SimTime::from_secs(500),
            params: ProtocolParams::default(),
            wall_budget: Some(DEFAULT_WALL_BUDGET),
        }
    }
}

impl SweepConfig {
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            for &nodes in &self.rows {
                let mut s = Scenario::for_row(protocol, nodes)?;
                s.seeds = self.seeds.clone();
                s.duration = self.duration;
                s.params = self.params.clone();
                out.push(s);
            }
        }
        Ok(out)
    }
}

/// Runs every `(scenario, seed)` pair. Each run generates its topology from
/// the placement stream of its own seed, so all protocols on the same row
/// and seed see the same network.
pub fn run_experiment(scenarios: &[Scenario], wall_budget: Option<Duration>) -> Sweep {
    let jobs: Vec<(&Scenario, u64)> = scenarios
        .iter()
        .flat_map(|s| s.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let outcomes: Vec<Result<RunResult, RunFailure>> = jobs
        .par_iter()
        .map(|&(s, seed)| {
            let name = s.protocol.as_str();
            log::debug!("running {name} nodes={} seed={seed}", s.nodes);
            match s.run(seed, wall_budget, false) {
                Ok(out) => Ok(RunResult::from_ledger(name, s.nodes, seed, &out.ledger, out.wall_time)),
                Err(e) => {
                    log::warn!("{name} nodes={} seed={seed} failed: {e}", s.nodes);
                    Err(RunFailure {
                        protocol: name.to_string(),
                        nodes: s.nodes,
                        seed,
                        reason: e.to_string(),
                    })
                }
            }
        })
        .collect();
    let mut sweep = Sweep::default();
    for o in outcomes {
        match o {
            Ok(r) => sweep.results.push(r),
            Err(f) => sweep.failures.push(f),
        }
    }
    sweep
        .results
        .sort_by(|a, b| (&a.protocol, a.nodes, a.seed).cmp(&(&b.protocol, b.nodes, b.seed)));
    sweep
        .failures
        .sort_by(|a, b| (&a.protocol, a.nodes, a.seed).cmp(&(&b.protocol, b.nodes, b.seed)));
    sweep
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Sweep> {
    Ok(run_experiment(&cfg.scenarios()?, cfg.wall_budget))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seeds: std::ops::RangeInclusive<u64>) -> SweepConfig {
        SweepConfig {
            rows: vec![20],
            seeds: seeds.collect(),
            duration: SimTime::from_secs(20),
            ..Default::default()
        }
    }

    #[test]
    fn cardinality_and_order() {
        let sweep = run_sweep(&small(1..=5)).unwrap();
        assert!(sweep.is_complete());
        assert_eq!(sweep.results.len(), 20);
        let keys: Vec<_> = sweep.results.iter().map(|r| (r.protocol.clone(), r.nodes, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn protocols_share_topologies() {
        let cfg = small(3..=3);
        let dumps: Vec<String> = cfg
            .scenarios()
            .unwrap()
            .iter()
            .map(|s| s.topology(3).dump())
            .collect();
        assert_eq!(dumps.len(), 4);
        assert!(dumps.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn exhausted_budget_is_a_recorded_failure() {
        let mut cfg = small(1..=2);
        cfg.rows = vec![40];
        cfg.protocols = vec![ProtocolKind::Cbddp];
        cfg.duration = SimTime::from_secs(500);
        cfg.wall_budget = Some(Duration::ZERO);
        let sweep = run_sweep(&cfg).unwrap();
        assert!(sweep.results.is_empty());
        assert_eq!(sweep.failures.len(), 2);
        assert!(sweep.failures[0].reason.contains("budget"));
    }

    #[test]
    fn unknown_row_is_rejected() {
        let mut cfg = small(1..=1);
        cfg.rows = vec![33];
        assert!(run_sweep(&cfg).is_err());
    }
}
