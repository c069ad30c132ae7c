//! Flat `key=value` scenario files.
//!
//! ```text
//! # 40-node row, credit broadcast with extra credit
//! protocol=cbddp
//! nodes=40
//! seeds=1..10
//! cbddp.beta=1.0
//! faults=12@100, 30@250
//! ```
//!
//! Blank lines and `#` comments are ignored. A node count matching a
//! benchmark row fills in the area; other counts need `width` and `height`.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, ParseError, Result};
use crate::network::{table_row, Topology, DEFAULT_RANGE_M};
use crate::protocols::{run_protocol, ProtocolKind, ProtocolParams};
use crate::runtime::{Fault, RunOutput, SimConfig};
use crate::sim::SimTime;

/// Seeds used when a scenario names none.
pub const DEFAULT_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

/// Per-run wall-clock allowance used by sweeps.
pub const DEFAULT_WALL_BUDGET: Duration = Duration::from_secs(60);

/// One protocol on one topology row, over a set of seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub protocol: ProtocolKind,
    pub nodes: usize,
    pub width: f64,
    pub height: f64,
    pub range: f64,
    pub seeds: Vec<u64>,
    pub duration: SimTime,
    pub data_interval: SimTime,
    pub loss: f64,
    pub params: ProtocolParams,
    pub faults: Vec<Fault>,
}

impl Scenario {
    /// Defaults for a benchmark row.
    pub fn for_row(protocol: ProtocolKind, nodes: usize) -> Result<Self> {
        let row = table_row(nodes).ok_or_else(|| Error::Config(format!("no benchmark row with {nodes} nodes")))?;
        Ok(Scenario {
            protocol,
            nodes,
            width: row.side_m,
            height: row.side_m,
            range: DEFAULT_RANGE_M,
            seeds: DEFAULT_SEEDS.collect(),
            duration: SimTime::from_secs(500),
            data_interval: SimTime::from_secs(2),
            loss: 0.0,
            params: ProtocolParams::default(),
            faults: Vec::new(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::parse(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut b = Builder::default();
        let mut last = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ParseError::new(line, format!("expected `key=value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if b.seen.contains(&key.to_string()) {
                return Err(ParseError::new(line, format!("duplicate key `{key}`")));
            }
            b.set(key, value).map_err(|m| ParseError::new(line, m))?;
            b.seen.push(key.to_string());
        }
        b.finish(last + 1)
    }

    pub fn topology(&self, seed: u64) -> Topology {
        Topology::generate(self.nodes, self.width, self.height, self.range, seed)
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        let mut cfg = SimConfig {
            seed,
            duration: self.duration,
            data_interval: self.data_interval,
            faults: self.faults.clone(),
            ..Default::default()
        };
        cfg.radio.loss = self.loss;
        cfg
    }

    /// Runs this scenario once for `seed`.
    pub fn run(&self, seed: u64, wall_budget: Option<Duration>, record_trace: bool) -> Result<RunOutput> {
        let topology = Arc::new(self.topology(seed));
        let cfg = SimConfig {
            wall_budget,
            record_trace,
            ..self.sim_config(seed)
        };
        run_protocol(self.protocol, &self.params, topology, cfg)
    }
}

#[derive(Default)]
struct Builder {
    seen: Vec<String>,
    protocol: Option<ProtocolKind>,
    nodes: Option<usize>,
    width: Option<f64>,
    height: Option<f64>,
    range: Option<f64>,
    seeds: Option<Vec<u64>>,
    duration: Option<SimTime>,
    data_interval: Option<SimTime>,
    loss: Option<f64>,
    params: ProtocolParams,
    faults: Vec<Fault>,
}

fn num<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid number `{value}`"))
}

fn positive(value: &str) -> Result<f64, String> {
    let v: f64 = num(value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a positive number, found `{value}`"))
    }
}

fn seconds(value: &str) -> Result<SimTime, String> {
    positive(value).map(SimTime::from_secs_f64)
}

/// `1..10` (inclusive) or `1, 4, 9`.
fn seed_list(value: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = value.split_once("..") {
        let (a, b): (u64, u64) = (num(a.trim())?, num(b.trim())?);
        if a > b {
            return Err(format!("empty seed range `{value}`"));
        }
        return Ok((a..=b).collect());
    }
    let seeds: Vec<u64> = value.split(',').map(|s| num(s.trim())).collect::<Result<_, _>>()?;
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(format!("repeated seed in `{value}`"));
    }
    Ok(seeds)
}

/// `node@seconds` pairs separated by commas.
fn fault_list(value: &str) -> Result<Vec<Fault>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (node, at) = item
                .split_once('@')
                .ok_or_else(|| format!("expected `node@seconds`, found `{item}`"))?;
            let at: f64 = num(at.trim())?;
            if !(at >= 0.0) {
                return Err(format!("negative fault time in `{item}`"));
            }
            Ok(Fault {
                node: num(node.trim())?,
                at: SimTime::from_secs_f64(at),
            })
        })
        .collect()
}

impl Builder {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let p = &mut self.params;
        match key {
            "protocol" => self.protocol = Some(value.parse()?),
            "nodes" => self.nodes = Some(num(value)?),
            "width" => self.width = Some(positive(value)?),
            "height" => self.height = Some(positive(value)?),
            "range" => self.range = Some(positive(value)?),
            "seed" => self.seeds = Some(vec![num(value)?]),
            "seeds" => self.seeds = Some(seed_list(value)?),
            "duration_s" => self.duration = Some(seconds(value)?),
            "data_interval_s" => self.data_interval = Some(seconds(value)?),
            "loss" => {
                let v: f64 = num(value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("loss must lie in [0, 1], found `{value}`"));
                }
                self.loss = Some(v);
            }
            "faults" => self.faults = fault_list(value)?,
            "fdddp.interest_interval_s" => p.fdddp.interest_interval = seconds(value)?,
            "fdddp.exploratory_every" => {
                p.fdddp.exploratory_every = num(value)?;
                if p.fdddp.exploratory_every == 0 {
                    return Err("fdddp.exploratory_every must be at least 1".into());
                }
            }
            "fdddp.repair_timeout_s" => p.fdddp.repair_timeout = seconds(value)?,
            "fdddp.buffer_len" => p.fdddp.buffer_len = num(value)?,
            "dddp.cells" => p.dddp.cells = Some(num(value)?),
            "dddp.cell_side_m" => p.dddp.cell_side_m = Some(positive(value)?),
            "dddp.grid_refresh_s" => p.dddp.grid_refresh = seconds(value)?,
            "dddp.query_interval_s" => p.dddp.query_interval = seconds(value)?,
            "dddp.escalation_timeout_s" => p.dddp.escalation_timeout = seconds(value)?,
            "cbddp.beta" => {
                p.cbddp.beta = num(value)?;
                if !(p.cbddp.beta >= 0.0) {
                    return Err(format!("cbddp.beta must be nonnegative, found `{value}`"));
                }
            }
            "cbddp.threshold" => p.cbddp.threshold = num(value)?,
            "cbddp.refresh_timeout_s" => p.cbddp.refresh_timeout = seconds(value)?,
            "eagddp.mu" => {
                p.eagddp.mu = num(value)?;
                if !(0.0..=1.0).contains(&p.eagddp.mu) {
                    return Err(format!("eagddp.mu must lie in [0, 1], found `{value}`"));
                }
            }
            "eagddp.region_side_m" => p.eagddp.region_side_m = Some(positive(value)?),
            "eagddp.advert_interval_s" => p.eagddp.advert_interval = seconds(value)?,
            "eagddp.energy_scale_m_per_j" => p.eagddp.energy_scale_m_per_j = positive(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn finish(self, end: usize) -> Result<Scenario, ParseError> {
        let missing = |k: &str| ParseError::new(end, format!("missing required key `{k}`"));
        let protocol = self.protocol.ok_or_else(|| missing("protocol"))?;
        let nodes = self.nodes.ok_or_else(|| missing("nodes"))?;
        let row = table_row(nodes);
        let width = self.width.or(row.map(|r| r.side_m)).ok_or_else(|| missing("width"))?;
        let height = self.height.or(row.map(|r| r.side_m)).ok_or_else(|| missing("height"))?;
        if let Some(f) = self.faults.iter().find(|f| f.node >= nodes) {
            return Err(ParseError::new(end, format!("fault names node {} but there are {nodes}", f.node)));
        }
        if self.params.dddp.cells.is_some() && self.params.dddp.cell_side_m.is_some() {
            return Err(ParseError::new(end, "set either `dddp.cells` or `dddp.cell_side_m`, not both"));
        }
        Ok(Scenario {
            protocol,
            nodes,
            width,
            height,
            range: self.range.unwrap_or(DEFAULT_RANGE_M),
            seeds: self.seeds.unwrap_or_else(|| DEFAULT_SEEDS.collect()),
            duration: self.duration.unwrap_or(SimTime::from_secs(500)),
            data_interval: self.data_interval.unwrap_or(SimTime::from_secs(2)),
            loss: self.loss.unwrap_or(0.0),
            params: self.params,
            faults: self.faults,
        })
    }
}
