//! Plain-text comparison of protocols from a set of run results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::metrics::RunResult;

/// Which direction of a metric counts as better.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Better {
    Lower,
    Higher,
    /// Closest to this value wins.
    Near(i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Energy,
    Overhead,
    DeliveryRatio,
    Bandwidth,
    UniqueFraction,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Energy,
        Metric::Overhead,
        Metric::DeliveryRatio,
        Metric::Bandwidth,
        Metric::UniqueFraction,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Energy => "E_avg (J)",
            Metric::Overhead => "R_OH (tx)",
            Metric::DeliveryRatio => "Dr",
            Metric::Bandwidth => "BandUtil (%)",
            Metric::UniqueFraction => "unique delivered",
        }
    }

    pub fn better(self) -> Better {
        match self {
            Metric::Energy | Metric::Overhead => Better::Lower,
            Metric::DeliveryRatio => Better::Near(1),
            Metric::Bandwidth | Metric::UniqueFraction => Better::Higher,
        }
    }

    pub fn value(self, r: &RunResult) -> Option<f64> {
        match self {
            Metric::Energy => Some(r.e_avg_j),
            Metric::Overhead => Some(r.r_oh as f64),
            Metric::DeliveryRatio => r.dr,
            Metric::Bandwidth => Some(r.band_util_pct),
            Metric::UniqueFraction => r.unique_fraction(),
        }
    }

    /// Smaller is better.
    fn badness(self, mean: f64) -> f64 {
        match self.better() {
            Better::Lower => mean,
            Better::Higher => -mean,
            Better::Near(t) => (mean - t as f64).abs(),
        }
    }
}

/// Mean and sample standard deviation over the runs that define the metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, sd, n })
    }
}

/// Per-row, per-protocol summaries, keyed by node count then protocol.
#[derive(Clone, Debug, Default)]
pub struct Comparison {
    pub rows: BTreeMap<usize, BTreeMap<String, BTreeMap<Metric, Summary>>>,
}

impl Comparison {
    /// Groups results by row and protocol. Within a row every protocol must
    /// have been run on exactly the same seeds.
    pub fn build(results: &[RunResult]) -> Result<Self> {
        let mut grouped: BTreeMap<usize, BTreeMap<String, Vec<&RunResult>>> = BTreeMap::new();
        for r in results {
            grouped.entry(r.nodes).or_default().entry(r.protocol.clone()).or_default().push(r);
        }
        let mut rows = BTreeMap::new();
        for (nodes, protos) in grouped {
            let mut seeds: Option<(&str, BTreeSet<u64>)> = None;
            for (name, runs) in &protos {
                let set: BTreeSet<u64> = runs.iter().map(|r| r.seed).collect();
                if set.len() != runs.len() {
                    return Err(Error::Report(format!("{name} has repeated seeds at {nodes} nodes")));
                }
                match &seeds {
                    None => seeds = Some((name, set)),
                    Some((first, s)) if *s != set => {
                        return Err(Error::Report(format!(
                            "seed sets differ at {nodes} nodes: {first} has {:?}, {name} has {:?}",
                            s, set
                        )))
                    }
                    Some(_) => {}
                }
            }
            let summaries = protos
                .into_iter()
                .map(|(name, runs)| {
                    let m = Metric::ALL
                        .iter()
                        .filter_map(|&m| Summary::of(runs.iter().filter_map(|r| m.value(r))).map(|s| (m, s)))
                        .collect();
                    (name, m)
                })
                .collect();
            rows.insert(nodes, summaries);
        }
        Ok(Comparison { rows })
    }

    /// Protocols on `nodes` ordered best first; equal means share a rank.
    pub fn ranking(&self, nodes: usize, metric: Metric) -> Vec<(usize, &str, Summary)> {
        let Some(protos) = self.rows.get(&nodes) else { return Vec::new() };
        let mut v: Vec<(&str, Summary)> = protos
            .iter()
            .filter_map(|(name, m)| m.get(&metric).map(|s| (name.as_str(), *s)))
            .collect();
        v.sort_by(|a, b| metric.badness(a.1.mean).total_cmp(&metric.badness(b.1.mean)).then(a.0.cmp(b.0)));
        let mut out: Vec<(usize, &str, Summary)> = Vec::with_capacity(v.len());
        for (i, (name, s)) in v.into_iter().enumerate() {
            let rank = match out.last() {
                Some(&(r, _, prev)) if metric.badness(prev.mean) == metric.badness(s.mean) => r,
                _ => i + 1,
            };
            out.push((rank, name, s));
        }
        out
    }

    pub fn mean(&self, nodes: usize, protocol: &str, metric: Metric) -> Option<f64> {
        self.rows.get(&nodes)?.get(protocol)?.get(&metric).map(|s| s.mean)
    }
}

/// `(x - y) / y` as a percentage; `None` when `y` is zero.
pub fn relative_delta(x: f64, y: f64) -> Option<f64> {
    (y != 0.0).then(|| (x - y) / y * 100.0)
}

/// "a 12.5% larger than b", "a 3.0% smaller than b" or "a equal to b".
pub fn phrase_delta(a: &str, x: f64, b: &str, y: f64) -> String {
    match relative_delta(x, y) {
        None if x == 0.0 => format!("{a} equal to {b}"),
        None => format!("{a} nonzero where {b} is zero"),
        Some(d) if format!("{:.1}", d.abs()) == "0.0" => format!("{a} equal to {b}"),
        Some(d) if d > 0.0 => format!("{a} {d:.1}% larger than {b}"),
        Some(d) => format!("{a} {:.1}% smaller than {b}", -d),
    }
}

fn fmt_value(metric: Metric, v: f64) -> String {
    match metric {
        Metric::Overhead => format!("{v:.1}"),
        Metric::Bandwidth => format!("{v:.5}"),
        _ => format!("{v:.4}"),
    }
}

/// Renders the full report.
pub fn render(results: &[RunResult]) -> Result<String> {
    let cmp = Comparison::build(results)?;
    let mut out = String::new();
    let protocols: BTreeSet<&str> = results.iter().map(|r| r.protocol.as_str()).collect();
    let _ = writeln!(out, "Protocol comparison: {} runs", results.len());
    for (&nodes, protos) in &cmp.rows {
        let seeds = results.iter().filter(|r| r.nodes == nodes).map(|r| r.seed).collect::<BTreeSet<_>>().len();
        let _ = writeln!(out, "\n== {nodes} nodes ({seeds} seeds) ==");
        for metric in Metric::ALL {
            let _ = writeln!(out, "{}:", metric.label());
            if protos.len() == 1 {
                for (name, m) in protos {
                    match m.get(&metric) {
                        Some(s) => {
                            let _ = writeln!(out, "  {name} mean {}", fmt_value(metric, s.mean));
                        }
                        None => {
                            let _ = writeln!(out, "  {name} n/a");
                        }
                    }
                }
                continue;
            }
            for (rank, name, s) in cmp.ranking(nodes, metric) {
                let _ = writeln!(
                    out,
                    "  {rank}. {name} {} ± {} (n={})",
                    fmt_value(metric, s.mean),
                    fmt_value(metric, s.sd),
                    s.n
                );
            }
            let names: Vec<&String> = protos.keys().collect();
            for (i, a) in names.iter().enumerate() {
                for b in &names[i + 1..] {
                    if let (Some(x), Some(y)) = (cmp.mean(nodes, a, metric), cmp.mean(nodes, b, metric)) {
                        let _ = writeln!(out, "    {}", phrase_delta(a, x, b, y));
                    }
                }
            }
        }
    }
    if protocols.len() > 1 {
        let _ = writeln!(out, "\n== best / worst per row ==");
        for metric in Metric::ALL {
            let _ = writeln!(out, "{}:", metric.label());
            for &nodes in cmp.rows.keys() {
                let ranked = cmp.ranking(nodes, metric);
                let (Some(first), Some(last)) = (ranked.first(), ranked.last()) else { continue };
                let join = |rank: usize| {
                    ranked.iter().filter(|r| r.0 == rank).map(|r| r.1).collect::<Vec<_>>().join("=")
                };
                let _ = writeln!(out, "  {nodes:>4}: best {}  worst {}", join(first.0), join(last.0));
            }
        }
    }
    Ok(out)
}
