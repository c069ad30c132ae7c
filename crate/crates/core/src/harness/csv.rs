//! CSV form of run results: one row per run.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::RunResult;

pub const HEADER: &str = "protocol,nodes,seed,e_avg_j,r_oh,dr,band_util_pct,duplicates,sent,received";

/// Writes `results` in the given order. An empty slice still produces the
/// header line.
pub fn write_results<W: Write>(out: W, results: &[RunResult]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER.split(','))?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != HEADER {
        return Err(Error::Report(format!("unexpected CSV header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_file(path: impl AsRef<Path>, results: &[RunResult]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(std::io::BufWriter::new(file), results)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;

    fn sample(protocol: &str, seed: u64, dr: Option<f64>) -> RunResult {
        RunResult {
            protocol: protocol.into(),
            nodes: 40,
            seed,
            e_avg_j: 0.1 + seed as f64 / 3.0,
            r_oh: 17,
            dr,
            band_util_pct: 0.012_345_678_9,
            duplicates: 2,
            sent: 250,
            received: 252,
            wall_time: Duration::ZERO,
        }
    }

    fn render(results: &[RunResult]) -> String {
        let mut buf = Vec::new();
        write_results(&mut buf, results).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(render(&[]), format!("{HEADER}\n"));
    }

    #[test]
    fn two_runs_three_lines() {
        assert_eq!(render(&[sample("fdddp", 1, Some(1.0)), sample("fdddp", 2, None)]).lines().count(), 3);
    }

    #[test]
    fn round_trip_is_exact() {
        let runs = vec![sample("cbddp", 1, Some(1.008)), sample("dddp", 7, None)];
        let back = read_results(render(&runs).as_bytes()).unwrap();
        assert_eq!(back, runs);
    }

    #[test]
    fn absent_ratio_is_an_empty_field() {
        let text = render(&[sample("eagddp", 3, None)]);
        assert!(text.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn wrong_header_is_refused() {
        assert!(read_results("a,b\n1,2\n".as_bytes()).is_err());
    }
}
