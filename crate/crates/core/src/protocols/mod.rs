//! The four dissemination protocols and a uniform way to run any of them.

pub mod cbddp;
pub mod dddp;
pub mod eagddp;
pub mod fdddp;
pub mod fixtures;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::network::Topology;
use crate::protocol::NodeProtocol;
use crate::runtime::{RunOutput, SimConfig, Simulation};

pub use cbddp::{Cbddp, CbddpParams};
pub use dddp::{CellGrid, Dddp, DddpParams};
pub use eagddp::{Eagddp, EagddpParams};
pub use fdddp::{Fdddp, FdddpParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Fdddp,
    Dddp,
    Cbddp,
    Eagddp,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Fdddp,
        ProtocolKind::Dddp,
        ProtocolKind::Cbddp,
        ProtocolKind::Eagddp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Fdddp => "fdddp",
            ProtocolKind::Dddp => "dddp",
            ProtocolKind::Cbddp => "cbddp",
            ProtocolKind::Eagddp => "eagddp",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ProtocolKind::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown protocol `{s}`"))
    }
}

/// Parameters for every protocol; only the block matching the protocol
/// being run is consulted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProtocolParams {
    pub fdddp: FdddpParams,
    pub dddp: DddpParams,
    pub cbddp: CbddpParams,
    pub eagddp: EagddpParams,
}

fn run_sim<P: NodeProtocol>(
    topology: Arc<Topology>,
    cfg: SimConfig,
    shared: P::Shared,
) -> Result<RunOutput> {
    let mut sim = Simulation::<P>::new(topology, cfg, Arc::new(shared));
    sim.run()?;
    Ok(sim.finish())
}

/// Runs `kind` on `topology` to the configured duration.
pub fn run_protocol(
    kind: ProtocolKind,
    params: &ProtocolParams,
    topology: Arc<Topology>,
    cfg: SimConfig,
) -> Result<RunOutput> {
    cfg.radio.validate().map_err(Error::Config)?;
    match kind {
        ProtocolKind::Fdddp => run_sim::<Fdddp>(topology, cfg, params.fdddp.clone()),
        ProtocolKind::Dddp => {
            let shared = dddp::DddpShared::new(params.dddp.clone(), &topology)?;
            run_sim::<Dddp>(topology, cfg, shared)
        }
        ProtocolKind::Cbddp => run_sim::<Cbddp>(topology, cfg, params.cbddp.clone()),
        ProtocolKind::Eagddp => {
            let shared = eagddp::EagddpShared::new(params.eagddp.clone(), &topology);
            run_sim::<Eagddp>(topology, cfg, shared)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in ProtocolKind::ALL {
            assert_eq!(p.as_str().parse::<ProtocolKind>(), Ok(p));
        }
        assert_eq!("CBDDP".parse::<ProtocolKind>(), Ok(ProtocolKind::Cbddp));
        assert!("xyz".parse::<ProtocolKind>().unwrap_err().contains("unknown protocol"));
    }
}
