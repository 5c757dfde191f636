//! Wire protocol, transports and network metrics.
//!
//! Node logic talks to the network only through [`Transport`]. The lockstep
//! runner backs it with [`sim::SimNetwork`], a seeded single-clock event
//! queue; distributed mode backs it with [`udp::UdpTransport`].

pub mod codec;
pub mod metrics;
pub mod sim;
pub mod udp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{CodecError, EstimateMsg, PoseMsg, WireMessage};
pub use metrics::{LatencyStats, LinkRate, MetricsReport, NetMetrics};

/// Datagrams larger than this are refused at send time.
pub const MAX_DATAGRAM: usize = 1400;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("datagram of {0} bytes exceeds {MAX_DATAGRAM}")]
    Oversize(usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("no address for node {0}")]
    UnknownPeer(NodeId),
    #[error("socket error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Vehicle,
    Mssp(u32),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Vehicle => write!(f, "veh"),
            NodeId::Mssp(i) => write!(f, "mssp{i}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "veh" {
            return Ok(NodeId::Vehicle);
        }
        s.strip_prefix("mssp")
            .and_then(|n| n.parse().ok())
            .map(NodeId::Mssp)
            .ok_or_else(|| format!("bad node id {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub latency_min: f64,
    pub latency_max: f64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            latency_min: 0.0015,
            latency_max: 0.0020,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.latency_min >= 0.0 && self.latency_min <= self.latency_max) {
            return Err("link latency must satisfy 0 <= latency_min <= latency_max".into());
        }
        if !self.latency_max.is_finite() {
            return Err("latency_max must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err("drop_probability must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// A message delivered to a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub msg: WireMessage,
    pub t_received: f64,
    pub bytes: usize,
}

pub trait Transport {
    fn send(&mut self, to: NodeId, msg: &WireMessage) -> Result<(), NetError>;

    /// Everything delivered since the previous drain, in delivery order.
    fn drain(&mut self) -> Vec<Received>;
}

pub(crate) fn checked_datagram(msg: &WireMessage) -> Result<Vec<u8>, NetError> {
    let bytes = msg.encode()?;
    if bytes.len() > MAX_DATAGRAM {
        return Err(NetError::Oversize(bytes.len()));
    }
    Ok(bytes)
}
