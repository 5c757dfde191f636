//! One JSON object per datagram.
//!
//! ```text
//! {"kind":"pose","sender":"veh","seq":N,"t":S,"x":X,"y":Y,"psi":P,"v":V}
//! {"kind":"est","sender":"mssp2","seq":N,"t":S,"mssp_id":"mssp2","x":X,"y":Y,"t_capture":S}
//! ```
//!
//! Floats are written in shortest round-trip form, so decoding an encoded
//! message reproduces every field bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed datagram: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("field {0} is not finite")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub sender: String,
    pub seq: u64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMsg {
    pub sender: String,
    pub seq: u64,
    pub t: f64,
    pub mssp_id: String,
    pub x: f64,
    pub y: f64,
    pub t_capture: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum WireMessage {
    #[serde(rename = "pose")]
    Pose(PoseMsg),
    #[serde(rename = "est")]
    Estimate(EstimateMsg),
}

impl WireMessage {
    pub fn sender(&self) -> &str {
        match self {
            WireMessage::Pose(m) => &m.sender,
            WireMessage::Estimate(m) => &m.sender,
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            WireMessage::Pose(m) => m.seq,
            WireMessage::Estimate(m) => m.seq,
        }
    }

    /// Send time on the sender's clock.
    pub fn t_sent(&self) -> f64 {
        match self {
            WireMessage::Pose(m) => m.t,
            WireMessage::Estimate(m) => m.t,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Pose(_) => "pose",
            WireMessage::Estimate(_) => "est",
        }
    }

    fn check_finite(&self) -> Result<(), CodecError> {
        let fields: &[(&'static str, f64)] = match self {
            WireMessage::Pose(m) => &[("t", m.t), ("x", m.x), ("y", m.y), ("psi", m.psi), ("v", m.v)],
            WireMessage::Estimate(m) => {
                &[("t", m.t), ("x", m.x), ("y", m.y), ("t_capture", m.t_capture)]
            }
        };
        match fields.iter().find(|(_, v)| !v.is_finite()) {
            Some((name, _)) => Err(CodecError::NonFinite(name)),
            None => Ok(()),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        self.check_finite()?;
        Ok(serde_json::to_vec(self)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        Ok(serde_json::from_slice(bytes)?)
    }
}
