//! Driving-cell fusion: keeps the latest estimate per roadside unit and
//! averages whichever ones are still fresh.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub mssp_id: String,
    pub x: f64,
    pub y: f64,
    pub t_capture: f64,
    pub t_received: f64,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedFix {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    /// Number of live estimates averaged.
    pub sources: usize,
}

pub const DEFAULT_STALENESS_TIMEOUT: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct FusionState {
    latest: BTreeMap<String, PositionEstimate>,
    last_seq: BTreeMap<String, u64>,
    pub staleness_timeout: f64,
    pub last_output: Option<FusedFix>,
    dropped: u64,
}

impl Default for FusionState {
    fn default() -> Self {
        Self::new(DEFAULT_STALENESS_TIMEOUT)
    }
}

impl FusionState {
    pub fn new(staleness_timeout: f64) -> Self {
        Self {
            latest: BTreeMap::new(),
            last_seq: BTreeMap::new(),
            staleness_timeout,
            last_output: None,
            dropped: 0,
        }
    }

    /// Stores `est` unless an estimate with an equal or newer sequence number
    /// from the same unit was already accepted. Returns whether it was stored.
    pub fn ingest(&mut self, est: PositionEstimate) -> bool {
        match self.last_seq.get(&est.mssp_id) {
            Some(&seq) if seq >= est.seq => {
                self.dropped += 1;
                false
            }
            _ => {
                self.last_seq.insert(est.mssp_id.clone(), est.seq);
                self.latest.insert(est.mssp_id.clone(), est);
                true
            }
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn latest(&self, mssp_id: &str) -> Option<&PositionEstimate> {
        self.latest.get(mssp_id)
    }

    /// Evicts stale estimates, then averages the rest.
    pub fn fuse(&mut self, now: f64) -> Option<FusedFix> {
        let timeout = self.staleness_timeout;
        self.latest.retain(|_, e| now - e.t_received <= timeout);
        if self.latest.is_empty() {
            return None;
        }
        let k = self.latest.len();
        let (sx, sy) = self
            .latest
            .values()
            .fold((0.0, 0.0), |(sx, sy), e| (sx + e.x, sy + e.y));
        let fix = FusedFix {
            x: sx / k as f64,
            y: sy / k as f64,
            t: now,
            sources: k,
        };
        self.last_output = Some(fix);
        Some(fix)
    }
}
