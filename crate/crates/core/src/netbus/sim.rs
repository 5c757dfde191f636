//! Single-clock simulated network for lockstep runs.
//!
//! Time is kept in integer nanoseconds. Each datagram gets a delivery time
//! `t_sent + U(latency_min, latency_max)` and an independent drop draw, both
//! from one seeded generator, so a run's delivery schedule depends only on
//! the seed and the order of sends.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{checked_datagram, LinkConfig, NetError, NetMetrics, NodeId, Received, Transport, WireMessage};

pub fn secs_to_ns(t: f64) -> u64 {
    (t * 1e9).round() as u64
}

pub fn ns_to_secs(ns: u64) -> f64 {
    ns as f64 / 1e9
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    deliver_ns: u64,
    sender: String,
    seq: u64,
    to: NodeId,
    send_ns: u64,
    bytes: Vec<u8>,
}

#[derive(Debug)]
pub struct SimNetwork {
    link: LinkConfig,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<Pending>>,
    inboxes: BTreeMap<NodeId, Vec<Received>>,
    metrics: NetMetrics,
    now_ns: u64,
}

impl SimNetwork {
    pub fn new(link: LinkConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(link.seed),
            link,
            queue: BinaryHeap::new(),
            inboxes: BTreeMap::new(),
            metrics: NetMetrics::new(),
            now_ns: 0,
        }
    }

    pub fn now_ns(&self) -> u64 {
        self.now_ns
    }

    pub fn metrics(&self) -> &NetMetrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> NetMetrics {
        self.metrics
    }

    /// Earliest pending delivery time, if any.
    pub fn next_delivery_ns(&self) -> Option<u64> {
        self.queue.peek().map(|Reverse(p)| p.deliver_ns)
    }

    /// Queues `msg` from `from` to `to`, sent at the current time.
    pub fn send(&mut self, from: NodeId, to: NodeId, msg: &WireMessage) -> Result<(), NetError> {
        let bytes = checked_datagram(msg)?;
        if self.link.drop_probability > 0.0 && self.rng.random_bool(self.link.drop_probability) {
            self.metrics.dropped += 1;
            return Ok(());
        }
        let latency = if self.link.latency_max > self.link.latency_min {
            self.rng.random_range(self.link.latency_min..=self.link.latency_max)
        } else {
            self.link.latency_min
        };
        // rounding to whole nanoseconds must stay inside the configured range
        let lat_ns = secs_to_ns(latency)
            .clamp(secs_to_ns(self.link.latency_min), secs_to_ns(self.link.latency_max));
        self.queue.push(Reverse(Pending {
            deliver_ns: self.now_ns + lat_ns,
            sender: from.to_string(),
            seq: msg.seq(),
            to,
            send_ns: self.now_ns,
            bytes,
        }));
        Ok(())
    }

    /// Moves the clock to `now_ns` and delivers everything due by then.
    /// Same-time deliveries are ordered by sender, then sequence number.
    pub fn advance_to(&mut self, now_ns: u64) {
        assert!(now_ns >= self.now_ns, "simulation clock cannot run backwards");
        self.now_ns = now_ns;
        while self.next_delivery_ns().is_some_and(|t| t <= now_ns) {
            let Reverse(p) = self.queue.pop().expect("peeked");
            let msg = WireMessage::decode(&p.bytes).expect("queued datagrams were encoded by us");
            let latency = ns_to_secs(p.deliver_ns - p.send_ns);
            let t_received = ns_to_secs(p.deliver_ns);
            self.metrics
                .record(&p.sender, &p.to.to_string(), t_received, p.bytes.len(), latency);
            self.inboxes.entry(p.to).or_default().push(Received {
                msg,
                t_received,
                bytes: p.bytes.len(),
            });
        }
    }

    pub fn drain(&mut self, node: NodeId) -> Vec<Received> {
        self.inboxes.remove(&node).unwrap_or_default()
    }

    pub fn port(&mut self, node: NodeId) -> SimPort<'_> {
        SimPort { net: self, node }
    }
}

/// A node's view of the simulated network at the current instant.
pub struct SimPort<'a> {
    net: &'a mut SimNetwork,
    node: NodeId,
}

impl Transport for SimPort<'_> {
    fn send(&mut self, to: NodeId, msg: &WireMessage) -> Result<(), NetError> {
        self.net.send(self.node, to, msg)
    }

    fn drain(&mut self) -> Vec<Received> {
        self.net.drain(self.node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netbus::PoseMsg;

    fn pose(seq: u64, t: f64) -> WireMessage {
        WireMessage::Pose(PoseMsg { sender: "veh".into(), seq, t, x: 1.0, y: 2.0, psi: 0.0, v: 3.0 })
    }

    #[test]
    fn fixed_latency_delivery_time() {
        let mut net = SimNetwork::new(LinkConfig {
            latency_min: 0.002,
            latency_max: 0.002,
            ..Default::default()
        });
        net.advance_to(secs_to_ns(1.0));
        net.send(NodeId::Vehicle, NodeId::Mssp(1), &pose(1, 1.0)).unwrap();
        net.advance_to(secs_to_ns(1.0019));
        assert!(net.drain(NodeId::Mssp(1)).is_empty());
        net.advance_to(secs_to_ns(1.002));
        let got = net.drain(NodeId::Mssp(1));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].t_received, 1.002);
        assert_eq!(got[0].msg, pose(1, 1.0));
    }

    #[test]
    fn certain_drop_delivers_nothing() {
        let mut net = SimNetwork::new(LinkConfig { drop_probability: 1.0, ..Default::default() });
        for i in 0..50 {
            net.send(NodeId::Vehicle, NodeId::Mssp(1), &pose(i, 0.0)).unwrap();
        }
        net.advance_to(secs_to_ns(10.0));
        assert!(net.drain(NodeId::Mssp(1)).is_empty());
        assert_eq!(net.metrics().dropped, 50);
        assert_eq!(net.metrics().total_packets(), 0);
    }

    fn schedule(seed: u64) -> Vec<(u64, f64)> {
        let mut net = SimNetwork::new(LinkConfig { seed, drop_probability: 0.3, ..Default::default() });
        let mut out = Vec::new();
        for k in 0..200u64 {
            net.advance_to(k * 1_000_000);
            net.send(NodeId::Vehicle, NodeId::Mssp(1), &pose(k, 0.0)).unwrap();
            out.extend(net.drain(NodeId::Mssp(1)).into_iter().map(|r| (r.msg.seq(), r.t_received)));
        }
        out
    }

    #[test]
    fn seeded_schedule_is_reproducible() {
        assert_eq!(schedule(5), schedule(5));
        assert_ne!(schedule(5), schedule(6));
    }

    #[test]
    fn latency_stays_in_configured_range() {
        let mut net = SimNetwork::new(LinkConfig::default());
        for k in 0..1000u64 {
            net.advance_to(k * 20_000_000);
            net.send(NodeId::Vehicle, NodeId::Mssp(1 + (k % 3) as u32), &pose(k, 0.0)).unwrap();
        }
        net.advance_to(u64::MAX / 2);
        let lat = net.metrics().latency_samples();
        assert_eq!(lat.len(), 1000);
        assert!(lat.iter().all(|&l| (0.0015..=0.0020).contains(&l)));
    }

    #[test]
    fn simultaneous_deliveries_are_ordered_by_sender_then_seq() {
        let mut net = SimNetwork::new(LinkConfig { latency_min: 0.001, latency_max: 0.001, ..Default::default() });
        let est = |sender: &str, seq| {
            WireMessage::Estimate(crate::netbus::EstimateMsg {
                sender: sender.into(),
                seq,
                t: 0.0,
                mssp_id: sender.into(),
                x: 0.0,
                y: 0.0,
                t_capture: 0.0,
            })
        };
        net.send(NodeId::Mssp(2), NodeId::Vehicle, &est("mssp2", 1)).unwrap();
        net.send(NodeId::Mssp(1), NodeId::Vehicle, &est("mssp1", 9)).unwrap();
        net.send(NodeId::Mssp(1), NodeId::Vehicle, &est("mssp1", 4)).unwrap();
        net.advance_to(secs_to_ns(0.001));
        let order: Vec<_> = net
            .drain(NodeId::Vehicle)
            .iter()
            .map(|r| (r.msg.sender().to_string(), r.msg.seq()))
            .collect();
        assert_eq!(order, vec![("mssp1".into(), 4), ("mssp1".into(), 9), ("mssp2".into(), 1)]);
    }
}
