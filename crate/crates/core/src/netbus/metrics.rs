//! Per-link packet and byte accounting plus one-way latency samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetMetrics {
    /// `(from, to)` -> `(t_received, bytes)` per packet.
    #[serde(with = "link_list")]
    links: BTreeMap<(String, String), Vec<(f64, usize)>>,
    latency_samples: Vec<f64>,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRate {
    pub from: String,
    pub to: String,
    pub packets: usize,
    pub bytes: usize,
    pub packets_per_s: f64,
    pub bytes_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub window: f64,
    pub links: Vec<LinkRate>,
    pub latency: Option<LatencyStats>,
}

// JSON object keys must be strings, so links travel as a list of pairs.
mod link_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    type Links = BTreeMap<(String, String), Vec<(f64, usize)>>;
    type Entry = ((String, String), Vec<(f64, usize)>);

    pub fn serialize<S: Serializer>(links: &Links, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<_> = links.iter().collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Links, D::Error> {
        let v: Vec<Entry> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl NetMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, from: &str, to: &str, t_received: f64, bytes: usize, latency: f64) {
        self.links
            .entry((from.to_string(), to.to_string()))
            .or_default()
            .push((t_received, bytes));
        self.latency_samples.push(latency);
    }

    pub fn latency_samples(&self) -> &[f64] {
        &self.latency_samples
    }

    pub fn total_packets(&self) -> usize {
        self.links.values().map(Vec::len).sum()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.links
            .values()
            .filter_map(|v| v.last().map(|p| p.0))
            .fold(None, |acc, t| Some(acc.map_or(t, |a: f64| a.max(t))))
    }

    pub fn merge(&mut self, other: &NetMetrics) {
        for (k, v) in &other.links {
            let dst = self.links.entry(k.clone()).or_default();
            dst.extend_from_slice(v);
            dst.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        self.latency_samples.extend_from_slice(&other.latency_samples);
        self.dropped += other.dropped;
    }

    pub fn latency_stats(&self) -> Option<LatencyStats> {
        if self.latency_samples.is_empty() {
            return None;
        }
        let mut sorted = self.latency_samples.clone();
        sorted.sort_by(f64::total_cmp);
        Some(LatencyStats {
            count: sorted.len(),
            p50: percentile(&sorted, 50.0),
            p95: percentile(&sorted, 95.0),
            max: *sorted.last().unwrap(),
        })
    }

    /// Per-link rates over `(now - window, now]` and latency percentiles over
    /// every sample recorded.
    pub fn window_report(&self, now: f64, window: f64) -> MetricsReport {
        assert!(window > 0.0, "window must be positive");
        let links = self
            .links
            .iter()
            .map(|((from, to), pkts)| {
                let (packets, bytes) = pkts
                    .iter()
                    .filter(|(t, _)| *t > now - window && *t <= now)
                    .fold((0, 0), |(n, b), (_, sz)| (n + 1, b + sz));
                LinkRate {
                    from: from.clone(),
                    to: to.clone(),
                    packets,
                    bytes,
                    packets_per_s: packets as f64 / window,
                    bytes_per_s: bytes as f64 / window,
                }
            })
            .collect();
        MetricsReport {
            window,
            links,
            latency: self.latency_stats(),
        }
    }

    /// Consecutive `[k w, (k + 1) w)` windows from zero to the last packet,
    /// one row per link per window.
    pub fn time_series(&self, window: f64) -> Vec<(f64, LinkRate)> {
        assert!(window > 0.0, "window must be positive");
        let Some(end) = self.last_time() else {
            return Vec::new();
        };
        let n = (end / window).floor() as usize + 1;
        let mut rows = Vec::new();
        for k in 0..n {
            let start = k as f64 * window;
            for ((from, to), pkts) in &self.links {
                let (packets, bytes) = pkts
                    .iter()
                    .filter(|(t, _)| *t >= start && *t < start + window)
                    .fold((0, 0), |(n, b), (_, sz)| (n + 1, b + sz));
                rows.push((
                    start,
                    LinkRate {
                        from: from.clone(),
                        to: to.clone(),
                        packets,
                        bytes,
                        packets_per_s: packets as f64 / window,
                        bytes_per_s: bytes as f64 / window,
                    },
                ));
            }
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_packets_in_one_second() {
        let mut m = NetMetrics::new();
        for i in 0..100 {
            m.record("veh", "mssp1", 0.005 + i as f64 * 0.01, 120, 0.0018);
        }
        let r = m.window_report(1.0, 1.0);
        assert_eq!(r.links.len(), 1);
        assert_eq!(r.links[0].packets_per_s, 100.0);
        assert_eq!(r.links[0].bytes_per_s, 12000.0);
        // trailing window excludes older packets
        let r = m.window_report(1.0, 0.5);
        assert_eq!(r.links[0].packets, 50);
    }

    #[test]
    fn empty_metrics() {
        let m = NetMetrics::new();
        let r = m.window_report(1.0, 1.0);
        assert!(r.links.is_empty());
        assert!(r.latency.is_none());
        assert!(m.time_series(1.0).is_empty());
    }

    #[test]
    fn nearest_rank_percentiles() {
        let mut m = NetMetrics::new();
        for i in 1..=20 {
            m.record("a", "b", i as f64, 1, i as f64 / 1000.0);
        }
        let s = m.latency_stats().unwrap();
        assert_eq!(s.count, 20);
        assert_eq!(s.p50, 0.010);
        assert_eq!(s.p95, 0.019);
        assert_eq!(s.max, 0.020);
    }

    #[test]
    fn time_series_buckets() {
        let mut m = NetMetrics::new();
        m.record("a", "b", 0.2, 10, 0.0);
        m.record("a", "b", 0.9, 10, 0.0);
        m.record("a", "b", 1.1, 30, 0.0);
        let ts = m.time_series(1.0);
        assert_eq!(ts.len(), 2);
        assert_eq!((ts[0].0, ts[0].1.packets, ts[0].1.bytes), (0.0, 2, 20));
        assert_eq!((ts[1].0, ts[1].1.packets, ts[1].1.bytes), (1.0, 1, 30));
    }

    #[test]
    fn json_roundtrip() {
        let mut m = NetMetrics::new();
        m.record("veh", "mssp1", 0.1, 120, 0.0018);
        m.record("mssp1", "veh", 0.2, 140, 0.0016);
        m.dropped = 3;
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<NetMetrics>(&text).unwrap(), m);
    }
}
