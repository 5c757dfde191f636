//! Real datagram transport over UDP.
//!
//! A background thread receives, decodes and timestamps datagrams into a
//! channel; the node loop drains it once per tick. Timestamps come from a
//! [`WallClock`] anchored at an epoch shared by every process of a run, so
//! one-way latency is `t_received - t_sent`. That is only meaningful when
//! all processes share one host clock.

use std::collections::BTreeMap;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{checked_datagram, NetError, NetMetrics, NodeId, Received, Transport, WireMessage};

#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    epoch: SystemTime,
}

impl WallClock {
    pub fn starting_now() -> Self {
        Self { epoch: SystemTime::now() }
    }

    pub fn from_epoch_ms(ms: u64) -> Self {
        Self {
            epoch: UNIX_EPOCH + Duration::from_millis(ms),
        }
    }

    pub fn epoch_ms(&self) -> u64 {
        self.epoch
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }

    /// Seconds since the epoch; negative before it.
    pub fn now(&self) -> f64 {
        match SystemTime::now().duration_since(self.epoch) {
            Ok(d) => d.as_secs_f64(),
            Err(e) => -e.duration().as_secs_f64(),
        }
    }
}

pub struct UdpTransport {
    socket: UdpSocket,
    peers: BTreeMap<NodeId, SocketAddr>,
    inbox: Receiver<Received>,
    metrics: Arc<Mutex<NetMetrics>>,
    drop_probability: f64,
    rng: ChaCha8Rng,
    stop: Arc<AtomicBool>,
    receiver: Option<JoinHandle<()>>,
}

impl UdpTransport {
    pub fn bind(
        node: NodeId,
        addr: SocketAddr,
        peers: BTreeMap<NodeId, SocketAddr>,
        clock: WallClock,
        drop_probability: f64,
        seed: u64,
    ) -> Result<Self, NetError> {
        let socket = UdpSocket::bind(addr)?;
        let rx_socket = socket.try_clone()?;
        rx_socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let (tx, inbox) = mpsc::channel();
        let metrics = Arc::new(Mutex::new(NetMetrics::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let receiver = {
            let metrics = Arc::clone(&metrics);
            let stop = Arc::clone(&stop);
            let me = node.to_string();
            std::thread::Builder::new()
                .name(format!("{me}-rx"))
                .spawn(move || {
                    let mut buf = [0u8; 2048];
                    while !stop.load(Ordering::Relaxed) {
                        let n = match rx_socket.recv_from(&mut buf) {
                            Ok((n, _)) => n,
                            Err(e)
                                if matches!(
                                    e.kind(),
                                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                                ) =>
                            {
                                continue
                            }
                            Err(e) => {
                                log::warn!("{me}: receive failed: {e}");
                                continue;
                            }
                        };
                        let t_received = clock.now();
                        match WireMessage::decode(&buf[..n]) {
                            Ok(msg) => {
                                metrics.lock().unwrap().record(
                                    msg.sender(),
                                    &me,
                                    t_received,
                                    n,
                                    t_received - msg.t_sent(),
                                );
                                if tx.send(Received { msg, t_received, bytes: n }).is_err() {
                                    break;
                                }
                            }
                            Err(e) => log::warn!("{me}: dropping undecodable datagram: {e}"),
                        }
                    }
                })?
        };
        Ok(Self {
            socket,
            peers,
            inbox,
            metrics,
            drop_probability,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stop,
            receiver: Some(receiver),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, NetError> {
        Ok(self.socket.local_addr()?)
    }

    pub fn metrics(&self) -> NetMetrics {
        self.metrics.lock().unwrap().clone()
    }
}

impl Transport for UdpTransport {
    fn send(&mut self, to: NodeId, msg: &WireMessage) -> Result<(), NetError> {
        let addr = *self.peers.get(&to).ok_or(NetError::UnknownPeer(to))?;
        let bytes = checked_datagram(msg)?;
        if self.drop_probability > 0.0 && self.rng.random_bool(self.drop_probability) {
            self.metrics.lock().unwrap().dropped += 1;
            return Ok(());
        }
        match self.socket.send_to(&bytes, addr) {
            Ok(_) => Ok(()),
            // nobody listening yet on loopback
            Err(e) if e.kind() == std::io::ErrorKind::ConnectionRefused => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn drain(&mut self) -> Vec<Received> {
        self.inbox.try_iter().collect()
    }
}

impl Drop for UdpTransport {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.receiver.take() {
            let _ = h.join();
        }
    }
}
