//! Distributed simulator for infrastructure-enabled autonomy.
//!
//! Roadside camera units ("MSSPs") render what their overhead camera sees,
//! find the vehicle by background subtraction, back-project it onto the
//! road and publish the position over a datagram network. The vehicle fuses
//! whatever estimates are live and follows a waypoint plan in closed loop.
//!
//! Module map:
//!
//! - [`geometry`]: frames, pinhole projection and back-projection
//! - [`vision`]: frame rendering, background subtraction, tracking
//! - [`dynamics`]: kinematic vehicle with actuator lag
//! - [`control`]: path interpolation, lookahead targets, heading law
//! - [`fusion`]: per-unit estimate bookkeeping and averaging
//! - [`netbus`]: wire codec, lockstep and UDP transports, metrics
//! - [`nodes`]: the roadside and vehicle node state machines
//! - [`harness`]: scenarios, runners, logs, summaries and exports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod netbus;
pub mod nodes;
pub mod vision;
