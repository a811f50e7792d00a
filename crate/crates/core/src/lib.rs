//! Cycle-level simulator of a burst-based AXI network-on-chip in a 2D mesh.
//!
//! * [`topology`]: mesh construction, address map, YX routing tables and
//!   deadlock analysis.
//! * [`axi`]: transfer/burst/beat model and burst splitting.
//! * [`sim`]: the cycle engine.
//! * [`traffic`]: synthetic, DNN and trace-driven traffic sources.
//! * [`metrics`]: throughput, utilization, latency and load sweeps.
//! * [`harness`]: experiment configs and run modes used by the CLI.

pub mod axi;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod sim;
pub mod topology;
pub mod traffic;

pub use axi::{Burst, Channel, ChannelSet, Direction, TransferRequest};
pub use error::{Error, Result};
pub use metrics::{SimStats, SweepCurve};
pub use sim::{Simulator, TrafficSource};
pub use topology::{Coord, NocConfig, Port, Preset};
pub use traffic::{TrafficKind, TrafficSpec};
