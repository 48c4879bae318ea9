//! Phone-style motion controller pipeline as a transport-agnostic library.
//!
//! - [`codec`]: 88-byte motion frames and 70-byte haptic triggers.
//! - [`gesture`]: single-axis threshold detector with rising-edge and
//!   refractory debouncing.
//! - [`trace`]: synthetic IMU traces and CSV replay.
//! - [`netsim`]: deterministic link emulator, clock models, UDP transport.
//! - [`session`]: controller and host roles, logs, simulated and live drivers.
//! - [`latlab`]: per-frame latency, median-offset normalization, 3-sigma
//!   filtering, summary tables, haptic round trips.

pub mod codec;
pub mod gesture;
pub mod latlab;
pub mod netsim;
pub mod rng;
pub mod session;
pub mod trace;

pub use codec::{FrameHeader, HapticTrigger, MotionFrame, SessionKey};
pub use gesture::{DetectorConfig, GestureEvent};
pub use latlab::{LatencySeries, LatencySummary};
pub use netsim::{ClockModel, LinkModel};
pub use session::SessionLog;
