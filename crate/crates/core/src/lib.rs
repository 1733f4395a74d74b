pub mod bcd;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod phase;
pub mod power;
pub mod sdp;
pub mod sweep;

pub use error::{Error, Result};
