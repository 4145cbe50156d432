//! The retargeting engine process: configuration, the wire protocol, the
//! calibration protocol, recording and replay, and the live socket endpoint.

pub mod config;
mod error;
pub mod protocol;
pub mod replay;
pub mod script;
pub mod server;
pub mod session;

pub use config::{SessionConfig, Transport};
pub use error::EngineError;
pub use session::{Session, SessionReport};
