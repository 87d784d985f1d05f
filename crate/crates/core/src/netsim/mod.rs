//! Deterministic discrete-event engine: servers, clients, and a wide-area
//! network with latency, jitter, loss, bandwidth caps and fault injection.

pub mod engine;
pub mod event;
pub mod fault;
pub mod network;
pub mod server;
pub mod wan;

pub use engine::{CommitRecord, Context, Engine, EngineConfig, DEFAULT_CLIENT_TIMEOUT_S};
pub use event::{Event, EventKind, Message};
pub use fault::{FaultAction, FaultEntry, FaultSchedule, FaultTarget};
pub use network::{message_bytes, Network, HEADER_BYTES, KEY_BYTES};
pub use server::{ServerModel, ServerState, ServiceError};
pub use wan::WanProfile;
