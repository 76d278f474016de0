//! Live multi-participant server: sessions of scheduled games played over
//! WebSocket, with logs in the same format as headless runs.

pub mod app;
pub mod protocol;
pub mod schedule;
pub mod session;

pub use app::{router, serve, ServerConfig};
pub use protocol::{ClientMessage, Direction, ServerMessage};
pub use schedule::{build_schedule, enumerate_conditions, parse_schedule, ScheduledGame};
pub use session::{GameLog, Participant, Session, SessionError, SessionState};
