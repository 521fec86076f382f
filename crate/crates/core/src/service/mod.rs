//! Live control surface: immutable state snapshots for observers and
//! validated operator commands applied at tick boundaries. Transport-free;
//! the CLI's `serve` command puts it behind a WebSocket.

mod command;
mod session;
mod snapshot;

pub use command::{
    apply_param, validate_command, CommandContext, OperatorCommand, ServerMessage, LIVE_PARAM_NAMES, NO_ACTIVE_RUN,
};
pub use session::{LiveSession, LiveTick, SNAPSHOT_EVERY_TICKS};
pub use snapshot::{ActiveParams, CharacterView, FlowerView, SpectrumView, StateSnapshot};
