//! Level generation framed as a sequential decision process.
//!
//! A level-designing agent edits a tile grid one action at a time. The
//! [`representations`] module turns actions into edits and levels into
//! observations, [`problems`] scores each edit, and [`env`] ties them together
//! under a change budget. [`agents`] trains policies and [`harness`] evaluates
//! them across change budgets.

pub mod agents;
pub mod analysis;
pub mod env;
pub mod error;
pub mod harness;
pub mod level;
pub mod problems;
pub mod representations;
pub mod rng;

pub use error::{Error, Result};
pub use level::{Level, OneHot, ProblemKind, TileAlphabet, TileId};
pub use problems::{ProblemConfig, Stats};
pub use representations::RepKind;
pub use rng::Rng;
