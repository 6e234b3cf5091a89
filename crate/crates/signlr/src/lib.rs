//! Host-side companion to `signlr-core`: a thread-pool copy executor,
//! run configuration, file formats and the command implementations behind
//! the `signlr` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod formats;

pub use commands::{cmd_beale, cmd_gradcheck, cmd_pipeline, cmd_train};
pub use config::RunConfig;
pub use error::{CliError, ExitCode};
pub use exec::ThreadPoolExecutor;
