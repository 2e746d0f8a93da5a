//! File formats, logs, reports, the command-line tool and the live session
//! server built on `taxelwbc-core`.

pub mod bundled;
pub mod cli;
pub mod config;
pub mod logs;
pub mod protocol;
pub mod report;
pub mod serve;
pub mod sweeps;
