//! File formats, parallel execution, the experiment pipeline and the
//! `gridstab` command line on top of `gridstab-core`.

pub mod error;
pub mod formats;
pub mod matpower;
pub mod parallel;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
pub use gridstab_core as core;
