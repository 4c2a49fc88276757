//! File formats, image IO, degradations and the `lutsr` command-line tool
//! built on [`lutsr_core`].
//!
//! - [`lutpack`]: the `.lutpack` binary model format
//! - [`imageio`]: 8-bit grayscale and RGB PNG
//! - [`degrade`]: bicubic downsampling and Gaussian noise
//! - [`eval`]: paired-image quality reports
//! - [`bench`]: timing and table-traffic counters
//! - [`cli`]: subcommands and exit codes

pub mod bench;
pub mod cli;
pub mod degrade;
pub mod eval;
pub mod imageio;
pub mod lutpack;
