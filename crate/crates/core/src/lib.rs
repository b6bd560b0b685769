pub mod config;
pub mod episodes;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod images;
pub mod memory;
pub mod metrics;
pub mod model;
pub mod oracles;

pub use error::{MannError, Result};
