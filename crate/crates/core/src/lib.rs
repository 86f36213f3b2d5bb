pub mod adapt;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod numeric;

pub use error::{Error, Result};
