pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod genfunc;
pub mod linalg;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
