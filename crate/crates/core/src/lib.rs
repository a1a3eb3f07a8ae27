pub mod bie;
pub mod cli;
pub mod error;
pub mod fields;
pub mod mie;
pub mod model;
pub mod multiscatter;
pub mod persist;
pub mod scenes;
pub mod smatrix;
pub mod specfun;

pub use error::{Result, ScatterError};
