pub mod error;
pub mod mlp;
pub mod problem;
pub mod quadrature;
pub mod report;
pub mod residual;
pub mod tape;
pub mod testspace;
pub mod trainer;

pub use error::{Error, Result};
