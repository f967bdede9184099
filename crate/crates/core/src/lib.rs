pub mod error;
pub mod correlation;
pub mod dsolvers;
pub mod geometry;
pub mod hyperbolic;
pub mod io;
pub mod layers;
pub mod linalg;
pub mod train;

pub use error::{Error, Result};
pub use linalg::Mat;
