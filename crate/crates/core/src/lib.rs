pub mod classical;
pub mod error;
pub mod linalg;
pub mod otoc;
pub mod qmap;
pub mod rng;
pub mod shorttime;
pub mod spectral;
pub mod spin;
pub mod sweep;
pub mod symmetry;

pub use error::{Error, Result};
