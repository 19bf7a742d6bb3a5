pub mod bench;
pub mod density;
pub mod domain;
pub mod error;
pub mod estimator;
pub mod fano;
pub mod fourier;
pub mod io;
pub mod plot;
pub mod process;
pub mod slepian;
mod tridiagonal;

pub use density::SpectralDensity;
pub use domain::{AcquisitionDomain, LatticePoint};
pub use error::{Error, Result};
pub use slepian::{TaperConfig, TaperSet};
