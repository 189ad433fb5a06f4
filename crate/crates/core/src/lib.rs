pub mod error;
pub mod fockspace;
pub mod hfcore;
pub mod pseudopot;
pub mod quasiparticle;
pub mod relspectrum;
pub mod shell;
pub mod radial;

pub use error::{Error, Result};
