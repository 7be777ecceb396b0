pub mod adversary;
pub mod binning;
pub mod error;
pub mod fr;
pub mod harness;
pub mod par;
pub mod prob;
pub mod region;
pub mod scenario;
pub mod source;
pub mod vr;

pub use error::{Error, Result};
