//! Unit groups, unit indices and 2-class numbers of the triquadratic fields
//! K = Q(√2, √p, √q).

pub mod arith;
pub mod class2;
pub mod error;
pub mod kfield;
pub mod pell;
pub mod record;
pub mod triquad;

pub use error::{Error, Result};
