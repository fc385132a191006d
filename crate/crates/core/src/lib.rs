pub mod equation;
pub mod error;
pub mod fuzzy;
pub mod identity;
pub mod matrix;
pub mod numeric;
pub mod stability;

pub use error::{Error, Result};
