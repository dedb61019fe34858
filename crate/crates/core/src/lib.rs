pub mod classify;
pub mod conserve;
pub mod equivalence;
pub mod error;
pub mod expr;
pub mod model;
pub mod numeric;
pub mod reduce;
pub mod symmetry;

pub use error::{Error, Result};
