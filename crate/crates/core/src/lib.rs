pub mod assembly;
pub mod blended;
pub mod error;
pub mod experiments;
pub mod field;
pub mod mapping;
pub mod par;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod splines;

pub use error::{Error, Result};
