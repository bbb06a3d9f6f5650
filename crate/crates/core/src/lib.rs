pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod grid;
pub mod legendre;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod radial;
pub mod solver;
pub mod structure;

pub use error::{Error, Result};
