//! Numerical laboratory for the Laguerre heat-diffusion kernel of type `α`,
//! its maximal operator, and the level-set and Lorentz-norm machinery used to
//! probe endpoint bounds.

pub mod constructions;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod kernel;
pub mod measure;
pub mod operator;
pub mod pencil;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
