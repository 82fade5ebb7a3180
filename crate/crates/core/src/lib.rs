//! Recovery of a low-rank matrix whose column blocks were row-shuffled by
//! unknown permutations and partially observed.
//!
//! The recovery problem is posed as a nuclear-norm regularized min-max
//! program: the inner maximization is an entropic optimal transport dual
//! solved by log-domain Sinkhorn, the outer minimization is a proximal
//! gradient step on the matrix estimate.

pub mod completion;
pub mod data;
pub mod eot;
pub mod error;
pub mod lamat;
pub mod perm;
pub mod rng;
pub mod solvers;
pub mod theory;

pub use error::{Error, Result};
pub use lamat::{DenseMatrix, Mask, MaskedMatrix};
pub use perm::Permutation;
