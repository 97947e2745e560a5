//! State transition tensors along reference trajectories and their rank-1
//! directional approximations.
//!
//! The crate integrates first- through third-order state transition tensors
//! (STTs), builds rank-1 surrogates `u ⊗ v ⊗ .. ⊗ v` either from the dominant
//! right singular vector of the STM or from the maximal z-eigenpair of the
//! tensor's square, and uses both for perturbation and Gaussian moment
//! propagation.

pub mod config;
pub mod csv;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod jets;
pub mod moments;
pub mod rank1;
pub mod stt;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{SymmetricEvenTensor, TensorOneM};
