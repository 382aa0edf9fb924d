//! Elementary excitations of a trapped Bose-Einstein condensate near zero
//! temperature, by expanding the fluctuation field in the eigenbasis of the
//! condensate's effective single-particle Hamiltonian and diagonalizing the
//! resulting quadratic bosonic Hamiltonian, zero mode included.

pub mod error;
pub mod gp;
pub mod grid;
pub mod basis;
pub mod bogoliubov;
pub mod quadform;
pub mod vacuum;
pub mod oracle;
pub mod snapshot;
pub mod pipeline;

pub use error::{Error, Result};
