//! Hermitian forms over Azumaya algebras with involution over small semilocal
//! rings, their Witt groups, and the exact octagon.

pub mod algiv;
pub mod error;
pub mod herm;
pub mod linalg;
pub mod morita;
pub mod octagon;
pub mod ring;
pub mod witt;

pub use error::{Error, Result};
