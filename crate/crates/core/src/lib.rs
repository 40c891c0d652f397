//! Profinite groups, Cantor-Bendixson rank of subgroup spaces, Burnside and
//! Mackey functors, equivariant sheaves and homological dimension.

pub mod burnside;
pub mod cb;
pub mod error;
pub mod group;
pub mod homdim;
pub mod linalg;
pub mod mackey;
pub mod reps;
pub mod sheaf;
pub mod tower;

pub use error::{Error, Result};
