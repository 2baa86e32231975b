//! Exact arithmetic for iterated Laurent series fields `k'((t_1,...,t_n))`.

pub mod error;
pub mod forms;
pub mod geom;
pub mod lattices;
pub mod poly;
pub mod residue;
pub mod scalars;
pub mod bt_ops;
pub mod diffop;
pub mod selftest;
pub mod series;
pub mod syntax;
pub mod tlf;

pub use error::{Error, Result};
