pub mod error;
pub mod index;
pub mod lattice;
pub mod symbol;

pub use error::{Error, Result};
pub use index::{MultiIndex, Partition, Window};
pub use lattice::{parse_lattice, LatticeFunction, LatticeRule};
pub use symbol::{parse_symbol, Expr, QuasiRadialSymbol, Scalar, Term};
pub mod quad;
pub mod metric;
pub mod spectrum;
pub mod fock;
pub mod extension;
pub mod density;
pub mod obstruction;
pub mod verify;
