//! Second-order Bohr–Sommerfeld eigenvalues for one-dimensional semiclassical
//! operators `P = Op^w(p0 + h p1 + h² p2)`, with a matrix oracle to check them.

pub mod actions;
pub mod charts;
pub mod cli;
pub mod numeric;
pub mod oracle;
pub mod orbit;
pub mod quantization;
pub mod quasimode;
pub mod symbol;

pub use orbit::{find_orbit, Orbit, OrbitError};
pub use symbol::{parse_symbol_config, Family, Monomial, SymbolError, SymbolModel};
