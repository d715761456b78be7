//! Pseudospectral kernels and the model hierarchy for fully dispersive
//! shallow-water waves: periodic grids and Fourier-multiplier calculus,
//! a truncated Dirichlet-Neumann operator, the evolution systems from the
//! full water-waves equations down to decoupled Whitham equations, the
//! changes of variables connecting them, and their Hamiltonian structure.
//!
//! All numerics are double precision on a torus; the domain length and
//! resolution are chosen so compactly concentrated data never feels the
//! period.

pub mod dno;
pub mod error;
pub mod field;
pub mod grid;
pub mod hamiltonians;
pub mod models;
pub mod params;
pub mod spectral;
pub mod transforms;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::PeriodicGrid;
pub use params::Params;
