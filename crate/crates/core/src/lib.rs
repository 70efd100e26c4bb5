//! Background Dolbeault cohomology of `C^n` with a weighted circle action.
//!
//! The crate computes the background Betti numbers of `(C^n, E_k)` in two
//! independent ways:
//!
//! * exactly, by counting monomials (denumerants of the weight vector), see
//!   [`combinatorics`];
//! * numerically for `n = 1`, as kernel dimensions of a radial discretization
//!   of the square of the deformed Dolbeault-Dirac operator, see [`spectral`].
//!
//! [`admissible`] builds and checks the rescaling functions `s` that define
//! the deformation, and [`model_geometry`] provides the moment map, the taming
//! field and the level-set quantities these checks need. [`io`] and [`cli`]
//! turn everything into reproducible JSON/CSV reports.

pub mod admissible;
pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod io;
pub mod model_geometry;
pub mod spectral;

pub use error::{Error, Result};
