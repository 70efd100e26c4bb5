//! Spectral side for `n = 1`: radial reduction of `D_s^2` per isotypic mode,
//! certified low spectra, kernel counting and the checks built on them.

pub mod eigen;
pub mod kernel;
pub mod oracle2d;
pub mod radial;

pub use eigen::{low_spectrum, EigenPair, SymTridiagonal};
pub use radial::{assemble_radial_operator, GridParams, ModeSpec, RadialOperator, Spacing};
pub use kernel::{
    family_scan, grid_doubling, invariance_check, kernel_dims, kernel_dims_refined, kodaira_scan,
    SpectrumResult, Thresholds,
};
pub use oracle2d::{compare_with_oracle, dense_2d_oracle, OracleGrid};
