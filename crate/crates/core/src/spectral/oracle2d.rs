//! Cross-check of the radial reduction on a full polar grid.
//!
//! `D_s^2` acts on functions (degree 0) and on coefficients of `d zbar`
//! (degree 1) of a disk as
//!
//! ```text
//!   -Delta + |grad phi|^2 -+ Delta phi + 2i (phi_x d_y - phi_y d_x),
//! ```
//!
//! with `-` in degree 0 and `+` in degree 1. The operator is discretized on
//! a cell-centered polar grid (second order in `r`, fourth order in `theta`,
//! Dirichlet at `R`), multiplied by `r` to make it Hermitian, and projected
//! onto `e^{i l theta}` numerically. The projected block is solved densely.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::kernel::{function_label, ModeSummary, SpectrumResult};
use crate::spectral::radial::{mode_radius, GridParams, ModeSpec};

/// Largest number of grid points the oracle accepts.
pub const MAX_POINTS: usize = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    pub n_r: usize,
    pub n_theta: usize,
    /// Decay requirement used to pick the disk radius.
    pub decay: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            n_r: 90,
            n_theta: 40,
            decay: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub spec: ModeSummary,
    pub n_r: usize,
    pub n_theta: usize,
    pub radius: f64,
    /// Lowest eigenvalues per degree; empty for an empty mode.
    pub eigenvalues: [Vec<f64>; 2],
}

// Fourth-order periodic stencils for d/dtheta and d^2/dtheta^2.
const D1: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D2: [(isize, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];

struct Triplet {
    row: (usize, usize),
    col: (usize, usize),
    value: Complex64,
}

fn assemble(spec: &ModeSpec, degree: u8, grid: &OracleGrid, radius: f64) -> Vec<Triplet> {
    let (nr, nt) = (grid.n_r, grid.n_theta);
    let h = radius / nr as f64;
    let dt = std::f64::consts::TAU / nt as f64;
    let sign = if degree == 0 { -1.0 } else { 1.0 };
    let mut out = Vec::with_capacity(nr * nt * 12);
    for i in 0..nr {
        let r = (i as f64 + 0.5) * h;
        let (inner, outer) = (i as f64 * h, (i as f64 + 1.0) * h);
        let (dphi, lap) = spec.phi_derivatives(r);
        let potential = dphi * dphi + sign * lap;
        for k in 0..nt {
            let node = (i, k);
            let mut push = |col: (usize, usize), value: Complex64| out.push(Triplet { row: node, col, value });
            // r * (-(1/r)(r u_r)_r), with no flux through the origin and a
            // reflected ghost value at R.
            let mut diag = (inner + outer) / (h * h);
            if i > 0 {
                push((i - 1, k), Complex64::new(-inner / (h * h), 0.0));
            }
            if i + 1 < nr {
                push((i + 1, k), Complex64::new(-outer / (h * h), 0.0));
            } else {
                diag += outer / (h * h);
            }
            push(node, Complex64::new(diag + r * potential, 0.0));
            let wrap = |o: isize| (k as isize + o).rem_euclid(nt as isize) as usize;
            // r * (-(1/r^2) u_thth)
            for (o, c) in D2 {
                push((i, wrap(o)), Complex64::new(-c / (r * dt * dt), 0.0));
            }
            // r * 2i (phi'/r) u_th
            for (o, c) in D1 {
                push((i, wrap(o)), Complex64::new(0.0, 2.0 * dphi * c / dt));
            }
        }
    }
    out
}

/// Lowest `count` eigenvalues of the 2-D operator restricted to weight `l`.
fn projected_spectrum(triplets: &[Triplet], grid: &OracleGrid, radius: f64, l: i64, count: usize) -> Vec<f64> {
    let (nr, nt) = (grid.n_r, grid.n_theta);
    let dt = std::f64::consts::TAU / nt as f64;
    let mode: Vec<Complex64> = (0..nt)
        .map(|k| Complex64::from_polar(1.0 / (nt as f64).sqrt(), l as f64 * k as f64 * dt))
        .collect();
    let mut block = DMatrix::<Complex64>::zeros(nr, nr);
    for t in triplets {
        block[(t.row.0, t.col.0)] += mode[t.row.1].conj() * t.value * mode[t.col.1];
    }
    let h = radius / nr as f64;
    let weight: Vec<f64> = (0..nr).map(|i| ((i as f64 + 0.5) * h).sqrt()).collect();
    for i in 0..nr {
        for j in 0..nr {
            block[(i, j)] /= weight[i] * weight[j];
        }
    }
    // Remove rounding asymmetry before the Hermitian solve.
    let hermitian = (&block + block.adjoint()) * Complex64::new(0.5, 0.0);
    let mut values: Vec<f64> = hermitian.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values.truncate(count);
    values
}

/// Low spectrum of both degrees of a mode on a full polar grid.
pub fn dense_2d_oracle(spec: &ModeSpec, grid: &OracleGrid, count: usize) -> Result<OracleResult> {
    let points = grid.n_r * grid.n_theta;
    if points > MAX_POINTS {
        return Err(Error::OracleTooLarge {
            points,
            max: MAX_POINTS,
        });
    }
    if grid.n_r < 4 || grid.n_theta < 5 {
        return Err(Error::arg("grid", "need at least 4 radial and 5 angular points"));
    }
    let radius = mode_radius(
        spec,
        &GridParams {
            decay: grid.decay,
            ..GridParams::default()
        },
    )?;
    let mut eigenvalues = [Vec::new(), Vec::new()];
    for degree in [0u8, 1] {
        if let Some(l) = spec.angular_index(degree) {
            if 2 * l.unsigned_abs() as usize >= grid.n_theta {
                return Err(Error::arg("n_theta", format!("too coarse for angular weight {l}")));
            }
            let triplets = assemble(spec, degree, grid, radius);
            eigenvalues[usize::from(degree)] = projected_spectrum(&triplets, grid, radius, l, count);
        }
    }
    Ok(OracleResult {
        spec: ModeSummary {
            weights: spec.action.weights().to_vec(),
            twist: spec.action.twist(),
            m: spec.irrep.0,
            extra_twist: spec.extra_twist,
            s: function_label(&spec.s),
        },
        n_r: grid.n_r,
        n_theta: grid.n_theta,
        radius,
        eigenvalues,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub radial: [Vec<f64>; 2],
    pub oracle: [Vec<f64>; 2],
    /// Worst deviation in units of the tolerance; `<= 1` passes.
    pub worst: f64,
    pub pass: bool,
}

/// Compares the lowest `count` eigenvalues per degree: relative error within
/// `rel`, or absolute error within `rel * scale` for eigenvalues near zero.
pub fn compare_with_oracle(radial: &SpectrumResult, oracle: &OracleResult, count: usize, rel: f64) -> OracleComparison {
    let scale = radial.threshold_used.scale;
    let mut worst: f64 = 0.0;
    let mut shapes_match = true;
    let mut radial_values = [Vec::new(), Vec::new()];
    let mut oracle_values = [Vec::new(), Vec::new()];
    for p in 0..2 {
        let a: Vec<f64> = radial.degrees[p].eigenvalues.iter().copied().take(count).collect();
        let b: Vec<f64> = oracle.eigenvalues[p].iter().copied().take(count).collect();
        shapes_match &= a.len() == b.len();
        for (x, y) in a.iter().zip(&b) {
            let err = (x - y).abs();
            let allowed = if x.abs() < rel * scale { rel * scale } else { rel * x.abs() };
            worst = worst.max(err / allowed);
        }
        radial_values[p] = a;
        oracle_values[p] = b;
    }
    OracleComparison {
        radial: radial_values,
        oracle: oracle_values,
        worst,
        pass: shapes_match && worst <= 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::reference_sqrt;
    use crate::combinatorics::IrrepLabel;
    use crate::model_geometry::WeightedAction;

    fn mode(m: i64) -> ModeSpec {
        ModeSpec::new(
            WeightedAction::new(vec![1], 0).unwrap(),
            IrrepLabel(m),
            reference_sqrt(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn memory_guard() {
        let g = OracleGrid {
            n_r: 61,
            n_theta: 60,
            ..OracleGrid::default()
        };
        assert!(matches!(
            dense_2d_oracle(&mode(1), &g, 3),
            Err(Error::OracleTooLarge { points: 3660, .. })
        ));
    }

    #[test]
    fn opposite_weights_differ() {
        let plus = dense_2d_oracle(&mode(2), &OracleGrid::default(), 2).unwrap();
        let minus = dense_2d_oracle(&mode(-2), &OracleGrid::default(), 2).unwrap();
        assert!(plus.eigenvalues[0][0].abs() < 0.05);
        assert!(minus.eigenvalues[0][0] > 1.0);
    }
}
