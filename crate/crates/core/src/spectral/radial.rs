//! Radial reduction of `D_s^2` on `C` for one isotypic mode.
//!
//! With `phi(r) = s(lambda^2 r^4 / 8) + kappa_L r^2 / 2`, a degree-0 mode
//! `g(r) e^{i l theta}` and a degree-1 mode `g(r) e^{i l theta} d zbar` give
//! the quadratic forms
//!
//! ```text
//!   degree 0:  int |g' + (phi' - l/r) g|^2 r dr,
//!   degree 1:  int |g' + (l/r - phi') g|^2 r dr,
//! ```
//!
//! relative to `int |g|^2 r dr`. Both are `int |e^{-psi} (e^{psi} g)'|^2 r dr`
//! with `psi = phi - l ln r` (degree 0) or `psi = l ln r - phi` (degree 1).
//! Each grid segment contributes one row of a bidiagonal factor
//!
//! ```text
//!   (e^{psi_{j+1} - psi_m} g_{j+1} - e^{psi_j - psi_m} g_j) / h_j
//! ```
//!
//! weighted by `int r dr` over the segment, so the assembled matrix is
//! `C^T C` (tridiagonal, positive semidefinite) and the sampled
//! `e^{-psi}` is annihilated on every interior segment.
//!
//! The label `m` of `V_m` selects `l = (m - k)/lambda` in degree 0 and
//! `l = (m - k)/lambda + 1` in degree 1; when `lambda` does not divide
//! `m - k` the mode is empty.

use serde::{Deserialize, Serialize};

use crate::admissible::{level_to_argument, AdmissibleFunction};
use crate::combinatorics::IrrepLabel;
use crate::error::{Error, Result};
use crate::model_geometry::WeightedAction;
use crate::spectral::eigen::SymTridiagonal;

/// Grid layout on `[0, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    /// `r_j = R sinh(beta j / (N+1)) / sinh(beta)`: uniform near the origin,
    /// geometric growth further out.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Number of interior nodes.
    pub n: usize,
    /// Outer radius; chosen from `decay` when absent.
    pub radius: Option<f64>,
    pub spacing: Spacing,
    pub stretch: f64,
    /// Required growth of the decay exponent between its minimum and `R`.
    pub decay: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            n: 2000,
            radius: None,
            spacing: Spacing::Geometric,
            stretch: 3.0,
            decay: 40.0,
        }
    }
}

impl GridParams {
    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    pub fn refined(self) -> Self {
        Self { n: 2 * self.n, ..self }
    }

    /// Nodes `r_0 = 0 < r_1 < ... < r_{N+1} = R`.
    pub fn nodes(&self, radius: f64) -> Vec<f64> {
        let m = self.n + 1;
        (0..=m)
            .map(|j| {
                let x = j as f64 / m as f64;
                match self.spacing {
                    Spacing::Uniform => radius * x,
                    Spacing::Geometric => radius * (self.stretch * x).sinh() / self.stretch.sinh(),
                }
            })
            .collect()
    }
}

/// One isotypic block of `D_s^2` on `C` with a single weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub action: WeightedAction,
    pub irrep: IrrepLabel,
    pub s: AdmissibleFunction,
    /// Power of the positive line bundle, adding `extra_twist |z|^2 / 2` to `phi`.
    pub extra_twist: u32,
}

impl ModeSpec {
    pub fn new(
        action: WeightedAction,
        irrep: IrrepLabel,
        s: AdmissibleFunction,
        extra_twist: u32,
    ) -> Result<Self> {
        if action.dim() != 1 {
            return Err(Error::arg(
                "weights",
                format!("radial reduction needs n = 1, got n = {}", action.dim()),
            ));
        }
        // A deformation with s' = 0 somewhere is not admissible.
        for u in [0.0, 0.5, 1.0, 2.0, 8.0] {
            if u <= s.max_argument() && !(s.derivative(u) > 0.0) {
                return Err(Error::arg("s", format!("s'({u}) is not positive")));
            }
        }
        Ok(Self {
            action,
            irrep,
            s,
            extra_twist,
        })
    }

    pub fn weight(&self) -> f64 {
        self.action.min_weight()
    }

    /// Angular momentum of the mode in the given form degree, if the mode is nonempty.
    pub fn angular_index(&self, degree: u8) -> Option<i64> {
        let lambda = i64::from(self.action.weights()[0]);
        let q = self.irrep.0 - self.action.twist();
        if q.rem_euclid(lambda) != 0 {
            return None;
        }
        Some(q / lambda + i64::from(degree))
    }

    /// Largest radius at which `s` is represented.
    pub fn max_radius(&self) -> f64 {
        let u = self.s.max_argument();
        let lambda = self.weight();
        (8.0 * u / (lambda * lambda)).powf(0.25)
    }

    pub fn phi(&self, r: f64) -> f64 {
        let lambda = self.weight();
        let mu = 0.5 * lambda * r * r;
        self.s.value(level_to_argument(mu)) + 0.5 * f64::from(self.extra_twist) * r * r
    }

    /// `phi'(r)` and `Delta phi = phi'' + phi'/r`.
    pub fn phi_derivatives(&self, r: f64) -> (f64, f64) {
        let lambda = self.weight();
        let mu = 0.5 * lambda * r * r;
        let jet = self.s.eval(level_to_argument(mu));
        let kappa = f64::from(self.extra_twist);
        // u = lambda^2 r^4 / 8
        let du = 0.5 * lambda * lambda * r.powi(3);
        let ddu = 1.5 * lambda * lambda * r * r;
        let d1 = jet.ds * du + kappa * r;
        let d2 = jet.dds * du * du + jet.ds * ddu + kappa;
        let lap = if r > 0.0 { d2 + d1 / r } else { 2.0 * kappa };
        (d1, lap)
    }
}

/// Exponent `psi` with `B g = e^{-psi} (e^{psi} g)'`.
fn psi(phi: f64, r: f64, angular: i64, degree: u8) -> f64 {
    let log_term = if angular == 0 { 0.0 } else { angular as f64 * r.ln() };
    match degree {
        0 => phi - log_term,
        _ => log_term - phi,
    }
}

/// One row of the bidiagonal factor: coefficients on up to two unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorRow {
    pub left: Option<(usize, f64)>,
    pub right: Option<(usize, f64)>,
}

/// Discretized `D_s^2` on one (degree, mode) block in symmetric form
/// `M^{-1/2} B^T W B M^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialOperator {
    pub degree: u8,
    /// `None` for an empty mode.
    pub angular: Option<i64>,
    pub radius: f64,
    /// All grid nodes including `0` and `R`.
    pub grid: Vec<f64>,
    /// Radii of the unknowns.
    pub unknowns: Vec<f64>,
    /// Lumped `int r dr` over the dual cell of each unknown.
    pub mass: Vec<f64>,
    pub matrix: SymTridiagonal,
    /// Rows of `W^{1/2} B M^{-1/2}`.
    pub factor: Vec<FactorRow>,
    /// Decay exponent sampled at the unknowns.
    pub psi: Vec<f64>,
}

impl RadialOperator {
    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    /// `|C y|^2`, the Rayleigh numerator evaluated through the factor.
    pub fn factored_energy(&self, y: &[f64]) -> f64 {
        self.factor
            .iter()
            .map(|row| {
                let l = row.left.map_or(0.0, |(i, c)| c * y[i]);
                let r = row.right.map_or(0.0, |(i, c)| c * y[i]);
                (l + r).powi(2)
            })
            .sum()
    }

    /// Symmetric-form coordinates of a sampled function `g`.
    pub fn to_symmetric(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.mass).map(|(v, m)| v * m.sqrt()).collect()
    }

    /// Radial function `g` of a symmetric-form vector.
    pub fn to_radial(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.mass).map(|(v, m)| v / m.sqrt()).collect()
    }

    /// `max |A_ij - A_ji|` for `A` rebuilt entrywise as `C^T C` from the
    /// factor rows, together with its deviation from the stored matrix.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n.saturating_sub(1)];
        let mut lower = vec![0.0; n.saturating_sub(1)];
        for row in &self.factor {
            let entries: Vec<(usize, f64)> = row.left.into_iter().chain(row.right).collect();
            for &(i, a) in &entries {
                for &(j, b) in &entries {
                    match i.cmp(&j) {
                        std::cmp::Ordering::Equal => diag[i] += a * b,
                        std::cmp::Ordering::Less => upper[i] += a * b,
                        std::cmp::Ordering::Greater => lower[j] += a * b,
                    }
                }
            }
        }
        let off = upper
            .iter()
            .zip(&lower)
            .zip(&self.matrix.off)
            .map(|((u, l), o)| (u - l).abs().max((u - o).abs()));
        let on = diag.iter().zip(&self.matrix.diag).map(|(d, s)| (d - s).abs());
        off.chain(on).fold(0.0, f64::max)
    }
}

/// Outer radius for a decay exponent: the first radius past the minimum of
/// `exponent` where it has grown by `decay`.
pub fn choose_radius(exponent: impl Fn(f64) -> f64, decay: f64, r_max: f64) -> Option<f64> {
    let steps = 20_000;
    let dr = r_max / steps as f64;
    let mut min = f64::INFINITY;
    for i in 1..=steps {
        let r = i as f64 * dr;
        let e = exponent(r);
        if !e.is_finite() {
            return None;
        }
        min = min.min(e);
        if e >= min + decay {
            return Some(r);
        }
    }
    None
}

fn decay_exponent(spec: &ModeSpec, r: f64) -> f64 {
    let l = spec.angular_index(0).unwrap_or(0).unsigned_abs() as f64;
    spec.phi(r) - if l > 0.0 { l * r.ln() } else { 0.0 }
}

/// Outer radius for a mode, explicit or derived from the decay requirement.
pub fn mode_radius(spec: &ModeSpec, grid: &GridParams) -> Result<f64> {
    let r_limit = spec.max_radius();
    match grid.radius {
        Some(radius) => {
            if !(radius > 0.0) || radius > r_limit {
                return Err(Error::arg(
                    "radius",
                    format!("radius {radius} outside (0, {r_limit}] where s is represented"),
                ));
            }
            let steps = 4000;
            let mut min = f64::INFINITY;
            for i in 1..=steps {
                min = min.min(decay_exponent(spec, radius * i as f64 / steps as f64));
            }
            let decay = decay_exponent(spec, radius) - min;
            if decay < grid.decay {
                return Err(Error::DomainTooSmall {
                    decay,
                    required: grid.decay,
                });
            }
            Ok(radius)
        }
        None => {
            let mut r_max = 4.0f64;
            loop {
                let cap = r_max.min(r_limit);
                if let Some(r) = choose_radius(|r| decay_exponent(spec, r), grid.decay, cap) {
                    return Ok(r.max(1.0).min(r_limit));
                }
                if cap >= r_limit || r_max > 1e4 {
                    return Err(Error::DomainTooSmall {
                        decay: decay_exponent(spec, cap),
                        required: grid.decay,
                    });
                }
                r_max *= 2.0;
            }
        }
    }
}

/// Assembles the (degree, mode) block for an arbitrary radial weight `phi`.
pub fn assemble_with_phi(
    phi: impl Fn(f64) -> f64,
    angular: Option<i64>,
    degree: u8,
    grid: &GridParams,
    radius: f64,
) -> Result<RadialOperator> {
    if degree > 1 {
        return Err(Error::arg("degree", "form degree must be 0 or 1 for n = 1"));
    }
    if grid.n < 2 {
        return Err(Error::arg("n", "need at least two interior nodes"));
    }
    let nodes = grid.nodes(radius);
    let Some(angular) = angular else {
        return Ok(RadialOperator {
            degree,
            angular: None,
            radius,
            grid: nodes,
            unknowns: Vec::new(),
            mass: Vec::new(),
            matrix: SymTridiagonal::new(Vec::new(), Vec::new()),
            factor: Vec::new(),
            psi: Vec::new(),
        });
    };
    let n_int = grid.n;
    // Regularity at the origin: g(0) is free only for zero angular momentum.
    let first = if angular == 0 { 0 } else { 1 };
    let unknown_of = |node: usize| -> Option<usize> {
        (node >= first && node <= n_int).then(|| node - first)
    };
    let psi_at: Vec<f64> = nodes
        .iter()
        .map(|&r| if r > 0.0 || angular == 0 { psi(phi(r), r, angular, degree) } else { f64::NAN })
        .collect();

    let unknowns: Vec<f64> = nodes[first..=n_int].to_vec();
    let mass: Vec<f64> = (first..=n_int)
        .map(|j| {
            let a = if j == 0 { 0.0 } else { 0.5 * (nodes[j - 1] + nodes[j]) };
            let b = 0.5 * (nodes[j] + nodes[j + 1]);
            0.5 * (b * b - a * a)
        })
        .collect();

    let dim = unknowns.len();
    let mut diag = vec![0.0; dim];
    let mut off = vec![0.0; dim.saturating_sub(1)];
    let mut factor = Vec::with_capacity(n_int + 1);
    // The segment touching the origin is dropped when the kernel profile
    // vanishes there (degree 0, l > 0); it is kept otherwise to rule out
    // spurious profiles singular at the origin.
    let skip_first = degree == 0 && angular > 0;
    for j in usize::from(skip_first)..=n_int {
        let (r0, r1) = (nodes[j], nodes[j + 1]);
        let h = r1 - r0;
        let rm = 0.5 * (r0 + r1);
        let psi_m = psi(phi(rm), rm, angular, degree);
        let w = (0.5 * (r1 * r1 - r0 * r0)).sqrt();
        let left = unknown_of(j).map(|i| (i, -w * (psi_at[j] - psi_m).exp() / h / mass[i].sqrt()));
        let right = unknown_of(j + 1).map(|i| (i, w * (psi_at[j + 1] - psi_m).exp() / h / mass[i].sqrt()));
        for &(i, c) in left.iter().chain(right.iter()) {
            if !c.is_finite() {
                return Err(Error::arg(
                    "radius",
                    format!("non-finite operator coefficient at r = {}", unknowns[i]),
                ));
            }
            diag[i] += c * c;
        }
        if let (Some((i, a)), Some((_, b))) = (left, right) {
            off[i] += a * b;
        }
        factor.push(FactorRow { left, right });
    }
    Ok(RadialOperator {
        degree,
        angular: Some(angular),
        radius,
        psi: psi_at[first..=n_int].to_vec(),
        grid: nodes,
        unknowns,
        mass,
        matrix: SymTridiagonal::new(diag, off),
        factor,
    })
}

/// Radial discretization of `D_s^2` on the (degree, mode) block of `spec`.
pub fn assemble_radial_operator(spec: &ModeSpec, degree: u8, grid: &GridParams) -> Result<RadialOperator> {
    let radius = mode_radius(spec, grid)?;
    assemble_with_phi(|r| spec.phi(r), spec.angular_index(degree), degree, grid, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::reference_sqrt;

    fn spec(lambda: u32, k: i64, m: i64) -> ModeSpec {
        ModeSpec::new(
            WeightedAction::new(vec![lambda], k).unwrap(),
            IrrepLabel(m),
            reference_sqrt(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn rejects_higher_dimension() {
        let a = WeightedAction::new(vec![1, 1], 0).unwrap();
        assert!(ModeSpec::new(a, IrrepLabel(0), reference_sqrt(), 0).is_err());
    }

    #[test]
    fn rejects_flat_deformation() {
        let a = WeightedAction::new(vec![1], 0).unwrap();
        assert!(ModeSpec::new(a, IrrepLabel(0), AdmissibleFunction::constant(1.0), 0).is_err());
    }

    #[test]
    fn angular_indices() {
        assert_eq!(spec(1, 0, 3).angular_index(0), Some(3));
        assert_eq!(spec(1, 0, 3).angular_index(1), Some(4));
        assert_eq!(spec(2, 0, 3).angular_index(0), None);
        assert_eq!(spec(3, 4, 1).angular_index(0), Some(-1));
    }

    #[test]
    fn small_radius_rejected() {
        let g = GridParams {
            radius: Some(2.0),
            ..GridParams::default()
        };
        assert!(matches!(
            assemble_radial_operator(&spec(1, 0, 0), 0, &g),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn assembly_is_symmetric() {
        let op = assemble_radial_operator(&spec(1, 0, 2), 0, &GridParams::default().with_n(300)).unwrap();
        assert!(op.symmetry_defect() < 1e-12 * op.matrix.scale());
    }

    #[test]
    fn sampled_kernel_is_annihilated_on_interior_segments() {
        for m in [0, 1, 3] {
            sampled_kernel_case(m);
        }
    }

    fn sampled_kernel_case(m: i64) {
        let op = assemble_radial_operator(&spec(1, 0, m), 0, &GridParams::default().with_n(200)).unwrap();
        let g: Vec<f64> = op.psi.iter().map(|p| (-p).exp()).collect();
        let y = op.to_symmetric(&g);
        let interior: f64 = op.factor[..op.factor.len() - 1]
            .iter()
            .map(|row| {
                let l = row.left.map_or(0.0, |(i, c)| c * y[i]);
                let r = row.right.map_or(0.0, |(i, c)| c * y[i]);
                (l + r).abs()
            })
            .fold(0.0, f64::max);
        assert!(interior < 1e-12);
    }

    #[test]
    fn oscillator_matches_dense_solver() {
        use crate::spectral::eigen::low_spectrum;
        let g = GridParams::default().with_n(60);
        let op = assemble_with_phi(|r| 0.5 * r * r, Some(1), 0, &g, 9.0).unwrap();
        let n = op.len();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = op.matrix.diag[i];
            if i + 1 < n {
                dense[(i, i + 1)] = op.matrix.off[i];
                dense[(i + 1, i)] = op.matrix.off[i];
            }
        }
        let mut reference: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        let pairs = low_spectrum(&op.matrix, 4).unwrap();
        let scale = op.matrix.scale();
        for (p, e) in pairs.iter().zip(&reference) {
            assert!((p.value - e).abs() <= 1e-8 * e.abs().max(1e-8 * scale), "{} vs {e}", p.value);
        }
    }
}
