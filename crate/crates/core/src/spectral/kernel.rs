//! Kernel dimensions of `D_s^2` per mode and the checks built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissible::{AdmissibleFunction, Term};
use crate::combinatorics::{denumerant_u64, IrrepLabel};
use crate::error::{Error, Result};
use crate::model_geometry::WeightedAction;
use crate::spectral::eigen::low_spectrum;
use crate::spectral::radial::{assemble_radial_operator, GridParams, ModeSpec, RadialOperator};

/// Two-threshold zero rule, relative to the largest computed eigenvalue of the mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Eigenvalues computed per degree.
    pub count: usize,
    pub zero_rel: f64,
    pub gap_rel: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            count: 4,
            zero_rel: 1e-6,
            gap_rel: 1e-2,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::arg("count", "must be positive"));
        }
        if !(self.zero_rel > 0.0 && self.zero_rel < self.gap_rel && self.gap_rel < 1.0) {
            return Err(Error::arg(
                "thresholds",
                format!("need 0 < eps_zero ({}) < gap_floor ({}) < 1", self.zero_rel, self.gap_rel),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSpectrum {
    pub degree: u8,
    /// Angular momentum of the radial block; `None` when the mode is empty.
    pub angular: Option<i64>,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub kernel_dim: usize,
    /// Cosine between the kernel vector and the sampled `r^l e^{-phi}`, when
    /// the kernel is one-dimensional.
    pub kernel_cosine: Option<f64>,
}

impl DegreeSpectrum {
    /// Smallest eigenvalue above the kernel.
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues.get(self.kernel_dim).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub weights: Vec<u32>,
    pub twist: i64,
    pub m: i64,
    pub extra_twist: u32,
    pub s: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub radius: f64,
    pub refinement: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsUsed {
    pub scale: f64,
    pub eps_zero: f64,
    pub gap_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub spec: ModeSummary,
    pub grid_meta: GridMeta,
    pub degrees: Vec<DegreeSpectrum>,
    pub kernel_dims: (usize, usize),
    pub threshold_used: ThresholdsUsed,
}

impl SpectrumResult {
    pub fn degree(&self, p: u8) -> &DegreeSpectrum {
        &self.degrees[usize::from(p)]
    }

    pub fn index(&self) -> i64 {
        self.kernel_dims.0 as i64 - self.kernel_dims.1 as i64
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.degrees
            .iter()
            .flat_map(|d| d.eigenvalues.iter().copied())
            .reduce(f64::min)
    }
}

/// Short name of an admissible function for reports.
pub fn function_label(s: &AdmissibleFunction) -> String {
    match s {
        AdmissibleFunction::Sqrt => "sqrt".into(),
        AdmissibleFunction::Grid(g) => format!("grid[{}]", g.knots.len()),
        AdmissibleFunction::Combination { terms } => terms
            .iter()
            .map(|t| format!("{}*{}", t.coefficient, function_label(&t.function)))
            .collect::<Vec<_>>()
            .join("+"),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct RawDegree {
    op: RadialOperator,
    values: Vec<f64>,
    residuals: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn solve_degree(op: RadialOperator, count: usize) -> Result<RawDegree> {
    if op.is_empty() {
        return Ok(RawDegree {
            op,
            values: Vec::new(),
            residuals: Vec::new(),
            vectors: Vec::new(),
        });
    }
    let pairs = low_spectrum(&op.matrix, count.min(op.len()))?;
    let mut values = Vec::with_capacity(pairs.len());
    let mut residuals = Vec::with_capacity(pairs.len());
    let mut vectors = Vec::with_capacity(pairs.len());
    for p in pairs {
        // The factored Rayleigh quotient is accurate relative to the value itself.
        values.push(op.factored_energy(&p.vector) / dot(&p.vector, &p.vector));
        residuals.push(p.residual);
        vectors.push(p.vector);
    }
    // Rayleigh quotients of near-degenerate pairs can swap order.
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(RawDegree {
        op,
        values: order.iter().map(|&i| values[i]).collect(),
        residuals: order.iter().map(|&i| residuals[i]).collect(),
        vectors: order.iter().map(|&i| vectors[i].clone()).collect(),
    })
}

/// Cosine in `L^2(r dr)` between a discrete eigenvector and `e^{-psi}`.
fn profile_cosine(raw: &RawDegree, index: usize) -> f64 {
    let profile: Vec<f64> = raw.op.psi.iter().map(|p| (-p).exp()).collect();
    let y = raw.op.to_symmetric(&profile);
    let v = &raw.vectors[index];
    dot(&y, v).abs() / (dot(&y, &y) * dot(v, v)).sqrt()
}

/// Spectrum and kernel dimensions of one mode at a fixed grid.
pub fn kernel_dims(spec: &ModeSpec, grid: &GridParams, thresholds: &Thresholds) -> Result<SpectrumResult> {
    kernel_dims_at(spec, grid, thresholds, 0)
}

fn kernel_dims_at(
    spec: &ModeSpec,
    grid: &GridParams,
    thresholds: &Thresholds,
    refinement: u32,
) -> Result<SpectrumResult> {
    thresholds.validate()?;
    let ops = (
        assemble_radial_operator(spec, 0, grid)?,
        assemble_radial_operator(spec, 1, grid)?,
    );
    let radius = ops.0.radius;
    let (d0, d1) = rayon::join(
        || solve_degree(ops.0, thresholds.count),
        || solve_degree(ops.1, thresholds.count),
    );
    let raws = [d0?, d1?];
    let scale = raws
        .iter()
        .flat_map(|r| r.values.iter().copied())
        .fold(0.0, f64::max);
    let eps_zero = thresholds.zero_rel * scale;
    let gap_floor = thresholds.gap_rel * scale;

    let mut degrees = Vec::with_capacity(2);
    for (p, raw) in raws.iter().enumerate() {
        let degree = p as u8;
        let kernel_dim = raw.values.iter().take_while(|v| **v < eps_zero).count();
        if let Some(&next) = raw.values.get(kernel_dim) {
            if next <= gap_floor {
                return Err(Error::AmbiguousKernel {
                    degree,
                    value: next,
                    eps_zero,
                    gap_floor,
                });
            }
        }
        let kernel_cosine = (kernel_dim == 1).then(|| profile_cosine(raw, 0));
        degrees.push(DegreeSpectrum {
            degree,
            angular: raw.op.angular,
            eigenvalues: raw.values.clone(),
            residuals: raw.residuals.clone(),
            kernel_dim,
            kernel_cosine,
        });
    }
    Ok(SpectrumResult {
        spec: ModeSummary {
            weights: spec.action.weights().to_vec(),
            twist: spec.action.twist(),
            m: spec.irrep.0,
            extra_twist: spec.extra_twist,
            s: function_label(&spec.s),
        },
        grid_meta: GridMeta {
            n: grid.n,
            radius,
            refinement,
        },
        kernel_dims: (degrees[0].kernel_dim, degrees[1].kernel_dim),
        degrees,
        threshold_used: ThresholdsUsed {
            scale,
            eps_zero,
            gap_floor,
        },
    })
}

/// [`kernel_dims`], retried once on a doubled grid when the kernel is ambiguous.
pub fn kernel_dims_refined(
    spec: &ModeSpec,
    grid: &GridParams,
    thresholds: &Thresholds,
) -> Result<SpectrumResult> {
    match kernel_dims_at(spec, grid, thresholds, 0) {
        Err(Error::AmbiguousKernel { .. }) => kernel_dims_at(spec, &grid.refined(), thresholds, 1),
        other => other,
    }
}

/// Expected kernel dimensions `(denumerant(lambda, m - k), 0)`.
pub fn expected_dims(action: &WeightedAction, m: i64) -> Result<(usize, usize)> {
    let d = denumerant_u64(action.weights(), m - action.twist())?;
    Ok((d as usize, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceEntry {
    pub m: i64,
    pub dims_s1: (usize, usize),
    pub dims_s2: (usize, usize),
    pub equal: bool,
    /// Both spectra, attached only on a mismatch.
    pub spectra: Option<(SpectrumResult, SpectrumResult)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub weights: Vec<u32>,
    pub twist: i64,
    pub s1: String,
    pub s2: String,
    pub entries: Vec<InvarianceEntry>,
    pub all_equal: bool,
}

/// Compares kernel dimensions under two admissible functions, mode by mode.
pub fn invariance_check(
    action: &WeightedAction,
    m_list: &[i64],
    s1: &AdmissibleFunction,
    s2: &AdmissibleFunction,
    grid: &GridParams,
    thresholds: &Thresholds,
) -> Result<InvarianceReport> {
    let entries = m_list
        .par_iter()
        .map(|&m| -> Result<InvarianceEntry> {
            let r1 = kernel_dims_refined(&ModeSpec::new(action.clone(), IrrepLabel(m), s1.clone(), 0)?, grid, thresholds)?;
            let r2 = kernel_dims_refined(&ModeSpec::new(action.clone(), IrrepLabel(m), s2.clone(), 0)?, grid, thresholds)?;
            let equal = r1.kernel_dims == r2.kernel_dims;
            Ok(InvarianceEntry {
                m,
                dims_s1: r1.kernel_dims,
                dims_s2: r2.kernel_dims,
                equal,
                spectra: (!equal).then_some((r1, r2)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InvarianceReport {
        weights: action.weights().to_vec(),
        twist: action.twist(),
        s1: function_label(s1),
        s2: function_label(s2),
        all_equal: entries.iter().all(|e| e.equal),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KodairaPoint {
    pub k: u32,
    /// Smallest degree-1 eigenvalue.
    pub gap: f64,
    pub dim0: usize,
    pub expected_dim0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KodairaCurve {
    pub weights: Vec<u32>,
    pub twist: i64,
    pub m: i64,
    pub points: Vec<KodairaPoint>,
    /// First `k` from which the gap stays `>= 1` until the end of the range.
    pub k0: Option<u32>,
    /// The second half of the curve never drops by more than 5%.
    pub tail_monotone: bool,
    pub dims_match: bool,
}

pub const KODAIRA_TAIL_TOLERANCE: f64 = 0.05;

/// Degree-1 spectral gap along increasing powers of the positive line bundle.
pub fn kodaira_scan(
    action: &WeightedAction,
    m: i64,
    s: &AdmissibleFunction,
    k_range: &[u32],
    grid: &GridParams,
    thresholds: &Thresholds,
) -> Result<KodairaCurve> {
    if k_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("k", "range must be strictly ascending"));
    }
    let expected = expected_dims(action, m)?.0;
    let points = k_range
        .par_iter()
        .map(|&k| -> Result<KodairaPoint> {
            let spec = ModeSpec::new(action.clone(), IrrepLabel(m), s.clone(), k)?;
            let r = kernel_dims_refined(&spec, grid, thresholds)?;
            let gap = r.degree(1).eigenvalues.first().copied().unwrap_or(f64::INFINITY);
            Ok(KodairaPoint {
                k,
                gap,
                dim0: r.kernel_dims.0,
                expected_dim0: expected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let first_stable = match points.iter().rposition(|p| !(p.gap >= 1.0)) {
        Some(i) => i + 1,
        None => 0,
    };
    let k0 = points.get(first_stable).map(|p| p.k);
    let tail = &points[points.len() / 2..];
    let tail_monotone = tail
        .windows(2)
        .all(|w| w[1].gap >= (1.0 - KODAIRA_TAIL_TOLERANCE) * w[0].gap);
    Ok(KodairaCurve {
        weights: action.weights().to_vec(),
        twist: action.twist(),
        m,
        k0,
        tail_monotone,
        dims_match: points.iter().all(|p| p.dim0 == p.expected_dim0),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPoint {
    pub t: f64,
    pub kernel_dims: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyScan {
    pub m: i64,
    pub points: Vec<FamilyPoint>,
    /// Parameters where the dimensions differ from those at `t = 0`.
    pub exceptional: Vec<f64>,
}

/// Kernel dimensions along `s_t = s1 + t s2`.
pub fn family_scan(
    action: &WeightedAction,
    m: i64,
    s1: &AdmissibleFunction,
    s2: &AdmissibleFunction,
    t_values: &[f64],
    grid: &GridParams,
    thresholds: &Thresholds,
) -> Result<FamilyScan> {
    let points = t_values
        .par_iter()
        .map(|&t| -> Result<FamilyPoint> {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::arg("t", format!("family parameter must be >= 0, got {t}")));
            }
            let mut terms = vec![Term {
                coefficient: 1.0,
                function: s1.clone(),
            }];
            if t > 0.0 {
                terms.push(Term {
                    coefficient: t,
                    function: s2.clone(),
                });
            }
            let s = AdmissibleFunction::Combination { terms };
            let spec = ModeSpec::new(action.clone(), IrrepLabel(m), s, 0)?;
            Ok(FamilyPoint {
                t,
                kernel_dims: kernel_dims_refined(&spec, grid, thresholds)?.kernel_dims,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exceptional = points
        .iter()
        .filter(|p| Some(p.kernel_dims) != points.first().map(|q| q.kernel_dims))
        .map(|p| p.t)
        .collect();
    Ok(FamilyScan { m, points, exceptional })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingCheck {
    pub coarse: SpectrumResult,
    pub fine: SpectrumResult,
    /// Largest relative change of the first eigenvalue above the kernel.
    pub gap_drift: f64,
    /// Near-zero eigenvalues did not grow under refinement.
    pub kernel_converging: bool,
}

pub const GAP_DRIFT_TOLERANCE: f64 = 0.01;

impl DoublingCheck {
    pub fn passed(&self) -> bool {
        self.kernel_converging
            && self.gap_drift < GAP_DRIFT_TOLERANCE
            && self.coarse.kernel_dims == self.fine.kernel_dims
    }
}

/// Compares a mode at `grid` and at the doubled grid.
pub fn grid_doubling(spec: &ModeSpec, grid: &GridParams, thresholds: &Thresholds) -> Result<DoublingCheck> {
    let coarse = kernel_dims(spec, grid, thresholds)?;
    let fine = kernel_dims(spec, &grid.refined(), thresholds)?;
    let mut gap_drift: f64 = 0.0;
    let mut kernel_converging = true;
    for (c, f) in coarse.degrees.iter().zip(&fine.degrees) {
        if let (Some(a), Some(b)) = (c.gap(), f.gap()) {
            gap_drift = gap_drift.max((b - a).abs() / a);
        }
        // Values at rounding level carry no trend.
        let floor = 1e-12 * fine.threshold_used.scale;
        for (a, b) in c.eigenvalues.iter().zip(&f.eigenvalues).take(c.kernel_dim.min(f.kernel_dim)) {
            if b.abs() > a.abs().max(floor) {
                kernel_converging = false;
            }
        }
    }
    Ok(DoublingCheck {
        coarse,
        fine,
        gap_drift,
        kernel_converging,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::reference_sqrt;

    fn mode(lambda: u32, k: i64, m: i64) -> ModeSpec {
        ModeSpec::new(
            WeightedAction::new(vec![lambda], k).unwrap(),
            IrrepLabel(m),
            reference_sqrt(),
            0,
        )
        .unwrap()
    }

    fn grid() -> GridParams {
        GridParams::default().with_n(600)
    }

    #[test]
    fn unit_weight_monomial_mode() {
        let r = kernel_dims(&mode(1, 0, 3), &grid(), &Thresholds::default()).unwrap();
        assert_eq!(r.kernel_dims, (1, 0));
        assert!(r.degree(0).kernel_cosine.unwrap() > 0.999);
    }

    #[test]
    fn parity_excludes_mode() {
        let r = kernel_dims(&mode(2, 0, 3), &grid(), &Thresholds::default()).unwrap();
        assert_eq!(r.kernel_dims, (0, 0));
        assert!(r.degrees.iter().all(|d| d.eigenvalues.is_empty()));
    }

    #[test]
    fn shifted_mode() {
        let r = kernel_dims(&mode(1, 5, 5), &grid(), &Thresholds::default()).unwrap();
        assert_eq!(r.kernel_dims, (1, 0));
    }

    #[test]
    fn constant_mode_is_a_kernel() {
        let r = kernel_dims(&mode(1, 0, 0), &grid(), &Thresholds::default()).unwrap();
        assert!(r.degree(0).eigenvalues[0].abs() < 1e-6);
    }

    #[test]
    fn negative_mode_has_gap() {
        let r = kernel_dims(&mode(1, 0, -1), &grid(), &Thresholds::default()).unwrap();
        assert_eq!(r.kernel_dims, (0, 0));
        assert!(r.degree(0).eigenvalues[0] > r.threshold_used.gap_floor);
    }

    #[test]
    fn thresholds_must_be_ordered() {
        let t = Thresholds {
            zero_rel: 1e-2,
            gap_rel: 1e-3,
            ..Thresholds::default()
        };
        assert!(kernel_dims(&mode(1, 0, 0), &grid(), &t).is_err());
    }
}
