//! Admissible rescaling functions.
//!
//! Two coordinates appear side by side here:
//!
//! * the *level* `t = |mu|`, used by [`LevelSetProfile`] and by reports;
//! * the *argument* `u = |mu|^2 / 2`, at which `s` is evaluated, so that
//!   `phi = s(u)` and `f = s'(u)`.
//!
//! [`level_to_argument`] and [`argument_to_level`] convert between them.
//!
//! The admissibility ratio `f^2 |v|^2 / (|df| |v| + f nu + 1)` is bounded
//! below on the level `t` by
//!
//! ```text
//!            s'(u)^2 a(t)
//!   -----------------------------------------,   u = t^2 / 2,
//!   t |s''(u)| B1(t) + s'(u) B2(t) + 1
//! ```
//!
//! with `a = min |v|^2`, `B1 = max |d mu| |v|` and `B2 = max nu`; the factor
//! `t` comes from `|d(mu^2/2)| = t |d mu|`. Since `b >= B1, B2, 1` this is at
//! least `(a / b) s'^2 / (t |s''| + s' + 1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_geometry::LevelSetProfile;

pub fn level_to_argument(t: f64) -> f64 {
    0.5 * t * t
}

pub fn argument_to_level(u: f64) -> f64 {
    (2.0 * u).sqrt()
}

/// Value and first two derivatives of `s` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub s: f64,
    pub ds: f64,
    pub dds: f64,
}

/// One interpolation node of a tabulated `s`; `t` is the argument `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub s: f64,
    pub s_prime: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_second: Option<f64>,
}

/// Tabulated `s` with Hermite interpolation.
///
/// `s` is interpolated from `(s, s')`; `s'` is interpolated separately by a
/// monotone (Fritsch-Carlson limited) cubic, so it stays positive whenever the
/// knot values are. Past the last knot an optional exponential tail
/// `s'(u) = s'(T) exp(rate (u - T))` continues the function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub knots: Vec<Knot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_rate: Option<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

impl GridFunction {
    pub fn new(knots: Vec<Knot>, tail_rate: Option<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::arg("knots", "need at least two knots"));
        }
        if knots.windows(2).any(|p| p[1].t <= p[0].t) {
            return Err(Error::arg("knots", "arguments must be strictly increasing"));
        }
        if knots.iter().any(|k| !(k.t.is_finite() && k.s.is_finite() && k.s_prime.is_finite())) {
            return Err(Error::arg("knots", "non-finite knot data"));
        }
        if let Some(rate) = tail_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::arg("tail_rate", "must be positive"));
            }
        }
        let mut g = Self {
            knots,
            tail_rate,
            slopes: Vec::new(),
        };
        g.slopes = g.limited_slopes();
        Ok(g)
    }

    fn limited_slopes(&self) -> Vec<f64> {
        let k = &self.knots;
        let n = k.len();
        let secants: Vec<f64> = k
            .windows(2)
            .map(|p| (p[1].s_prime - p[0].s_prime) / (p[1].t - p[0].t))
            .collect();
        let mut m: Vec<f64> = (0..n)
            .map(|i| match k[i].s_second {
                Some(d) => d,
                None if i == 0 => secants[0],
                None if i == n - 1 => secants[n - 2],
                None => 0.5 * (secants[i - 1] + secants[i]),
            })
            .collect();
        for (i, &d) in secants.iter().enumerate() {
            if d == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let alpha = m[i] / d;
            let beta = m[i + 1] / d;
            if alpha < 0.0 {
                m[i] = 0.0;
            }
            if beta < 0.0 {
                m[i + 1] = 0.0;
            }
            let (alpha, beta) = (alpha.max(0.0), beta.max(0.0));
            let norm = alpha.hypot(beta);
            if norm > 3.0 {
                let tau = 3.0 / norm;
                m[i] = tau * alpha * d;
                m[i + 1] = tau * beta * d;
            }
        }
        m
    }

    fn ensure_slopes(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.slopes.len() == self.knots.len() {
            std::borrow::Cow::Borrowed(&self.slopes)
        } else {
            std::borrow::Cow::Owned(self.limited_slopes())
        }
    }

    pub fn first_argument(&self) -> f64 {
        self.knots[0].t
    }

    pub fn last_argument(&self) -> f64 {
        self.knots[self.knots.len() - 1].t
    }

    fn max_argument(&self) -> f64 {
        let last = self.knots[self.knots.len() - 1];
        match self.tail_rate {
            // Keep s, s', s'' representable.
            Some(rate) => last.t + (600.0 - last.s.abs().max(last.s_prime).max(1.0).ln()) / rate,
            None => last.t,
        }
    }

    fn eval(&self, u: f64) -> Jet {
        let k = &self.knots;
        let last = k[k.len() - 1];
        if u > last.t {
            let Some(rate) = self.tail_rate else {
                return Jet {
                    s: f64::NAN,
                    ds: f64::NAN,
                    dds: f64::NAN,
                };
            };
            let g = (rate * (u - last.t)).exp();
            return Jet {
                s: last.s + last.s_prime * (rate * (u - last.t)).exp_m1() / rate,
                ds: last.s_prime * g,
                dds: rate * last.s_prime * g,
            };
        }
        let u = u.max(k[0].t);
        let i = k.partition_point(|kn| kn.t <= u).clamp(1, k.len() - 1) - 1;
        let (k0, k1) = (k[i], k[i + 1]);
        let h = k1.t - k0.t;
        let x = (u - k0.t) / h;
        let (h00, h10, h01, h11) = hermite(x);
        let s = h00 * k0.s + h10 * h * k0.s_prime + h01 * k1.s + h11 * h * k1.s_prime;
        let slopes = self.ensure_slopes();
        let (m0, m1) = (slopes[i], slopes[i + 1]);
        let ds = h00 * k0.s_prime + h10 * h * m0 + h01 * k1.s_prime + h11 * h * m1;
        let (d00, d10, d01, d11) = hermite_derivative(x);
        let dds = (d00 * k0.s_prime + d01 * k1.s_prime) / h + d10 * m0 + d11 * m1;
        Jet { s, ds, dds }
    }
}

fn hermite(x: f64) -> (f64, f64, f64, f64) {
    let x2 = x * x;
    let x3 = x2 * x;
    (
        2.0 * x3 - 3.0 * x2 + 1.0,
        x3 - 2.0 * x2 + x,
        -2.0 * x3 + 3.0 * x2,
        x3 - x2,
    )
}

fn hermite_derivative(x: f64) -> (f64, f64, f64, f64) {
    let x2 = x * x;
    (
        6.0 * x2 - 6.0 * x,
        3.0 * x2 - 4.0 * x + 1.0,
        -6.0 * x2 + 6.0 * x,
        3.0 * x2 - 2.0 * x,
    )
}

/// A positive combination `sum c_i s_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub function: AdmissibleFunction,
}

/// A rescaling function `s : [0, inf) -> [0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdmissibleFunction {
    /// `s(u) = sqrt(2u)` for `u >= 1`, capped by a cubic on `[0, 1)`.
    Sqrt,
    Grid(GridFunction),
    Combination { terms: Vec<Term> },
}

// Cubic cap p(u) = 0.1 + b u + c u^2 + d u^3 matching sqrt(2u) to second
// order at u = 1. p' has no real roots, so p is strictly increasing.
const CAP_A: f64 = 0.1;

fn cap_coefficients() -> (f64, f64, f64) {
    let s1 = 2f64.sqrt();
    let ds1 = 1.0 / s1;
    let dds1 = -s1 / 4.0;
    // b + c + d = s1 - a, b + 2c + 3d = ds1, 2c + 6d = dds1.
    let e1 = s1 - CAP_A;
    let cd = ds1 - e1; // c + 2d
    let d = (dds1 - 2.0 * cd) / 2.0;
    let c = cd - 2.0 * d;
    let b = e1 - c - d;
    (b, c, d)
}

fn sqrt_jet(u: f64) -> Jet {
    if u >= 1.0 {
        let r = (2.0 * u).sqrt();
        Jet {
            s: r,
            ds: 1.0 / r,
            dds: -1.0 / (r * r * r),
        }
    } else {
        let u = u.max(0.0);
        let (b, c, d) = cap_coefficients();
        Jet {
            s: CAP_A + u * (b + u * (c + u * d)),
            ds: b + u * (2.0 * c + 3.0 * d * u),
            dds: 2.0 * c + 6.0 * d * u,
        }
    }
}

impl AdmissibleFunction {
    pub fn eval(&self, u: f64) -> Jet {
        match self {
            AdmissibleFunction::Sqrt => sqrt_jet(u),
            AdmissibleFunction::Grid(g) => g.eval(u),
            AdmissibleFunction::Combination { terms } => terms.iter().fold(
                Jet {
                    s: 0.0,
                    ds: 0.0,
                    dds: 0.0,
                },
                |acc, term| {
                    let j = term.function.eval(u);
                    Jet {
                        s: acc.s + term.coefficient * j.s,
                        ds: acc.ds + term.coefficient * j.ds,
                        dds: acc.dds + term.coefficient * j.dds,
                    }
                },
            ),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        self.eval(u).s
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.eval(u).ds
    }

    /// Largest argument at which the function is represented with finite values.
    pub fn max_argument(&self) -> f64 {
        match self {
            AdmissibleFunction::Sqrt => f64::INFINITY,
            AdmissibleFunction::Grid(g) => g.max_argument(),
            AdmissibleFunction::Combination { terms } => terms
                .iter()
                .map(|t| t.function.max_argument())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// `s(u) = value` on `[0, 1]` sampled at two knots, without tail.
    pub fn constant(value: f64) -> Self {
        let knot = |t| Knot {
            t,
            s: value,
            s_prime: 0.0,
            s_second: Some(0.0),
        };
        AdmissibleFunction::Grid(
            GridFunction::new(vec![knot(0.0), knot(1.0)], None).expect("valid knots"),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut f: AdmissibleFunction = serde_json::from_str(text)?;
        f.rebuild()?;
        Ok(f)
    }

    // Recomputes cached interpolation data after deserialization.
    fn rebuild(&mut self) -> Result<()> {
        match self {
            AdmissibleFunction::Sqrt => Ok(()),
            AdmissibleFunction::Grid(g) => {
                *g = GridFunction::new(std::mem::take(&mut g.knots), g.tail_rate)?;
                Ok(())
            }
            AdmissibleFunction::Combination { terms } => {
                terms.iter_mut().try_for_each(|t| t.function.rebuild())
            }
        }
    }
}

/// The reference function `sqrt(2u)` (smoothly capped below `u = 1`).
///
/// With it, `phi = s(mu^2/2) = mu` wherever `mu >= sqrt 2`.
pub fn reference_sqrt() -> AdmissibleFunction {
    AdmissibleFunction::Sqrt
}

/// `t1 s1 + t2 s2` for positive `t1`, `t2`.
pub fn convex_combine(
    s1: &AdmissibleFunction,
    s2: &AdmissibleFunction,
    t1: f64,
    t2: f64,
) -> Result<AdmissibleFunction> {
    for (field, c) in [("t1", t1), ("t2", t2)] {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::arg(field, format!("coefficient must be positive, got {c}")));
        }
    }
    Ok(AdmissibleFunction::Combination {
        terms: vec![
            Term {
                coefficient: t1,
                function: s1.clone(),
            },
            Term {
                coefficient: t2,
                function: s2.clone(),
            },
        ],
    })
}

/// `c s` for positive `c`.
pub fn scale(s: &AdmissibleFunction, c: f64) -> Result<AdmissibleFunction> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::arg("c", format!("coefficient must be positive, got {c}")));
    }
    Ok(AdmissibleFunction::Combination {
        terms: vec![Term {
            coefficient: c,
            function: s.clone(),
        }],
    })
}

/// Outcome of the finite-grid admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub pass: bool,
    pub target: f64,
    pub twist: u64,
    /// Level beyond which the ratio stays above `target`.
    pub threshold_t: Option<f64>,
    pub first_offending_t: Option<f64>,
    pub reason: Option<String>,
    pub t_grid: Vec<f64>,
    pub ratio_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub t: f64,
    pub value: f64,
}

impl AdmissibilityReport {
    pub fn ratio_points(&self) -> Vec<RatioPoint> {
        self.t_grid
            .iter()
            .zip(&self.ratio_values)
            .map(|(&t, &value)| RatioPoint { t, value })
            .collect()
    }

    /// Minimum of the ratio over the grid tail starting at index `i`.
    pub fn tail_minimum(&self, i: usize) -> f64 {
        self.ratio_values[i..].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Relative slack allowed for a nondecreasing tail.
pub const TAIL_TOLERANCE: f64 = 1e-6;
/// Default divergence target.
pub const DEFAULT_TARGET: f64 = 1e3;

/// Lower bound of the admissibility ratio on level `t` (see the module docs).
pub fn ratio_lower_bound(jet: Jet, t: f64, a: f64, dmu_v: f64, nu: f64) -> f64 {
    // Divided through by s' so that steep functions do not overflow.
    jet.ds * a / (t * (jet.dds.abs() / jet.ds) * dmu_v + nu + 1.0 / jet.ds)
}

fn evaluate(
    s: &AdmissibleFunction,
    profile: &LevelSetProfile,
    target: f64,
    twist: u64,
) -> Result<AdmissibilityReport> {
    if !(target > 0.0) {
        return Err(Error::arg("target", "must be positive"));
    }
    let max_u = s.max_argument();
    let mut t_grid = Vec::new();
    let mut ratio_values = Vec::new();
    let report = |pass, threshold_t, first_offending_t, reason: Option<String>, t_grid, ratio_values| {
        AdmissibilityReport {
            pass,
            target,
            twist,
            threshold_t,
            first_offending_t,
            reason,
            t_grid,
            ratio_values,
        }
    };
    for i in 0..profile.len() {
        let t = profile.t_grid[i];
        let u = level_to_argument(t);
        if u > max_u {
            break;
        }
        let jet = s.eval(u);
        if !(jet.ds > 0.0) {
            t_grid.push(t);
            ratio_values.push(0.0);
            return Ok(report(
                false,
                None,
                Some(t),
                Some(format!("s' = {} is not positive at t = {t}", jet.ds)),
                t_grid,
                ratio_values,
            ));
        }
        let nu = profile.nu_max[i] + 2.0 * PI * twist as f64 * t * t;
        t_grid.push(t);
        ratio_values.push(ratio_lower_bound(jet, t, profile.a_values[i], profile.dmu_v_max[i], nu));
    }
    let n = ratio_values.len();
    if n < 2 {
        return Ok(report(
            false,
            None,
            t_grid.first().copied(),
            Some("fewer than two levels inside the represented range".into()),
            t_grid,
            ratio_values,
        ));
    }
    // Smallest index from which every value clears the target.
    let mut start = n;
    while start > 0 && ratio_values[start - 1] >= target {
        start -= 1;
    }
    if start + 1 >= n {
        let offending = t_grid[n - 1];
        return Ok(report(
            false,
            None,
            Some(offending),
            Some(format!("ratio {:e} below target {target:e} at the end of the grid", ratio_values[n - 1])),
            t_grid,
            ratio_values,
        ));
    }
    if let Some(j) = (start + 1..n).find(|&j| ratio_values[j] < ratio_values[j - 1] * (1.0 - TAIL_TOLERANCE)) {
        let offending = t_grid[j];
        return Ok(report(
            false,
            None,
            Some(offending),
            Some(format!("ratio decreases on the tail at t = {offending}")),
            t_grid,
            ratio_values,
        ));
    }
    let threshold = t_grid[start];
    Ok(report(true, Some(threshold), None, None, t_grid, ratio_values))
}

/// Checks that the admissibility ratio exceeds `target` on the grid tail and
/// does not decrease there.
pub fn verify_admissible(
    s: &AdmissibleFunction,
    profile: &LevelSetProfile,
    target: f64,
) -> Result<AdmissibilityReport> {
    evaluate(s, profile, target, 0)
}

/// Same as [`verify_admissible`] with `nu` replaced by `nu + 2 pi k t^2`.
pub fn admissible_for_twist(
    s: &AdmissibleFunction,
    profile: &LevelSetProfile,
    k: i64,
    target: f64,
) -> Result<AdmissibilityReport> {
    let k = u64::try_from(k).map_err(|_| Error::arg("k", "twist must be nonnegative"))?;
    evaluate(s, profile, target, k)
}

/// Floor `kappa(u)` that the built function and its derivative must dominate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Floor {
    Zero,
    /// `sqrt(2u)`.
    Sqrt,
    /// `u (1 + u)`.
    Quadratic,
    /// Values on the builder's argument grid (`0` followed by `t_i^2 / 2`).
    Sampled(Vec<f64>),
}

impl Floor {
    fn values(&self, u_grid: &[f64]) -> Result<Vec<f64>> {
        let values: Vec<f64> = match self {
            Floor::Zero => vec![0.0; u_grid.len()],
            Floor::Sqrt => u_grid.iter().map(|u| (2.0 * u).sqrt()).collect(),
            Floor::Quadratic => u_grid.iter().map(|u| u * (1.0 + u)).collect(),
            Floor::Sampled(v) => {
                if v.len() < u_grid.len() {
                    return Err(Error::arg("floor", "too few samples for the grid"));
                }
                v[..u_grid.len()].to_vec()
            }
        };
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::arg("floor", "must be finite and nonnegative"));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuilderParams {
    /// Growth rate in condition `c(u) e^{-eps u} > 1`, increasing.
    pub epsilon: f64,
    /// Divergence target the result must meet on the profile.
    pub target: f64,
}

impl Default for BuilderParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            target: DEFAULT_TARGET,
        }
    }
}

/// Output of [`build_admissible`] with the intermediates of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltAdmissible {
    pub function: AdmissibleFunction,
    pub u_grid: Vec<f64>,
    pub floor: Vec<f64>,
    /// Lower envelope `r(u) = C e^{eps u}`.
    pub r_values: Vec<f64>,
    pub c_values: Vec<f64>,
    /// `int_u^inf dtau / c(tau)`.
    pub tail_integral: Vec<f64>,
    pub report: AdmissibilityReport,
}

// int_{x0}^{x1} exp(-(l0 + beta (x - x0))) dx
fn exp_segment_integral(l0: f64, beta: f64, len: f64) -> f64 {
    let z = beta * len;
    if z.abs() < 1e-12 {
        len * (-l0).exp()
    } else {
        (-l0).exp() * (-(-z).exp_m1()) / beta
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Builds an admissible `s` with `s >= kappa` and `s' >= kappa` on the grid.
///
/// * `r(u) = C e^{eps u}` with `C` the smallest constant `>= 1` putting `r`
///   above the floor; `r'^2 / r'' = r`.
/// * `c` is the pointwise maximum of `kappa / eps`, `(2 + u) e^{eps u}`, `r`
///   and `(2 + u) e^{eps u} b t / a`, then lifted so that `c e^{-eps u}`
///   strictly increases; between knots `ln c` is linear and past the last
///   knot `c(u) = c(T) e^{eps (u - T)}`.
/// * `s(u) = r(0) + int_0^u dv / I(v)` with `I(v) = int_v^inf dtau / c(tau)`,
///   evaluated exactly for the piecewise exponential `c` and by Gauss-Legendre
///   quadrature in `v`.
///
/// The argument grid is `0` followed by `t_i^2 / 2` for the profile levels,
/// truncated where `c` would leave floating-point range.
pub fn build_admissible(
    profile: &LevelSetProfile,
    floor: &Floor,
    params: BuilderParams,
) -> Result<BuiltAdmissible> {
    let eps = params.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::arg("epsilon", "must be positive"));
    }
    let u_cap = 500.0 / eps;
    let mut levels: Vec<usize> = (0..profile.len())
        .filter(|&i| level_to_argument(profile.t_grid[i]) <= u_cap)
        .collect();
    if levels.len() < 4 {
        return Err(Error::GridTooShort(format!(
            "need at least 4 levels with t^2/2 <= {u_cap}, got {}",
            levels.len()
        )));
    }
    if let Some(&last) = levels.last() {
        if !(profile.a_values[last] > 0.0) {
            return Err(Error::TamingViolated {
                t: profile.t_grid[last],
            });
        }
    }
    // Levels with a(t) = 0 must not reach into the tail.
    if let Some(pos) = levels.iter().rposition(|&i| !(profile.a_values[i] > 0.0)) {
        if pos + 3 >= levels.len() {
            return Err(Error::TamingViolated {
                t: profile.t_grid[levels[pos]],
            });
        }
    }
    if level_to_argument(profile.t_grid[levels[0]]) <= 0.0 {
        levels.remove(0);
    }

    let mut u_grid = vec![0.0];
    u_grid.extend(levels.iter().map(|&i| level_to_argument(profile.t_grid[i])));
    let kappa = floor.values(&u_grid)?;

    let constant = kappa
        .iter()
        .zip(&u_grid)
        .map(|(k, u)| k * (-eps * u).exp())
        .fold(1.0, f64::max);
    let r_values: Vec<f64> = u_grid.iter().map(|u| constant * (eps * u).exp()).collect();

    let raw: Vec<f64> = u_grid
        .iter()
        .enumerate()
        .map(|(j, &u)| {
            let growth = (2.0 + u) * (eps * u).exp();
            let mut c = (kappa[j] / eps).max(growth).max(r_values[j]);
            if j > 0 {
                let i = levels[j - 1];
                let a = profile.a_values[i];
                if a > 0.0 {
                    c = c.max(growth * profile.b_values[i] * profile.t_grid[i] / a);
                }
            }
            c
        })
        .collect();
    // Lift so that h = c e^{-eps u} is strictly increasing.
    let mut log_c = Vec::with_capacity(raw.len());
    let mut h_prev = f64::NEG_INFINITY;
    for (j, (&c, &u)) in raw.iter().zip(&u_grid).enumerate() {
        let h = c * (-eps * u).exp();
        let h = if j == 0 { h } else { h.max(h_prev + (u - u_grid[j - 1])) };
        h_prev = h;
        log_c.push(h.ln() + eps * u);
    }
    let c_values: Vec<f64> = log_c.iter().map(|l| l.exp()).collect();
    if c_values.iter().any(|c| !c.is_finite()) {
        return Err(Error::GridTooShort("auxiliary function overflowed".into()));
    }

    let m = u_grid.len();
    let mut tail = vec![0.0; m];
    tail[m - 1] = 1.0 / (eps * c_values[m - 1]);
    let slope = |j: usize| (log_c[j + 1] - log_c[j]) / (u_grid[j + 1] - u_grid[j]);
    for j in (0..m - 1).rev() {
        tail[j] = tail[j + 1] + exp_segment_integral(log_c[j], slope(j), u_grid[j + 1] - u_grid[j]);
    }
    // I(v) for v inside segment j.
    let tail_at = |j: usize, v: f64| {
        let beta = slope(j);
        let l_v = log_c[j] + beta * (v - u_grid[j]);
        tail[j + 1] + exp_segment_integral(l_v, beta, u_grid[j + 1] - v)
    };

    let mut s_values = vec![r_values[0]];
    for j in 0..m - 1 {
        let (x0, x1) = (u_grid[j], u_grid[j + 1]);
        let half = 0.5 * (x1 - x0);
        let mid = 0.5 * (x0 + x1);
        let integral: f64 = GAUSS5
            .iter()
            .map(|(x, w)| w / tail_at(j, mid + half * x))
            .sum::<f64>()
            * half;
        s_values.push(s_values[j] + integral);
    }
    let knots: Vec<Knot> = (0..m)
        .map(|j| {
            let ds = 1.0 / tail[j];
            Knot {
                t: u_grid[j],
                s: s_values[j],
                s_prime: ds,
                s_second: Some(ds * (ds / c_values[j])),
            }
        })
        .collect();
    let function = AdmissibleFunction::Grid(GridFunction::new(knots, Some(eps))?);
    let report = verify_admissible(&function, profile, params.target)?;
    if !report.pass {
        return Err(Error::GridTooShort(format!(
            "built function does not certify divergence: {}",
            report.reason.clone().unwrap_or_default()
        )));
    }
    Ok(BuiltAdmissible {
        function,
        u_grid,
        floor: kappa,
        r_values,
        c_values,
        tail_integral: tail,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_geometry::{level_set_profile, log_grid, WeightedAction};

    fn c1_profile() -> LevelSetProfile {
        let a = WeightedAction::new(vec![1], 0).unwrap();
        level_set_profile(&a, &log_grid(0.1, 1e8, 300), 16, 1).unwrap()
    }

    #[test]
    fn sqrt_values() {
        let s = reference_sqrt();
        assert!((s.value(2.0) - 2.0).abs() < 1e-15);
        assert!((s.derivative(2.0) - 0.5).abs() < 1e-15);
        assert!((s.value(0.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sqrt_cap_is_c2_and_increasing() {
        let below = sqrt_jet(1.0 - 1e-12);
        let above = sqrt_jet(1.0);
        assert!((below.s - above.s).abs() < 1e-10);
        assert!((below.ds - above.ds).abs() < 1e-10);
        assert!((below.dds - above.dds).abs() < 1e-10);
        for i in 0..=1000 {
            assert!(sqrt_jet(i as f64 / 1000.0).ds > 0.0);
        }
    }

    #[test]
    fn sqrt_passes_on_c1() {
        let r = verify_admissible(&reference_sqrt(), &c1_profile(), DEFAULT_TARGET).unwrap();
        assert!(r.pass, "{:?}", r.reason);
    }

    #[test]
    fn constant_fails() {
        let p = c1_profile();
        let r = verify_admissible(&AdmissibleFunction::constant(1.0), &p, DEFAULT_TARGET).unwrap();
        assert!(!r.pass);
        assert_eq!(r.first_offending_t, Some(p.t_grid[0]));
    }

    #[test]
    fn combine_rejects_nonpositive() {
        let s = reference_sqrt();
        assert!(convex_combine(&s, &s, 0.0, 1.0).is_err());
        assert!(convex_combine(&s, &s, 1.0, -1.0).is_err());
    }

    #[test]
    fn equal_halves_reproduce() {
        let s = reference_sqrt();
        let c = convex_combine(&s, &s, 0.5, 0.5).unwrap();
        for u in [0.0, 0.3, 1.0, 2.0, 17.0] {
            assert!((c.value(u) - s.value(u)).abs() < 1e-14);
            assert!((c.derivative(u) - s.derivative(u)).abs() < 1e-14);
        }
    }

    #[test]
    fn twist_zero_matches_verify() {
        let p = c1_profile();
        let s = reference_sqrt();
        assert_eq!(
            admissible_for_twist(&s, &p, 0, DEFAULT_TARGET).unwrap(),
            verify_admissible(&s, &p, DEFAULT_TARGET).unwrap()
        );
        assert!(admissible_for_twist(&s, &p, -1, DEFAULT_TARGET).is_err());
    }

    #[test]
    fn grid_hermite_reproduces_cubic() {
        let f = |u: f64| 1.0 + u + 0.5 * u * u * u;
        let df = |u: f64| 1.0 + 1.5 * u * u;
        let knots = (0..5)
            .map(|i| {
                let u = i as f64;
                Knot {
                    t: u,
                    s: f(u),
                    s_prime: df(u),
                    s_second: Some(3.0 * u),
                }
            })
            .collect();
        let g = AdmissibleFunction::Grid(GridFunction::new(knots, None).unwrap());
        for u in [0.25, 1.5, 3.9] {
            assert!((g.value(u) - f(u)).abs() < 1e-12);
        }
        assert!(g.value(5.0).is_nan());
    }

    #[test]
    fn builder_rejects_untamed_profile() {
        let mut q = crate::model_geometry::level_set_profile(
            &WeightedAction::new(vec![1], 0).unwrap(),
            &log_grid(0.5, 25.0, 40),
            4,
            0,
        )
        .unwrap();
        q.a_values[39] = 0.0;
        assert!(matches!(
            build_admissible(&q, &Floor::Zero, BuilderParams::default()),
            Err(Error::TamingViolated { .. })
        ));
    }

    #[test]
    fn builder_rejects_short_grid() {
        let q = crate::model_geometry::level_set_profile(
            &WeightedAction::new(vec![1], 0).unwrap(),
            &[0.5, 1.0, 1.5],
            4,
            0,
        )
        .unwrap();
        assert!(matches!(
            build_admissible(&q, &Floor::Zero, BuilderParams::default()),
            Err(Error::GridTooShort(_))
        ));
    }

    #[test]
    fn json_round_trip_keeps_interpolation() {
        let q = crate::model_geometry::level_set_profile(
            &WeightedAction::new(vec![1], 0).unwrap(),
            &log_grid(0.05, 25.0, 120),
            4,
            0,
        )
        .unwrap();
        let built = build_admissible(&q, &Floor::Sqrt, BuilderParams::default()).unwrap();
        let text = serde_json::to_string(&built.function).unwrap();
        let back = AdmissibleFunction::from_json(&text).unwrap();
        for u in [0.01, 0.7, 3.3, 100.0] {
            assert_eq!(back.eval(u), built.function.eval(u));
        }
    }
}
