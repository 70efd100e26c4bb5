//! Lowest eigenpairs of symmetric tridiagonal matrices.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration with a partially pivoted tridiagonal solve. Every returned pair
//! carries its residual `|A v - theta v|`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// Residual certificate relative to the matrix scale.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            diag.is_empty() && off.is_empty() || off.len() + 1 == diag.len(),
            "off-diagonal must be one shorter than the diagonal"
        );
        Self { diag, off }
    }

    pub fn from_diagonal(diag: Vec<f64>) -> Self {
        let off = vec![0.0; diag.len().saturating_sub(1)];
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Max-norm scale used for tolerances.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE.sqrt() * self.scale().max(1.0);
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            d = self.diag[i] - x - b2 / d;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let pad = f64::EPSILON * self.scale();
        lo -= pad;
        hi += pad;
        let floor = 0.5 * f64::EPSILON * self.scale();
        for _ in 0..256 {
            let width = hi - lo;
            if width <= (2.0 * f64::EPSILON * lo.abs().max(hi.abs())).max(floor) {
                break;
            }
            let mid = lo + 0.5 * width;
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo + 0.5 * (hi - lo)
    }

    /// Solves `(A - shift) x = rhs` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let tiny = f64::EPSILON * self.scale();
        // Rows carry (sub, diag, sup, sup2) after pivoting.
        let mut d: Vec<f64> = self.diag.iter().map(|a| a - shift).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut dl: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                b[i + 1] -= f * b[i];
                dl[i] = 0.0;
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                du[i] = tmp;
                b.swap(i, i + 1);
                b[i + 1] -= f * b[i];
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= du[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= du2[i] * x[i + 2];
            }
            x[i] = v / d[i];
        }
        x
    }

    fn residual(&self, value: f64, v: &[f64]) -> f64 {
        self.matvec(v)
            .iter()
            .zip(v)
            .map(|(av, x)| (av - value * x).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Eigenvector for an eigenvalue approximation, orthogonal to `previous`.
    pub fn eigenvector(&self, value: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.len();
        let shift = value + 4.0 * f64::EPSILON * self.scale();
        // Deterministic, generic start vector.
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_75).fract())
            .collect();
        for _ in 0..6 {
            orthogonalize(&mut x, previous);
            normalize(&mut x);
            x = self.shifted_solve(shift, &x);
        }
        orthogonalize(&mut x, previous);
        normalize(&mut x);
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        x.iter_mut().zip(q).for_each(|(v, qi)| *v -= c * qi);
    }
}

/// The `count` smallest eigenpairs, each certified by its residual.
pub fn low_spectrum(matrix: &SymTridiagonal, count: usize) -> Result<Vec<EigenPair>> {
    if count > matrix.len() {
        return Err(Error::arg(
            "count",
            format!("requested {count} eigenvalues of a {0}x{0} matrix", matrix.len()),
        ));
    }
    let scale = matrix.scale();
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(count);
    for k in 0..count {
        let value = matrix.eigenvalue(k);
        // Orthogonalize only against numerically close eigenvalues.
        let close: Vec<Vec<f64>> = pairs
            .iter()
            .filter(|p| (p.value - value).abs() <= 1e-3 * scale.max(1.0))
            .map(|p| p.vector.clone())
            .collect();
        let vector = matrix.eigenvector(value, &close);
        let residual = matrix.residual(value, &vector);
        if !(residual <= RESIDUAL_TOLERANCE * scale) {
            return Err(Error::NonConvergence(format!(
                "eigenpair {k}: residual {residual:e} exceeds {:e} (value {value:e}, scale {scale:e})",
                RESIDUAL_TOLERANCE * scale
            )));
        }
        pairs.push(EigenPair {
            value,
            vector,
            residual,
        });
    }
    Ok(pairs)
}
