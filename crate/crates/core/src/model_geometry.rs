//! Flat model geometry: `C^n` with the circle acting by
//! `z_j -> exp(-i lambda_j theta) z_j` and twisted by the character `V_k`.
//!
//! Points of `C^n` are passed as `2n` reals in interleaved order
//! `(re z_1, im z_1, re z_2, im z_2, ...)`. The metric is the flat one,
//! `J` is multiplication by `i`, and the moment map is
//! `mu(z) = sum lambda_j |z_j|^2 / 2`. The scalar product on the Lie algebra
//! is the standard one, so the taming map is `mu` itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights of the circle action together with the twist of the trivial line bundle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightedAction {
    weights: Vec<u32>,
    twist: i64,
}

impl WeightedAction {
    pub fn new(weights: Vec<u32>, twist: i64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("at least one weight is required".into()));
        }
        if let Some(w) = weights.iter().find(|&&w| w == 0) {
            return Err(Error::InvalidWeights(format!(
                "weights must be positive integers, got {w}"
            )));
        }
        Ok(Self { weights, twist })
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn twist(&self) -> i64 {
        self.twist
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn min_weight(&self) -> f64 {
        f64::from(*self.weights.iter().min().expect("nonempty"))
    }

    pub fn max_weight(&self) -> f64 {
        f64::from(*self.weights.iter().max().expect("nonempty"))
    }

    /// Upper bound for the weights of the isotropy action on
    /// `E_k (x) Lambda(T^{0,1})^*`: every form degree carries a partial sum of
    /// the `lambda_j`, shifted by the twist.
    pub fn form_weight_bound(&self) -> f64 {
        self.weights.iter().map(|&w| f64::from(w)).sum::<f64>() + self.twist.unsigned_abs() as f64
    }

    pub(crate) fn check_point(&self, z: &[f64]) {
        assert_eq!(
            z.len(),
            2 * self.dim(),
            "point must have 2n = {} real coordinates",
            2 * self.dim()
        );
    }

    /// Applies the group element `exp(i theta)` to `z`.
    pub fn act(&self, theta: f64, z: &[f64]) -> Vec<f64> {
        self.check_point(z);
        let mut out = Vec::with_capacity(z.len());
        for (j, &w) in self.weights.iter().enumerate() {
            let (s, c) = (-(f64::from(w)) * theta).sin_cos();
            let (x, y) = (z[2 * j], z[2 * j + 1]);
            out.push(c * x - s * y);
            out.push(s * x + c * y);
        }
        out
    }
}

fn modulus_squares(z: &[f64]) -> impl Iterator<Item = f64> + '_ {
    z.chunks_exact(2).map(|p| p[0] * p[0] + p[1] * p[1])
}

/// `mu(z) = sum lambda_j |z_j|^2 / 2`.
pub fn moment_map(action: &WeightedAction, z: &[f64]) -> f64 {
    action.check_point(z);
    action
        .weights
        .iter()
        .zip(modulus_squares(z))
        .map(|(&w, m2)| f64::from(w) * m2)
        .sum::<f64>()
        / 2.0
}

/// `|grad mu|^2 = sum lambda_j^2 |z_j|^2`.
pub fn moment_gradient_norm2(action: &WeightedAction, z: &[f64]) -> f64 {
    action.check_point(z);
    action
        .weights
        .iter()
        .zip(modulus_squares(z))
        .map(|(&w, m2)| f64::from(w).powi(2) * m2)
        .sum()
}

/// The taming field `v = -J grad(mu^2 / 2)` in real coordinates.
pub fn taming_field(action: &WeightedAction, z: &[f64]) -> Vec<f64> {
    let mu = moment_map(action, z);
    let mut v = Vec::with_capacity(z.len());
    for (j, &w) in action.weights.iter().enumerate() {
        // grad mu = (lambda x, lambda y); -J (a, b) = (b, -a).
        let (gx, gy) = (f64::from(w) * z[2 * j], f64::from(w) * z[2 * j + 1]);
        v.push(mu * gy);
        v.push(-mu * gx);
    }
    v
}

/// `|v|^2 = mu^2 sum lambda_j^2 |z_j|^2`.
pub fn taming_field_norm2(action: &WeightedAction, z: &[f64]) -> f64 {
    let mu = moment_map(action, z);
    mu * mu * moment_gradient_norm2(action, z)
}

/// Closed-form bound of the operator norm of `nabla v`.
///
/// `nabla v = -(J grad mu) (x) d mu - mu J Hess(mu)`, hence
/// `||nabla v|| <= |grad mu|^2 + mu lambda_max`.
pub fn covariant_derivative_bound(action: &WeightedAction, z: &[f64]) -> f64 {
    moment_gradient_norm2(action, z) + moment_map(action, z) * action.max_weight()
}

fn nu_from_parts(action: &WeightedAction, mu: f64, grad2: f64) -> f64 {
    let v_norm = mu * grad2.sqrt();
    let nabla_v = grad2 + mu * action.max_weight();
    let moment_endo = mu * action.form_weight_bound();
    mu + nabla_v + moment_endo + v_norm + 1.0
}

/// Upper bound for `nu = |bfv| + ||nabla v|| + ||mu^E(bfv)|| + |v| + 1`.
pub fn nu_bound(action: &WeightedAction, z: &[f64]) -> f64 {
    let mu = moment_map(action, z);
    let grad2 = moment_gradient_norm2(action, z);
    nu_from_parts(action, mu, grad2)
}

/// Sampled extremal quantities over the level sets `{ mu = t }`.
///
/// `a` is the minimum of `|v|^2`, `b` the maximum of `|d mu| |v| + nu + 1`.
/// The two summands of `b` are also kept separately (`dmu_v_max`, `nu_max`)
/// since the admissibility check can use the sharper split bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetProfile {
    pub weights: Vec<u32>,
    pub twist: i64,
    pub t_grid: Vec<f64>,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub dmu_v_max: Vec<f64>,
    pub nu_max: Vec<f64>,
    pub samples_per_level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

impl LevelSetProfile {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn records(&self) -> Vec<ProfileRecord> {
        self.t_grid
            .iter()
            .zip(&self.a_values)
            .zip(&self.b_values)
            .map(|((&t, &a), &b)| ProfileRecord { t, a, b })
            .collect()
    }
}

struct LevelStats {
    a: f64,
    b: f64,
    dmu_v: f64,
    nu: f64,
}

fn level_stats(action: &WeightedAction, t: f64, samples: usize, seed: u64, level: usize) -> LevelStats {
    let lambdas: Vec<f64> = action.weights.iter().map(|&w| f64::from(w)).collect();
    let n = lambdas.len();
    let mut stats = LevelStats {
        a: f64::INFINITY,
        b: 0.0,
        dmu_v: 0.0,
        nu: 0.0,
    };
    // On { mu = t } write lambda_j |z_j|^2 = 2 t w_j with w on the simplex;
    // everything depends only on sum lambda_j w_j.
    let mut record = |w: &[f64]| {
        let grad2: f64 = 2.0 * t * w.iter().zip(&lambdas).map(|(wi, l)| wi * l).sum::<f64>();
        let v2 = t * t * grad2;
        let dmu_v = t * grad2;
        let nu = nu_from_parts(action, t, grad2);
        stats.a = stats.a.min(v2);
        stats.dmu_v = stats.dmu_v.max(dmu_v);
        stats.nu = stats.nu.max(nu);
        stats.b = stats.b.max(dmu_v + nu + 1.0);
    };
    let mut w = vec![0.0; n];
    for j in 0..n {
        w.iter_mut().for_each(|x| *x = 0.0);
        w[j] = 1.0;
        record(&w);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..samples {
        let mut total = 0.0;
        for x in w.iter_mut() {
            let u: f64 = rng.random::<f64>();
            *x = -(1.0 - u).ln();
            total += *x;
        }
        w.iter_mut().for_each(|x| *x /= total);
        record(&w);
    }
    stats
}

/// Samples `a(t)` and `b(t)` on every level of `t_grid` (here `t = mu`).
///
/// Each level uses its own RNG stream derived from `seed` and the level index,
/// so raising `samples_per_level` only adds samples.
pub fn level_set_profile(
    action: &WeightedAction,
    t_grid: &[f64],
    samples_per_level: usize,
    seed: u64,
) -> Result<LevelSetProfile> {
    if samples_per_level == 0 {
        return Err(Error::arg("samples_per_level", "must be at least 1"));
    }
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::arg("t_grid", format!("levels must be positive, got {t}")));
    }
    if t_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::arg("t_grid", "levels must be strictly increasing"));
    }
    let stats: Vec<LevelStats> = t_grid
        .par_iter()
        .enumerate()
        .map(|(i, &t)| level_stats(action, t, samples_per_level, seed, i))
        .collect();
    Ok(LevelSetProfile {
        weights: action.weights.clone(),
        twist: action.twist,
        t_grid: t_grid.to_vec(),
        a_values: stats.iter().map(|s| s.a).collect(),
        b_values: stats.iter().map(|s| s.b).collect(),
        dmu_v_max: stats.iter().map(|s| s.dmu_v).collect(),
        nu_max: stats.iter().map(|s| s.nu).collect(),
        samples_per_level,
    })
}

/// Logarithmically spaced levels on `[t_min, t_max]`.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max > t_min && points >= 2);
    let (l0, l1) = (t_min.ln(), t_max.ln());
    (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(w: &[u32]) -> WeightedAction {
        WeightedAction::new(w.to_vec(), 0).unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(WeightedAction::new(vec![], 0).is_err());
        assert!(WeightedAction::new(vec![1, 0], 0).is_err());
    }

    #[test]
    fn moment_map_examples() {
        assert_eq!(moment_map(&act(&[1]), &[0.0, 0.0]), 0.0);
        assert!((moment_map(&act(&[1, 2]), &[1.0, 0.0, 1.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!((moment_map(&act(&[3]), &[0.0, 2.0]) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn taming_norm_examples() {
        assert_eq!(taming_field_norm2(&act(&[1]), &[0.0, 0.0]), 0.0);
        let s = 2f64.sqrt();
        assert!((taming_field_norm2(&act(&[1]), &[1.0, 1.0]) - 2.0).abs() < 1e-12);
        assert!((taming_field_norm2(&act(&[1, 2]), &[s, 0.0, 0.0, 0.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nu_at_origin_is_one() {
        assert_eq!(nu_bound(&act(&[1, 3]), &[0.0; 4]), 1.0);
    }

    #[test]
    fn nu_dominates_simple_terms() {
        let a = act(&[1]);
        let z = [1.0, 1.0];
        assert!(nu_bound(&a, &z) >= 1.0 + 2f64.sqrt() + 1.0);
    }

    #[test]
    fn profile_rejects_nonpositive_levels() {
        assert!(level_set_profile(&act(&[1]), &[0.0, 1.0], 10, 0).is_err());
        assert!(level_set_profile(&act(&[1]), &[1.0], 0, 0).is_err());
    }

    #[test]
    fn profile_examples() {
        let p = level_set_profile(&act(&[1]), &[1.0], 50, 7).unwrap();
        assert!((p.a_values[0] - 2.0).abs() < 1e-12);
        let p = level_set_profile(&act(&[1, 2]), &[1.0], 50, 7).unwrap();
        assert!((p.a_values[0] - 2.0).abs() < 1e-12);
        assert!(p.b_values[0] >= 1.0);
    }

    #[test]
    fn profile_is_deterministic() {
        let g = log_grid(0.5, 50.0, 9);
        let p1 = level_set_profile(&act(&[1, 2, 5]), &g, 100, 3).unwrap();
        let p2 = level_set_profile(&act(&[1, 2, 5]), &g, 100, 3).unwrap();
        assert_eq!(p1, p2);
    }
}
