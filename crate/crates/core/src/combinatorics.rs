//! Exact background Betti numbers of `(C^n, E_k)`.
//!
//! The degree-zero background cohomology in the isotypic component `V_m` is
//! spanned by the monomials `z^alpha` with `sum lambda_j alpha_j = m - k`,
//! and every higher degree vanishes. Everything here therefore reduces to
//! the denumerant of the weight vector.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_geometry::WeightedAction;

/// Weight `m` of the one-dimensional representation `V_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IrrepLabel(pub i64);

impl IrrepLabel {
    pub fn value(self) -> i64 {
        self.0
    }
}

impl From<i64> for IrrepLabel {
    fn from(m: i64) -> Self {
        IrrepLabel(m)
    }
}

#[derive(Debug, Clone)]
enum Table {
    Small(Vec<u64>),
    Big(Vec<BigUint>),
}

impl Table {
    fn len(&self) -> usize {
        match self {
            Table::Small(v) => v.len(),
            Table::Big(v) => v.len(),
        }
    }

    fn get(&self, t: usize) -> BigUint {
        match self {
            Table::Small(v) => BigUint::from(v[t]),
            Table::Big(v) => v[t].clone(),
        }
    }
}

/// Coin-change recursion over `prod 1/(1 - x^lambda)`, in `u64` while it fits.
fn fill_table(weights: &[u32], t_max: usize) -> Table {
    let mut small = vec![0u64; t_max + 1];
    small[0] = 1;
    let mut overflow = false;
    'outer: for &w in weights {
        let w = w as usize;
        for t in w..=t_max {
            match small[t].checked_add(small[t - w]) {
                Some(v) => small[t] = v,
                None => {
                    overflow = true;
                    break 'outer;
                }
            }
        }
    }
    if !overflow {
        return Table::Small(small);
    }
    let mut big = vec![BigUint::zero(); t_max + 1];
    big[0] = BigUint::from(1u8);
    for &w in weights {
        let w = w as usize;
        for t in w..=t_max {
            let prev = big[t - w].clone();
            big[t] += prev;
        }
    }
    Table::Big(big)
}

fn validate_weights(weights: &[u32]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("at least one weight is required".into()));
    }
    if weights.contains(&0) {
        return Err(Error::InvalidWeights("weights must be positive".into()));
    }
    Ok(())
}

/// Shared denumerant tables keyed by the sorted weight vector.
///
/// A table is extended (refilled) when a larger `t` is requested; readers
/// never see a partially filled table.
#[derive(Debug, Default)]
pub struct DenumerantCache {
    tables: RwLock<HashMap<Vec<u32>, Arc<Table>>>,
}

impl DenumerantCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache used by the free functions of this module.
    pub fn global() -> &'static DenumerantCache {
        static CACHE: OnceLock<DenumerantCache> = OnceLock::new();
        CACHE.get_or_init(DenumerantCache::new)
    }

    fn table(&self, weights: &[u32], t: usize) -> Arc<Table> {
        let mut key = weights.to_vec();
        key.sort_unstable();
        if let Some(table) = self.tables.read().expect("cache poisoned").get(&key) {
            if table.len() > t {
                return Arc::clone(table);
            }
        }
        let mut guard = self.tables.write().expect("cache poisoned");
        if let Some(table) = guard.get(&key) {
            if table.len() > t {
                return Arc::clone(table);
            }
        }
        // Grow geometrically so that scanning windows does not refill every step.
        let t_max = guard
            .get(&key)
            .map_or(t, |old| t.max(2 * old.len()));
        let table = Arc::new(fill_table(&key, t_max));
        guard.insert(key, Arc::clone(&table));
        table
    }

    pub fn denumerant(&self, weights: &[u32], t: i64) -> Result<BigUint> {
        validate_weights(weights)?;
        if t < 0 {
            return Ok(BigUint::zero());
        }
        let t = usize::try_from(t).map_err(|_| Error::arg("t", "too large"))?;
        Ok(self.table(weights, t).get(t))
    }
}

/// Number of nonnegative integer solutions of `sum lambda_j m_j = t`.
pub fn denumerant(weights: &[u32], t: i64) -> Result<BigUint> {
    DenumerantCache::global().denumerant(weights, t)
}

/// [`denumerant`] narrowed to `u64`; panics if the count does not fit.
pub fn denumerant_u64(weights: &[u32], t: i64) -> Result<u64> {
    denumerant(weights, t).map(|d| d.to_u64().expect("denumerant exceeds u64"))
}

/// `beta^p_{bg, V_m}(C^n, E_k)`.
pub fn background_betti(action: &WeightedAction, m: IrrepLabel, p: usize) -> Result<BigUint> {
    if p > action.dim() {
        return Err(Error::arg(
            "p",
            format!("degree {p} outside 0..={}", action.dim()),
        ));
    }
    if p > 0 {
        return Ok(BigUint::zero());
    }
    denumerant(action.weights(), m.0 - action.twist())
}

/// Multiplicities `beta^p` over a finite window of labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiTable {
    pub action: WeightedAction,
    pub window: (i64, i64),
    /// `entries[&m][p]` for `p = 0..=n`.
    pub entries: BTreeMap<IrrepLabel, Vec<BigUint>>,
}

impl BettiTable {
    pub fn get(&self, m: IrrepLabel, p: usize) -> Option<&BigUint> {
        self.entries.get(&m).and_then(|row| row.get(p))
    }
}

/// Inclusive window of labels; `lo > hi` denotes the empty window.
pub fn label_window(lo: i64, hi: i64) -> impl Iterator<Item = IrrepLabel> {
    (lo..=hi).map(IrrepLabel)
}

pub fn betti_table(action: &WeightedAction, lo: i64, hi: i64) -> Result<BettiTable> {
    let mut entries = BTreeMap::new();
    for m in label_window(lo, hi) {
        let row = (0..=action.dim())
            .map(|p| background_betti(action, m, p))
            .collect::<Result<Vec<_>>>()?;
        entries.insert(m, row);
    }
    Ok(BettiTable {
        action: action.clone(),
        window: (lo, hi),
        entries,
    })
}

/// The index `m^+ - m^- = sum_p (-1)^p beta^p` over a window of labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCharacter {
    pub action: WeightedAction,
    pub window: (i64, i64),
    pub entries: BTreeMap<IrrepLabel, i128>,
}

impl IndexCharacter {
    pub fn get(&self, m: IrrepLabel) -> Option<i128> {
        self.entries.get(&m).copied()
    }

    pub fn values(&self) -> Vec<i128> {
        self.entries.values().copied().collect()
    }
}

pub fn index_character(action: &WeightedAction, lo: i64, hi: i64) -> Result<IndexCharacter> {
    let table = betti_table(action, lo, hi)?;
    let entries = table
        .entries
        .iter()
        .map(|(&m, row)| {
            let chi = row.iter().enumerate().fold(0i128, |acc, (p, b)| {
                let b = b.to_i128().expect("multiplicity exceeds i128");
                if p % 2 == 0 {
                    acc + b
                } else {
                    acc - b
                }
            });
            (m, chi)
        })
        .collect();
    Ok(IndexCharacter {
        action: action.clone(),
        window: (lo, hi),
        entries,
    })
}

/// Exponent tuples of the monomials spanning the `V_m` component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    pub degree_sum: i64,
    pub exponents: Vec<Vec<u64>>,
}

impl MonomialBasis {
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }
}

/// All solutions of `sum lambda_j m_j = m - k`, sorted lexicographically.
pub fn monomial_basis(action: &WeightedAction, m: IrrepLabel) -> MonomialBasis {
    let target = m.0 - action.twist();
    let mut exponents = Vec::new();
    if target >= 0 {
        let mut current = Vec::with_capacity(action.dim());
        enumerate(action.weights(), target as u64, &mut current, &mut exponents);
    }
    MonomialBasis {
        degree_sum: target,
        exponents,
    }
}

fn enumerate(weights: &[u32], remaining: u64, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    match weights {
        [] => {
            if remaining == 0 {
                out.push(current.clone());
            }
        }
        [w, rest @ ..] => {
            let w = u64::from(*w);
            for e in 0..=remaining / w {
                current.push(e);
                enumerate(rest, remaining - e * w, current, out);
                current.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(w: &[u32], t: i64) -> u64 {
        denumerant_u64(w, t).unwrap()
    }

    #[test]
    fn denumerant_examples() {
        assert_eq!(d(&[1], 7), 1);
        assert_eq!(d(&[2], 3), 0);
        assert_eq!(d(&[1, 2], 4), 3);
        assert_eq!(d(&[3, 5, 7], 0), 1);
        assert_eq!(d(&[1, 2], -1), 0);
    }

    #[test]
    fn denumerant_rejects_bad_weights() {
        assert!(denumerant(&[], 3).is_err());
        assert!(denumerant(&[1, 0], 3).is_err());
    }

    #[test]
    fn big_values_promote() {
        // C(t + 19, 19) for twenty unit weights is far beyond u64 at t = 5000.
        let w = [1u32; 20];
        let t = 5000i64;
        let expected = (1..=19u32).fold(BigUint::from(1u8), |acc, i| {
            acc * BigUint::from(t as u64 + u64::from(i))
        }) / (1..=19u32).fold(BigUint::from(1u8), |acc, i| acc * BigUint::from(i));
        assert!(expected > BigUint::from(u64::MAX));
        assert_eq!(DenumerantCache::new().denumerant(&w, t).unwrap(), expected);
    }

    #[test]
    fn cache_is_symmetric_in_weights() {
        let c = DenumerantCache::new();
        assert_eq!(c.denumerant(&[3, 1, 2], 40).unwrap(), c.denumerant(&[1, 2, 3], 40).unwrap());
    }

    #[test]
    fn betti_examples() {
        let a = WeightedAction::new(vec![1, 1], 0).unwrap();
        assert_eq!(background_betti(&a, IrrepLabel(3), 0).unwrap(), BigUint::from(4u8));
        assert_eq!(background_betti(&a, IrrepLabel(3), 2).unwrap(), BigUint::zero());
        assert!(background_betti(&a, IrrepLabel(3), 3).is_err());
        let a = WeightedAction::new(vec![1, 2], 1).unwrap();
        assert_eq!(background_betti(&a, IrrepLabel(5), 0).unwrap(), BigUint::from(3u8));
    }

    #[test]
    fn index_examples() {
        let a = WeightedAction::new(vec![1], 0).unwrap();
        assert_eq!(index_character(&a, -2, 2).unwrap().values(), vec![0, 0, 1, 1, 1]);
        let a = WeightedAction::new(vec![2], 0).unwrap();
        assert_eq!(index_character(&a, 0, 4).unwrap().values(), vec![1, 0, 1, 0, 1]);
        let a = WeightedAction::new(vec![1, 1], 3).unwrap();
        assert_eq!(index_character(&a, 3, 3).unwrap().values(), vec![1]);
        assert!(index_character(&a, 1, 0).unwrap().entries.is_empty());
    }

    #[test]
    fn monomial_examples() {
        let a = WeightedAction::new(vec![1, 2], 0).unwrap();
        assert_eq!(
            monomial_basis(&a, IrrepLabel(4)).exponents,
            vec![vec![0, 2], vec![2, 1], vec![4, 0]]
        );
        assert!(monomial_basis(&a, IrrepLabel(-1)).is_empty());
        let a = WeightedAction::new(vec![1], 2).unwrap();
        assert_eq!(monomial_basis(&a, IrrepLabel(2)).exponents, vec![vec![0]]);
    }
}
