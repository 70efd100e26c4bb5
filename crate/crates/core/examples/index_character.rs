//! Index character of a twisted action, next to the monomials behind it.

use bgcoh::combinatorics::{index_character, monomial_basis, IrrepLabel};
use bgcoh::model_geometry::WeightedAction;

fn main() -> bgcoh::Result<()> {
    let action = WeightedAction::new(vec![2, 3], 1)?;
    let chi = index_character(&action, -1, 10)?;
    for (m, value) in &chi.entries {
        let basis = monomial_basis(&action, *m);
        let shown: Vec<String> = basis.exponents.iter().map(|e| format!("{e:?}")).collect();
        println!("m={:3}  index={value}  monomials {}", m.0, shown.join(" "));
    }
    assert_eq!(chi.get(IrrepLabel(7)), Some(2));
    Ok(())
}
