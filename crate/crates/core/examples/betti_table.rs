//! Background Betti numbers for the weights `1,2` over labels `0..=8`.
//!
//!     cargo run --example betti_table

use bgcoh::combinatorics::betti_table;
use bgcoh::model_geometry::WeightedAction;

fn main() -> bgcoh::Result<()> {
    let action = WeightedAction::new(vec![1, 2], 0)?;
    let table = betti_table(&action, 0, 8)?;
    println!("  m  beta0  beta1  beta2");
    for (m, row) in &table.entries {
        println!("{:3}  {:5}  {:5}  {:5}", m.0, row[0], row[1], row[2]);
    }
    Ok(())
}
