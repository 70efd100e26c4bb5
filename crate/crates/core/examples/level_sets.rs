//! Sampled level-set profile `a(t)`, `b(t)` of the moment map.

use bgcoh::model_geometry::{level_set_profile, log_grid, WeightedAction};

fn main() -> bgcoh::Result<()> {
    let action = WeightedAction::new(vec![1, 2, 3], 0)?;
    let profile = level_set_profile(&action, &log_grid(0.1, 1e4, 11), 64, 42)?;
    println!("{:>12} {:>14} {:>14}", "t", "a = min|v|^2", "b");
    for r in profile.records() {
        println!("{:12.4e} {:14.6e} {:14.6e}", r.t, r.a, r.b);
    }
    Ok(())
}
