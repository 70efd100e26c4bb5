//! Kernel dimensions do not depend on the admissible function.

use bgcoh::admissible::{build_admissible, reference_sqrt, BuilderParams, Floor};
use bgcoh::model_geometry::{level_set_profile, log_grid, WeightedAction};
use bgcoh::spectral::{invariance_check, GridParams, Thresholds};

fn main() -> bgcoh::Result<()> {
    let action = WeightedAction::new(vec![2], 1)?;
    let profile = level_set_profile(&action, &log_grid(0.1, 1e8, 300), 16, 1)?;
    let built = build_admissible(&profile, &Floor::Sqrt, BuilderParams::default())?;
    let m: Vec<i64> = (-2..=10).collect();
    let report = invariance_check(
        &action,
        &m,
        &reference_sqrt(),
        &built.function,
        &GridParams::default().with_n(1000),
        &Thresholds::default(),
    )?;
    for e in &report.entries {
        println!("m={:3}  sqrt {:?}  built {:?}", e.m, e.dims_s1, e.dims_s2);
    }
    println!("all equal: {}", report.all_equal);
    Ok(())
}
