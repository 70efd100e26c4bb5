//! Kernel dimensions along the ray `sqrt + t * built`.

use bgcoh::admissible::{build_admissible, reference_sqrt, BuilderParams, Floor};
use bgcoh::model_geometry::{level_set_profile, log_grid, WeightedAction};
use bgcoh::spectral::{family_scan, GridParams, Thresholds};

fn main() -> bgcoh::Result<()> {
    let action = WeightedAction::new(vec![1], 0)?;
    let profile = level_set_profile(&action, &log_grid(0.1, 1e8, 300), 16, 1)?;
    let built = build_admissible(&profile, &Floor::Sqrt, BuilderParams::default())?;
    let t = [0.0, 0.01, 0.1, 1.0, 10.0];
    for m in [-1, 0, 3] {
        let scan = family_scan(
            &action,
            m,
            &reference_sqrt(),
            &built.function,
            &t,
            &GridParams::default().with_n(800),
            &Thresholds::default(),
        )?;
        let dims: Vec<String> = scan.points.iter().map(|p| format!("{:?}", p.kernel_dims)).collect();
        println!("m={m:2}  {}  exceptional {:?}", dims.join(" "), scan.exceptional);
    }
    Ok(())
}
