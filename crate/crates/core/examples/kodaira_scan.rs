//! Degree-1 gap as the twisting line bundle gets more positive.

use bgcoh::admissible::reference_sqrt;
use bgcoh::model_geometry::WeightedAction;
use bgcoh::spectral::{kodaira_scan, GridParams, Thresholds};

fn main() -> bgcoh::Result<()> {
    let action = WeightedAction::new(vec![1], 0)?;
    let ks: Vec<u32> = (0..=20).collect();
    for m in 0..=2 {
        let curve = kodaira_scan(
            &action,
            m,
            &reference_sqrt(),
            &ks,
            &GridParams::default().with_n(800),
            &Thresholds::default(),
        )?;
        let gaps: Vec<String> = curve.points.iter().map(|p| format!("{:.2}", p.gap)).collect();
        println!("m={m}  k0={:?}  gaps {}", curve.k0, gaps.join(" "));
    }
    Ok(())
}
