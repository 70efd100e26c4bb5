//! Refinement study: spectra at N and 2N.

use bgcoh::admissible::reference_sqrt;
use bgcoh::combinatorics::IrrepLabel;
use bgcoh::model_geometry::WeightedAction;
use bgcoh::spectral::{grid_doubling, GridParams, ModeSpec, Thresholds};

fn main() -> bgcoh::Result<()> {
    let spec = ModeSpec::new(WeightedAction::new(vec![1], 0)?, IrrepLabel(2), reference_sqrt(), 0)?;
    for n in [250, 500, 1000, 2000] {
        let d = grid_doubling(&spec, &GridParams::default().with_n(n), &Thresholds::default())?;
        println!(
            "N={n:5}  gap drift {:.3e}  kernel value {:.3e} -> {:.3e}  passed {}",
            d.gap_drift,
            d.coarse.degree(0).eigenvalues[0],
            d.fine.degree(0).eigenvalues[0],
            d.passed()
        );
    }
    Ok(())
}
