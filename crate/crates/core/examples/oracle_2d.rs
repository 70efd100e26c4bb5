//! Radial eigenvalues against a full polar-grid discretization.

use bgcoh::admissible::reference_sqrt;
use bgcoh::combinatorics::IrrepLabel;
use bgcoh::model_geometry::WeightedAction;
use bgcoh::spectral::{
    compare_with_oracle, dense_2d_oracle, kernel_dims, GridParams, ModeSpec, OracleGrid, Thresholds,
};

fn main() -> bgcoh::Result<()> {
    for (lambda, k, m) in [(1, 0, 0), (1, 0, -2), (2, 0, 4), (3, 1, 4)] {
        let spec = ModeSpec::new(WeightedAction::new(vec![lambda], k)?, IrrepLabel(m), reference_sqrt(), 0)?;
        let radial = kernel_dims(&spec, &GridParams::default(), &Thresholds::default())?;
        let oracle = dense_2d_oracle(&spec, &OracleGrid::default(), 3)?;
        let cmp = compare_with_oracle(&radial, &oracle, 3, 0.02);
        println!("({lambda},{k},{m}) worst={:.3} pass={}", cmp.worst, cmp.pass);
        for p in 0..2 {
            println!("    degree {p}: radial {:.4?}", cmp.radial[p]);
            println!("              2-D    {:.4?}", cmp.oracle[p]);
        }
    }
    Ok(())
}
