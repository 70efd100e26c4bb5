//! Low spectrum of the deformed Laplacian on one isotypic component.
//!
//!     cargo run --release --example radial_spectrum -- 2 1 5
//!
//! Arguments: weight, twist, label (defaults `1 0 3`).

use bgcoh::admissible::reference_sqrt;
use bgcoh::combinatorics::IrrepLabel;
use bgcoh::model_geometry::WeightedAction;
use bgcoh::spectral::{kernel_dims_refined, GridParams, ModeSpec, Thresholds};

fn main() -> bgcoh::Result<()> {
    let args: Vec<i64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let (lambda, k, m) = match args[..] {
        [l, k, m] => (l as u32, k, m),
        _ => (1, 0, 3),
    };
    let spec = ModeSpec::new(WeightedAction::new(vec![lambda], k)?, IrrepLabel(m), reference_sqrt(), 0)?;
    let r = kernel_dims_refined(&spec, &GridParams::default(), &Thresholds::default())?;
    println!("lambda={lambda} k={k} m={m}  R={:.3}  N={}", r.grid_meta.radius, r.grid_meta.n);
    for d in &r.degrees {
        println!(
            "  degree {}: l={:?} eigenvalues {:?} kernel {} cosine {:?}",
            d.degree, d.angular, d.eigenvalues, d.kernel_dim, d.kernel_cosine
        );
    }
    println!("kernel dims {:?}, index {}", r.kernel_dims, r.index());
    Ok(())
}
