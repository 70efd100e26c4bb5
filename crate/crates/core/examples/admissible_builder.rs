//! Builds an admissible function above a quadratic floor and checks it,
//! together with the reference `sqrt` and a convex combination of both.

use bgcoh::admissible::{
    build_admissible, convex_combine, reference_sqrt, verify_admissible, AdmissibleFunction, BuilderParams, Floor,
};
use bgcoh::model_geometry::{level_set_profile, log_grid, WeightedAction};

fn main() -> bgcoh::Result<()> {
    let action = WeightedAction::new(vec![1, 1], 0)?;
    let profile = level_set_profile(&action, &log_grid(0.1, 1e8, 300), 16, 1)?;
    let built = build_admissible(&profile, &Floor::Quadratic, BuilderParams::default())?;
    println!(
        "built: {} knots, report pass={}, threshold t={:?}",
        built.u_grid.len(),
        built.report.pass,
        built.report.threshold_t
    );
    for &u in built.u_grid.iter().take(6) {
        let jet = built.function.eval(u);
        println!("  u={u:10.4e}  s={:12.5e}  s'={:12.5e}  s''={:12.5e}", jet.s, jet.ds, jet.dds);
    }

    let mixed = convex_combine(&reference_sqrt(), &built.function, 0.7, 0.3)?;
    let checks: [(&str, &AdmissibleFunction); 3] =
        [("sqrt", &reference_sqrt()), ("built", &built.function), ("0.7 sqrt + 0.3 built", &mixed)];
    for (name, s) in checks {
        let r = verify_admissible(s, &profile, 1e3)?;
        println!("{name:>22}: pass={} threshold t={:?}", r.pass, r.threshold_t);
    }
    let flat = verify_admissible(&AdmissibleFunction::constant(1.0), &profile, 1e3)?;
    println!("{:>22}: pass={} first offending t={:?}", "constant", flat.pass, flat.first_offending_t);
    Ok(())
}
