//! Unified NAG on the toy quadratic: energy decay and the convergence bound for several `mu`.

use nalgebra::DVector;
use unified_momentum::algorithms::{run_scheme, SchemeKind};
use unified_momentum::problems::make_toy_quadratic;

fn main() -> unified_momentum::Result<()> {
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    for mu in [0.0, 1e-4, 1e-3] {
        let obj = make_toy_quadratic(mu);
        for kind in [SchemeKind::NagC, SchemeKind::UnifiedConstant, SchemeKind::UnifiedAdaptive { t0: None }] {
            let trace = run_scheme(&obj, kind, 100.0, mu, &x0, 2000)?;
            let last = trace.records.last().expect("at least one record");
            println!(
                "mu = {mu:<6} {:<28} gap {:.3e}  bound {:.3e}  energy violations {}",
                format!("{kind:?}"),
                last.f_gap,
                last.bound,
                trace.energy_violations(1e-10).len()
            );
        }
    }
    Ok(())
}
