//! Unified accelerated tensor method (p = 3, cubic-regularized Newton steps) against
//! its polynomial and geometric lower bounds on `A_k`.

use nalgebra::DVector;
use unified_momentum::problems::make_toy_quadratic;
use unified_momentum::tensor::{ak_lower_bounds, min_m_residual, run_tensor, TensorConfig};

fn main() -> unified_momentum::Result<()> {
    let obj = make_toy_quadratic(1e-3);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    for mu in [0.0, 1e-4] {
        let cfg = TensorConfig::new(3, 1.0, mu);
        let trace = run_tensor(&obj, &cfg, &x0, 200)?;
        println!("mu = {mu} (C = {:.6})", cfg.c());
        for rec in trace.records.iter().step_by(40) {
            let (poly, geo) = ak_lower_bounds(rec.k, 3, 1.0, mu, cfg.c());
            println!(
                "  k = {:3}: gap {:.3e} <= bound {:.3e}; A_k {:.3e} (>= {:.3e}, >= {:.3e})",
                rec.k,
                rec.f_gap,
                rec.bound,
                rec.a_k.unwrap_or(f64::NAN),
                poly,
                geo
            );
        }
        println!("  smallest certificate residual {:.2e}", min_m_residual(&trace));
    }
    Ok(())
}
