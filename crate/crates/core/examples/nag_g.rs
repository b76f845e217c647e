//! Unified NAG-G: a flow on `[0, T]` that makes the gradient small at the end time.

use nalgebra::DVector;
use unified_momentum::dynamics::integrate_nag_g;
use unified_momentum::problems::make_toy_quadratic;
use unified_momentum::Objective;

fn main() -> unified_momentum::Result<()> {
    let obj = make_toy_quadratic(1e-2);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    println!("|grad f(x0)|^2 = {:.3e}", obj.gradient(&x0).norm_squared());
    for mu in [0.0, 1e-2] {
        for t_end in [5.0, 20.0, 50.0] {
            let r = integrate_nag_g(&obj, mu, &x0, t_end, 1e-3)?;
            println!(
                "mu = {mu:<5} T = {t_end:4}: |grad f(X(T))|^2 = {:.3e} <= {:.3e}, energy increases {}",
                r.grad_norm_sq,
                r.bound,
                r.energy_violations(1e-7).len()
            );
        }
    }
    Ok(())
}
