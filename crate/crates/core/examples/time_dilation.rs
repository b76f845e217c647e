//! Time dilation: speeding up a Lagrangian flow by `t -> lambda t` matches the flow
//! with rescaled parameters.

use nalgebra::DVector;
use unified_momentum::dynamics::{verify_time_dilation, FlowSpec, LagrangianFlow};
use unified_momentum::problems::make_toy_quadratic;

fn main() -> unified_momentum::Result<()> {
    let obj = make_toy_quadratic(1e-3);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    for lambda in [0.5_f64, 2.0, 3.0] {
        // tensor flow: C -> lambda^p C
        let dev = verify_time_dilation(
            &FlowSpec::Tensor { p: 3, c: 0.25, mu: 1e-3 },
            |t| lambda * t,
            &FlowSpec::Tensor { p: 3, c: 0.25 * lambda.powi(3), mu: 1e-3 },
            &obj,
            &x0,
            5.0,
            1e-3,
        )?;
        let base = LagrangianFlow::unified_nag(1e-3);
        let dev_generic = verify_time_dilation(
            &FlowSpec::Lagrangian(base.clone()),
            |t| lambda * t,
            &FlowSpec::Lagrangian(base.dilated(lambda)),
            &obj,
            &x0,
            5.0,
            1e-3,
        )?;
        println!("lambda = {lambda}: tensor flow {dev:.2e}, dilated unified Lagrangian {dev_generic:.2e}");
    }
    Ok(())
}
