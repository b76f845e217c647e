//! Continuous-time models: NAG-C, NAG-SC, unified NAG and tensor flows on the toy quadratic.

use nalgebra::DVector;
use unified_momentum::dynamics::{integrate_flow, ode_residual, FlowSpec, PreparedFlow};
use unified_momentum::problems::make_toy_quadratic;

fn main() -> unified_momentum::Result<()> {
    let mu = 1e-3;
    let obj = make_toy_quadratic(mu);
    let x0 = DVector::from_vec(vec![1.0, 1.0]);
    let horizon = 40.0;
    let specs = [
        FlowSpec::NagC,
        FlowSpec::NagSc { mu },
        FlowSpec::UnifiedNag { mu },
        FlowSpec::Tensor { p: 3, c: 0.25, mu },
    ];
    for spec in specs {
        let traj = integrate_flow(&spec, &obj, &x0, horizon, 1e-3)?;
        let residual = ode_residual(&PreparedFlow::new(spec.clone(), horizon)?, &traj, &obj)?;
        let n = traj.len() - 1;
        println!(
            "{:<36} nodes {:6}  f - f* at t = {horizon}: {:.3e}  bound {:.3e}  energy increases {}  ODE residual {:.1e}",
            spec.name(),
            traj.len(),
            traj.f_gap[n],
            traj.bound[n],
            traj.energy_violations(1e-8).len(),
            residual
        );
    }
    Ok(())
}
