//! Regularized logistic regression benchmark: NAG-C, NAG-SC and the unified schemes
//! across regularization strengths.

use nalgebra::DVector;
use unified_momentum::algorithms::{run_scheme, SchemeKind};
use unified_momentum::problems::{make_logistic, synth_logistic};
use unified_momentum::Objective;

fn main() -> unified_momentum::Result<()> {
    let (s, iterations) = (0.01, 2000);
    for lambda in [5.0, 5e-2, 5e-4] {
        let data = synth_logistic(100, 20, lambda, 1)?;
        let obj = make_logistic(&data)?.centered()?;
        let mu = obj.strong_convexity();
        let x0 = obj.offset_of(&DVector::zeros(20));
        println!("lambda = {lambda} (mu = {mu:e}, L = {:.3})", obj.smoothness());
        let kinds = [
            SchemeKind::NagC,
            SchemeKind::NagSc,
            SchemeKind::UnifiedConstant,
            SchemeKind::UnifiedAdaptive { t0: None },
        ];
        for kind in kinds {
            let trace = run_scheme(&obj, kind, s, mu, &x0, iterations)?;
            let gaps: Vec<f64> = trace.records.iter().map(|r| r.f_gap).collect();
            println!(
                "  {:<28} k=100 {:.3e}  k=1000 {:.3e}  k={iterations} {:.3e}",
                format!("{kind:?}"),
                gaps[100],
                gaps[1000],
                gaps[iterations]
            );
        }
    }
    Ok(())
}
