//! The adaptive unified scheme and the estimate-sequence NAG produce the same iterates
//! once `gamma_0` is matched to the starting time.

use nalgebra::DVector;
use unified_momentum::algorithms::{gamma0_for_t0, run_original_nag_with, run_scheme_with, RunOptions, SchemeKind};
use unified_momentum::problems::{make_logistic, synth_logistic};
use unified_momentum::Objective;

fn main() -> unified_momentum::Result<()> {
    let data = synth_logistic(100, 20, 5e-2, 1)?;
    let obj = make_logistic(&data)?.centered()?;
    let (s, mu) = (0.01_f64, obj.strong_convexity());
    let x0 = obj.offset_of(&DVector::zeros(20));
    for t0 in [0.1, 1.0, 10.0] {
        let gamma0 = gamma0_for_t0(t0, mu);
        let a = run_scheme_with(&obj, SchemeKind::UnifiedAdaptive { t0: Some(t0) }, s, mu, &x0, RunOptions::new(200).keep_iterates())?;
        let b = run_original_nag_with(&obj, s, mu, gamma0, &x0, RunOptions::new(200).keep_iterates())?;
        let dev = a.iterates.iter().zip(&b.iterates).map(|(p, q)| (&p.x - &q.x).amax()).fold(0.0, f64::max);
        println!("t0 = {t0:4}: gamma0 = {gamma0:.6e}, max iterate deviation {dev:.2e}");
    }
    Ok(())
}
