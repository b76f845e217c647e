//! Generalized hyperbolic functions `sinh_p`, `cosh_p` and the growth constants `C_p`.

use unified_momentum::hyperbolic::{cothc, estimate_cp, sinhc, tanhc, HigherHyperbolicTable};

fn main() -> unified_momentum::Result<()> {
    println!("removable singularities at 0: sinhc = {}, tanhc = {}, cothc = {}", sinhc(0.0), tanhc(0.0), cothc(0.0));
    println!("cothc(10) = {:.16}", cothc(10.0));

    for p in [2, 3, 4] {
        let table = HigherHyperbolicTable::covering(p, 4.0)?;
        println!("p = {p}");
        for t in [0.5, 1.0, 2.0, 4.0] {
            let (s, c) = table.eval(t)?;
            // cosh_p^p - sinh_p^p = 1 along the curve
            let residual = c.powi(p as i32) - s.powi(p as i32) - 1.0;
            println!("  t = {t:3}: sinh_p = {s:.12}, cosh_p = {c:.12}, identity residual {residual:.1e}");
        }
        let cp = estimate_cp(p)?;
        println!("  C_{p} = {:.9} (spread {:.1e})", cp.value, cp.achieved);
    }
    Ok(())
}
