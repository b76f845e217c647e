//! Difference matrices of fixed-step methods and their differential kernels:
//! OGM / OGM-G anti-transposes, the NAG-C kernel limit and a kernel grid on disk.

use unified_momentum::kernels::{
    build_hf, build_hg, check_anti_transpose, check_anti_transpose_discrete, kernel_closed_form, kernel_grid,
    kernel_limit_convergence, nag_c_matrix, write_kernel_grid,
};

fn main() -> unified_momentum::Result<()> {
    let hf = build_hf(5)?;
    println!("OGM matrix, N = 5:");
    for i in 0..hf.n() {
        let row: Vec<String> = (0..=i).map(|j| format!("{:8.4}", hf.get(i, j))).collect();
        println!("  {}", row.join(" "));
    }
    println!("HF vs HG anti-transpose, N = 30: {:.1e}", check_anti_transpose_discrete(&build_hf(30)?, &build_hg(30)?)?);

    for (a, b, mu) in [("ogm", "ogm_g", 0.0), ("unified_nag", "unified_nag_g", 0.5)] {
        let d = check_anti_transpose(&kernel_closed_form(a, mu, 10.0)?, &kernel_closed_form(b, mu, 10.0)?, 10.0, 50)?;
        println!("{a} vs {b} (mu = {mu}) on a 50 x 50 grid: {d:.1e}");
    }

    let nag = kernel_closed_form("nag_c", 0.0, 10.0)?;
    for p in kernel_limit_convergence(|_, n| nag_c_matrix(n), &nag, 2.0, 1.0, &[1e-2, 1e-3, 1e-4])? {
        println!("s = {:e}: h[{}][{}] = {:.6} vs H(2, 1) = {:.6}", p.s, p.i, p.j, p.h_ij, p.kernel);
    }

    let out = std::env::temp_dir().join("unified_nag_kernel.csv");
    let rows = kernel_grid(&kernel_closed_form("unified_nag", 0.5, 10.0)?, 10.0, 40)?;
    write_kernel_grid(&rows, std::fs::File::create(&out)?)?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}
