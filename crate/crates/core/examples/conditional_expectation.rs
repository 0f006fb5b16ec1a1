//! Regression estimates of conditional expectations under the two-sided
//! filtration generated by W up to t and B after t.

use bdsvie::regression::{build_basis, estimate_conditional, Ridge};
use bdsvie::scenario::{make_grid, sample_ensemble};

fn main() -> bdsvie::Result<()> {
    let grid = make_grid(1.0, 8)?;
    let ens = sample_ensemble(&grid, 8192, 1, 1, 3)?;
    let i = 4;
    // E[W_T^2 + B_T - B_i | W_i, B_T - B_i] = W_i^2 + (T - t_i) + B_T - B_i
    let targets: Vec<f64> = (0..ens.n_paths)
        .map(|m| ens.w(m, 8)[0].powi(2) + ens.b(m, 8)[0] - ens.b(m, i)[0])
        .collect();
    let x = build_basis(&ens, i, 2)?;
    let est = estimate_conditional(&targets, &x, Ridge::default())?;
    let rmse = (0..ens.n_paths)
        .map(|m| {
            let exact = ens.w(m, i)[0].powi(2) + 0.5 + ens.b(m, 8)[0] - ens.b(m, i)[0];
            (est.predictions[m] - exact).powi(2)
        })
        .sum::<f64>()
        / ens.n_paths as f64;
    println!("features: {}, coefficients: {:.3?}", x.ncols(), est.coefficients);
    println!("RMS error vs closed form: {:.4}", rmse.sqrt());
    println!("residual second moment: {:.4}, condition indicator: {:.1}", est.residual_second_moment, est.condition_indicator);
    Ok(())
}
