//! A plain backward doubly stochastic equation,
//! `Y(t) = W_T + int_t^T 1/2 ds + int_t^T dB - int_t^T Z dW`,
//! whose solution `W_t + (B_T - B_t) + (T - t)/2`, `Z = 1` the scheme
//! reproduces up to regression noise.

use bdsvie::bdsde::{solve_bdsde, BdsdeConfig, FnDriver};
use bdsvie::regression::{RegressionBasis, RegressionContext, Ridge};
use bdsvie::scenario::{make_grid, sample_ensemble};

fn main() -> bdsvie::Result<()> {
    let grid = make_grid(1.0, 32)?;
    let ens = sample_ensemble(&grid, 8192, 1, 1, 11)?;
    let ctx = RegressionContext::new(&ens, RegressionBasis::new(1, 1, 2, Ridge::default()))?;
    let driver = FnDriver::new(&ens, 1, false, |_, _, _, out| out[0] = 0.5, |_, _, _, out| out[0] = 1.0);
    let terminal: Vec<f64> = (0..ens.n_paths).map(|m| ens.w(m, 32)[0]).collect();
    let sol = solve_bdsde(&driver, &ctx, &ens, 0, &terminal, &BdsdeConfig::default())?;
    for j in [0, 16, 31] {
        let t = grid.t(j);
        let mse = (0..ens.n_paths)
            .map(|m| {
                let exact = ens.w(m, j)[0] + ens.b(m, 32)[0] - ens.b(m, j)[0] + 0.5 * (1.0 - t);
                (sol.lambda(j)[m] - exact).powi(2)
            })
            .sum::<f64>()
            / ens.n_paths as f64;
        let z_mean = sol.mu(j).iter().sum::<f64>() / ens.n_paths as f64;
        println!("t = {t:.3}: RMS error of Y {:.4}, mean Z {z_mean:.4} (exact 1)", mse.sqrt());
    }
    println!("inner iterations per step: {:?}", &sol.inner_counts[..4]);
    Ok(())
}
