//! Forward and backward Itô sums: telescoping and the isometry.

use bdsvie::calculus::{backward_ito_sum, forward_ito_sum, riemann_sum, GridSeries};
use bdsvie::scenario::{make_grid, sample_ensemble};

fn main() -> bdsvie::Result<()> {
    let grid = make_grid(1.0, 32)?;
    let ens = sample_ensemble(&grid, 10_000, 1, 1, 7)?;
    let (mp, nt) = (ens.n_paths, 33);
    let w = GridSeries::w_component(&ens, 0);
    let b = GridSeries::b_component(&ens, 0);

    let one = GridSeries::constant(mp, nt, 1.0);
    let fw = forward_ito_sum(&one, &w, 8)?;
    println!("sum dW from t_8 = {:.6}, W_T - W_8 = {:.6}", fw[0], w.at(0, 32) - w.at(0, 8));

    // E (sum W dW)^2 = sum t_j dt
    let s = forward_ito_sum(&w, &w, 0)?;
    let lhs = s.iter().map(|x| x * x).sum::<f64>() / mp as f64;
    let t = GridSeries::from_fn(mp, nt, |_, i| grid.t(i));
    let rhs = riemann_sum(&t, &grid, 0)?[0];
    println!("E(sum W dW)^2 = {lhs:.4}, sum t dt = {rhs:.4}");

    // backward sums take the integrand at the right end of each step
    let g = GridSeries::from_fn(mp, nt, |m, i| b.at(m, 32) - b.at(m, i));
    let bs = backward_ito_sum(&g, &b, 0)?;
    let mean = bs.iter().sum::<f64>() / mp as f64;
    println!("E sum (B_T - B_(j+1)) dB_j = {mean:.4} (exact 0)");
    Ok(())
}
