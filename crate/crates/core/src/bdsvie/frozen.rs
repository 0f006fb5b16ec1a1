//! Frozen-driver solve and the Picard map `Theta`.
//!
//! With `(y, z)` frozen, row `t_i` is the ordinary BDSDE
//! `lambda(r) = xi + int_r^T f(t_i, s, y(s), z(t_i, s)) ds + int_r^T g(...) dB_s - int_r^T mu dW_s`
//! and the diagonal gives `Y(t_i) = lambda(t_i)`, `Z(t_i, s) = mu(s)`.

use std::ops::Range;

use rayon::prelude::*;

use crate::bdsde::{solve_bdsde_until, BdsdeConfig, BdsdeDriver};
use crate::calculus::{DiagonalProcess, TriangularField};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::regression::{RegressionBasis, RegressionContext, Ridge};
use crate::scenario::BrownianEnsemble;

use super::field::FrozenField;

/// Problem, ensemble and cached regressions shared by every solve.
#[derive(Debug, Clone)]
pub struct SolverContext {
    pub spec: ProblemSpec,
    pub ens: BrownianEnsemble,
    pub regression: RegressionContext,
    /// `xi` per path, `M x k`
    pub xi: Vec<f64>,
    pub bdsde: BdsdeConfig,
}

impl SolverContext {
    pub fn new(spec: ProblemSpec, ens: BrownianEnsemble, degree: usize, ridge: Ridge) -> Result<Self> {
        let xi = spec.terminal_values(&ens)?;
        let basis = RegressionBasis::new(ens.d, ens.l, degree, ridge);
        let regression = RegressionContext::new(&ens, basis)?;
        Ok(Self {
            spec,
            ens,
            regression,
            xi,
            bdsde: BdsdeConfig::default(),
        })
    }

    pub fn n_steps(&self) -> usize {
        self.ens.n_steps()
    }

    pub fn k(&self) -> usize {
        self.spec.dims.k
    }

    pub fn zero_field(&self) -> FrozenField {
        FrozenField::zeros(&self.ens.grid, self.ens.n_paths, self.k(), self.ens.d)
    }
}

/// Rows `start..=end`; every row solves its BDSDE over `[t_i, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn full(n: usize) -> Self {
        Self { start: 0, end: n }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.start > self.end || self.end > n {
            return Err(Error::InvalidArgument(format!(
                "window [{}, {}] is not inside [0, {n}]",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Terminal value of each row at `t_end`.
#[derive(Debug, Clone, Copy)]
pub enum RowTerminal<'a> {
    /// the same `M x k` block for every row
    Common(&'a [f64]),
    /// one block per row, indexed by `i - window.start`
    PerRow(&'a [Vec<f64>]),
}

impl<'a> RowTerminal<'a> {
    fn row(&self, offset: usize) -> &'a [f64] {
        match *self {
            RowTerminal::Common(v) => v,
            RowTerminal::PerRow(v) => &v[offset],
        }
    }
}

/// `f(t_i, s, y(s), z(t_i, s))`, `g(t_i, s, y(s), z(t_i, s))` with the field frozen.
///
/// `g` on step `j` is taken at `s_{j+1}` with `y(s_{j+1})` and `z(t_i, s_j)`,
/// since the triangle has no cell at `s_N`.
struct FrozenDriver<'a> {
    spec: &'a ProblemSpec,
    field: &'a FrozenField,
    times: &'a [f64],
    row: usize,
}

impl FrozenDriver<'_> {
    fn eval(&self, j: usize, right: bool, out: &mut [f64]) -> Result<()> {
        let (k, l) = (self.spec.dims.k, self.spec.dims.l);
        let t = self.times[self.row];
        let js = if right { j + 1 } else { j };
        let s = self.times[js];
        let width = if right { k * l } else { k };
        for (m, o) in out.chunks_exact_mut(width).enumerate() {
            let y = self.field.y.at(js, m);
            let z = self.field.z.at(self.row, j, m);
            let r = if right {
                self.spec.eval_g(t, s, y, z, o)
            } else {
                self.spec.eval_f(t, s, y, z, o)
            };
            r.map_err(|e| e.context(format!("path {m}")))?;
        }
        Ok(())
    }
}

impl BdsdeDriver for FrozenDriver<'_> {
    fn state_dependent(&self) -> bool {
        false
    }

    fn drift(&self, j: usize, _: &[f64], _: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval(j, false, out)
    }

    fn diffusion(&self, j: usize, _: &[f64], _: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval(j, true, out)
    }
}

fn check_field(ctx: &SolverContext, field: &FrozenField) -> Result<()> {
    let (mp, k, d) = (ctx.ens.n_paths, ctx.k(), ctx.ens.d);
    if field.y.grid != ctx.ens.grid || field.y.n_paths != mp || field.y.k != k || field.z.d != d {
        return Err(Error::DimensionMismatch("frozen field does not match the ensemble".into()));
    }
    if !field.is_finite() {
        return Err(Error::NonFinite("frozen field has non-finite entries".into()));
    }
    Ok(())
}

/// Applies the frozen solve to `rows` (each over `[t_i, t_end]`) and
/// returns a copy of `input` with those rows replaced. A row equal to `end`
/// just receives its terminal value.
pub(crate) fn theta_rows(
    ctx: &SolverContext,
    input: &FrozenField,
    rows: Range<usize>,
    end: usize,
    terminal: RowTerminal<'_>,
) -> Result<FrozenField> {
    let n = ctx.n_steps();
    check_field(ctx, input)?;
    if rows.start > rows.end || rows.end > end + 1 || end > n {
        return Err(Error::InvalidArgument(format!("rows {rows:?} with horizon {end} on {n} steps")));
    }
    let bl = ctx.ens.n_paths * ctx.k();
    for o in 0..rows.len() {
        if terminal.row(o).len() != bl {
            return Err(Error::DimensionMismatch(format!(
                "terminal row {} has {} values, expected {bl}",
                rows.start + o,
                terminal.row(o).len()
            )));
        }
    }
    let mut out = input.clone();
    let first = rows.start;
    {
        let y_slices = out.y.slices_mut();
        let mut z_rows: Vec<Option<&mut [f64]>> = out.z.rows_mut().into_iter().map(Some).collect();
        z_rows.push(None);
        let jobs: Vec<(usize, &mut [f64], Option<&mut [f64]>)> = y_slices
            .into_iter()
            .zip(z_rows)
            .enumerate()
            .filter(|(i, _)| rows.contains(i))
            .map(|(i, (y, z))| (i, y, z))
            .collect();
        jobs.into_par_iter().try_for_each(|(i, y_out, z_out)| -> Result<()> {
            let term = terminal.row(i - first);
            if i == end {
                y_out.copy_from_slice(term);
                return Ok(());
            }
            let driver = FrozenDriver {
                spec: &ctx.spec,
                field: input,
                times: &ctx.ens.grid.times,
                row: i,
            };
            let sol = solve_bdsde_until(&driver, &ctx.regression, &ctx.ens, i, end, term, &ctx.bdsde)
                .map_err(|e| e.context(format!("row t_{i}")))?;
            // the mu blocks of [i, end) line up with the first cells of row i
            let mu = sol.mu_values();
            let z_out = z_out.expect("rows below N own a z row");
            z_out[..mu.len()].copy_from_slice(mu);
            y_out.copy_from_slice(sol.lambda(i));
            Ok(())
        })?;
    }
    Ok(out)
}

/// Solves the frozen-driver equation on `window`. Rows outside the window
/// keep the values of `frozen`.
pub fn solve_frozen_bdsvie(
    ctx: &SolverContext,
    frozen: &FrozenField,
    window: Window,
    terminal: RowTerminal<'_>,
) -> Result<(DiagonalProcess, TriangularField)> {
    let f = apply_theta(ctx, frozen, window, terminal)?;
    Ok((f.y, f.z))
}

/// `Theta(y, z)` on `window`, as a field.
pub fn apply_theta(ctx: &SolverContext, input: &FrozenField, window: Window, terminal: RowTerminal<'_>) -> Result<FrozenField> {
    window.check(ctx.n_steps())?;
    theta_rows(ctx, input, window.start..window.end + 1, window.end, terminal)
}

/// `xi + sum_{j >= from} [f(t_i, s_j, ...) dt + g(t_i, s_{j+1}, ...) dB_j]`,
/// the terminal value at `t_from` that row `t_i` sees once the region
/// `[t_from, T]` is known.
pub fn effective_terminal(ctx: &SolverContext, field: &FrozenField, i: usize, from: usize) -> Result<Vec<f64>> {
    aggregate(ctx, field, i, from, ctx.n_steps(), &ctx.xi)
}

fn aggregate(ctx: &SolverContext, field: &FrozenField, i: usize, from: usize, end: usize, terminal: &[f64]) -> Result<Vec<f64>> {
    if !(i <= from && from <= end && end <= ctx.n_steps()) {
        return Err(Error::InvalidArgument(format!("need i <= from <= end <= N, got {i}, {from}, {end}")));
    }
    let (mp, k, l) = (ctx.ens.n_paths, ctx.k(), ctx.ens.l);
    let driver = FrozenDriver {
        spec: &ctx.spec,
        field,
        times: &ctx.ens.grid.times,
        row: i,
    };
    let dt = ctx.ens.grid.dt;
    let mut acc = terminal.to_vec();
    let mut f = vec![0.0; mp * k];
    let mut g = vec![0.0; mp * k * l];
    for j in from..end {
        driver.eval(j, false, &mut f)?;
        driver.eval(j, true, &mut g)?;
        for m in 0..mp {
            for r in 0..k {
                let mut v = f[m * k + r] * dt;
                for c in 0..l {
                    v += g[(m * k + r) * l + c] * ctx.ens.db(m, j, c);
                }
                acc[m * k + r] += v;
            }
        }
    }
    Ok(acc)
}

/// One projection of `terminal + f-quadrature + g-backward-sum` over
/// `[t_i, t_end]` at `t_i`: the direct form of `Y(t_i)` that the recursive
/// solve must agree with.
pub fn direct_conditional(ctx: &SolverContext, field: &FrozenField, i: usize, end: usize, terminal: &[f64]) -> Result<Vec<f64>> {
    let target = aggregate(ctx, field, i, i, end, terminal)?;
    let mut out = vec![0.0; target.len()];
    ctx.regression.conditional_into(i, &target, ctx.k(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{catalog_problem, Oracle};
    use crate::scenario::{make_grid, sample_ensemble};

    pub(crate) fn context(name: &str, n: usize, mp: usize) -> SolverContext {
        let entry = catalog_problem(name).unwrap();
        let ens = sample_ensemble(&make_grid(1.0, n).unwrap(), mp, 1, 1, 42).unwrap();
        SolverContext::new(entry.spec, ens, 2, Ridge::default()).unwrap()
    }

    fn rel_err(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
        let (mut a, mut b) = (0.0, 0.0);
        for (e, o) in pairs {
            a += (e - o).powi(2);
            b += o * o;
        }
        (a / b).sqrt()
    }

    fn oracle_errors(ctx: &SolverContext, f: &FrozenField, oracle: Oracle) -> (f64, f64) {
        let (n, mp) = (ctx.n_steps(), ctx.ens.n_paths);
        let ens = &ctx.ens;
        let ey = rel_err((0..=n).flat_map(|i| (0..mp).map(move |m| (i, m))).map(|(i, m)| (f.y.at(i, m)[0], oracle.y(ens, i, m))));
        let ez = rel_err(
            (0..n)
                .flat_map(|i| (i..n).flat_map(move |j| (0..mp).map(move |m| (i, j, m))))
                .map(|(i, j, m)| (f.z.at(i, j, m)[0], oracle.z(ens, i, j))),
        );
        (ey, ez)
    }

    #[test]
    fn martingale_frozen_solve() {
        let ctx = context("martingale", 32, 8192);
        let f = apply_theta(&ctx, &ctx.zero_field(), Window::full(32), RowTerminal::Common(&ctx.xi)).unwrap();
        let (ey, ez) = oracle_errors(&ctx, &f, Oracle::Martingale);
        assert!(ey <= 0.05 && ez <= 0.05, "errors {ey} {ez}");
        assert_eq!(f.y.slice(32), &ctx.xi[..]);
    }

    #[test]
    fn kernel_frozen_solve() {
        let ctx = context("kernel", 32, 8192);
        let f = apply_theta(&ctx, &ctx.zero_field(), Window::full(32), RowTerminal::Common(&ctx.xi)).unwrap();
        // sup over grid times of the RMS error across paths
        let mp = ctx.ens.n_paths;
        let sup = (0..=32)
            .map(|i| {
                let mse = (0..mp)
                    .map(|m| (f.y.at(i, m)[0] - Oracle::Kernel.y(&ctx.ens, i, m)).powi(2))
                    .sum::<f64>()
                    / mp as f64;
                mse.sqrt()
            })
            .fold(0.0f64, f64::max);
        assert!(sup <= 0.03, "sup error {sup}");
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        // lipschitz-demo coefficients vanish at (0, 0) only for f; use a
        // custom problem with f(.,.,0,0) = g(.,.,0,0) = 0 and xi = 0
        use crate::expr::Dims;
        use crate::problem::Lipschitz;
        let spec = ProblemSpec::from_expressions(
            Dims::default(),
            &["0.5*sin(y1+z11)"],
            &["0.5*sin(y1)+0.5*z11"],
            &["0"],
            Lipschitz::new(0.5, 0.5).unwrap(),
            1.0,
        )
        .unwrap();
        let ens = sample_ensemble(&make_grid(1.0, 16).unwrap(), 2048, 1, 1, 3).unwrap();
        let ctx = SolverContext::new(spec, ens, 2, Ridge::default()).unwrap();
        let mut frozen = FrozenField::terminal_constant(&ctx.ens.grid, 2048, 1, 1, &vec![1.0; 2048]);
        frozen.scale(0.0);
        let (y, z) = solve_frozen_bdsvie(&ctx, &frozen, Window::full(16), RowTerminal::Common(&ctx.xi)).unwrap();
        assert!(y.values().iter().chain(z.values()).all(|v| v.abs() <= 1e-3));
    }

    #[test]
    fn theta_is_constant_for_state_free_drivers() {
        let ctx = context("kernel", 16, 1024);
        let a = apply_theta(&ctx, &ctx.zero_field(), Window::full(16), RowTerminal::Common(&ctx.xi)).unwrap();
        let b = apply_theta(&ctx, &a, Window::full(16), RowTerminal::Common(&ctx.xi)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn theta_of_oracle_is_close_to_oracle() {
        let ctx = context("martingale", 32, 8192);
        let ens = &ctx.ens;
        let oracle = FrozenField {
            y: DiagonalProcess::from_fn(&ens.grid, ens.n_paths, 1, |i, m, o| o[0] = Oracle::Martingale.y(ens, i, m)),
            z: TriangularField::from_fn(&ens.grid, ens.n_paths, 1, 1, |_, _, _, o| o[0] = 1.0),
        };
        let t = apply_theta(&ctx, &oracle, Window::full(32), RowTerminal::Common(&ctx.xi)).unwrap();
        let (ey, ez) = oracle_errors(&ctx, &t, Oracle::Martingale);
        assert!(ey <= 0.05 && ez <= 0.05, "errors {ey} {ez}");
    }

    #[test]
    fn direct_projection_agrees_with_recursion() {
        let ctx = context("lipschitz-demo", 16, 4096);
        let x1 = apply_theta(&ctx, &ctx.zero_field(), Window::full(16), RowTerminal::Common(&ctx.xi)).unwrap();
        let x2 = apply_theta(&ctx, &x1, Window::full(16), RowTerminal::Common(&ctx.xi)).unwrap();
        for i in [0, 5, 10, 15] {
            let direct = direct_conditional(&ctx, &x1, i, 16, &ctx.xi).unwrap();
            let e = rel_err(x2.y.slice(i).iter().copied().zip(direct.iter().copied()));
            assert!(e <= 0.05, "row {i}: {e}");
        }
    }

    #[test]
    fn effective_terminal_matches_solved_row() {
        // projecting the aggregated terminal at t_from reproduces lambda^{t_i}(t_from)
        let ctx = context("lipschitz-demo", 16, 4096);
        let x1 = apply_theta(&ctx, &ctx.zero_field(), Window::full(16), RowTerminal::Common(&ctx.xi)).unwrap();
        let (i, from) = (3, 8);
        let eff = effective_terminal(&ctx, &x1, i, from).unwrap();
        let driver = FrozenDriver {
            spec: &ctx.spec,
            field: &x1,
            times: &ctx.ens.grid.times,
            row: i,
        };
        let sol = crate::bdsde::solve_bdsde(&driver, &ctx.regression, &ctx.ens, i, &ctx.xi, &ctx.bdsde).unwrap();
        let mut proj = vec![0.0; eff.len()];
        ctx.regression.conditional_into(from, &eff, 1, &mut proj);
        let e = rel_err(sol.lambda(from).iter().copied().zip(proj.iter().copied()));
        assert!(e <= 0.05, "{e}");
    }

    #[test]
    fn sub_window_keeps_outside_rows() {
        let ctx = context("lipschitz-demo", 8, 512);
        let input = ctx.zero_field();
        let rows: Vec<Vec<f64>> = (0..5).map(|_| ctx.xi.clone()).collect();
        let out = apply_theta(&ctx, &input, Window::new(2, 6), RowTerminal::PerRow(&rows)).unwrap();
        assert_eq!(out.y.slice(0), input.y.slice(0));
        assert_eq!(out.y.slice(7), input.y.slice(7));
        assert_eq!(out.y.slice(6), &ctx.xi[..]);
        assert!(out.z.cell(2, 6).iter().all(|&v| v == 0.0));
        assert!(out.z.cell(2, 5).iter().any(|&v| v != 0.0));
        assert!(apply_theta(&ctx, &input, Window::new(5, 9), RowTerminal::Common(&ctx.xi)).is_err());
    }
}
