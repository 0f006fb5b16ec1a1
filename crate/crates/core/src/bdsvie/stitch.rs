//! Interval stitching.
//!
//! The partition `T = S_0 > ... > S_q = 0` is solved from the right. On
//! interval `p` the unknowns are the rows `t in [S_{p+1}, S_p)`: `Y(t)` and
//! the whole row `Z(t, s)`, `s in [t, T)`. Each such row is the frozen BDSDE
//! over `[t, T]` with terminal `xi`, with `y` on `[S_p, T]` held at the
//! values already solved. This is the same equation as projecting the
//! aggregated terminal of [`effective_terminal`](super::frozen::effective_terminal)
//! at `S_p`, but it also determines `Z(t, s)` for `s >= S_p`.

use crate::calculus::WeightedNormParams;
use crate::error::Result;

use super::certificate::ContractionCertificate;
use super::field::{FrozenField, Init};
use super::frozen::{theta_rows, RowTerminal, SolverContext};
use super::picard::{picard_rows, PicardOptions, SolutionEstimate};

pub fn stitched_solve(
    ctx: &SolverContext,
    cert: &ContractionCertificate,
    opts: &PicardOptions,
    init: Init,
) -> Result<SolutionEstimate> {
    let grid = &ctx.ens.grid;
    let n = grid.n_steps;
    cert.validate()?;
    let idx = cert.partition_indices(grid)?;
    let mut field = FrozenField::initial(init, grid, ctx.ens.n_paths, ctx.k(), ctx.ens.d, &ctx.xi);
    let mut strips = Vec::with_capacity(idx.len() - 1);
    for p in 0..idx.len() - 1 {
        let (start, stop) = (idx[p + 1], idx[p]);
        // the last interval also owns the terminal row
        let rows = start..if p == 0 { n + 1 } else { stop };
        let params = WeightedNormParams::strip(cert.a, start, stop, n);
        let (next, report) = picard_rows(ctx, field, rows, n, RowTerminal::Common(&ctx.xi), &params, opts)
            .map_err(|e| e.context(format!("interval {p} [{}, {}]", grid.t(start), grid.t(stop))))?;
        field = next;
        strips.push(report);
    }
    Ok(SolutionEstimate {
        field,
        strips,
        certificate: cert.clone(),
    })
}

/// `Theta(sol) - sol` over the whole triangle in the a-weighted norm (not
/// squared): how far the assembled solution is from solving the discrete
/// equation on every row at once.
pub fn resubstitution_residual(ctx: &SolverContext, field: &FrozenField, a: f64) -> Result<f64> {
    let n = ctx.n_steps();
    let image = theta_rows(ctx, field, 0..n + 1, n, RowTerminal::Common(&ctx.xi))?;
    Ok(field.distance_sq(&image, &WeightedNormParams::window(a, 0, n))?.sqrt())
}

/// Distance (not squared) between two fields over the whole triangle.
pub fn field_distance(a: &FrozenField, b: &FrozenField, exponent: f64) -> Result<f64> {
    let n = a.y.grid.n_steps;
    Ok(a.distance_sq(b, &WeightedNormParams::window(exponent, 0, n))?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdsvie::certificate::{build_certificate, CertificateOverrides};
    use crate::bdsvie::frozen::Window;
    use crate::bdsvie::picard::picard_solve;
    use crate::catalog::{catalog_problem, Oracle};
    use crate::regression::Ridge;
    use crate::scenario::{make_grid, sample_ensemble};

    fn context(name: &str, n: usize, mp: usize) -> SolverContext {
        let entry = catalog_problem(name).unwrap();
        let ens = sample_ensemble(&make_grid(1.0, n).unwrap(), mp, 1, 1, 42).unwrap();
        SolverContext::new(entry.spec, ens, 2, Ridge::default()).unwrap()
    }

    fn certificate(ctx: &SolverContext, partition: Option<Vec<f64>>) -> ContractionCertificate {
        let l = ctx.spec.lipschitz;
        build_certificate(l.c, l.alpha, 1.0, &CertificateOverrides { partition, ..Default::default() }).unwrap()
    }

    #[test]
    fn single_interval_equals_picard_solve() {
        let ctx = context("lipschitz-demo", 16, 2048);
        let cert = certificate(&ctx, None);
        assert_eq!(cert.n_intervals(), 1);
        let opts = PicardOptions::default();
        let a = stitched_solve(&ctx, &cert, &opts, Init::Zero).unwrap();
        let mut init = ctx.zero_field();
        init.y.slice_mut(16).copy_from_slice(&ctx.xi);
        let b = picard_solve(&ctx, Window::full(16), RowTerminal::Common(&ctx.xi), &cert, &opts, &init).unwrap();
        assert_eq!(a.field, b.field);
        assert_eq!(a.strips, b.strips);
    }

    #[test]
    fn two_intervals_on_martingale_keep_accuracy() {
        let ctx = context("martingale", 32, 8192);
        let cert = certificate(&ctx, Some(vec![1.0, 0.5, 0.0]));
        let sol = stitched_solve(&ctx, &cert, &PicardOptions::default(), Init::Zero).unwrap();
        assert_eq!(sol.strips.len(), 2);
        let (n, mp, ens) = (32, 8192, &ctx.ens);
        let (mut ny, mut dy, mut nz, mut dz) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..=n {
            for m in 0..mp {
                let o = Oracle::Martingale.y(ens, i, m);
                ny += (sol.y().at(i, m)[0] - o).powi(2);
                dy += o * o;
                if i < n {
                    for j in i..n {
                        nz += (sol.z().at(i, j, m)[0] - 1.0).powi(2);
                        dz += 1.0;
                    }
                }
            }
        }
        let (ey, ez) = ((ny / dy).sqrt(), (nz / dz).sqrt());
        assert!(ey <= 0.05 && ez <= 0.05, "errors {ey} {ez}");
        assert!(resubstitution_residual(&ctx, &sol.field, cert.a).unwrap() <= 3.0 * 1e-4);
    }

    #[test]
    fn lipschitz_demo_two_intervals_resubstitute() {
        let ctx = context("lipschitz-demo", 16, 4096);
        let cert = certificate(&ctx, Some(vec![1.0, 0.5, 0.0]));
        let opts = PicardOptions::default();
        let sol = stitched_solve(&ctx, &cert, &opts, Init::Zero).unwrap();
        assert!(sol.converged(), "{:?}", sol.strips);
        let r = resubstitution_residual(&ctx, &sol.field, cert.a).unwrap();
        assert!(r <= 3.0 * opts.tol, "residual {r}");
    }

    #[test]
    fn inits_lead_to_same_solution() {
        let ctx = context("lipschitz-demo", 16, 4096);
        let cert = certificate(&ctx, Some(vec![1.0, 0.5, 0.0]));
        let opts = PicardOptions::default();
        let a = stitched_solve(&ctx, &cert, &opts, Init::Zero).unwrap();
        let b = stitched_solve(&ctx, &cert, &opts, Init::Terminal).unwrap();
        let d = field_distance(&a.field, &b.field, cert.a).unwrap();
        assert!(d <= 10.0 * opts.tol, "distance {d}");
        let c = stitched_solve(&ctx, &cert, &opts, Init::Zero).unwrap();
        assert_eq!(field_distance(&a.field, &c.field, cert.a).unwrap(), 0.0);
    }

    #[test]
    fn solution_is_insensitive_to_a() {
        let ctx = context("lipschitz-demo", 16, 4096);
        let l = ctx.spec.lipschitz;
        let opts = PicardOptions::default();
        let solve = |a: f64| {
            let o = CertificateOverrides { a: Some(a), ..Default::default() };
            let cert = build_certificate(l.c, l.alpha, 1.0, &o).unwrap();
            stitched_solve(&ctx, &cert, &opts, Init::Zero).unwrap()
        };
        let (x, y) = (solve(4.0), solve(16.0));
        assert!(field_distance(&x.field, &y.field, 4.0).unwrap() <= 10.0 * opts.tol);
    }

    #[test]
    fn off_grid_partition_is_rejected() {
        let ctx = context("martingale", 8, 256);
        let cert = certificate(&ctx, Some(vec![1.0, 0.3, 0.0]));
        assert!(stitched_solve(&ctx, &cert, &PicardOptions::default(), Init::Zero).is_err());
    }
}
