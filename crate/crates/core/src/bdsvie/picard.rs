use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::calculus::{DiagonalProcess, TriangularField, WeightedNormParams};
use crate::error::{Error, Result};

use super::certificate::ContractionCertificate;
use super::field::FrozenField;
use super::frozen::{theta_rows, RowTerminal, SolverContext, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardOptions {
    /// stop once the a-weighted distance of consecutive iterates is `<= tol`
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 25 }
    }
}

/// Picard history of one interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripReport {
    /// first unknown row
    pub start: usize,
    /// first row already known (or `N` for the last interval)
    pub stop: usize,
    /// a-weighted distance (not squared) between consecutive iterates
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// the drivers ignore `(y, z)`: `Theta` is constant and its first value
    /// is the fixed point, so the second residual is exactly 0 and not recomputed
    pub constant_map: bool,
}

#[derive(Debug, Clone)]
pub struct SolutionEstimate {
    pub field: FrozenField,
    /// one report per interval, in solve order (latest interval first)
    pub strips: Vec<StripReport>,
    pub certificate: ContractionCertificate,
}

impl SolutionEstimate {
    pub fn y(&self) -> &DiagonalProcess {
        &self.field.y
    }

    pub fn z(&self) -> &TriangularField {
        &self.field.z
    }

    /// Residuals of every interval, concatenated in solve order.
    pub fn picard_residuals(&self) -> Vec<f64> {
        self.strips.iter().flat_map(|s| s.residuals.iter().copied()).collect()
    }

    pub fn iterations_used(&self) -> usize {
        self.strips.iter().map(|s| s.residuals.len()).sum()
    }

    pub fn converged(&self) -> bool {
        self.strips.iter().all(|s| s.converged)
    }
}

/// Iterates `x <- Theta(x)` on `rows` until the distance measured with
/// `params` drops to `opts.tol`.
pub(crate) fn picard_rows(
    ctx: &SolverContext,
    init: FrozenField,
    rows: Range<usize>,
    end: usize,
    terminal: RowTerminal<'_>,
    params: &WeightedNormParams,
    opts: &PicardOptions,
) -> Result<(FrozenField, StripReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let constant_map = !ctx.spec.depends_on_state();
    let mut report = StripReport {
        start: rows.start,
        stop: params.end,
        residuals: Vec::new(),
        converged: false,
        constant_map,
    };
    let mut x = init;
    for it in 1..=opts.max_iter {
        let next = theta_rows(ctx, &x, rows.clone(), end, terminal)
            .map_err(|e| e.context(format!("Picard iteration {it}")))?;
        let r = x.distance_sq(&next, params)?.sqrt();
        report.residuals.push(r);
        x = next;
        if r <= opts.tol {
            report.converged = true;
            break;
        }
        if constant_map {
            report.residuals.push(0.0);
            report.converged = true;
            break;
        }
    }
    Ok((x, report))
}

/// Picard iteration on `window` from `init`; the window must be shorter than
/// the certificate's maximal step.
pub fn picard_solve(
    ctx: &SolverContext,
    window: Window,
    terminal: RowTerminal<'_>,
    cert: &ContractionCertificate,
    opts: &PicardOptions,
    init: &FrozenField,
) -> Result<SolutionEstimate> {
    let grid = &ctx.ens.grid;
    if window.start > window.end || window.end > grid.n_steps {
        return Err(Error::InvalidArgument(format!(
            "window [{}, {}] is not inside [0, {}]",
            window.start, window.end, grid.n_steps
        )));
    }
    let length = grid.t(window.end) - grid.t(window.start);
    if let Some(s) = cert.max_step {
        if !(length < s) {
            return Err(Error::Certificate(format!(
                "violated T - S < theta/(C(1+theta)): window length {length}, bound {s}"
            )));
        }
    }
    let params = WeightedNormParams::window(cert.a, window.start, window.end);
    let (field, report) = picard_rows(
        ctx,
        init.clone(),
        window.start..window.end + 1,
        window.end,
        terminal,
        &params,
        opts,
    )?;
    Ok(SolutionEstimate {
        field,
        strips: vec![report],
        certificate: cert.clone(),
    })
}

/// Iterations the geometric bound allows to get from the first squared
/// residual `r0_sq` to `tol`: `ceil(log(tol^2 (1 - Lambda) / R0) / log Lambda) + 2`.
pub fn iteration_bound(r0_sq: f64, tol: f64, lambda: f64) -> usize {
    if r0_sq <= tol * tol {
        return 1;
    }
    let n = ((tol * tol * (1.0 - lambda) / r0_sq).ln() / lambda.ln()).ceil();
    n.max(0.0) as usize + 2
}
