//! Executable checks: the a-priori estimate, uniqueness from two starting
//! points, contraction of the Picard residuals, and oracle error tables.
//!
//! Every section stores the numbers its pass flag was computed from, and
//! [`DiagnosticsReport::recheck`] recomputes the flags from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bdsvie::{
    build_certificate, field_distance, iteration_bound, stitched_solve, CertificateOverrides, ContractionCertificate,
    FrozenField, Init, PicardOptions, SolutionEstimate, SolverContext, StripReport, Window,
};
use crate::calculus::WeightedNormParams;
use crate::catalog::{catalog_problem, Oracle};
use crate::error::{Error, Result};
use crate::regression::Ridge;
use crate::scenario::{make_grid, sample_ensemble};

/// Monte Carlo slack on the exact-in-expectation statements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Slack {
    /// `lhs <= apriori * rhs`
    pub apriori: f64,
    /// `ratio <= Lambda + contraction`
    pub contraction: f64,
    /// `distance <= uniqueness * tol`
    pub uniqueness: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self {
            apriori: 1.1,
            contraction: 0.1,
            uniqueness: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`
    pub slack_ratio: f64,
    pub factor: f64,
    pub pass: bool,
}

impl AprioriCheck {
    fn decide(&self) -> bool {
        self.lhs <= self.factor * self.rhs
    }
}

/// Compares the unweighted size of a solution on `window` with
/// `3 (T - S) E|xi|^2 + 3 max(T - S, 1) E sum sum (|f|^2 + |g|^2) dt^2`,
/// `f` and `g` evaluated along the solution itself (frozen form).
pub fn check_apriori_bound(ctx: &SolverContext, sol: &FrozenField, window: Window, factor: f64) -> Result<AprioriCheck> {
    let grid = &ctx.ens.grid;
    let n = grid.n_steps;
    if window.end != n || window.start >= n {
        return Err(Error::InvalidArgument(format!(
            "a-priori check needs a window [S, T] ending at the terminal index {n}, got [{}, {}]",
            window.start, window.end
        )));
    }
    let lhs = sol.norm_sq(&WeightedNormParams::window(0.0, window.start, window.end))?;
    let (mp, k, l) = (ctx.ens.n_paths, ctx.k(), ctx.ens.l);
    let dt = grid.dt;
    let span = grid.t(window.end) - grid.t(window.start);
    let xi_sq = ctx.xi.iter().map(|v| v * v).sum::<f64>() / mp as f64;
    let mut fo = vec![0.0; k];
    let mut go = vec![0.0; k * l];
    let mut coeff = 0.0;
    for i in window.start..n {
        let t = grid.t(i);
        for j in i..n {
            let s = grid.t(j);
            for m in 0..mp {
                let (y, z) = (sol.y.at(j, m), sol.z.at(i, j, m));
                ctx.spec.eval_f(t, s, y, z, &mut fo)?;
                ctx.spec.eval_g(t, s, y, z, &mut go)?;
                coeff += fo.iter().chain(&go).map(|v| v * v).sum::<f64>();
            }
        }
    }
    coeff *= dt * dt / mp as f64;
    let rhs = 3.0 * span * xi_sq + 3.0 * span.max(1.0) * coeff;
    let mut check = AprioriCheck {
        lhs,
        rhs,
        slack_ratio: if rhs > 0.0 { lhs / rhs } else { f64::INFINITY },
        factor,
        pass: false,
    };
    check.pass = check.decide();
    Ok(check)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessCheck {
    /// a-weighted distance (not squared) of the two solutions
    pub distance: f64,
    pub tol: f64,
    pub factor: f64,
    pub pass: bool,
}

impl UniquenessCheck {
    fn decide(&self) -> bool {
        self.distance <= self.factor * self.tol
    }
}

pub fn compare_solutions(a: &SolutionEstimate, b: &SolutionEstimate, tol: f64, factor: f64) -> Result<UniquenessCheck> {
    let distance = field_distance(&a.field, &b.field, a.certificate.a)?;
    let mut check = UniquenessCheck {
        distance,
        tol,
        factor,
        pass: false,
    };
    check.pass = check.decide();
    Ok(check)
}

/// Solves from the zero field and from the `xi`-constant field and compares.
pub fn run_uniqueness_test(
    ctx: &SolverContext,
    cert: &ContractionCertificate,
    opts: &PicardOptions,
    factor: f64,
) -> Result<UniquenessCheck> {
    let a = stitched_solve(ctx, cert, opts, Init::Zero)?;
    let b = stitched_solve(ctx, cert, opts, Init::Terminal)?;
    compare_solutions(&a, &b, opts.tol, factor)
}

/// `r_n = residual_{n+1}^2 / residual_n^2`; passes iff every ratio from the
/// second on is at most `lambda + slack`.
pub fn measure_contraction_ratios(residuals: &[f64], lambda: f64, slack: f64) -> Result<(Vec<f64>, bool)> {
    if residuals.len() < 3 {
        return Err(Error::TooFewResiduals {
            needed: 3,
            got: residuals.len(),
        });
    }
    let ratios: Vec<f64> = residuals
        .windows(2)
        .map(|w| if w[1] == 0.0 { 0.0 } else { (w[1] / w[0]).powi(2) })
        .collect();
    let pass = ratios[1..].iter().all(|&r| r <= lambda + slack);
    Ok((ratios, pass))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripContraction {
    pub start: usize,
    pub stop: usize,
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub iteration_bound: usize,
    pub converged: bool,
    pub note: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub lambda: f64,
    pub slack: f64,
    pub tol: f64,
    pub strips: Vec<StripContraction>,
    pub pass: bool,
}

impl StripContraction {
    fn decide(&self, lambda: f64, slack: f64) -> bool {
        let ratios_ok = self.residuals.len() < 3 || self.ratios[1..].iter().all(|&r| r <= lambda + slack);
        ratios_ok && self.converged && self.iterations <= self.iteration_bound
    }
}

/// Contraction ratios and the geometric iteration bound on every interval
/// of a solution. Intervals that converged in fewer than 3 iterations have
/// no ratio to test and pass on convergence alone.
pub fn contraction_check(sol: &SolutionEstimate, tol: f64, slack: f64) -> ContractionCheck {
    let lambda = sol.certificate.lambda_factor;
    let strips: Vec<StripContraction> = sol
        .strips
        .iter()
        .map(|s: &StripReport| {
            let (ratios, note) = match measure_contraction_ratios(&s.residuals, lambda, slack) {
                Ok((r, _)) => (r, None),
                Err(e) => (
                    s.residuals.windows(2).map(|w| if w[1] == 0.0 { 0.0 } else { (w[1] / w[0]).powi(2) }).collect(),
                    Some(format!("{e}; converged without a ratio to test")),
                ),
            };
            let note = if s.converged {
                note
            } else {
                Some(format!("max_iter exhausted after {} iterations above tol {tol}", s.residuals.len()))
            };
            let r0 = s.residuals.first().map_or(0.0, |r| r * r);
            let mut out = StripContraction {
                start: s.start,
                stop: s.stop,
                residuals: s.residuals.clone(),
                ratios,
                iterations: s.residuals.len(),
                iteration_bound: iteration_bound(r0, tol, lambda),
                converged: s.converged,
                note,
                pass: false,
            };
            out.pass = out.decide(lambda, slack);
            out
        })
        .collect();
    let pass = strips.iter().all(|s| s.pass);
    ContractionCheck {
        lambda,
        slack,
        tol,
        strips,
        pass,
    }
}

/// Grid and thresholds for one oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCaseSpec {
    pub name: String,
    pub n_steps: usize,
    pub n_paths: usize,
    /// bound on the relative L2 error of `Y`
    pub y_tol: Option<f64>,
    /// bound on the relative L2 error of `Z`
    pub z_tol: Option<f64>,
    /// bound on `max_i` of the RMS error of `Y(t_i)` across paths
    pub sup_tol: Option<f64>,
}

pub fn default_oracle_cases() -> Vec<OracleCaseSpec> {
    let case = |name: &str, n, m, y, z, sup| OracleCaseSpec {
        name: name.into(),
        n_steps: n,
        n_paths: m,
        y_tol: y,
        z_tol: z,
        sup_tol: sup,
    };
    vec![
        case("martingale", 32, 8192, Some(0.05), Some(0.05), None),
        case("backward-driver", 32, 8192, Some(0.02), None, None),
        case("linear-drift", 64, 16384, Some(0.05), Some(0.05), None),
        case("kernel", 32, 8192, None, None, Some(0.03)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleErrors {
    /// relative L2 error of `Y` over all grid times and paths
    pub y_error: f64,
    /// relative L2 error of `Z`; the RMS error when the oracle `Z` vanishes
    pub z_error: f64,
    pub z_absolute: bool,
    pub y_sup_rms: f64,
}

pub fn oracle_errors(ctx: &SolverContext, field: &FrozenField, oracle: Oracle) -> OracleErrors {
    let ens = &ctx.ens;
    let (n, mp) = (ens.n_steps(), ens.n_paths);
    let (mut ny, mut dy, mut nz, mut dz, mut cells) = (0.0, 0.0, 0.0, 0.0, 0usize);
    let mut y_sup_rms = 0.0f64;
    for i in 0..=n {
        let mut row = 0.0;
        for m in 0..mp {
            let o = oracle.y(ens, i, m);
            let e = (field.y.at(i, m)[0] - o).powi(2);
            row += e;
            ny += e;
            dy += o * o;
        }
        y_sup_rms = y_sup_rms.max((row / mp as f64).sqrt());
        if i < n {
            for j in i..n {
                let o = oracle.z(ens, i, j);
                for m in 0..mp {
                    nz += (field.z.at(i, j, m)[0] - o).powi(2);
                    dz += o * o;
                    cells += 1;
                }
            }
        }
    }
    let z_absolute = dz == 0.0;
    OracleErrors {
        y_error: (ny / dy).sqrt(),
        z_error: if z_absolute { (nz / cells.max(1) as f64).sqrt() } else { (nz / dz).sqrt() },
        z_absolute,
        y_sup_rms,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub spec: OracleCaseSpec,
    pub degree: usize,
    pub seed: u64,
    pub errors: OracleErrors,
    pub iterations: usize,
    pub converged: bool,
    pub pass: bool,
}

impl OracleCase {
    fn decide(&self) -> bool {
        let e = &self.errors;
        self.spec.y_tol.is_none_or(|t| e.y_error <= t)
            && self.spec.z_tol.is_none_or(|t| e.z_error <= t)
            && self.spec.sup_tol.is_none_or(|t| e.y_sup_rms <= t)
            && self.converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSuiteConfig {
    pub cases: Vec<OracleCaseSpec>,
    pub degree: usize,
    pub ridge: Ridge,
    pub seed: u64,
    pub picard: PicardOptions,
}

impl Default for OracleSuiteConfig {
    fn default() -> Self {
        Self {
            cases: default_oracle_cases(),
            degree: 2,
            ridge: Ridge::default(),
            seed: 42,
            picard: PicardOptions::default(),
        }
    }
}

/// Solves one catalog problem with its default certificate and compares it
/// with the closed form.
pub fn run_oracle_case(spec: &OracleCaseSpec, cfg: &OracleSuiteConfig) -> Result<OracleCase> {
    let entry = catalog_problem(&spec.name)?;
    let oracle = entry
        .oracle
        .ok_or_else(|| Error::InvalidArgument(format!("catalog problem '{}' has no closed form", spec.name)))?;
    let p = &entry.spec;
    let grid = make_grid(p.horizon, spec.n_steps)?;
    let ens = sample_ensemble(&grid, spec.n_paths, p.dims.d, p.dims.l, cfg.seed)?;
    let cert = build_certificate(p.lipschitz.c, p.lipschitz.alpha, p.horizon, &CertificateOverrides::default())?;
    let ctx = SolverContext::new(entry.spec, ens, cfg.degree, cfg.ridge)?;
    let sol = stitched_solve(&ctx, &cert, &cfg.picard, Init::Zero)?;
    let mut case = OracleCase {
        spec: spec.clone(),
        degree: cfg.degree,
        seed: cfg.seed,
        errors: oracle_errors(&ctx, &sol.field, oracle),
        iterations: sol.iterations_used(),
        converged: sol.converged(),
        pass: false,
    };
    case.pass = case.decide();
    Ok(case)
}

pub fn run_oracle_suite(cfg: &OracleSuiteConfig) -> Result<Vec<OracleCase>> {
    cfg.cases
        .iter()
        .map(|c| run_oracle_case(c, cfg).map_err(|e| e.context(format!("oracle '{}'", c.name))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSection {
    pub certificate: Option<ContractionCertificate>,
    pub error: Option<String>,
    pub pass: bool,
}

/// Everything `verify` computed. Absent sections were not selected; checks
/// that failed to run carry their error under `errors`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apriori: Option<AprioriCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<ContractionCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracles: Option<Vec<OracleCase>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<String, String>,
}

impl DiagnosticsReport {
    pub fn all_pass(&self) -> bool {
        self.errors.is_empty()
            && self.certificate.as_ref().is_none_or(|c| c.pass)
            && self.apriori.as_ref().is_none_or(|c| c.pass)
            && self.uniqueness.as_ref().is_none_or(|c| c.pass)
            && self.contraction.as_ref().is_none_or(|c| c.pass)
            && self.oracles.as_ref().is_none_or(|v| v.iter().all(|c| c.pass))
    }

    /// True iff every stored pass flag equals the flag recomputed from the
    /// stored numbers.
    pub fn recheck(&self) -> bool {
        self.apriori.as_ref().is_none_or(|c| c.pass == c.decide())
            && self.uniqueness.as_ref().is_none_or(|c| c.pass == c.decide())
            && self.contraction.as_ref().is_none_or(|c| {
                let strips_ok = c.strips.iter().all(|s| s.pass == s.decide(c.lambda, c.slack));
                strips_ok && c.pass == c.strips.iter().all(|s| s.pass)
            })
            && self.oracles.as_ref().is_none_or(|v| v.iter().all(|c| c.pass == c.decide()))
    }

    /// Fixed-width summary, one line per check.
    pub fn summary_table(&self) -> String {
        let mut out = String::from("check                    result  detail\n");
        let mut line = |name: &str, pass: bool, detail: String| {
            out.push_str(&format!("{name:<24} {:<7} {detail}\n", if pass { "PASS" } else { "FAIL" }));
        };
        if let Some(c) = &self.certificate {
            let detail = match (&c.certificate, &c.error) {
                (Some(cert), _) => format!("Lambda={:.6} intervals={}", cert.lambda_factor, cert.n_intervals()),
                (None, Some(e)) => e.clone(),
                _ => String::new(),
            };
            line("certificate", c.pass, detail);
        }
        if let Some(c) = &self.apriori {
            line("apriori", c.pass, format!("lhs={:.6} rhs={:.6} ratio={:.4}", c.lhs, c.rhs, c.slack_ratio));
        }
        if let Some(c) = &self.uniqueness {
            line("uniqueness", c.pass, format!("distance={:.3e} bound={:.3e}", c.distance, c.factor * c.tol));
        }
        if let Some(c) = &self.contraction {
            let worst = c
                .strips
                .iter()
                .flat_map(|s| s.ratios.iter().skip(1).copied())
                .fold(0.0f64, f64::max);
            line("contraction", c.pass, format!("max ratio={worst:.4} Lambda={:.4}", c.lambda));
        }
        if let Some(v) = &self.oracles {
            for c in v {
                line(
                    &format!("oracle {}", c.spec.name),
                    c.pass,
                    format!(
                        "Y={:.4} Z={:.4}{} supY={:.4} N={} M={}",
                        c.errors.y_error,
                        c.errors.z_error,
                        if c.errors.z_absolute { " (abs)" } else { "" },
                        c.errors.y_sup_rms,
                        c.spec.n_steps,
                        c.spec.n_paths
                    ),
                );
            }
        }
        for (name, e) in &self.errors {
            line(name, false, e.clone());
        }
        out
    }
}
