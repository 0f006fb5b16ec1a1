//! `bdsvie` command line: `certificate`, `solve`, `verify`, `oracles`.
//!
//! Exit codes: 0 success, 1 a check failed or Picard did not converge,
//! 2 invalid input or a solver error. Files are byte-identical for a fixed
//! config and seed at any thread count; wall-clock timings go to stderr only.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bdsvie::{
    resubstitution_residual, stitched_solve, ContractionCertificate, Init, SolutionEstimate, SolverContext, StripReport, Window,
};
use crate::config::{CheckKind, Format, ProblemConfig, RunConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::verify::{
    check_apriori_bound, compare_solutions, contraction_check, run_oracle_case, CertificateSection, DiagnosticsReport, OracleCase,
};

#[derive(Debug, Parser)]
#[command(name = "bdsvie", version, about = "Monte Carlo solver and checks for backward doubly stochastic Volterra equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// overrides `solver.seed`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// overrides `output.dir`
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the contraction certificate and write certificate.json
    Certificate { config: PathBuf },
    /// Solve and write solution_y.csv, solution_z.csv, diagnostics.json
    Solve { config: PathBuf },
    /// Run the selected checks and write report.json
    Verify {
        config: PathBuf,
        /// comma-separated subset of the checks (overrides `checks.select`)
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<CheckKind>>,
    },
    /// Compare catalog problems with their closed forms; writes oracles.json
    Oracles { config: PathBuf },
}

impl Command {
    fn config_path(&self) -> &Path {
        match self {
            Command::Certificate { config }
            | Command::Solve { config }
            | Command::Verify { config, .. }
            | Command::Oracles { config } => config,
        }
    }
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Runs one command; `Ok(false)` means it ran but something did not pass.
pub fn run(cli: Cli) -> Result<bool> {
    let mut cfg = RunConfig::load(cli.command.config_path())?;
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = dir.clone();
    }
    if let Command::Verify { checks: Some(c), .. } = &cli.command {
        cfg.checks.select = c.clone();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Certificate { .. } => {
            let cert = cmd_certificate(&cfg)?;
            println!("{}", to_json(&cert)?.trim_end());
            Ok(true)
        }
        Command::Solve { .. } => {
            let out = cmd_solve(&cfg)?;
            if !out.converged {
                eprintln!("warning: Picard iteration did not reach tol = {} within max_iter = {}", cfg.solver.tol, cfg.solver.max_iter);
            }
            Ok(out.converged)
        }
        Command::Verify { .. } => {
            let report = cmd_verify(&cfg)?;
            print!("{}", report.summary_table());
            Ok(report.all_pass())
        }
        Command::Oracles { .. } => {
            let report = cmd_oracles(&cfg)?;
            print!("{}", report.summary_table());
            Ok(report.all_pass())
        }
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).context(dir.display().to_string()))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok(path)
}

/// Validates the config and writes `certificate.json`.
pub fn cmd_certificate(cfg: &RunConfig) -> Result<ContractionCertificate> {
    let cert = cfg.validate()?.certificate;
    if cfg.output.wants(Format::Json) {
        write_file(&cfg.output.dir, "certificate.json", &to_json(&cert)?)?;
    }
    Ok(cert)
}

#[derive(Debug, Serialize)]
struct Diagnostics<'a> {
    problem: &'a ProblemConfig,
    solver: &'a SolverConfig,
    certificate: &'a ContractionCertificate,
    converged: bool,
    iterations: usize,
    picard_residuals: Vec<f64>,
    strips: &'a [StripReport],
    /// `|Theta(Y, Z) - (Y, Z)|` over the whole triangle, a-weighted
    resubstitution_residual: f64,
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub solution: SolutionEstimate,
    pub converged: bool,
    pub files: Vec<PathBuf>,
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    let resolved = cfg.validate()?;
    let clock = Instant::now();
    let ctx = cfg.context(resolved.spec)?;
    let sampled = clock.elapsed();
    let sol = stitched_solve(&ctx, &resolved.certificate, &cfg.solver.picard(), cfg.solver.init)?;
    let solved = clock.elapsed();
    if !sol.field.is_finite() {
        return Err(Error::NonFinite("solution field".into()));
    }
    let resub = resubstitution_residual(&ctx, &sol.field, sol.certificate.a)?;
    eprintln!(
        "timings: sampling {:.3} s, solve {:.3} s, total {:.3} s",
        sampled.as_secs_f64(),
        (solved - sampled).as_secs_f64(),
        clock.elapsed().as_secs_f64()
    );
    let dir = &cfg.output.dir;
    let mut files = Vec::new();
    if cfg.output.wants(Format::Csv) {
        files.push(write_file(dir, "solution_y.csv", &solution_y_csv(&ctx, &sol)?)?);
        files.push(write_file(dir, "solution_z.csv", &solution_z_csv(&ctx, &sol)?)?);
    }
    if cfg.output.wants(Format::Json) {
        let diag = Diagnostics {
            problem: &cfg.problem,
            solver: &cfg.solver,
            certificate: &sol.certificate,
            converged: sol.converged(),
            iterations: sol.iterations_used(),
            picard_residuals: sol.picard_residuals(),
            strips: &sol.strips,
            resubstitution_residual: resub,
        };
        files.push(write_file(dir, "diagnostics.json", &to_json(&diag)?)?);
    }
    Ok(SolveOutcome {
        converged: sol.converged(),
        solution: sol,
        files,
    })
}

/// Ensemble mean and sample standard deviation of component `c` of
/// `k`-vectors stored path-major in `values`.
fn mean_std(values: &[f64], k: usize, c: usize) -> (f64, f64) {
    let m = values.len() / k;
    let mean = (0..m).map(|p| values[p * k + c]).sum::<f64>() / m as f64;
    let var = (0..m).map(|p| (values[p * k + c] - mean).powi(2)).sum::<f64>() / (m.max(2) - 1) as f64;
    (mean, var.sqrt())
}

fn push_number(line: &mut String, v: f64, what: impl FnOnce() -> String) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(what()));
    }
    write!(line, ",{v:.12e}").expect("writing to a String cannot fail");
    Ok(())
}

/// `t, y<c>_mean, y<c>_std, ...`, one row per grid time.
pub fn solution_y_csv(ctx: &SolverContext, sol: &SolutionEstimate) -> Result<String> {
    let (grid, k) = (&ctx.ens.grid, ctx.k());
    let mut out = String::from("t");
    for c in 1..=k {
        write!(out, ",y{c}_mean,y{c}_std").unwrap();
    }
    out.push('\n');
    for i in 0..=grid.n_steps {
        let mut line = format!("{:.12e}", grid.t(i));
        for c in 0..k {
            let (mean, std) = mean_std(sol.y().slice(i), k, c);
            push_number(&mut line, mean, || format!("mean of Y{} at t = {}", c + 1, grid.t(i)))?;
            push_number(&mut line, std, || format!("std of Y{} at t = {}", c + 1, grid.t(i)))?;
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Long format over the triangle: `t, s, z<a><b>_mean, z<a><b>_std, ...`
/// for every `t_i <= s_j < T`.
pub fn solution_z_csv(ctx: &SolverContext, sol: &SolutionEstimate) -> Result<String> {
    let (grid, k, d) = (&ctx.ens.grid, ctx.k(), ctx.ens.d);
    let mut out = String::from("t,s");
    for a in 1..=k {
        for b in 1..=d {
            write!(out, ",z{a}{b}_mean,z{a}{b}_std").unwrap();
        }
    }
    out.push('\n');
    let n = grid.n_steps;
    for i in 0..n {
        let row = sol.z().row(i);
        let cell_len = ctx.ens.n_paths * k * d;
        for j in i..n {
            let cell = &row[(j - i) * cell_len..(j - i + 1) * cell_len];
            let mut line = format!("{:.12e},{:.12e}", grid.t(i), grid.t(j));
            for c in 0..k * d {
                let (mean, std) = mean_std(cell, k * d, c);
                let at = || format!("Z component {c} at (t, s) = ({}, {})", grid.t(i), grid.t(j));
                push_number(&mut line, mean, at)?;
                push_number(&mut line, std, at)?;
            }
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Runs the selected checks; a check that errors is recorded under
/// `errors` and does not stop the others. Writes `report.json`.
pub fn cmd_verify(cfg: &RunConfig) -> Result<DiagnosticsReport> {
    let resolved = cfg.validate()?;
    let mut select = cfg.checks.select.clone();
    select.sort();
    select.dedup();
    let has = |c: CheckKind| select.contains(&c);
    let slack = cfg.checks.slack;
    let opts = cfg.solver.picard();
    let mut report = DiagnosticsReport::default();
    let clock = Instant::now();

    if has(CheckKind::Certificate) {
        let cert = &resolved.certificate;
        let error = cert.validate().err().map(|e| e.to_string());
        report.certificate = Some(CertificateSection {
            certificate: Some(cert.clone()),
            pass: error.is_none(),
            error,
        });
    }

    let needs_solution = has(CheckKind::Apriori) || has(CheckKind::Uniqueness) || has(CheckKind::Contraction);
    if needs_solution {
        let solved = cfg.context(resolved.spec.clone()).and_then(|ctx| {
            let sol = stitched_solve(&ctx, &resolved.certificate, &opts, Init::Zero)?;
            Ok((ctx, sol))
        });
        match solved {
            Ok((ctx, sol)) => {
                if has(CheckKind::Apriori) {
                    match check_apriori_bound(&ctx, &sol.field, Window::full(ctx.n_steps()), slack.apriori) {
                        Ok(c) => report.apriori = Some(c),
                        Err(e) => {
                            report.errors.insert("apriori".into(), e.to_string());
                        }
                    }
                }
                if has(CheckKind::Contraction) {
                    report.contraction = Some(contraction_check(&sol, opts.tol, slack.contraction));
                }
                if has(CheckKind::Uniqueness) {
                    let other = stitched_solve(&ctx, &resolved.certificate, &opts, Init::Terminal)
                        .and_then(|b| compare_solutions(&sol, &b, opts.tol, slack.uniqueness));
                    match other {
                        Ok(c) => report.uniqueness = Some(c),
                        Err(e) => {
                            report.errors.insert("uniqueness".into(), e.to_string());
                        }
                    }
                }
            }
            Err(e) => {
                for c in [CheckKind::Apriori, CheckKind::Contraction, CheckKind::Uniqueness] {
                    if has(c) {
                        report.errors.insert(c.name().into(), e.to_string());
                    }
                }
            }
        }
    }

    if has(CheckKind::Oracles) {
        report.oracles = Some(run_oracles_isolated(cfg, &mut report.errors));
    }
    eprintln!("timings: verify {:.3} s", clock.elapsed().as_secs_f64());
    if cfg.output.wants(Format::Json) {
        write_file(&cfg.output.dir, "report.json", &to_json(&report)?)?;
    }
    Ok(report)
}

fn run_oracles_isolated(cfg: &RunConfig, errors: &mut std::collections::BTreeMap<String, String>) -> Vec<OracleCase> {
    let suite = cfg.oracle_suite();
    let mut cases = Vec::new();
    for spec in &suite.cases {
        let clock = Instant::now();
        match run_oracle_case(spec, &suite) {
            Ok(c) => cases.push(c),
            Err(e) => {
                errors.insert(format!("oracle {}", spec.name), e.to_string());
            }
        }
        eprintln!("timings: oracle {} {:.3} s", spec.name, clock.elapsed().as_secs_f64());
    }
    cases
}

/// The oracle suite alone; writes `oracles.json`.
pub fn cmd_oracles(cfg: &RunConfig) -> Result<DiagnosticsReport> {
    cfg.validate()?;
    let mut report = DiagnosticsReport::default();
    report.oracles = Some(run_oracles_isolated(cfg, &mut report.errors));
    if cfg.output.wants(Format::Json) {
        write_file(&cfg.output.dir, "oracles.json", &to_json(&report)?)?;
    }
    Ok(report)
}
