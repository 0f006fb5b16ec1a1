//! The a-priori bound, uniqueness and contraction checks on one problem,
//! assembled into a self-auditing report.

use bdsvie::bdsvie::{build_certificate, stitched_solve, CertificateOverrides, Init, PicardOptions, SolverContext, Window};
use bdsvie::catalog::catalog_problem;
use bdsvie::regression::Ridge;
use bdsvie::scenario::{make_grid, sample_ensemble};
use bdsvie::verify::{check_apriori_bound, compare_solutions, contraction_check, DiagnosticsReport, Slack};

fn main() -> bdsvie::Result<()> {
    let entry = catalog_problem("lipschitz-demo")?;
    let lip = entry.spec.lipschitz;
    let cert = build_certificate(lip.c, lip.alpha, 1.0, &CertificateOverrides::default())?;
    let ens = sample_ensemble(&make_grid(1.0, 16)?, 4096, 1, 1, 42)?;
    let ctx = SolverContext::new(entry.spec, ens, 2, Ridge::default())?;
    let (opts, slack) = (PicardOptions::default(), Slack::default());

    let a = stitched_solve(&ctx, &cert, &opts, Init::Zero)?;
    let b = stitched_solve(&ctx, &cert, &opts, Init::Terminal)?;
    let report = DiagnosticsReport {
        apriori: Some(check_apriori_bound(&ctx, &a.field, Window::full(16), slack.apriori)?),
        uniqueness: Some(compare_solutions(&a, &b, opts.tol, slack.uniqueness)?),
        contraction: Some(contraction_check(&a, opts.tol, slack.contraction)),
        ..Default::default()
    };
    print!("{}", report.summary_table());
    println!("flags recomputable: {}", report.recheck());
    Ok(())
}
