//! Compare every closed-form catalog problem with its oracle, on the
//! default grids with a reduced sample.

use bdsvie::verify::{default_oracle_cases, run_oracle_suite, OracleSuiteConfig};

fn main() -> bdsvie::Result<()> {
    let mut cfg = OracleSuiteConfig::default();
    cfg.cases = default_oracle_cases()
        .into_iter()
        .map(|mut c| {
            c.n_paths = 4096;
            c
        })
        .collect();
    for case in run_oracle_suite(&cfg)? {
        let e = &case.errors;
        println!(
            "{:<16} Y {:.4}  Z {:.4}{}  sup RMS Y {:.4}  {}",
            case.spec.name,
            e.y_error,
            e.z_error,
            if e.z_absolute { " (abs)" } else { "" },
            e.y_sup_rms,
            if case.pass { "pass" } else { "fail" }
        );
    }
    Ok(())
}
