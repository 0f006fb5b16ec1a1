//! Oracle errors do not grow (beyond a 20% noise band) when the grid is
//! refined at large M or the sample is enlarged at fixed N.

use bdsvie::verify::{run_oracle_case, OracleCaseSpec, OracleSuiteConfig};

fn errors(name: &str, n: usize, mp: usize) -> (f64, f64) {
    let spec = OracleCaseSpec {
        name: name.into(),
        n_steps: n,
        n_paths: mp,
        y_tol: None,
        z_tol: None,
        sup_tol: None,
    };
    let c = run_oracle_case(&spec, &OracleSuiteConfig::default()).unwrap();
    (c.errors.y_error, c.errors.z_error)
}

fn no_growth(before: (f64, f64), after: (f64, f64), what: &str) {
    assert!(after.0 <= 1.2 * before.0, "{what}: Y error {} -> {}", before.0, after.0);
    assert!(after.1 <= 1.2 * before.1, "{what}: Z error {} -> {}", before.1, after.1);
}

#[test]
fn doubling_n_at_large_m() {
    for name in ["martingale", "kernel"] {
        no_growth(errors(name, 16, 8192), errors(name, 32, 8192), name);
    }
}

#[test]
fn quadrupling_m_at_fixed_n() {
    for name in ["martingale", "kernel"] {
        no_growth(errors(name, 32, 2048), errors(name, 32, 8192), name);
    }
}

#[test]
fn linear_drift_refinement() {
    no_growth(errors("linear-drift", 16, 8192), errors("linear-drift", 32, 8192), "linear-drift");
}
