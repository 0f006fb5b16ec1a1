//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bdsvie::bdsvie::{
    build_certificate, resubstitution_residual, stitched_solve, CertificateOverrides, Init, PicardOptions, SolverContext,
    Window,
};
use bdsvie::calculus::{backward_ito_sum, forward_ito_sum, GridSeries};
use bdsvie::catalog::{catalog_problem, Oracle};
use bdsvie::regression::Ridge;
use bdsvie::scenario::{make_grid, sample_ensemble};
use bdsvie::verify::{
    check_apriori_bound, compare_solutions, contraction_check, oracle_errors, run_oracle_case, OracleCaseSpec, OracleSuiteConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

const SEED: u64 = 42;

fn context(name: &str, n: usize, mp: usize) -> Result<SolverContext, String> {
    let entry = catalog_problem(name).map_err(|e| e.to_string())?;
    let grid = make_grid(entry.spec.horizon, n).map_err(|e| e.to_string())?;
    let ens = sample_ensemble(&grid, mp, 1, 1, SEED).map_err(|e| e.to_string())?;
    SolverContext::new(entry.spec, ens, 2, Ridge::default()).map_err(|e| e.to_string())
}

fn oracle_case(name: &str, n: usize, mp: usize, y_tol: f64, z_tol: Option<f64>) -> Outcome {
    let spec = OracleCaseSpec {
        name: name.into(),
        n_steps: n,
        n_paths: mp,
        y_tol: Some(y_tol),
        z_tol,
        sup_tol: None,
    };
    let clock = Instant::now();
    let c = run_oracle_case(&spec, &OracleSuiteConfig::default()).map_err(|e| e.to_string())?;
    let secs = clock.elapsed().as_secs_f64();
    Ok((c.pass, format!("Y err {:.4}, Z err {:.4}, N={n}, M={mp}, {secs:.1} s", c.errors.y_error, c.errors.z_error)))
}

fn criterion_1() -> Outcome {
    let clock = Instant::now();
    let (pass, detail) = oracle_case("martingale", 32, 8192, 0.05, Some(0.05))?;
    let secs = clock.elapsed().as_secs_f64();
    Ok((pass && secs <= 60.0, detail))
}

fn criterion_2() -> Outcome {
    oracle_case("backward-driver", 32, 8192, 0.02, None)
}

fn criterion_3() -> Outcome {
    oracle_case("linear-drift", 64, 16384, 0.05, Some(0.05))
}

fn criterion_4() -> Outcome {
    let overrides = CertificateOverrides {
        theta: Some(3.0),
        partition: Some(vec![1.0, 0.5, 0.0]),
        ..Default::default()
    };
    let cert = build_certificate(1.0, 0.5, 1.0, &overrides).map_err(|e| e.to_string())?;
    let exact = cert.lambda_factor == 5.0 / 6.0 && cert.max_step == Some(0.75);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = 0;
    for _ in 0..1000 {
        let c = rng.random_range(0.0..10.0);
        let alpha = rng.random_range(0.01..0.99);
        let horizon = rng.random_range(0.1..5.0);
        let ok = match build_certificate(c, alpha, horizon, &CertificateOverrides::default()) {
            Ok(cert) => {
                let lengths_ok = cert.partition.windows(2).all(|w| match cert.max_step {
                    Some(s) => w[0] - w[1] < s,
                    None => true,
                });
                cert.validate().is_ok()
                    && cert.lambda_factor < 1.0
                    && cert.theta > c / (1.0 - alpha)
                    && cert.a > cert.theta
                    && lengths_ok
                    && cert.partition.first() == Some(&horizon)
                    && cert.partition.last() == Some(&0.0)
            }
            Err(_) => false,
        };
        bad += usize::from(!ok);
    }
    Ok((
        exact && bad == 0,
        format!("Lambda={:?}, max_step={:?}, {bad}/1000 random certificates invalid", cert.lambda_factor, cert.max_step),
    ))
}

fn lipschitz_demo() -> Result<(SolverContext, bdsvie::bdsvie::ContractionCertificate), String> {
    let ctx = context("lipschitz-demo", 32, 8192)?;
    let l = ctx.spec.lipschitz;
    let cert = build_certificate(l.c, l.alpha, 1.0, &CertificateOverrides::default()).map_err(|e| e.to_string())?;
    Ok((ctx, cert))
}

fn criterion_5_and_6() -> (Outcome, Outcome) {
    let run = || -> Result<(Outcome, Outcome), String> {
        let (ctx, cert) = lipschitz_demo()?;
        let opts = PicardOptions::default();
        let a = stitched_solve(&ctx, &cert, &opts, Init::Zero).map_err(|e| e.to_string())?;
        let c = contraction_check(&a, opts.tol, 0.1);
        let enough = c.strips.iter().all(|s| s.residuals.len() >= 3);
        let worst = c.strips.iter().flat_map(|s| s.ratios.iter().skip(1).copied()).fold(0.0f64, f64::max);
        let iters: Vec<String> = c.strips.iter().map(|s| format!("{}<={}", s.iterations, s.iteration_bound)).collect();
        let five = Ok((
            c.pass && enough,
            format!("max ratio {worst:.4} vs Lambda+0.1 = {:.4}, iterations {}", c.lambda + 0.1, iters.join(", ")),
        ));
        let b = stitched_solve(&ctx, &cert, &opts, Init::Terminal).map_err(|e| e.to_string())?;
        let u = compare_solutions(&a, &b, opts.tol, 10.0).map_err(|e| e.to_string())?;
        let six = Ok((u.pass && u.distance <= 1e-3, format!("distance {:.3e} <= 1e-3", u.distance)));
        Ok((five, six))
    };
    match run() {
        Ok(r) => r,
        Err(e) => (Err(e.clone()), Err(e)),
    }
}

fn criterion_7() -> Outcome {
    let ctx = context("martingale", 32, 8192)?;
    let cert = build_certificate(0.0, 0.5, 1.0, &CertificateOverrides::default()).map_err(|e| e.to_string())?;
    let sol = stitched_solve(&ctx, &cert, &PicardOptions::default(), Init::Zero).map_err(|e| e.to_string())?;
    let c = check_apriori_bound(&ctx, &sol.field, Window::full(32), 1.1).map_err(|e| e.to_string())?;
    let ratio = c.rhs / c.lhs;
    let near = (c.lhs - 1.0).abs() <= 0.05 && (c.rhs - 3.0).abs() <= 0.15 && (2.7..=3.3).contains(&ratio);
    Ok((c.pass && near, format!("lhs {:.4}, rhs {:.4}, rhs/lhs {ratio:.3}", c.lhs, c.rhs)))
}

fn criterion_8() -> Outcome {
    let grid = make_grid(1.0, 32).map_err(|e| e.to_string())?;
    let ens = sample_ensemble(&grid, 10_000, 1, 1, SEED).map_err(|e| e.to_string())?;
    let (mp, nt) = (ens.n_paths, 33);
    let w = GridSeries::w_component(&ens, 0);
    let b = GridSeries::b_component(&ens, 0);
    let one = GridSeries::constant(mp, nt, 1.0);
    let mut tele = 0.0f64;
    for i0 in 0..32 {
        let fw = forward_ito_sum(&one, &w, i0).map_err(|e| e.to_string())?;
        let bw = backward_ito_sum(&one, &b, i0).map_err(|e| e.to_string())?;
        for m in 0..mp {
            tele = tele.max((fw[m] - (w.at(m, 32) - w.at(m, i0))).abs());
            tele = tele.max((bw[m] - (b.at(m, 32) - b.at(m, i0))).abs());
        }
    }
    // E (sum H dW)^2 = sum E H^2 dt for adapted H; same for backward sums
    let h = GridSeries::from_fn(mp, nt, |m, i| 1.0 + w.at(m, i).sin());
    let g = GridSeries::from_fn(mp, nt, |m, i| 1.0 + (b.at(m, 32) - b.at(m, i)).sin());
    let isometry = |sums: Vec<f64>, s: &GridSeries, times: std::ops::Range<usize>| {
        let lhs = sums.iter().map(|x| x * x).sum::<f64>() / mp as f64;
        let rhs = (0..mp).map(|m| times.clone().map(|i| s.at(m, i).powi(2)).sum::<f64>()).sum::<f64>() * grid.dt / mp as f64;
        (lhs - rhs).abs() / rhs
    };
    let ef = isometry(forward_ito_sum(&h, &w, 0).map_err(|e| e.to_string())?, &h, 0..32);
    let eb = isometry(backward_ito_sum(&g, &b, 0).map_err(|e| e.to_string())?, &g, 1..33);
    Ok((
        tele <= 1e-12 && ef <= 0.05 && eb <= 0.05,
        format!("telescoping {tele:.1e}, isometry rel. gaps {ef:.4} (W), {eb:.4} (B), M=10^4"),
    ))
}

fn criterion_9() -> Outcome {
    let ctx = context("martingale", 32, 8192)?;
    let overrides = CertificateOverrides {
        partition: Some(vec![1.0, 0.5, 0.0]),
        ..Default::default()
    };
    let cert = build_certificate(0.0, 0.5, 1.0, &overrides).map_err(|e| e.to_string())?;
    let opts = PicardOptions::default();
    let sol = stitched_solve(&ctx, &cert, &opts, Init::Zero).map_err(|e| e.to_string())?;
    let e = oracle_errors(&ctx, &sol.field, Oracle::Martingale);
    let r = resubstitution_residual(&ctx, &sol.field, cert.a).map_err(|e| e.to_string())?;
    Ok((
        sol.strips.len() == 2 && e.y_error <= 0.05 && e.z_error <= 0.05 && r <= 3.0 * opts.tol,
        format!("2 intervals: Y err {:.4}, Z err {:.4}, re-substitution {r:.2e} <= {:.0e}", e.y_error, e.z_error, 3.0 * opts.tol),
    ))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("config.json");
    fs::write(
        &config,
        r#"{
  "problem": {"kind": "catalog", "name": "lipschitz-demo"},
  "solver": {"n_steps": 8, "n_paths": 1024, "seed": 7},
  "checks": {"oracle_cases": [{"name": "kernel", "n_steps": 8, "n_paths": 1024, "y_tol": 0.5}]}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut mismatches = Vec::new();
    for cmd in ["certificate", "solve", "verify", "oracles"] {
        let mut runs = Vec::new();
        for (k, threads) in ["1", "3", "1"].iter().enumerate() {
            let out_dir = tmp.path().join(format!("{cmd}-{k}"));
            let out = Command::new(env!("CARGO_BIN_EXE_bdsvie"))
                .args([cmd, config.to_str().unwrap(), "--threads", threads, "--seed", "11", "--out-dir"])
                .arg(&out_dir)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!("{cmd} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
            }
            runs.push((out.stdout, snapshot(&out_dir)));
        }
        if runs.iter().any(|r| *r != runs[0]) || runs[0].1.is_empty() {
            mismatches.push(cmd);
        }
    }
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "certificate, solve, verify, oracles byte-identical at 1 and 3 threads and on repeat".into()
        } else {
            format!("outputs differ for {}", mismatches.join(", "))
        },
    ))
}

fn main() {
    let (five, six) = criterion_5_and_6();
    let results: Vec<(u8, &str, Outcome)> = vec![
        (1, "oracle accuracy, martingale", criterion_1()),
        (2, "oracle accuracy, backward-driver", criterion_2()),
        (3, "oracle accuracy, linear-drift", criterion_3()),
        (4, "certificate arithmetic", criterion_4()),
        (5, "contraction, lipschitz-demo", five),
        (6, "uniqueness, lipschitz-demo", six),
        (7, "a-priori bound, martingale", criterion_7()),
        (8, "stochastic-calculus exactness", criterion_8()),
        (9, "stitching consistency", criterion_9()),
        (10, "determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (id, name, outcome) in &results {
        let (pass, detail) = match outcome {
            Ok((p, d)) => (*p, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
