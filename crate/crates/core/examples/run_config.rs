//! Drive the command layer from an in-memory JSON config.

use bdsvie::cli::cmd_solve;
use bdsvie::config::RunConfig;

fn main() -> bdsvie::Result<()> {
    let out = std::env::temp_dir().join("bdsvie-run-config-example");
    let mut cfg = RunConfig::from_json(
        r#"{
  "problem": {"kind": "inline", "f": ["-0.5*y1 + 0.2*z11"], "g": ["0.3*cos(y1)"], "xi": ["max(wT, 0)"], "c": 0.5, "alpha": 0.5},
  "solver": {"n_steps": 16, "n_paths": 2048, "seed": 1}
}"#,
    )?;
    cfg.output.dir = out.clone();
    let outcome = cmd_solve(&cfg)?;
    println!("converged: {}", outcome.converged);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    print!("{}", std::fs::read_to_string(out.join("solution_y.csv"))?.lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
