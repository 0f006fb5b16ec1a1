//! A problem with native Rust coefficients and a path-dependent terminal
//! value (the running maximum of W).

use std::sync::Arc;

use bdsvie::bdsvie::{build_certificate, stitched_solve, CertificateOverrides, Init, PicardOptions, SolverContext};
use bdsvie::expr::Dims;
use bdsvie::problem::{Coefficient, Lipschitz, ProblemSpec, Terminal};
use bdsvie::regression::Ridge;
use bdsvie::scenario::{make_grid, sample_ensemble};

fn main() -> bdsvie::Result<()> {
    // f = -(1 + t s)/4 * y is Lipschitz with C = (1/2)^2 on [0, 1]^2
    let f = Coefficient::native(true, |t, s, y, _z, out| {
        out[0] = -0.25 * (1.0 + t * s) * y[0];
        Ok(())
    });
    let g = Coefficient::native(false, |_, s, _, _, out| {
        out[0] = 0.2 * s;
        Ok(())
    });
    let xi = Terminal::Path(Arc::new(|w: &[f64], out: &mut [f64]| {
        out[0] = w.iter().copied().fold(f64::MIN, f64::max);
        Ok(())
    }));
    let spec = ProblemSpec::new(Dims::default(), f, g, xi, Lipschitz::new(0.25, 0.5)?, 1.0)?;
    let cert = build_certificate(0.25, 0.5, 1.0, &CertificateOverrides::default())?;
    let ens = sample_ensemble(&make_grid(1.0, 16)?, 4096, 1, 1, 5)?;
    let ctx = SolverContext::new(spec, ens, 3, Ridge::default())?;
    let sol = stitched_solve(&ctx, &cert, &PicardOptions::default(), Init::Terminal)?;
    let y0 = sol.y().slice(0).iter().sum::<f64>() / ctx.ens.n_paths as f64;
    println!("converged: {}, iterations: {}, E Y(0) = {y0:.4}", sol.converged(), sol.iterations_used());
    Ok(())
}
