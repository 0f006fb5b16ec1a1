//! Test problems, most with closed-form solutions.
//!
//! | name              | f              | g                       | xi        | Y(t)                      | Z(t,s)          |
//! |-------------------|----------------|-------------------------|-----------|---------------------------|-----------------|
//! | `martingale`      | 0              | 0                       | W_T       | W_t                       | 1               |
//! | `backward-driver` | 0              | 1                       | 0         | B_T - B_t                 | 0               |
//! | `linear-drift`    | -rho y         | 0                       | W_T       | e^{-rho(T-t)} W_t         | e^{-rho(T-s)}   |
//! | `kernel`          | phi(t) psi(s)  | 0                       | W_T       | W_t + phi(t) int_t^T psi  | 1               |
//! | `lipschitz-demo`  | sin(y+z)/2     | cos(y)/2 + z/2          | sin(W_T)  | none                      | none            |
//!
//! The kernel problem uses `phi(t) = t`, `psi(s) = 1`.

use crate::error::{Error, Result};
use crate::expr::Dims;
use crate::problem::{Lipschitz, ProblemSpec};
use crate::scenario::BrownianEnsemble;

pub const CATALOG_NAMES: [&str; 5] = ["martingale", "backward-driver", "linear-drift", "kernel", "lipschitz-demo"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogOptions {
    pub horizon: f64,
    /// decay rate of `linear-drift`
    pub rho: f64,
}

impl Default for CatalogOptions {
    fn default() -> Self {
        Self { horizon: 1.0, rho: 1.0 }
    }
}

/// Closed-form solution of a catalog problem, evaluated on sampled paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Martingale,
    BackwardDriver,
    LinearDrift { rho: f64 },
    Kernel,
}

impl Oracle {
    pub fn y(&self, ens: &BrownianEnsemble, i: usize, m: usize) -> f64 {
        let t = ens.grid.t(i);
        let big_t = ens.grid.end;
        match *self {
            Oracle::Martingale => ens.w(m, i)[0],
            Oracle::BackwardDriver => ens.b(m, ens.n_steps())[0] - ens.b(m, i)[0],
            Oracle::LinearDrift { rho } => (-rho * (big_t - t)).exp() * ens.w(m, i)[0],
            Oracle::Kernel => ens.w(m, i)[0] + t * (big_t - t),
        }
    }

    pub fn z(&self, ens: &BrownianEnsemble, _i: usize, j: usize) -> f64 {
        match *self {
            Oracle::Martingale | Oracle::Kernel => 1.0,
            Oracle::BackwardDriver => 0.0,
            Oracle::LinearDrift { rho } => (-rho * (ens.grid.end - ens.grid.t(j))).exp(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub spec: ProblemSpec,
    pub oracle: Option<Oracle>,
}

pub fn catalog_problem(name: &str) -> Result<CatalogEntry> {
    catalog_problem_with(name, CatalogOptions::default())
}

pub fn catalog_problem_with(name: &str, opts: CatalogOptions) -> Result<CatalogEntry> {
    let dims = Dims::default();
    let horizon = opts.horizon;
    // alpha is a free parameter whenever g does not read z
    let (f, g, xi, c, alpha, oracle) = match name {
        "martingale" => ("0".to_string(), "0", "wT", 0.0, 0.5, Some(Oracle::Martingale)),
        "backward-driver" => ("0".to_string(), "1", "0", 0.0, 0.5, Some(Oracle::BackwardDriver)),
        "linear-drift" => (
            format!("-({:?})*y1", opts.rho),
            "0",
            "wT",
            opts.rho * opts.rho,
            0.5,
            Some(Oracle::LinearDrift { rho: opts.rho }),
        ),
        "kernel" => ("t".to_string(), "0", "wT", 0.0, 0.5, Some(Oracle::Kernel)),
        // |f1 - f2|^2 <= (|dy| + |dz|)^2 / 4 <= (|dy|^2 + |dz|^2) / 2, and the
        // same split gives g the constants (1/2, 1/2)
        "lipschitz-demo" => ("0.5*sin(y1+z11)".to_string(), "0.5*cos(y1)+0.5*z11", "sin(wT)", 0.5, 0.5, None),
        _ => return Err(Error::UnknownProblem(name.to_string())),
    };
    let spec = ProblemSpec::from_expressions(dims, &[&f], &[g], &[xi], Lipschitz::new(c, alpha)?, horizon)?;
    Ok(CatalogEntry {
        name: name.to_string(),
        spec,
        oracle,
    })
}
