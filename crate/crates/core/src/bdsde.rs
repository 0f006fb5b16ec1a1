//! Regression dynamic programming for one backward doubly stochastic
//! equation on `[t_{i0}, T]`:
//!
//! ```text
//! lambda(r) = xi + int_r^T f ds + int_r^T g dB_s - int_r^T mu dW_s
//! ```
//!
//! Step `j` (backward from `N - 1` to `i0`) forms the target
//! `lambda_{j+1} + g(s_{j+1}) dB_j + f(s_j) dt`, projects it on the features
//! at `t_j` to get `lambda_j`, and reads `mu_j` off the centered residual.
//! State-dependent drivers are handled by a short fixed-point loop per step.

use serde::Serialize;

use crate::error::{check_index, Error, Result};
use crate::regression::RegressionContext;
use crate::scenario::BrownianEnsemble;

/// Drivers evaluated for all paths at once.
///
/// `ys` is `M x k`, `zs` is `M x k x d`, both path-major.
pub trait BdsdeDriver: Sync {
    /// If false the drivers ignore `ys`/`zs` and a single pass per step suffices.
    fn state_dependent(&self) -> bool;

    /// `f(s_j, y, z)` into `out` (`M x k`).
    fn drift(&self, j: usize, ys: &[f64], zs: &[f64], out: &mut [f64]) -> Result<()>;

    /// `g(s_{j+1}, y, z)` into `out` (`M x k x l`); right endpoint of step `j`.
    fn diffusion(&self, j: usize, ys: &[f64], zs: &[f64], out: &mut [f64]) -> Result<()>;
}

type PathFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// Driver built from per-path closures `(s, y, z, out)`.
pub struct FnDriver {
    times: Vec<f64>,
    k: usize,
    d: usize,
    l: usize,
    state_dependent: bool,
    f: Box<PathFn>,
    g: Box<PathFn>,
}

impl FnDriver {
    pub fn new(
        ens: &BrownianEnsemble,
        k: usize,
        state_dependent: bool,
        f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        g: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            times: ens.grid.times.clone(),
            k,
            d: ens.d,
            l: ens.l,
            state_dependent,
            f: Box::new(f),
            g: Box::new(g),
        }
    }

    /// `f = g = 0`.
    pub fn zero(ens: &BrownianEnsemble, k: usize) -> Self {
        Self::new(ens, k, false, |_, _, _, o| o.fill(0.0), |_, _, _, o| o.fill(0.0))
    }
}

impl BdsdeDriver for FnDriver {
    fn state_dependent(&self) -> bool {
        self.state_dependent
    }

    fn drift(&self, j: usize, ys: &[f64], zs: &[f64], out: &mut [f64]) -> Result<()> {
        let (k, kd) = (self.k, self.k * self.d);
        for (m, o) in out.chunks_exact_mut(k).enumerate() {
            (self.f)(self.times[j], &ys[m * k..(m + 1) * k], &zs[m * kd..(m + 1) * kd], o);
        }
        Ok(())
    }

    fn diffusion(&self, j: usize, ys: &[f64], zs: &[f64], out: &mut [f64]) -> Result<()> {
        let (k, kd, kl) = (self.k, self.k * self.d, self.k * self.l);
        for (m, o) in out.chunks_exact_mut(kl).enumerate() {
            (self.g)(self.times[j + 1], &ys[m * k..(m + 1) * k], &zs[m * kd..(m + 1) * kd], o);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BdsdeConfig {
    /// passes per step for state-dependent drivers: one explicit predictor
    /// plus `inner_iterations - 1` corrections
    pub inner_iterations: usize,
}

impl Default for BdsdeConfig {
    fn default() -> Self {
        Self { inner_iterations: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdsdeSolution {
    pub start: usize,
    pub n_paths: usize,
    pub k: usize,
    pub d: usize,
    /// `lambda(r_j)` for `j = start..=end`, each block `M x k`
    lambda: Vec<f64>,
    /// `mu(r_j)` for `j = start..end`, each block `M x k x d`
    mu: Vec<f64>,
    /// passes performed at step `j`, indexed by `j - start`
    pub inner_counts: Vec<usize>,
    /// RMS change of `(lambda_j, mu_j)` between consecutive passes
    pub inner_gaps: Vec<Vec<f64>>,
}

impl BdsdeSolution {
    pub fn lambda(&self, j: usize) -> &[f64] {
        let b = self.n_paths * self.k;
        let o = (j - self.start) * b;
        &self.lambda[o..o + b]
    }

    pub fn mu(&self, j: usize) -> &[f64] {
        let b = self.n_paths * self.k * self.d;
        let o = (j - self.start) * b;
        &self.mu[o..o + b]
    }

    /// All `mu` blocks from `start` to `end - 1`, contiguous.
    pub fn mu_values(&self) -> &[f64] {
        &self.mu
    }
}

fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64).sqrt()
}

fn check_finite(v: &[f64], what: &str, j: usize) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(p) => Err(Error::NonFinite(format!("{what} at step {j}, entry {p}: {}", v[p]))),
        None => Ok(()),
    }
}

/// Solves the equation on `[t_{i0}, T]` with `terminal` (`M x k`) at `T`.
pub fn solve_bdsde(
    driver: &dyn BdsdeDriver,
    ctx: &RegressionContext,
    ens: &BrownianEnsemble,
    i0: usize,
    terminal: &[f64],
    cfg: &BdsdeConfig,
) -> Result<BdsdeSolution> {
    solve_bdsde_until(driver, ctx, ens, i0, ens.n_steps(), terminal, cfg)
}

/// As [`solve_bdsde`] on `[t_{i0}, t_end]` with `terminal` at `t_end`.
pub fn solve_bdsde_until(
    driver: &dyn BdsdeDriver,
    ctx: &RegressionContext,
    ens: &BrownianEnsemble,
    i0: usize,
    end: usize,
    terminal: &[f64],
    cfg: &BdsdeConfig,
) -> Result<BdsdeSolution> {
    check_index(end, ens.n_steps())?;
    check_index(i0, end)?;
    let n = end;
    let mp = ens.n_paths;
    if ctx.n_paths() != mp {
        return Err(Error::DimensionMismatch("regression context built on another ensemble".into()));
    }
    if terminal.is_empty() || terminal.len() % mp != 0 {
        return Err(Error::DimensionMismatch(format!("{} terminal values for {mp} paths", terminal.len())));
    }
    check_finite(terminal, "terminal", n)?;
    let (k, d, l) = (terminal.len() / mp, ens.d, ens.l);
    let dt = ens.grid.dt;
    let steps = n - i0;
    let (bl, bm) = (mp * k, mp * k * d);

    let mut lambda = vec![0.0; (steps + 1) * bl];
    let mut mu = vec![0.0; steps * bm];
    lambda[steps * bl..].copy_from_slice(terminal);

    let passes = if driver.state_dependent() { cfg.inner_iterations.max(1) } else { 1 };
    let mut inner_counts = vec![0; steps];
    let mut inner_gaps = vec![Vec::new(); steps];
    let mut f_buf = vec![0.0; bl];
    let mut g_buf = vec![0.0; bl * l];
    let mut target = vec![0.0; bl];
    let mut resid = vec![0.0; bl];
    let mut lam_tilde = vec![0.0; bl];
    let mut mu_tilde = vec![0.0; bm];
    let mut lam_j = vec![0.0; bl];
    let mut mu_j = vec![0.0; bm];

    for j in (i0..n).rev() {
        let o = j - i0;
        let (head, tail) = lambda.split_at_mut((o + 1) * bl);
        let lam_next = &tail[..bl];
        // explicit start: (lambda_{j+1}, mu_{j+1}), or mu = 0 at the last step
        lam_tilde.copy_from_slice(lam_next);
        if j + 1 < n {
            mu_tilde.copy_from_slice(&mu[(o + 1) * bm..(o + 2) * bm]);
        } else {
            mu_tilde.fill(0.0);
        }
        for pass in 0..passes {
            driver
                .drift(j, &lam_tilde, &mu_tilde, &mut f_buf)
                .map_err(|e| e.context(format!("drift at step {j}")))?;
            driver
                .diffusion(j, lam_next, &mu_tilde, &mut g_buf)
                .map_err(|e| e.context(format!("diffusion at step {j}")))?;
            for m in 0..mp {
                for r in 0..k {
                    let mut g_db = 0.0;
                    for c in 0..l {
                        g_db += g_buf[(m * k + r) * l + c] * ens.db(m, j, c);
                    }
                    target[m * k + r] = lam_next[m * k + r] + g_db + f_buf[m * k + r] * dt;
                }
            }
            ctx.conditional_into(j, &target, k, &mut lam_j);
            for ((r, t), p) in resid.iter_mut().zip(&target).zip(&lam_j) {
                *r = t - p;
            }
            ctx.martingale_coefficient_into(j, &resid, k, &mut mu_j);
            if pass > 0 {
                let gap = (rms_diff(&lam_j, &lam_tilde).powi(2) + rms_diff(&mu_j, &mu_tilde).powi(2)).sqrt();
                inner_gaps[o].push(gap);
            }
            std::mem::swap(&mut lam_tilde, &mut lam_j);
            std::mem::swap(&mut mu_tilde, &mut mu_j);
            inner_counts[o] += 1;
        }
        check_finite(&lam_tilde, "lambda", j)?;
        check_finite(&mu_tilde, "mu", j)?;
        head[o * bl..].copy_from_slice(&lam_tilde);
        mu[o * bm..(o + 1) * bm].copy_from_slice(&mu_tilde);
    }

    Ok(BdsdeSolution {
        start: i0,
        n_paths: mp,
        k,
        d,
        lambda,
        mu,
        inner_counts,
        inner_gaps,
    })
}
