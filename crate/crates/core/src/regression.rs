//! Least-squares Monte Carlo estimates of `E[. | F_{t_i}]` where
//! `F_t = F_t^W v F_{t,T}^B`.
//!
//! The features at index `i` are the coordinates of `W(t_i)` and of
//! `B(T) - B(t_i)`, so each one is measurable with respect to the two-sided
//! filtration at `t_i`. The basis holds every monomial of total degree
//! `<= p` in those `d + l` scalars, constant included.

use nalgebra::{Cholesky, DMatrix, DVector, DVectorView, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::scenario::BrownianEnsemble;

/// Ridge added to the diagonal of the normal equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Ridge {
    /// `eps = value * trace(X^T X) / n_features`
    Relative(f64),
    Absolute(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-8)
    }
}

impl Ridge {
    pub const NONE: Ridge = Ridge::Absolute(0.0);

    fn epsilon(self, gram: &DMatrix<f64>) -> f64 {
        match self {
            Ridge::Relative(r) => r * gram.trace() / gram.nrows() as f64,
            Ridge::Absolute(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionBasis {
    pub degree: usize,
    pub ridge: Ridge,
    /// exponent vector of each monomial over the `d + l` features
    pub exponents: Vec<Vec<u32>>,
}

fn monomials(n_vars: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(var: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if var + 1 == cur.len() {
            cur[var] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[var] = e;
            rec(var + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        rec(0, total, &mut vec![0; n_vars], &mut out);
    }
    out
}

impl RegressionBasis {
    pub fn new(d: usize, l: usize, degree: usize, ridge: Ridge) -> Self {
        Self {
            degree,
            ridge,
            exponents: monomials(d + l, degree),
        }
    }

    /// `C(d + l + p, p)`
    pub fn n_features(&self) -> usize {
        self.exponents.len()
    }

    /// Scalar features `(W(t_i), B(T) - B(t_i))` of path `m`.
    pub fn raw_features(ens: &BrownianEnsemble, i: usize, m: usize, out: &mut [f64]) {
        let n = ens.n_steps();
        out[..ens.d].copy_from_slice(ens.w(m, i));
        let bt = ens.b(m, n);
        let bi = ens.b(m, i);
        for c in 0..ens.l {
            out[ens.d + c] = bt[c] - bi[c];
        }
    }

    /// `M x n_features` design matrix at grid index `i`.
    pub fn design(&self, ens: &BrownianEnsemble, i: usize) -> Result<DMatrix<f64>> {
        check_index(i, ens.n_steps())?;
        let nf = self.n_features();
        let nv = ens.d + ens.l;
        if self.exponents.first().map(Vec::len) != Some(nv) {
            return Err(Error::DimensionMismatch(format!(
                "basis built for {} features, ensemble has {nv}",
                self.exponents.first().map_or(0, Vec::len)
            )));
        }
        let mut x = DMatrix::zeros(ens.n_paths, nf);
        let mut raw = vec![0.0; nv];
        for m in 0..ens.n_paths {
            Self::raw_features(ens, i, m, &mut raw);
            for (c, exps) in self.exponents.iter().enumerate() {
                x[(m, c)] = exps.iter().zip(&raw).map(|(&e, &v)| v.powi(e as i32)).product();
            }
        }
        Ok(x)
    }
}

/// Polynomial feature matrix of total degree `p` at index `i`.
pub fn build_basis(ens: &BrownianEnsemble, i: usize, p: usize) -> Result<DMatrix<f64>> {
    RegressionBasis::new(ens.d, ens.l, p, Ridge::NONE).design(ens, i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEstimate {
    pub coefficients: Vec<f64>,
    pub predictions: Vec<f64>,
    /// mean squared residual of the fit
    pub residual_second_moment: f64,
    /// squared ratio of the largest to smallest Cholesky pivot
    pub condition_indicator: f64,
}

/// Cached normal-equation factorization for one design matrix.
#[derive(Debug, Clone)]
pub struct Projector {
    x: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition_indicator: f64,
}

const ILL_CONDITIONED: f64 = 1e14;

impl Projector {
    pub fn new(x: DMatrix<f64>, ridge: Ridge) -> Result<Self> {
        let (m, nf) = x.shape();
        if m < nf {
            return Err(Error::InvalidArgument(format!(
                "need at least as many paths as features ({m} < {nf})"
            )));
        }
        let mut gram = x.tr_mul(&x);
        let eps = ridge.epsilon(&gram);
        for c in 0..nf {
            gram[(c, c)] += eps;
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::IllConditioned("Gram matrix is not positive definite".into()))?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
        let condition_indicator = (hi / lo).powi(2);
        if eps == 0.0 && !(condition_indicator < ILL_CONDITIONED) {
            return Err(Error::IllConditioned(format!(
                "Gram condition indicator {condition_indicator:.3e} without ridge"
            )));
        }
        Ok(Self {
            x,
            chol,
            condition_indicator,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.x.nrows()
    }

    pub fn coefficients(&self, targets: &[f64]) -> DVector<f64> {
        let y = DVectorView::from_slice(targets, targets.len());
        self.chol.solve(&self.x.tr_mul(&y))
    }

    /// Writes fitted values of `targets` into `out`.
    pub fn fit_into(&self, targets: &[f64], out: &mut [f64]) {
        let beta = self.coefficients(targets);
        out.fill(0.0);
        for (c, b) in beta.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(self.x.column(c).iter()) {
                *o += b * x;
            }
        }
    }

    pub fn estimate(&self, targets: &[f64]) -> Result<ConditionalEstimate> {
        if targets.len() != self.n_paths() {
            return Err(Error::DimensionMismatch(format!(
                "{} targets for {} paths",
                targets.len(),
                self.n_paths()
            )));
        }
        let beta = self.coefficients(targets);
        let predictions: Vec<f64> = (&self.x * &beta).iter().copied().collect();
        let residual_second_moment = targets
            .iter()
            .zip(&predictions)
            .map(|(t, p)| (t - p).powi(2))
            .sum::<f64>()
            / targets.len() as f64;
        Ok(ConditionalEstimate {
            coefficients: beta.iter().copied().collect(),
            predictions,
            residual_second_moment,
            condition_indicator: self.condition_indicator,
        })
    }
}

/// One-off least-squares fit of `targets` on `features` with ridge.
pub fn estimate_conditional(targets: &[f64], features: &DMatrix<f64>, ridge: Ridge) -> Result<ConditionalEstimate> {
    Projector::new(features.clone(), ridge)?.estimate(targets)
}

/// Cached projectors for every grid index of one ensemble, plus the
/// conditional second moments of the `W` increments used to normalize the
/// martingale coefficient.
#[derive(Debug, Clone)]
pub struct RegressionContext {
    pub basis: RegressionBasis,
    projectors: Vec<Projector>,
    /// `dw_moment[j][m * d + c]` estimates `E[(dW_j^c)^2 | F_{t_j}]`
    dw_moment: Vec<Vec<f64>>,
    dw: Vec<Vec<f64>>,
    d: usize,
}

impl RegressionContext {
    pub fn new(ens: &BrownianEnsemble, basis: RegressionBasis) -> Result<Self> {
        let n = ens.n_steps();
        let projectors = (0..=n)
            .into_par_iter()
            .map(|i| Projector::new(basis.design(ens, i)?, basis.ridge))
            .collect::<Result<Vec<_>>>()?;
        let (mp, d, dt) = (ens.n_paths, ens.d, ens.grid.dt);
        let dw: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut v = vec![0.0; mp * d];
                for m in 0..mp {
                    for c in 0..d {
                        v[m * d + c] = ens.dw(m, j, c);
                    }
                }
                v
            })
            .collect();
        let dw_moment = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut out = vec![0.0; mp * d];
                let mut sq = vec![0.0; mp];
                let mut fit = vec![0.0; mp];
                for c in 0..d {
                    for m in 0..mp {
                        sq[m] = dw[j][m * d + c].powi(2);
                    }
                    projectors[j].fit_into(&sq, &mut fit);
                    for m in 0..mp {
                        // keep the normalizer away from zero in the tails of the fit
                        out[m * d + c] = fit[m].max(0.25 * dt);
                    }
                }
                out
            })
            .collect();
        Ok(Self {
            basis,
            projectors,
            dw_moment,
            dw,
            d,
        })
    }

    pub fn projector(&self, i: usize) -> &Projector {
        &self.projectors[i]
    }

    pub fn n_paths(&self) -> usize {
        self.projectors[0].n_paths()
    }

    /// Fits each of the `k` components of `targets` (`M x k`, path-major)
    /// at index `i`.
    pub fn conditional_into(&self, i: usize, targets: &[f64], k: usize, out: &mut [f64]) {
        let mp = self.n_paths();
        if k == 1 {
            self.projectors[i].fit_into(targets, out);
            return;
        }
        let mut col = vec![0.0; mp];
        let mut fit = vec![0.0; mp];
        for r in 0..k {
            for m in 0..mp {
                col[m] = targets[m * k + r];
            }
            self.projectors[i].fit_into(&col, &mut fit);
            for m in 0..mp {
                out[m * k + r] = fit[m];
            }
        }
    }

    /// Martingale coefficient of `residuals` (`M x k`) on the step `j`:
    /// the fitted `E[residual dW_j^c | F_{t_j}]` divided by the fitted
    /// `E[(dW_j^c)^2 | F_{t_j}]`, written row-major `k x d` per path.
    ///
    /// `residuals` should already be centered by the conditional mean at
    /// `j`; centering leaves the estimand unchanged and removes most of the
    /// variance of the product.
    pub fn martingale_coefficient_into(&self, j: usize, residuals: &[f64], k: usize, out: &mut [f64]) {
        let mp = self.n_paths();
        let d = self.d;
        let dw = &self.dw[j];
        let moment = &self.dw_moment[j];
        let mut prod = vec![0.0; mp];
        let mut fit = vec![0.0; mp];
        for r in 0..k {
            for c in 0..d {
                for m in 0..mp {
                    prod[m] = residuals[m * k + r] * dw[m * d + c];
                }
                self.projectors[j].fit_into(&prod, &mut fit);
                for m in 0..mp {
                    out[(m * k + r) * d + c] = fit[m] / moment[m * d + c];
                }
            }
        }
    }
}

/// Estimates `Z_j` of `targets` (`M x k`) from a fresh fit at index `j`:
/// centers the targets by their conditional mean, then applies
/// [`RegressionContext::martingale_coefficient_into`]. Output is `M x k x d`.
pub fn estimate_martingale_coefficient(
    targets: &[f64],
    ens: &BrownianEnsemble,
    j: usize,
    p: usize,
    ridge: Ridge,
) -> Result<Vec<f64>> {
    let n = ens.n_steps();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, limit: n - 1 });
    }
    let mp = ens.n_paths;
    if targets.is_empty() || targets.len() % mp != 0 {
        return Err(Error::DimensionMismatch(format!("{} targets for {mp} paths", targets.len())));
    }
    let k = targets.len() / mp;
    let basis = RegressionBasis::new(ens.d, ens.l, p, ridge);
    let projector = Projector::new(basis.design(ens, j)?, ridge)?;
    let d = ens.d;
    let dt = ens.grid.dt;
    let mut col = vec![0.0; mp];
    let mut fit = vec![0.0; mp];
    let mut centered = vec![0.0; mp * k];
    for r in 0..k {
        for m in 0..mp {
            col[m] = targets[m * k + r];
        }
        projector.fit_into(&col, &mut fit);
        for m in 0..mp {
            centered[m * k + r] = col[m] - fit[m];
        }
    }
    let mut out = vec![0.0; mp * k * d];
    let mut moment = vec![0.0; mp];
    for c in 0..d {
        for m in 0..mp {
            col[m] = ens.dw(m, j, c).powi(2);
        }
        projector.fit_into(&col, &mut moment);
        for r in 0..k {
            for m in 0..mp {
                col[m] = centered[m * k + r] * ens.dw(m, j, c);
            }
            projector.fit_into(&col, &mut fit);
            for m in 0..mp {
                out[(m * k + r) * d + c] = fit[m] / moment[m].max(0.25 * dt);
            }
        }
    }
    Ok(out)
}
