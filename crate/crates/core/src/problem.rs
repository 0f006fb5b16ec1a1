//! Coefficients `f(t, s, y, z)`, `g(t, s, y, z)`, terminal value `xi` and
//! Lipschitz metadata of one equation.
//!
//! `C` and `alpha` use the squared form: `|f(y1,z1) - f(y2,z2)|^2 <=
//! C (|y1-y2|^2 + |z1-z2|^2)` and `|g(y1,z1) - g(y2,z2)|^2 <= C |y1-y2|^2 +
//! alpha |z1-z2|^2`. They are supplied by the caller, never inferred.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Bindings, Dims, ExprError, ExpressionAst, Slot};
use crate::scenario::BrownianEnsemble;

pub type CoefficientFn = dyn Fn(f64, f64, &[f64], &[f64], &mut [f64]) -> std::result::Result<(), ExprError> + Send + Sync;
pub type PathFunctional = dyn Fn(&[f64], &mut [f64]) -> std::result::Result<(), ExprError> + Send + Sync;

/// A vector- or matrix-valued coefficient, one scalar expression per entry
/// (row-major), or a native closure.
#[derive(Clone)]
pub enum Coefficient {
    Expressions(Vec<ExpressionAst>),
    Native {
        func: Arc<CoefficientFn>,
        depends_on_state: bool,
    },
}

impl Coefficient {
    pub fn native(
        depends_on_state: bool,
        func: impl Fn(f64, f64, &[f64], &[f64], &mut [f64]) -> std::result::Result<(), ExprError> + Send + Sync + 'static,
    ) -> Self {
        Coefficient::Native {
            func: Arc::new(func),
            depends_on_state,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, s: f64, y: &[f64], z: &[f64], z_cols: usize, out: &mut [f64]) -> std::result::Result<(), ExprError> {
        match self {
            Coefficient::Expressions(asts) => {
                let b = Bindings {
                    t,
                    s,
                    y,
                    z,
                    z_cols,
                    w_terminal: &[],
                };
                for (o, ast) in out.iter_mut().zip(asts) {
                    *o = ast.eval(&b)?;
                }
                Ok(())
            }
            Coefficient::Native { func, .. } => {
                func(t, s, y, z, out)?;
                match out.iter().find(|v| !v.is_finite()) {
                    Some(&v) => Err(ExprError::NonFinite(v)),
                    None => Ok(()),
                }
            }
        }
    }

    pub fn depends_on_state(&self) -> bool {
        match self {
            Coefficient::Expressions(asts) => asts.iter().any(ExpressionAst::depends_on_state),
            Coefficient::Native { depends_on_state, .. } => *depends_on_state,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Expressions(asts) => {
                f.debug_list().entries(asts.iter().map(|a| a.to_string())).finish()
            }
            Coefficient::Native { depends_on_state, .. } => {
                write!(f, "<native, depends_on_state={depends_on_state}>")
            }
        }
    }
}

/// `xi` as a function of `W(T)` or, through the hook, of the whole `W` path.
#[derive(Clone)]
pub enum Terminal {
    Expressions(Vec<ExpressionAst>),
    /// receives the `(N + 1) * d` path values of `W`
    Path(Arc<PathFunctional>),
}

impl Terminal {
    pub fn eval(&self, w_path: &[f64], d: usize, out: &mut [f64]) -> std::result::Result<(), ExprError> {
        match self {
            Terminal::Expressions(asts) => {
                let b = Bindings {
                    w_terminal: &w_path[w_path.len() - d..],
                    ..Default::default()
                };
                for (o, ast) in out.iter_mut().zip(asts) {
                    *o = ast.eval(&b)?;
                }
                Ok(())
            }
            Terminal::Path(func) => {
                func(w_path, out)?;
                match out.iter().find(|v| !v.is_finite()) {
                    Some(&v) => Err(ExprError::NonFinite(v)),
                    None => Ok(()),
                }
            }
        }
    }
}

impl fmt::Debug for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::Expressions(asts) => f.debug_list().entries(asts.iter().map(|a| a.to_string())).finish(),
            Terminal::Path(_) => f.write_str("<path functional>"),
        }
    }
}

/// Lipschitz constants of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lipschitz {
    pub c: f64,
    pub alpha: f64,
}

impl Lipschitz {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie strictly inside (0,1), got {alpha}"
            )));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be finite and >= 0, got {c}")));
        }
        Ok(Self { c, alpha })
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dims: Dims,
    /// `k` entries
    pub f: Coefficient,
    /// `k * l` entries, row-major
    pub g: Coefficient,
    /// `k` entries
    pub xi: Terminal,
    pub lipschitz: Lipschitz,
    pub horizon: f64,
}

impl ProblemSpec {
    pub fn new(dims: Dims, f: Coefficient, g: Coefficient, xi: Terminal, lipschitz: Lipschitz, horizon: f64) -> Result<Self> {
        if dims.k == 0 || dims.d == 0 || dims.l == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let spec = Self {
            dims,
            f,
            g,
            xi,
            lipschitz,
            horizon,
        };
        spec.check_shapes()?;
        spec.probe_zero_state()?;
        Ok(spec)
    }

    /// Builds a problem from per-entry expressions: `f` has `k` entries,
    /// `g` has `k * l` (row-major), `xi` has `k`.
    pub fn from_expressions(
        dims: Dims,
        f: &[&str],
        g: &[&str],
        xi: &[&str],
        lipschitz: Lipschitz,
        horizon: f64,
    ) -> Result<Self> {
        let parse = |texts: &[&str], slot| -> Result<Vec<ExpressionAst>> {
            texts
                .iter()
                .enumerate()
                .map(|(n, t)| {
                    parse_expression(t, slot, dims).map_err(|e| Error::from(e).context(format!("{slot}[{n}]")))
                })
                .collect()
        };
        Self::new(
            dims,
            Coefficient::Expressions(parse(f, Slot::F)?),
            Coefficient::Expressions(parse(g, Slot::G)?),
            Terminal::Expressions(parse(xi, Slot::Xi)?),
            lipschitz,
            horizon,
        )
    }

    fn check_shapes(&self) -> Result<()> {
        let Dims { k, l, .. } = self.dims;
        if let Coefficient::Expressions(a) = &self.f {
            if a.len() != k {
                return Err(Error::DimensionMismatch(format!("f needs {k} entries, got {}", a.len())));
            }
        }
        if let Coefficient::Expressions(a) = &self.g {
            if a.len() != k * l {
                return Err(Error::DimensionMismatch(format!("g needs {} entries, got {}", k * l, a.len())));
            }
        }
        if let Terminal::Expressions(a) = &self.xi {
            if a.len() != k {
                return Err(Error::DimensionMismatch(format!("xi needs {k} entries, got {}", a.len())));
            }
        }
        Ok(())
    }

    /// `f(., ., 0, 0)` and `g(., ., 0, 0)` must be finite on the triangle;
    /// checked on a 9 x 9 lattice.
    fn probe_zero_state(&self) -> Result<()> {
        let Dims { k, d, l } = self.dims;
        let y = vec![0.0; k];
        let z = vec![0.0; k * d];
        let mut fo = vec![0.0; k];
        let mut go = vec![0.0; k * l];
        for a in 0..=8 {
            for b in a..=8 {
                let t = self.horizon * a as f64 / 8.0;
                let s = self.horizon * b as f64 / 8.0;
                self.f
                    .eval(t, s, &y, &z, d, &mut fo)
                    .map_err(|e| Error::from(e).context(format!("f(t={t}, s={s}, 0, 0)")))?;
                self.g
                    .eval(t, s, &y, &z, d, &mut go)
                    .map_err(|e| Error::from(e).context(format!("g(t={t}, s={s}, 0, 0)")))?;
            }
        }
        Ok(())
    }

    /// True if `f` or `g` reads `y` or `z`; otherwise the Picard map is constant.
    pub fn depends_on_state(&self) -> bool {
        self.f.depends_on_state() || self.g.depends_on_state()
    }

    #[inline]
    pub fn eval_f(&self, t: f64, s: f64, y: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        self.f
            .eval(t, s, y, z, self.dims.d, out)
            .map_err(|e| Error::from(e).context(format!("f at t={t}, s={s}")))
    }

    #[inline]
    pub fn eval_g(&self, t: f64, s: f64, y: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        self.g
            .eval(t, s, y, z, self.dims.d, out)
            .map_err(|e| Error::from(e).context(format!("g at t={t}, s={s}")))
    }

    /// `xi` on every path, `M * k` values.
    pub fn terminal_values(&self, ens: &BrownianEnsemble) -> Result<Vec<f64>> {
        if ens.d != self.dims.d || ens.l != self.dims.l {
            return Err(Error::DimensionMismatch(format!(
                "ensemble has (d, l) = ({}, {}), problem has ({}, {})",
                ens.d, ens.l, self.dims.d, self.dims.l
            )));
        }
        if (ens.grid.end - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::DimensionMismatch(format!(
                "ensemble horizon {} differs from problem horizon {}",
                ens.grid.end, self.horizon
            )));
        }
        let k = self.dims.k;
        let mut out = vec![0.0; ens.n_paths * k];
        for m in 0..ens.n_paths {
            self.xi
                .eval(ens.w_path(m), ens.d, &mut out[m * k..(m + 1) * k])
                .map_err(|e| Error::from(e).context(format!("xi on path {m}")))?;
        }
        Ok(out)
    }
}
