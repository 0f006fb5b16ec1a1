//! Run configuration: one JSON document, unknown keys rejected, validated
//! in full before anything is computed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bdsde::BdsdeConfig;
use crate::bdsvie::{build_certificate, CertificateOverrides, ContractionCertificate, Init, PicardOptions, SolverContext};
use crate::catalog::{catalog_problem_with, CatalogOptions, Oracle};
use crate::error::{Error, Result};
use crate::expr::Dims;
use crate::problem::{Lipschitz, ProblemSpec};
use crate::regression::{Ridge, RegressionBasis};
use crate::scenario::{make_grid, sample_ensemble};
use crate::verify::{default_oracle_cases, OracleCaseSpec, OracleSuiteConfig, Slack};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    Catalog {
        name: String,
        #[serde(default = "one")]
        horizon: f64,
        /// decay rate of `linear-drift`
        #[serde(default = "one")]
        rho: f64,
    },
    Inline {
        #[serde(default)]
        dims: Dims,
        f: Vec<String>,
        /// `k * l` entries, row-major
        g: Vec<String>,
        xi: Vec<String>,
        c: f64,
        alpha: f64,
        #[serde(default = "one")]
        horizon: f64,
    },
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn one() -> f64 {
    1.0
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Catalog {
            name: "lipschitz-demo".into(),
            horizon: 1.0,
            rho: 1.0,
        }
    }
}

impl ProblemConfig {
    pub fn label(&self) -> String {
        match self {
            ProblemConfig::Catalog { name, .. } => name.clone(),
            ProblemConfig::Inline { .. } => "inline".into(),
        }
    }

    pub fn build(&self) -> Result<(ProblemSpec, Option<Oracle>)> {
        match self {
            ProblemConfig::Catalog { name, horizon, rho } => {
                let e = catalog_problem_with(name, CatalogOptions { horizon: *horizon, rho: *rho })?;
                Ok((e.spec, e.oracle))
            }
            ProblemConfig::Inline {
                dims,
                f,
                g,
                xi,
                c,
                alpha,
                horizon,
            } => {
                let spec = ProblemSpec::from_expressions(
                    *dims,
                    &refs(f),
                    &refs(g),
                    &refs(xi),
                    Lipschitz::new(*c, *alpha)?,
                    *horizon,
                )?;
                Ok((spec, None))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    /// total degree of the polynomial regression basis
    pub degree: usize,
    pub ridge: Ridge,
    pub certificate: CertificateOverrides,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub inner_iterations: usize,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let picard = PicardOptions::default();
        Self {
            n_steps: 32,
            n_paths: 8192,
            degree: 2,
            ridge: Ridge::default(),
            certificate: CertificateOverrides::default(),
            tol: picard.tol,
            max_iter: picard.max_iter,
            seed: 42,
            inner_iterations: BdsdeConfig::default().inner_iterations,
            init: Init::Zero,
        }
    }
}

impl SolverConfig {
    pub fn picard(&self) -> PicardOptions {
        PicardOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Certificate,
    Apriori,
    Uniqueness,
    Contraction,
    Oracles,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::Certificate,
        CheckKind::Apriori,
        CheckKind::Uniqueness,
        CheckKind::Contraction,
        CheckKind::Oracles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Certificate => "certificate",
            CheckKind::Apriori => "apriori",
            CheckKind::Uniqueness => "uniqueness",
            CheckKind::Contraction => "contraction",
            CheckKind::Oracles => "oracles",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub select: Vec<CheckKind>,
    pub slack: Slack,
    pub oracle_cases: Vec<OracleCaseSpec>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            select: CheckKind::ALL.to_vec(),
            slack: Slack::default(),
            oracle_cases: default_oracle_cases(),
        }
    }
}

/// Everything a validated config resolves to except the sampled paths.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: ProblemSpec,
    pub oracle: Option<Oracle>,
    pub certificate: ContractionCertificate,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Checks every precondition the solver would otherwise hit mid-run.
    pub fn validate(&self) -> Result<Resolved> {
        let s = &self.solver;
        let bad = |m: String| Err(Error::Config(m));
        if s.n_steps == 0 {
            return bad("solver.n_steps must be at least 1".into());
        }
        if !(s.tol > 0.0) {
            return bad(format!("solver.tol must be positive, got {}", s.tol));
        }
        if s.max_iter == 0 {
            return bad("solver.max_iter must be at least 1".into());
        }
        if s.inner_iterations == 0 {
            return bad("solver.inner_iterations must be at least 1".into());
        }
        match s.ridge {
            Ridge::Relative(v) | Ridge::Absolute(v) if !(v >= 0.0 && v.is_finite()) => {
                return bad(format!("solver.ridge must be finite and non-negative, got {v}"));
            }
            _ => {}
        }
        let (spec, oracle) = self.problem.build().map_err(|e| e.context("problem"))?;
        let n_features = RegressionBasis::new(spec.dims.d, spec.dims.l, s.degree, s.ridge).n_features();
        if s.n_paths < 2 * n_features {
            return bad(format!(
                "solver.n_paths = {} is too small for {n_features} regression features",
                s.n_paths
            ));
        }
        let certificate = build_certificate(spec.lipschitz.c, spec.lipschitz.alpha, spec.horizon, &s.certificate)?;
        certificate.partition_indices(&make_grid(spec.horizon, s.n_steps)?)?;
        for c in &self.checks.oracle_cases {
            if c.n_steps == 0 || c.n_paths < 2 * n_features {
                return bad(format!("oracle case '{}' needs n_steps >= 1 and enough paths", c.name));
            }
        }
        if self.output.formats.is_empty() {
            return bad("output.formats must not be empty".into());
        }
        Ok(Resolved {
            spec,
            oracle,
            certificate,
        })
    }

    /// Samples the paths and prepares the regression context.
    pub fn context(&self, spec: ProblemSpec) -> Result<SolverContext> {
        let s = &self.solver;
        let grid = make_grid(spec.horizon, s.n_steps)?;
        let ens = sample_ensemble(&grid, s.n_paths, spec.dims.d, spec.dims.l, s.seed)?;
        let mut ctx = SolverContext::new(spec, ens, s.degree, s.ridge)?;
        ctx.bdsde = BdsdeConfig {
            inner_iterations: s.inner_iterations,
        };
        Ok(ctx)
    }

    pub fn oracle_suite(&self) -> OracleSuiteConfig {
        OracleSuiteConfig {
            cases: self.checks.oracle_cases.clone(),
            degree: self.solver.degree,
            ridge: self.solver.ridge,
            seed: self.solver.seed,
            picard: self.solver.picard(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!((cfg.solver.n_steps, cfg.solver.n_paths, cfg.solver.degree), (32, 8192, 2));
        assert_eq!((cfg.solver.tol, cfg.solver.max_iter, cfg.solver.seed), (1e-4, 25, 42));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"solvr": {}}"#,
            r#"{"solver": {"n_step": 8}}"#,
            r#"{"problem": {"kind": "catalog", "name": "martingale", "extra": 1}}"#,
            r#"{"solver": {"certificate": {"thetta": 2}}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn inline_problem_round_trips() {
        let text = r#"{"problem": {"kind": "inline", "f": ["-0.5*y1"], "g": ["0.1"], "xi": ["wT*wT"], "c": 0.25, "alpha": 0.5},
                       "solver": {"n_steps": 8, "n_paths": 512}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let r = cfg.validate().unwrap();
        assert!(r.spec.depends_on_state());
        assert!(r.oracle.is_none());
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn malformed_expression_reports_position() {
        let text = r#"{"problem": {"kind": "inline", "f": ["y1 +* 2"], "g": ["0"], "xi": ["wT"], "c": 1, "alpha": 0.5}}"#;
        let msg = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(msg.contains("f[0]") && msg.contains("position"), "{msg}");
    }

    #[test]
    fn preconditions() {
        let bad = [
            r#"{"solver": {"tol": 0}}"#,
            r#"{"solver": {"n_steps": 0}}"#,
            r#"{"solver": {"n_paths": 4}}"#,
            r#"{"solver": {"certificate": {"partition": [1.0, 0.3, 0.0]}}}"#,
            r#"{"solver": {"certificate": {"theta": 0.1}}}"#,
            r#"{"problem": {"kind": "catalog", "name": "nope"}}"#,
            r#"{"problem": {"kind": "inline", "f": ["0"], "g": ["0"], "xi": ["wT"], "c": 1, "alpha": 1.0}}"#,
        ];
        for text in bad {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
        let msg = RunConfig::from_json(r#"{"problem": {"kind": "inline", "f": ["0"], "g": ["0"], "xi": ["wT"], "c": 1, "alpha": 1.0}}"#)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("alpha must lie strictly inside (0,1)"), "{msg}");
    }
}
