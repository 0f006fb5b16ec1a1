//! Contraction certificate: the weight `theta`, norm exponent `a`, the
//! interval partition of `[0, T]` and the resulting factor
//! `Lambda = max(L C (1/theta + 1), C/theta + alpha)`, `L` the longest interval.
//!
//! Admissible iff `C/(1 - alpha) < theta < a` and every interval is shorter
//! than `theta / (C (1 + theta))` (unbounded when `C = 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::TimeGrid;

/// Safety factor applied to the maximal admissible interval length.
pub const STEP_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateOverrides {
    pub theta: Option<f64>,
    pub a: Option<f64>,
    /// stitch points `T = S_0 > S_1 > ... > S_q = 0`
    pub partition: Option<Vec<f64>>,
    /// number of equal intervals; ignored if `partition` is given
    pub intervals: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub c: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub theta: f64,
    pub a: f64,
    pub lambda_factor: f64,
    /// `theta / (C (1 + theta))`; `None` (JSON `null`) when `C = 0`
    pub max_step: Option<f64>,
    /// longest interval of the partition
    pub interval_length: f64,
    pub partition: Vec<f64>,
}

/// `max(L C (1/theta + 1), C/theta + alpha)`.
pub fn contraction_factor(c: f64, alpha: f64, theta: f64, length: f64) -> f64 {
    // (C + alpha theta) / theta rounds 1/3 + 1/2 to the double nearest 5/6
    (length * c * (1.0 + theta) / theta).max((c + alpha * theta) / theta)
}

pub fn max_step(c: f64, theta: f64) -> Option<f64> {
    (c > 0.0).then(|| theta / (c * (1.0 + theta)))
}

pub fn build_certificate(c: f64, alpha: f64, horizon: f64, overrides: &CertificateOverrides) -> Result<ContractionCertificate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Certificate(format!("alpha must lie strictly inside (0,1), got {alpha}")));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Certificate(format!("C must be finite and >= 0, got {c}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Certificate(format!("T must be positive, got {horizon}")));
    }
    let theta = overrides.theta.unwrap_or(if c > 0.0 { 2.0 * c / (1.0 - alpha) } else { 1.0 });
    let a = overrides.a.unwrap_or(2.0 * theta);
    let step = max_step(c, theta);
    let partition = match (&overrides.partition, overrides.intervals) {
        (Some(p), _) => p.clone(),
        (None, Some(q)) => equal_partition(horizon, q)?,
        (None, None) => {
            let length = step.map_or(horizon, |s| (STEP_SAFETY * s).min(horizon));
            // guard against ceil(1.0000000001) when T is a multiple of L
            let q = ((horizon / length) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            equal_partition(horizon, q)?
        }
    };
    let interval_length = partition.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let cert = ContractionCertificate {
        c,
        alpha,
        horizon,
        theta,
        a,
        lambda_factor: contraction_factor(c, alpha, theta, interval_length),
        max_step: step,
        interval_length,
        partition,
    };
    cert.validate()?;
    Ok(cert)
}

fn equal_partition(horizon: f64, q: usize) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::Certificate("number of intervals must be at least 1".into()));
    }
    let mut p: Vec<f64> = (0..=q).map(|n| horizon * (q - n) as f64 / q as f64).collect();
    p[0] = horizon;
    p[q] = 0.0;
    Ok(p)
}

impl ContractionCertificate {
    /// Checks every strict inequality; the message names the one violated.
    pub fn validate(&self) -> Result<()> {
        let (c, alpha, theta, a) = (self.c, self.alpha, self.theta, self.a);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Certificate(format!("alpha must lie strictly inside (0,1), got {alpha}")));
        }
        let lower = c / (1.0 - alpha);
        if !(theta > lower && theta.is_finite()) {
            return Err(Error::Certificate(format!(
                "violated theta > C/(1-alpha): theta = {theta}, C/(1-alpha) = {lower}"
            )));
        }
        if !(a > theta && a.is_finite()) {
            return Err(Error::Certificate(format!("violated a > theta: a = {a}, theta = {theta}")));
        }
        let p = &self.partition;
        if p.len() < 2 || p[0] != self.horizon || *p.last().unwrap() != 0.0 {
            return Err(Error::Certificate(format!(
                "partition must run from T = {} down to 0, got {p:?}",
                self.horizon
            )));
        }
        for w in p.windows(2) {
            let len = w[0] - w[1];
            if !(len > 0.0) {
                return Err(Error::Certificate(format!("partition must be strictly decreasing, got {p:?}")));
            }
            if let Some(s) = self.max_step {
                if !(len < s) {
                    return Err(Error::Certificate(format!(
                        "violated S_p - S_(p+1) < theta/(C(1+theta)): interval [{}, {}] has length {len}, bound {s}",
                        w[1], w[0]
                    )));
                }
            }
        }
        if !(self.lambda_factor < 1.0) {
            return Err(Error::Certificate(format!("violated Lambda < 1: Lambda = {}", self.lambda_factor)));
        }
        Ok(())
    }

    pub fn n_intervals(&self) -> usize {
        self.partition.len() - 1
    }

    /// Stitch points as grid indices, `N = i_0 > i_1 > ... > i_q = 0`.
    pub fn partition_indices(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        if (grid.end - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::Certificate(format!(
                "certificate covers [0, {}] but the grid ends at {}",
                self.horizon, grid.end
            )));
        }
        self.partition
            .iter()
            .map(|&s| {
                grid.index_of(s).ok_or_else(|| {
                    Error::Certificate(format!("stitch point {s} is not on the grid (dt = {})", grid.dt))
                })
            })
            .collect()
    }
}
