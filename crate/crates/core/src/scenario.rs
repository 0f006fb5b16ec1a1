//! Time grid and Monte Carlo ensembles of the two independent Brownian
//! drivers `W` (forward noise, dimension `d`) and `B` (backward noise,
//! dimension `l`).
//!
//! Every path draws its increments from its own ChaCha8 stream keyed by
//! `(seed, path, driver)`, so an ensemble is bit-identical whatever the
//! size of the rayon pool that generated it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("number of steps must be at least 1".into()));
        }
        let dt = horizon / n_steps as f64;
        let mut times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
        // pin the endpoint so times[N] == T exactly
        times[n_steps] = horizon;
        Ok(Self {
            start: 0.0,
            end: horizon,
            n_steps,
            dt,
            times,
        })
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// Grid index of `time`, if it lies on the grid (relative tolerance 1e-9).
    pub fn index_of(&self, time: f64) -> Option<usize> {
        let x = time / self.dt;
        let i = x.round();
        if i < 0.0 || i > self.n_steps as f64 {
            return None;
        }
        if (x - i).abs() <= 1e-9 * (1.0 + i) {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// Shorthand for [`TimeGrid::new`].
pub fn make_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, n_steps)
}

/// Which Brownian driver a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    W = 0,
    B = 1,
}

/// `M` sampled paths of `W` and `B` on a shared grid.
///
/// Layout is path-major: the value of coordinate `c` at grid index `i` on
/// path `m` sits at `(m * (N + 1) + i) * dim + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEnsemble {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub d: usize,
    pub l: usize,
    pub seed: u64,
    w_values: Vec<f64>,
    b_values: Vec<f64>,
}

fn stream_rng(seed: u64, path: usize, driver: Driver) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((path as u64) << 1) | driver as u64);
    rng
}

fn fill_path(out: &mut [f64], dim: usize, sd: f64, rng: &mut ChaCha8Rng) {
    // out[0..dim] is W(0) = 0
    for c in 0..dim {
        out[c] = 0.0;
    }
    for i in 1..out.len() / dim {
        for c in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            out[i * dim + c] = out[(i - 1) * dim + c] + sd * z;
        }
    }
}

impl BrownianEnsemble {
    pub fn sample(grid: &TimeGrid, n_paths: usize, d: usize, l: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one path".into()));
        }
        if d == 0 || l == 0 {
            return Err(Error::InvalidArgument("driver dimensions must be positive".into()));
        }
        let np1 = grid.n_steps + 1;
        let sd = grid.dt.sqrt();
        let mut w_values = vec![0.0; n_paths * np1 * d];
        let mut b_values = vec![0.0; n_paths * np1 * l];
        w_values
            .par_chunks_mut(np1 * d)
            .enumerate()
            .for_each(|(m, path)| fill_path(path, d, sd, &mut stream_rng(seed, m, Driver::W)));
        b_values
            .par_chunks_mut(np1 * l)
            .enumerate()
            .for_each(|(m, path)| fill_path(path, l, sd, &mut stream_rng(seed, m, Driver::B)));
        Ok(Self {
            grid: grid.clone(),
            n_paths,
            d,
            l,
            seed,
            w_values,
            b_values,
        })
    }

    /// Wraps externally generated paths laid out as described on the type.
    pub fn from_parts(
        grid: TimeGrid,
        n_paths: usize,
        d: usize,
        l: usize,
        seed: u64,
        w_values: Vec<f64>,
        b_values: Vec<f64>,
    ) -> Result<Self> {
        let np1 = grid.n_steps + 1;
        if w_values.len() != n_paths * np1 * d || b_values.len() != n_paths * np1 * l {
            return Err(Error::DimensionMismatch("path tensors do not match grid and dimensions".into()));
        }
        Ok(Self {
            grid,
            n_paths,
            d,
            l,
            seed,
            w_values,
            b_values,
        })
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    /// `W(t_i)` on path `m`.
    #[inline]
    pub fn w(&self, m: usize, i: usize) -> &[f64] {
        let o = (m * (self.grid.n_steps + 1) + i) * self.d;
        &self.w_values[o..o + self.d]
    }

    /// `B(t_i)` on path `m`.
    #[inline]
    pub fn b(&self, m: usize, i: usize) -> &[f64] {
        let o = (m * (self.grid.n_steps + 1) + i) * self.l;
        &self.b_values[o..o + self.l]
    }

    /// Full `W` path of `m`, `(N + 1) * d` values.
    pub fn w_path(&self, m: usize) -> &[f64] {
        let len = (self.grid.n_steps + 1) * self.d;
        &self.w_values[m * len..(m + 1) * len]
    }

    #[inline]
    pub fn dw(&self, m: usize, j: usize, c: usize) -> f64 {
        self.w(m, j + 1)[c] - self.w(m, j)[c]
    }

    #[inline]
    pub fn db(&self, m: usize, j: usize, c: usize) -> f64 {
        self.b(m, j + 1)[c] - self.b(m, j)[c]
    }

    pub fn w_values(&self) -> &[f64] {
        &self.w_values
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b_values
    }
}

/// Shorthand for [`BrownianEnsemble::sample`].
pub fn sample_ensemble(
    grid: &TimeGrid,
    n_paths: usize,
    d: usize,
    l: usize,
    seed: u64,
) -> Result<BrownianEnsemble> {
    BrownianEnsemble::sample(grid, n_paths, d, l, seed)
}
