//! Discrete stochastic calculus on a [`TimeGrid`]: left-point Itô sums,
//! right-point backward Itô sums, left Riemann sums, and the storage types
//! for the diagonal process `Y(t_i)` and the Volterra field `Z(t_i, s_j)`.

use serde::Serialize;

use crate::error::{check_index, Error, Result};
use crate::scenario::{BrownianEnsemble, TimeGrid};

/// A scalar quantity sampled at every grid time on every path.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub n_paths: usize,
    pub n_times: usize,
    values: Vec<f64>,
}

impl GridSeries {
    pub fn from_fn(n_paths: usize, n_times: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_paths * n_times);
        for m in 0..n_paths {
            for i in 0..n_times {
                values.push(f(m, i));
            }
        }
        Self {
            n_paths,
            n_times,
            values,
        }
    }

    pub fn constant(n_paths: usize, n_times: usize, c: f64) -> Self {
        Self {
            n_paths,
            n_times,
            values: vec![c; n_paths * n_times],
        }
    }

    /// Coordinate `c` of `W`.
    pub fn w_component(ens: &BrownianEnsemble, c: usize) -> Self {
        Self::from_fn(ens.n_paths, ens.n_steps() + 1, |m, i| ens.w(m, i)[c])
    }

    /// Coordinate `c` of `B`.
    pub fn b_component(ens: &BrownianEnsemble, c: usize) -> Self {
        Self::from_fn(ens.n_paths, ens.n_steps() + 1, |m, i| ens.b(m, i)[c])
    }

    #[inline]
    pub fn at(&self, m: usize, i: usize) -> f64 {
        self.values[m * self.n_times + i]
    }
}

fn check_sum_args(h: &GridSeries, x: &GridSeries, i0: usize) -> Result<()> {
    if h.n_paths != x.n_paths || h.n_times != x.n_times {
        return Err(Error::DimensionMismatch(format!(
            "integrand is {}x{}, driver is {}x{}",
            h.n_paths, h.n_times, x.n_paths, x.n_times
        )));
    }
    if x.n_times < 2 {
        return Err(Error::DimensionMismatch("driver needs at least two grid times".into()));
    }
    check_index(i0, x.n_times - 2)
}

/// `sum_{j >= i0} H(t_j) (W(t_{j+1}) - W(t_j))` per path.
pub fn forward_ito_sum(h: &GridSeries, w: &GridSeries, i0: usize) -> Result<Vec<f64>> {
    check_sum_args(h, w, i0)?;
    let n = w.n_times - 1;
    Ok((0..w.n_paths)
        .map(|m| (i0..n).map(|j| h.at(m, j) * (w.at(m, j + 1) - w.at(m, j))).sum())
        .collect())
}

/// `sum_{j >= i0} G(t_{j+1}) (B(t_{j+1}) - B(t_j))` per path: the integrand
/// is taken at the right end of each step, the discrete backward Itô
/// convention.
pub fn backward_ito_sum(g: &GridSeries, b: &GridSeries, i0: usize) -> Result<Vec<f64>> {
    check_sum_args(g, b, i0)?;
    let n = b.n_times - 1;
    Ok((0..b.n_paths)
        .map(|m| (i0..n).map(|j| g.at(m, j + 1) * (b.at(m, j + 1) - b.at(m, j))).sum())
        .collect())
}

/// Left Riemann sum `sum_{j >= i0} F(t_j) dt` per path.
pub fn riemann_sum(f: &GridSeries, grid: &TimeGrid, i0: usize) -> Result<Vec<f64>> {
    if f.n_times != grid.n_steps + 1 {
        return Err(Error::DimensionMismatch(format!(
            "integrand has {} times, grid has {}",
            f.n_times,
            grid.n_steps + 1
        )));
    }
    check_index(i0, grid.n_steps - 1)?;
    let n = grid.n_steps;
    Ok((0..f.n_paths)
        .map(|m| (i0..n).map(|j| f.at(m, j)).sum::<f64>() * grid.dt)
        .collect())
}

/// `Y(t_i)` for `i = 0..=N` on every path, each value a `k`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalProcess {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub k: usize,
    values: Vec<f64>,
}

impl DiagonalProcess {
    pub fn zeros(grid: &TimeGrid, n_paths: usize, k: usize) -> Self {
        Self {
            grid: grid.clone(),
            n_paths,
            k,
            values: vec![0.0; (grid.n_steps + 1) * n_paths * k],
        }
    }

    pub fn from_fn(grid: &TimeGrid, n_paths: usize, k: usize, f: impl Fn(usize, usize, &mut [f64])) -> Self {
        let mut p = Self::zeros(grid, n_paths, k);
        for i in 0..=grid.n_steps {
            for m in 0..n_paths {
                f(i, m, p.at_mut(i, m));
            }
        }
        p
    }

    #[inline]
    pub fn at(&self, i: usize, m: usize) -> &[f64] {
        let o = (i * self.n_paths + m) * self.k;
        &self.values[o..o + self.k]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, m: usize) -> &mut [f64] {
        let o = (i * self.n_paths + m) * self.k;
        &mut self.values[o..o + self.k]
    }

    /// All paths at index `i`, `M * k` values.
    #[inline]
    pub fn slice(&self, i: usize) -> &[f64] {
        let len = self.n_paths * self.k;
        &self.values[i * len..(i + 1) * len]
    }

    #[inline]
    pub fn slice_mut(&mut self, i: usize) -> &mut [f64] {
        let len = self.n_paths * self.k;
        &mut self.values[i * len..(i + 1) * len]
    }

    /// Disjoint mutable views of `y(t_0), ..., y(t_N)`.
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let len = self.n_paths * self.k;
        self.values.chunks_mut(len).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `Z(t_i, s_j)` on the closed discrete triangle `0 <= i <= j <= N - 1`,
/// each value a row-major `k x d` matrix.
///
/// Rows are contiguous: all cells `(i, i..N)` of row `i` sit next to each
/// other, and inside a cell the paths are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularField {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub k: usize,
    pub d: usize,
    values: Vec<f64>,
}

impl TriangularField {
    pub fn zeros(grid: &TimeGrid, n_paths: usize, k: usize, d: usize) -> Self {
        let n = grid.n_steps;
        Self {
            grid: grid.clone(),
            n_paths,
            k,
            d,
            values: vec![0.0; n * (n + 1) / 2 * n_paths * k * d],
        }
    }

    pub fn from_fn(
        grid: &TimeGrid,
        n_paths: usize,
        k: usize,
        d: usize,
        f: impl Fn(usize, usize, usize, &mut [f64]),
    ) -> Self {
        let mut z = Self::zeros(grid, n_paths, k, d);
        let n = grid.n_steps;
        for i in 0..n {
            for j in i..n {
                for m in 0..n_paths {
                    f(i, j, m, z.at_mut(i, j, m));
                }
            }
        }
        z
    }

    #[inline]
    fn cell_len(&self) -> usize {
        self.n_paths * self.k * self.d
    }

    #[inline]
    fn cell_index(&self, i: usize, j: usize) -> usize {
        let n = self.grid.n_steps;
        debug_assert!(i <= j && j < n, "cell ({i}, {j}) outside the triangle");
        // rows r < i hold N - r cells each
        i * n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// Checked lookup: errors outside `0 <= i <= j <= N - 1`.
    pub fn try_cell(&self, i: usize, j: usize) -> Result<&[f64]> {
        let n = self.grid.n_steps;
        if i > j || j >= n {
            return Err(Error::IndexOutOfRange {
                index: if i > j { i } else { j },
                limit: if i > j { j } else { n - 1 },
            });
        }
        Ok(self.cell(i, j))
    }

    /// All paths of cell `(i, j)`, `M * k * d` values. Panics outside the
    /// triangle.
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        assert!(i <= j && j < self.grid.n_steps, "cell ({i}, {j}) outside the triangle");
        let len = self.cell_len();
        let o = self.cell_index(i, j) * len;
        &self.values[o..o + len]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        assert!(i <= j && j < self.grid.n_steps, "cell ({i}, {j}) outside the triangle");
        let len = self.cell_len();
        let o = self.cell_index(i, j) * len;
        &mut self.values[o..o + len]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, m: usize) -> &[f64] {
        let kd = self.k * self.d;
        &self.cell(i, j)[m * kd..(m + 1) * kd]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize, m: usize) -> &mut [f64] {
        let kd = self.k * self.d;
        &mut self.cell_mut(i, j)[m * kd..(m + 1) * kd]
    }

    /// Every cell of row `i`, `(N - i) * M * k * d` values.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_steps;
        let len = self.cell_len();
        let o = self.cell_index(i, i) * len;
        &self.values[o..o + (n - i) * len]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.n_steps;
        let len = self.cell_len();
        let o = self.cell_index(i, i) * len;
        &mut self.values[o..o + (n - i) * len]
    }

    /// Disjoint mutable views of rows `0..N`.
    pub fn rows_mut(&mut self) -> Vec<&mut [f64]> {
        let n = self.grid.n_steps;
        let len = self.cell_len();
        let mut out = Vec::with_capacity(n);
        let mut rest = self.values.as_mut_slice();
        for i in 0..n {
            let (row, tail) = rest.split_at_mut((n - i) * len);
            out.push(row);
            rest = tail;
        }
        out
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Exponent and index window of the discrete weighted norm.
///
/// The `y` part runs over `start..end`, the `z` part over rows
/// `start..end` and columns `i..z_end`. For a plain window `z_end == end`;
/// strips that own whole `Z` rows use `z_end == N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNormParams {
    pub a: f64,
    pub start: usize,
    pub end: usize,
    pub z_end: usize,
}

impl WeightedNormParams {
    pub fn window(a: f64, start: usize, end: usize) -> Self {
        Self {
            a,
            start,
            end,
            z_end: end,
        }
    }

    pub fn strip(a: f64, start: usize, end: usize, n_steps: usize) -> Self {
        Self {
            a,
            start,
            end,
            z_end: n_steps,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.a >= 0.0) {
            return Err(Error::InvalidArgument(format!("norm exponent must be >= 0, got {}", self.a)));
        }
        if self.start > self.end || self.end > n || self.z_end < self.end || self.z_end > n {
            return Err(Error::InvalidArgument(format!(
                "invalid norm window [{}, {}) with z columns up to {} on a grid of {n} steps",
                self.start, self.end, self.z_end
            )));
        }
        Ok(())
    }
}

fn check_shapes(y: &DiagonalProcess, z: &TriangularField) -> Result<()> {
    if y.grid != z.grid || y.n_paths != z.n_paths || y.k != z.k {
        return Err(Error::DimensionMismatch("y and z do not share grid, paths and k".into()));
    }
    Ok(())
}

fn norm_impl(
    y: &DiagonalProcess,
    z: &TriangularField,
    p: &WeightedNormParams,
    y_sq: impl Fn(usize) -> f64,
    z_sq: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    check_shapes(y, z)?;
    p.validate(y.grid.n_steps)?;
    let dt = y.grid.dt;
    let times = &y.grid.times;
    let mut y_part = 0.0;
    let mut z_part = 0.0;
    for i in p.start..p.end {
        y_part += (p.a * times[i]).exp() * y_sq(i);
        for j in i..p.z_end {
            z_part += (p.a * times[j]).exp() * z_sq(i, j);
        }
    }
    Ok((y_part * dt + z_part * dt * dt) / y.n_paths as f64)
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn sum_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Ensemble estimate of the squared weighted norm
/// `E[sum e^{a t_i} |y(t_i)|^2 dt + sum sum e^{a t_j} |z(t_i, t_j)|_F^2 dt^2]`.
pub fn weighted_h2_norm(y: &DiagonalProcess, z: &TriangularField, p: &WeightedNormParams) -> Result<f64> {
    norm_impl(y, z, p, |i| sum_sq(y.slice(i)), |i, j| sum_sq(z.cell(i, j)))
}

/// Squared weighted norm of `(y1 - y2, z1 - z2)`.
pub fn weighted_h2_distance(
    y1: &DiagonalProcess,
    z1: &TriangularField,
    y2: &DiagonalProcess,
    z2: &TriangularField,
    p: &WeightedNormParams,
) -> Result<f64> {
    check_shapes(y1, z2)?;
    check_shapes(y2, z1)?;
    norm_impl(
        y1,
        z1,
        p,
        |i| sum_sq_diff(y1.slice(i), y2.slice(i)),
        |i, j| sum_sq_diff(z1.cell(i, j), z2.cell(i, j)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_grid, sample_ensemble};
    use proptest::prelude::*;

    #[test]
    fn constant_integrands_telescope() {
        let g = make_grid(1.0, 16).unwrap();
        let ens = sample_ensemble(&g, 64, 1, 1, 5).unwrap();
        let w = GridSeries::w_component(&ens, 0);
        let b = GridSeries::b_component(&ens, 0);
        let one = GridSeries::constant(64, 17, 1.0);
        let zero = GridSeries::constant(64, 17, 0.0);
        for i0 in [0, 5, 15] {
            let fw = forward_ito_sum(&one, &w, i0).unwrap();
            let bw = backward_ito_sum(&one, &b, i0).unwrap();
            for m in 0..64 {
                assert!((fw[m] - (w.at(m, 16) - w.at(m, i0))).abs() < 1e-12);
                assert!((bw[m] - (b.at(m, 16) - b.at(m, i0))).abs() < 1e-12);
            }
            assert!(forward_ito_sum(&zero, &w, i0).unwrap().iter().all(|&v| v == 0.0));
            assert!(backward_ito_sum(&zero, &b, i0).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_sum_uses_right_endpoint() {
        let g = make_grid(1.0, 2).unwrap();
        // one path, B = [0, 1, 3], G = [10, 20, 30]
        let b = GridSeries::from_fn(1, 3, |_, i| [0.0, 1.0, 3.0][i]);
        let h = GridSeries::from_fn(1, 3, |_, i| [10.0, 20.0, 30.0][i]);
        assert_eq!(backward_ito_sum(&h, &b, 0).unwrap(), vec![20.0 * 1.0 + 30.0 * 2.0]);
        assert_eq!(forward_ito_sum(&h, &b, 0).unwrap(), vec![10.0 * 1.0 + 20.0 * 2.0]);
        let _ = g;
    }

    #[test]
    fn sums_reject_bad_start() {
        let one = GridSeries::constant(2, 5, 1.0);
        assert!(matches!(
            forward_ito_sum(&one, &one, 4),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(backward_ito_sum(&one, &GridSeries::constant(3, 5, 0.0), 0).is_err());
        let g = make_grid(1.0, 4).unwrap();
        assert!(riemann_sum(&one, &g, 4).is_err());
    }

    #[test]
    fn riemann_examples() {
        let g = make_grid(1.0, 4).unwrap();
        let c = GridSeries::constant(1, 5, 2.5);
        assert!((riemann_sum(&c, &g, 0).unwrap()[0] - 2.5).abs() < 1e-15);
        let t = GridSeries::from_fn(1, 5, |_, i| g.t(i));
        assert!((riemann_sum(&t, &g, 0).unwrap()[0] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn riemann_first_order_convergence() {
        let gap = |n: usize| {
            let g = make_grid(1.0, n).unwrap();
            let t = GridSeries::from_fn(1, n + 1, |_, i| g.t(i));
            0.5 - riemann_sum(&t, &g, 0).unwrap()[0]
        };
        for n in [4, 8, 16, 32] {
            // the left sum of t on [0,1] misses exactly 1/(2N)
            assert!((gap(n) / gap(2 * n) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn discrete_isometry() {
        let n = 32;
        let m_paths = 10_000;
        let g = make_grid(1.0, n).unwrap();
        let ens = sample_ensemble(&g, m_paths, 1, 1, 42).unwrap();
        let w = GridSeries::w_component(&ens, 0);
        let s = forward_ito_sum(&w, &w, 0).unwrap();
        let lhs = s.iter().map(|x| x * x).sum::<f64>() / m_paths as f64;
        let rhs = riemann_sum(&GridSeries::from_fn(m_paths, n + 1, |m, i| w.at(m, i).powi(2)), &g, 0)
            .unwrap()
            .iter()
            .sum::<f64>()
            / m_paths as f64;
        assert!((lhs / rhs - 1.0).abs() <= 0.05, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn backward_sum_is_centered() {
        let n = 32;
        let m_paths = 10_000;
        let g = make_grid(1.0, n).unwrap();
        let ens = sample_ensemble(&g, m_paths, 1, 1, 42).unwrap();
        let b = GridSeries::b_component(&ens, 0);
        // integrand at t_{j+1} must be a function of B_T - B_{t_{j+1}}
        let sin_b = GridSeries::from_fn(m_paths, n + 1, |m, i| (b.at(m, n) - b.at(m, i)).sin());
        let s = backward_ito_sum(&sin_b, &b, 0).unwrap();
        let mean = s.iter().sum::<f64>() / m_paths as f64;
        let sd = (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m_paths - 1) as f64).sqrt();
        assert!(mean.abs() <= 4.0 * sd / (m_paths as f64).sqrt(), "mean {mean} sd {sd}");
    }

    #[test]
    fn norm_examples() {
        let g = make_grid(1.0, 8).unwrap();
        let y = DiagonalProcess::zeros(&g, 3, 1);
        let z = TriangularField::zeros(&g, 3, 1, 1);
        let p = WeightedNormParams::window(0.0, 0, 8);
        assert_eq!(weighted_h2_norm(&y, &z, &p).unwrap(), 0.0);
        let y1 = DiagonalProcess::from_fn(&g, 3, 1, |_, _, v| v[0] = 1.0);
        assert!((weighted_h2_norm(&y1, &z, &p).unwrap() - 1.0).abs() < 1e-14);
        // z = 1 everywhere: the closed triangle has N(N+1)/2 cells of area dt^2
        let z1 = TriangularField::from_fn(&g, 3, 1, 1, |_, _, _, v| v[0] = 1.0);
        let expect = (8.0 * 9.0 / 2.0) / 64.0;
        assert!((weighted_h2_norm(&y, &z1, &p).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn norm_rejects_mismatch() {
        let g = make_grid(1.0, 8).unwrap();
        let g2 = make_grid(1.0, 4).unwrap();
        let y = DiagonalProcess::zeros(&g, 3, 1);
        let z = TriangularField::zeros(&g2, 3, 1, 1);
        assert!(matches!(
            weighted_h2_norm(&y, &z, &WeightedNormParams::window(0.0, 0, 4)),
            Err(Error::DimensionMismatch(_))
        ));
        let z = TriangularField::zeros(&g, 3, 1, 1);
        assert!(weighted_h2_norm(&y, &z, &WeightedNormParams::window(0.0, 5, 4)).is_err());
        assert!(weighted_h2_norm(&y, &z, &WeightedNormParams::window(-1.0, 0, 4)).is_err());
    }

    #[test]
    fn triangle_access_is_guarded() {
        let g = make_grid(1.0, 4).unwrap();
        let z = TriangularField::zeros(&g, 2, 1, 1);
        assert!(z.try_cell(0, 3).is_ok());
        assert!(z.try_cell(3, 3).is_ok());
        assert!(z.try_cell(2, 1).is_err());
        assert!(z.try_cell(0, 4).is_err());
        assert_eq!(z.row(0).len(), 4 * 2);
        assert_eq!(z.row(3).len(), 2);
    }

    #[test]
    fn triangle_cells_are_distinct() {
        let g = make_grid(1.0, 5).unwrap();
        let z = TriangularField::from_fn(&g, 1, 1, 1, |i, j, _, v| v[0] = (10 * i + j) as f64);
        for i in 0..5 {
            for j in i..5 {
                assert_eq!(z.at(i, j, 0)[0], (10 * i + j) as f64);
            }
        }
    }

    fn random_fields(seed: u64, g: &TimeGrid) -> (DiagonalProcess, TriangularField) {
        let ens = sample_ensemble(g, 4, 2, 1, seed).unwrap();
        let y = DiagonalProcess::from_fn(g, 4, 1, |i, m, v| v[0] = ens.w(m, i)[0] + 0.3);
        let z = TriangularField::from_fn(g, 4, 1, 2, |i, j, m, v| {
            v[0] = ens.w(m, j)[1] - ens.w(m, i)[0];
            v[1] = 1.0 + ens.b(m, j)[0];
        });
        (y, z)
    }

    proptest! {
        #[test]
        fn norm_equivalence_bounds(seed in 0u64..1000, a in 0.0f64..4.0, s in 0usize..8, len in 1usize..9) {
            let g = make_grid(1.0, 16).unwrap();
            let (y, z) = random_fields(seed, &g);
            let start = s;
            let end = (s + len).min(16);
            let p0 = WeightedNormParams::window(0.0, start, end);
            let pa = WeightedNormParams::window(a, start, end);
            let n0 = weighted_h2_norm(&y, &z, &p0).unwrap();
            let na = weighted_h2_norm(&y, &z, &pa).unwrap();
            let lo = (a * g.t(start)).exp() * n0;
            let hi = (a * g.t(end)).exp() * n0;
            prop_assert!(lo <= na * (1.0 + 1e-12));
            prop_assert!(na <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn norm_is_quadratic(seed in 0u64..1000, c in -3.0f64..3.0) {
            let g = make_grid(1.0, 8).unwrap();
            let (mut y, mut z) = random_fields(seed, &g);
            let p = WeightedNormParams::window(2.0, 0, 8);
            let base = weighted_h2_norm(&y, &z, &p).unwrap();
            y.scale(c);
            z.scale(c);
            let scaled = weighted_h2_norm(&y, &z, &p).unwrap();
            prop_assert!((scaled - c * c * base).abs() <= 1e-12 * (1.0 + base));
        }
    }
}
