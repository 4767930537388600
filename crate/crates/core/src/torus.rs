//! Geometry of the torus `[-1/2, 1/2)^d`, its uniform grid, and the spectral
//! representation every other module builds on.
//!
//! Fourier coefficients are taken relative to the physical coordinate, so a
//! grid function `f` is represented as `f(x) = sum_k fhat(k) exp(2 pi i k.x)`
//! with `fhat(0)` equal to the quadrature mean. Because the first node sits at
//! `-1/2`, this differs from the raw DFT by a `(-1)^k` phase per axis.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

pub const MAX_DIM: usize = 3;

/// Map one coordinate onto `[-1/2, 1/2)`.
#[inline]
pub fn wrap_coord(x: f64) -> f64 {
    let r = x - x.round();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Shortest signed displacement on the circle.
#[inline]
pub fn torus_delta(a: f64, b: f64) -> f64 {
    wrap_coord(a - b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| torus_delta(a, b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean norm of the representative in `[-1/2, 1/2)^d`.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Wrap raw coordinates onto the torus.
pub fn wrap(raw: &[f64]) -> Result<TorusPoint> {
    if raw.is_empty() || raw.len() > MAX_DIM {
        return Err(LabError::UnsupportedDimension(raw.len()));
    }
    if let Some(bad) = raw.iter().find(|x| !x.is_finite()) {
        return Err(LabError::InvalidInput(format!(
            "non-finite coordinate {bad}"
        )));
    }
    Ok(TorusPoint(raw.iter().map(|&x| wrap_coord(x)).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodicGrid {
    d: usize,
    m: usize,
}

impl PeriodicGrid {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(LabError::UnsupportedDimension(d));
        }
        if m < 2 || !m.is_power_of_two() {
            return Err(LabError::InvalidParameter {
                name: "M",
                value: m as f64,
                constraint: "points per axis must be a power of two >= 2".into(),
            });
        }
        Ok(Self { d, m })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Quadrature weight of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `j` along any axis.
    #[inline]
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 + j as f64 * self.spacing()
    }

    /// Signed wavenumber in `[-M/2, M/2)` stored at FFT index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for a in (0..self.d).rev() {
            idx[a] = flat % self.m;
            flat /= self.m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.d).fold(0, |acc, &j| acc * self.m + j)
    }

    pub fn node(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.d {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    /// Integer frequency vector stored at `flat`.
    pub fn mode(&self, flat: usize) -> [i64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut k = [0; MAX_DIM];
        for a in 0..self.d {
            k[a] = self.wavenumber(idx[a]);
        }
        k
    }

    /// True when any component sits on the Nyquist frequency `-M/2`.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let k = self.mode(flat);
        k[..self.d].iter().any(|&c| c == -(self.m as i64) / 2)
    }
}

impl fmt::Display for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.m, self.d)
    }
}

/// Cached multi-dimensional FFT for one grid. Cheap to clone.
#[derive(Clone)]
pub struct SpectralPlan {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `(-1)^(sum of indices)` per mode: the nodes start at `-1/2`.
    phase: Arc<Vec<f64>>,
    // flat index of -k
    mirror: Arc<Vec<usize>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("grid", &self.grid).finish()
    }
}

impl SpectralPlan {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let m = grid.points_per_axis();
        let phase = (0..grid.len())
            .map(|flat| {
                let s: usize = grid.multi_index(flat)[..grid.dim()].iter().sum();
                if s.is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let d = grid.dim();
        let mirror = (0..grid.len())
            .map(|flat| {
                let mut idx = grid.multi_index(flat);
                for i in idx.iter_mut().take(d) {
                    *i = (m - *i) % m;
                }
                grid.flat_index(&idx[..d])
            })
            .collect();
        Self {
            grid,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            phase: Arc::new(phase),
            mirror: Arc::new(mirror),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    fn transform_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.grid.points_per_axis();
        let d = self.grid.dim();
        let n = data.len();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // last axis is contiguous
        fft.process_with_scratch(data, &mut scratch);
        if d == 1 {
            return;
        }
        let mut lines = vec![Complex64::default(); n];
        for axis in 0..d - 1 {
            let stride = m.pow((d - 1 - axis) as u32);
            let block = stride * m;
            let mut pos = 0;
            for b in (0..n).step_by(block) {
                for r in 0..stride {
                    for j in 0..m {
                        lines[pos] = data[b + r + j * stride];
                        pos += 1;
                    }
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            pos = 0;
            for b in (0..n).step_by(block) {
                for r in 0..stride {
                    for j in 0..m {
                        data[b + r + j * stride] = lines[pos];
                        pos += 1;
                    }
                }
            }
        }
    }

    /// Physical-convention Fourier coefficients of real grid values.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.grid.len(), "field/grid size mismatch");
        let scale = 1.0 / self.grid.len() as f64;
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_axes(&mut data, &self.forward);
        for (c, &p) in data.iter_mut().zip(self.phase.iter()) {
            *c *= p * scale;
        }
        data
    }

    /// Synthesis `sum_k c(k) exp(2 pi i k.x)` at the nodes, keeping the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        self.inverse_into(coeffs, &mut out);
        out
    }

    /// Forward transforms of several real fields, two per complex FFT.
    pub fn forward_many(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let n = self.grid.len();
        let scale = 1.0 / n as f64;
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            if pair.len() == 1 {
                out.push(self.forward(pair[0]));
                continue;
            }
            let (a, b) = (pair[0], pair[1]);
            assert!(a.len() == n && b.len() == n, "field/grid size mismatch");
            let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
            self.transform_axes(&mut z, &self.forward);
            let mut ca = vec![Complex64::default(); n];
            let mut cb = vec![Complex64::default(); n];
            for k in 0..n {
                let zk = z[k];
                let zm = z[self.mirror[k]].conj();
                let s = self.phase[k] * scale * 0.5;
                ca[k] = (zk + zm) * s;
                // (zk - zm) / (2i)
                let diff = zk - zm;
                cb[k] = Complex64::new(diff.im, -diff.re) * s;
            }
            out.push(ca);
            out.push(cb);
        }
        out
    }

    /// Real parts of several syntheses, two per complex FFT.
    pub fn inverse_many(&self, coeffs: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        let mut out = Vec::with_capacity(coeffs.len());
        for pair in coeffs.chunks(2) {
            if pair.len() == 1 {
                out.push(self.inverse(pair[0]));
                continue;
            }
            let (a, b) = (pair[0], pair[1]);
            assert!(a.len() == n && b.len() == n, "field/grid size mismatch");
            // Hermitian parts synthesize to the real parts, so they pack into one transform
            let mut z: Vec<Complex64> = (0..n)
                .map(|k| {
                    let j = self.mirror[k];
                    let ha = (a[k] + a[j].conj()) * 0.5;
                    let hb = (b[k] + b[j].conj()) * 0.5;
                    (ha + Complex64::new(-hb.im, hb.re)) * self.phase[k]
                })
                .collect();
            self.transform_axes(&mut z, &self.inverse);
            out.push(z.iter().map(|c| c.re).collect());
            out.push(z.iter().map(|c| c.im).collect());
        }
        out
    }

    pub fn inverse_into(&self, coeffs: &[Complex64], out: &mut [f64]) {
        assert_eq!(coeffs.len(), self.grid.len(), "field/grid size mismatch");
        let mut data: Vec<Complex64> = coeffs.iter().zip(self.phase.iter()).map(|(c, &p)| c * p).collect();
        self.transform_axes(&mut data, &self.inverse);
        for (o, c) in out.iter_mut().zip(&data) {
            *o = c.re;
        }
    }
}

/// Real values on a periodic grid with a lazily computed spectral twin.
#[derive(Clone, Debug)]
pub struct FieldState {
    grid: PeriodicGrid,
    values: Vec<f64>,
    fourier: Option<Vec<Complex64>>,
}

impl FieldState {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidInput(format!(
                "field has {} values, grid {grid} needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            fourier: None,
        })
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
            fourier: None,
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| f(&grid.node(i)[..grid.dim()]))
            .collect();
        Self {
            grid,
            values,
            fourier: None,
        }
    }

    /// Build from coefficients; values are synthesized immediately.
    pub fn from_fourier(plan: &SpectralPlan, coeffs: Vec<Complex64>) -> Self {
        let values = plan.inverse(&coeffs);
        Self {
            grid: plan.grid(),
            values,
            fourier: Some(coeffs),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access; drops the cached coefficients.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.fourier = None;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn fourier(&self) -> Option<&[Complex64]> {
        self.fourier.as_deref()
    }

    pub fn ensure_fourier(&mut self, plan: &SpectralPlan) -> &[Complex64] {
        debug_assert_eq!(plan.grid(), self.grid);
        if self.fourier.is_none() {
            self.fourier = Some(plan.forward(&self.values));
        }
        self.fourier.as_deref().unwrap()
    }

    /// Forward transform, returning a copy with coefficients populated.
    pub fn dft_forward(&self, plan: &SpectralPlan) -> FieldState {
        let mut out = self.clone();
        out.ensure_fourier(plan);
        out
    }

    /// Rectangle-rule integral over the torus.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        lq_norm_values(&self.values, self.grid, q)
    }

    /// `f - g`, both on the same grid.
    pub fn difference(&self, other: &FieldState) -> Result<FieldState> {
        if self.grid != other.grid {
            return Err(LabError::InvalidInput(format!(
                "grid mismatch: {} vs {}",
                self.grid, other.grid
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(FieldState {
            grid: self.grid,
            values,
            fourier: None,
        })
    }
}

/// `(sum |f|^q h^d)^(1/q)`, or `max |f|` for `q = inf`.
pub fn lq_norm_values(values: &[f64], grid: PeriodicGrid, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(LabError::InvalidParameter {
            name: "q",
            value: q,
            constraint: "L^q exponent must satisfy q >= 1".into(),
        });
    }
    if q.is_infinite() {
        return Ok(values.iter().fold(0.0, |acc, v| acc.max(v.abs())));
    }
    let w = grid.cell_volume();
    let s: f64 = if q == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else if q == 2.0 {
        values.iter().map(|v| v * v).sum()
    } else if q == 4.0 {
        values.iter().map(|v| (v * v) * (v * v)).sum()
    } else {
        values.iter().map(|v| v.abs().powf(q)).sum()
    };
    Ok((s * w).powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn paired_transforms_match_single_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (d, m) in [(1, 16), (2, 8), (3, 4)] {
            let plan = SpectralPlan::new(PeriodicGrid::new(d, m).unwrap());
            let n = plan.grid().len();
            let fields: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
            let refs: Vec<&[f64]> = fields.iter().map(|f| f.as_slice()).collect();
            let many = plan.forward_many(&refs);
            for (f, c) in fields.iter().zip(&many) {
                for (x, y) in plan.forward(f).iter().zip(c) {
                    assert!((x - y).norm() < 1e-14);
                }
            }
            // arbitrary, non-Hermitian coefficients
            let coeffs: Vec<Vec<Complex64>> = (0..2)
                .map(|_| (0..n).map(|_| Complex64::new(rng.random::<f64>(), rng.random::<f64>())).collect())
                .collect();
            let refs: Vec<&[Complex64]> = coeffs.iter().map(|c| c.as_slice()).collect();
            let many = plan.inverse_many(&refs);
            for (c, v) in coeffs.iter().zip(&many) {
                for (x, y) in plan.inverse(c).iter().zip(v) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap(&[0.0]).unwrap().coords(), &[0.0]);
        assert_eq!(wrap(&[0.75]).unwrap().coords(), &[-0.25]);
        let p = wrap(&[-1.3, 2.5]).unwrap();
        assert_relative_eq!(p.coords()[0], -0.3, epsilon = 1e-15);
        assert_eq!(p.coords()[1], -0.5);
        assert_eq!(wrap(&[-0.5]).unwrap().coords(), &[-0.5]);
        assert_eq!(wrap(&[0.5]).unwrap().coords(), &[-0.5]);
        assert!(matches!(wrap(&[f64::NAN]), Err(LabError::InvalidInput(_))));
        assert!(wrap(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn distance_is_bounded() {
        let a = wrap(&[0.49, -0.49]).unwrap();
        let b = wrap(&[-0.49, 0.49]).unwrap();
        assert_relative_eq!(a.distance(&b), (2.0f64 * 0.02 * 0.02).sqrt(), epsilon = 1e-12);
        let c = wrap(&[0.0, 0.0]).unwrap();
        let e = wrap(&[-0.5, -0.5]).unwrap();
        assert!(c.distance(&e) <= 2f64.sqrt() / 2.0 + 1e-15);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(PeriodicGrid::new(1, 12).is_err());
        assert!(PeriodicGrid::new(4, 8).is_err());
        assert!(PeriodicGrid::new(0, 8).is_err());
        let g = PeriodicGrid::new(2, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.coordinate(0), -0.5);
        assert_eq!(g.coordinate(4), 0.0);
        assert_eq!(g.wavenumber(4), -4);
        assert_eq!(g.wavenumber(7), -1);
        assert_eq!(g.flat_index(&g.multi_index(37)), 37);
    }

    #[test]
    fn quadrature_of_one_is_one() {
        for d in 1..=3 {
            let g = PeriodicGrid::new(d, 16).unwrap();
            assert_eq!(FieldState::constant(g, 1.0).integral(), 1.0);
        }
    }

    #[test]
    fn dft_constant_and_cosine() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let plan = SpectralPlan::new(g);
        let one = FieldState::constant(g, 1.0).dft_forward(&plan);
        let c = one.fourier().unwrap();
        assert_relative_eq!(c[0].re, 1.0, epsilon = 1e-15);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-15));

        let cosf = FieldState::from_fn(g, |x| (2.0 * PI * x[0]).cos()).dft_forward(&plan);
        let c = cosf.fourier().unwrap();
        for (i, z) in c.iter().enumerate() {
            let k = g.wavenumber(i);
            let want = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((z.re - want).abs() < 1e-14 && z.im.abs() < 1e-14, "k={k} {z}");
        }
    }

    #[test]
    fn dft_uses_physical_phase() {
        // sin(2 pi x) = (e^{2 pi i x} - e^{-2 pi i x}) / 2i
        let g = PeriodicGrid::new(2, 16).unwrap();
        let plan = SpectralPlan::new(g);
        let f = FieldState::from_fn(g, |x| (2.0 * PI * x[1]).sin()).dft_forward(&plan);
        let c = f.fourier().unwrap();
        let idx = g.flat_index(&[0, 1]);
        assert_relative_eq!(c[idx].im, -0.5, epsilon = 1e-14);
        assert!(c[idx].re.abs() < 1e-14);
    }

    #[test]
    fn round_trip_and_parseval_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, m) in [(1, 64), (2, 16), (3, 8)] {
            let g = PeriodicGrid::new(d, m).unwrap();
            let plan = SpectralPlan::new(g);
            let vals: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = FieldState::new(g, vals.clone()).unwrap().dft_forward(&plan);
            let coeffs = f.fourier().unwrap();
            let back = plan.inverse(coeffs);
            let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in vals.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
            let parseval: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
            let l2sq = f.lq_norm(2.0).unwrap().powi(2);
            assert_relative_eq!(parseval, l2sq, max_relative = 1e-12);
            assert_relative_eq!(coeffs[0].re, f.integral(), max_relative = 1e-12);
        }
    }

    #[test]
    fn trig_polynomials_integrate_exactly() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        for k in 1..16 {
            let f = FieldState::from_fn(g, |x| {
                1.0 + (2.0 * PI * k as f64 * x[0]).cos() * (2.0 * PI * (k - 1) as f64 * x[1]).sin()
            });
            assert_relative_eq!(f.integral(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lq_norm_examples() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let one = FieldState::constant(g, 1.0);
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_relative_eq!(one.lq_norm(q).unwrap(), 1.0, epsilon = 1e-14);
        }
        let c = FieldState::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        assert_relative_eq!(c.lq_norm(2.0).unwrap(), 0.5f64.sqrt(), epsilon = 1e-14);
        let mut spike = vec![0.0; 64];
        spike[10] = 64.0;
        let s = FieldState::new(g, spike).unwrap();
        assert_relative_eq!(s.lq_norm(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            one.lq_norm(0.5),
            Err(LabError::InvalidParameter { name: "q", .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn wrap_is_idempotent(x in -1e6f64..1e6, y in -3.0f64..3.0) {
            let p = wrap(&[x, y]).unwrap();
            let q = wrap(p.coords()).unwrap();
            proptest::prop_assert_eq!(p.coords(), q.coords());
            for &c in p.coords() {
                proptest::prop_assert!((-0.5..0.5).contains(&c));
            }
        }

        #[test]
        fn distance_symmetric(a in proptest::collection::vec(-2.0f64..2.0, 2),
                              b in proptest::collection::vec(-2.0f64..2.0, 2)) {
            let p = wrap(&a).unwrap();
            let q = wrap(&b).unwrap();
            proptest::prop_assert_eq!(p.distance(&q), q.distance(&p));
            proptest::prop_assert!(p.distance(&q) <= 2f64.sqrt() / 2.0 + 1e-15);
        }

        #[test]
        fn norms_nondecreasing_in_q_for_densities(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = PeriodicGrid::new(1, 32).unwrap();
            let mut vals: Vec<f64> = (0..32).map(|_| rng.random_range(0.0..1.0)).collect();
            let mass: f64 = vals.iter().sum::<f64>() / 32.0;
            vals.iter_mut().for_each(|v| *v /= mass);
            let f = FieldState::new(g, vals).unwrap();
            let mut prev = 0.0;
            for q in [1.0, 1.5, 2.0, 3.0, 4.0, 8.0, f64::INFINITY] {
                let n = f.lq_norm(q).unwrap();
                proptest::prop_assert!(n >= prev * (1.0 - 1e-12));
                prev = n;
            }
        }
    }
}
