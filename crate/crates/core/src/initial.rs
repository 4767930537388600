//! Initial densities `rho_0` and i.i.d. sampling of initial particle positions.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::torus::{wrap_coord, FieldState, PeriodicGrid, MAX_DIM};

/// Periodic images summed for the wrapped Gaussian.
const IMAGES: i32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDensity {
    /// `1 + a cos(2 pi x_1)`, `|a| < 1`.
    UniformPlusCosine { amplitude: f64 },
    /// Wrapped Gaussian centered at the origin, mixed with the uniform density.
    GaussianBumpPeriodized { width: f64, weight: f64 },
    /// `1 + a (g(x - c) - g(x + c))` with a wrapped Gaussian `g` of unit mass.
    VortexPair { amplitude: f64, width: f64, separation: f64 },
}

/// Unit-mass Gaussian of standard deviation `w`, wrapped onto the circle.
fn wrapped_gaussian_1d(x: f64, w: f64) -> f64 {
    let norm = 1.0 / ((2.0 * PI).sqrt() * w);
    (-IMAGES..=IMAGES)
        .map(|n| {
            let y = x + n as f64;
            (-(y * y) / (2.0 * w * w)).exp()
        })
        .sum::<f64>()
        * norm
}

fn wrapped_gaussian(x: &[f64], w: f64) -> f64 {
    x.iter().map(|&c| wrapped_gaussian_1d(c, w)).product()
}

impl InitialDensity {
    pub fn validate(&self, d: usize) -> Vec<String> {
        let mut errs = Vec::new();
        match *self {
            InitialDensity::UniformPlusCosine { amplitude } => {
                if !(amplitude.abs() < 1.0) {
                    errs.push(format!("rho0: cosine amplitude {amplitude} must satisfy |a| < 1 for positivity"));
                }
            }
            InitialDensity::GaussianBumpPeriodized { width, weight } => {
                if !(width > 0.0 && width < 0.5) {
                    errs.push(format!("rho0: bump width {width} must lie in (0, 0.5)"));
                }
                if !(weight > 0.0 && weight <= 1.0) {
                    errs.push(format!("rho0: bump weight {weight} must lie in (0, 1]"));
                }
            }
            InitialDensity::VortexPair { amplitude, width, separation } => {
                if d != 2 {
                    errs.push(format!("rho0: vortex-pair is two-dimensional, d = {d}"));
                }
                if !(width > 0.0 && width < 0.5) {
                    errs.push(format!("rho0: vortex width {width} must lie in (0, 0.5)"));
                }
                if !(separation > 0.0 && separation < 0.5) {
                    errs.push(format!("rho0: vortex separation {separation} must lie in (0, 0.5)"));
                }
                let peak = wrapped_gaussian(&[0.0, 0.0], width);
                if !(amplitude.abs() * peak < 1.0) {
                    errs.push(format!(
                        "rho0: vortex amplitude {amplitude} makes the density negative (needs |a| < {:.4})",
                        1.0 / peak
                    ));
                }
            }
        }
        errs
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match *self {
            InitialDensity::UniformPlusCosine { amplitude } => 1.0 + amplitude * (2.0 * PI * x[0]).cos(),
            InitialDensity::GaussianBumpPeriodized { width, weight } => {
                (1.0 - weight) + weight * wrapped_gaussian(x, width)
            }
            InitialDensity::VortexPair { amplitude, width, separation } => {
                let c = separation / 2.0;
                let p = [wrap_coord(x[0] - c), x[1]];
                let m = [wrap_coord(x[0] + c), x[1]];
                1.0 + amplitude * (wrapped_gaussian(&p, width) - wrapped_gaussian(&m, width))
            }
        }
    }

    /// Upper bound of the density used for rejection sampling.
    pub fn sup(&self, d: usize) -> f64 {
        match *self {
            InitialDensity::UniformPlusCosine { amplitude } => 1.0 + amplitude.abs(),
            InitialDensity::GaussianBumpPeriodized { width, weight } => {
                (1.0 - weight) + weight * wrapped_gaussian_1d(0.0, width).powi(d as i32)
            }
            InitialDensity::VortexPair { amplitude, width, .. } => {
                1.0 + amplitude.abs() * wrapped_gaussian(&[0.0, 0.0], width)
            }
        }
    }

    /// Grid samples, renormalized to unit quadrature mass.
    pub fn field(&self, grid: PeriodicGrid) -> FieldState {
        let mut f = FieldState::from_fn(grid, |x| self.density(x));
        let mass = f.integral();
        f.values_mut().iter_mut().for_each(|v| *v /= mass);
        f
    }

    pub fn sampler(&self, d: usize) -> Result<Sampler> {
        let errs = self.validate(d);
        if !errs.is_empty() {
            return Err(LabError::Config(errs));
        }
        if d == 1 {
            Ok(Sampler::InverseCdf(InverseCdf::new(|x| self.density(&[x]), 1 << 14)))
        } else {
            Ok(Sampler::Rejection {
                density: self.clone(),
                d,
                bound: self.sup(d) * (1.0 + 1e-9),
            })
        }
    }
}

/// Piecewise-linear inverse CDF built from a fine tabulation on `[-1/2, 1/2)`.
#[derive(Clone, Debug)]
pub struct InverseCdf {
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(density: impl Fn(f64) -> f64, cells: usize) -> Self {
        let h = 1.0 / cells as f64;
        let mut cdf = Vec::with_capacity(cells + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for j in 0..cells {
            let a = -0.5 + j as f64 * h;
            // Simpson per cell
            acc += h / 6.0 * (density(a) + 4.0 * density(a + h / 2.0) + density(a + h));
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { cdf }
    }

    pub fn invert(&self, u: f64) -> f64 {
        let cells = self.cdf.len() - 1;
        let j = self.cdf.partition_point(|&c| c <= u).clamp(1, cells) - 1;
        let (lo, hi) = (self.cdf[j], self.cdf[j + 1]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
        wrap_coord(-0.5 + (j as f64 + frac) / cells as f64)
    }
}

#[derive(Clone, Debug)]
pub enum Sampler {
    InverseCdf(InverseCdf),
    Rejection {
        density: InitialDensity,
        d: usize,
        bound: f64,
    },
}

impl Sampler {
    pub fn sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::InverseCdf(icdf) => out[0] = icdf.invert(rng.random::<f64>()),
            Sampler::Rejection { density, d, bound } => {
                let mut x = [0.0; MAX_DIM];
                loop {
                    for c in x.iter_mut().take(*d) {
                        *c = rng.random::<f64>() - 0.5;
                    }
                    let accept = rng.random::<f64>() * bound;
                    if accept < density.density(&x[..*d]) {
                        out[..*d].copy_from_slice(&x[..*d]);
                        return;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn presets_are_probability_densities() {
        let g2 = PeriodicGrid::new(2, 64).unwrap();
        let g1 = PeriodicGrid::new(1, 256).unwrap();
        let cos = InitialDensity::UniformPlusCosine { amplitude: 0.5 };
        let raw = FieldState::from_fn(g1, |x| cos.density(x));
        assert_relative_eq!(raw.integral(), 1.0, epsilon = 1e-14);
        let bump = InitialDensity::GaussianBumpPeriodized { width: 0.1, weight: 0.5 };
        let raw = FieldState::from_fn(g2, |x| bump.density(x));
        assert_relative_eq!(raw.integral(), 1.0, epsilon = 1e-10);
        let pair = InitialDensity::VortexPair { amplitude: 0.03, width: 0.08, separation: 0.3 };
        assert!(pair.validate(2).is_empty());
        let raw = FieldState::from_fn(g2, |x| pair.density(x));
        assert_relative_eq!(raw.integral(), 1.0, epsilon = 1e-10);
        assert!(raw.min() > 0.0);
        assert!(raw.values().iter().all(|&v| v <= pair.sup(2)));
    }

    #[test]
    fn invalid_presets_are_reported() {
        assert_eq!(InitialDensity::UniformPlusCosine { amplitude: 1.2 }.validate(1).len(), 1);
        let pair = InitialDensity::VortexPair { amplitude: 5.0, width: 0.05, separation: 0.3 };
        assert!(!pair.validate(2).is_empty());
        assert!(!pair.validate(1).is_empty());
        assert!(pair.sampler(2).is_err());
    }

    #[test]
    fn inverse_cdf_reproduces_cosine_law() {
        let rho = InitialDensity::UniformPlusCosine { amplitude: 0.5 };
        let s = rho.sampler(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200_000;
        let mut acc = 0.0;
        let mut x = [0.0];
        for _ in 0..n {
            s.sample(&mut rng, &mut x);
            assert!((-0.5..0.5).contains(&x[0]));
            acc += (2.0 * PI * x[0]).cos();
        }
        // E cos(2 pi X) = a / 2
        assert!((acc / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn rejection_sampler_matches_first_moment() {
        let rho = InitialDensity::VortexPair { amplitude: 0.03, width: 0.08, separation: 0.3 };
        let s = rho.sampler(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // each unit-mass bump sits at +-separation/2
        let want = 0.03 * 0.3;
        let n = 100_000;
        let mut x = [0.0; 2];
        let mut acc = 0.0;
        for _ in 0..n {
            s.sample(&mut rng, &mut x);
            acc += x[0];
        }
        assert!((acc / n as f64 - want).abs() < 0.003, "{} vs {want}", acc / n as f64);
    }
}
