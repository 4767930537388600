//! The interaction bump `V` and its moderate rescaling `V^N(x) = N^beta V(N^(beta/d) x)`.
//!
//! `V(x) = c_d (1 - 4|x|^2)^3` on `|x| < 1/2`. The triple zero at the boundary
//! makes the profile exactly C^2, and every radial moment reduces to a finite
//! sum, so `c_d` and `m_1(V)` are computed in closed form.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::quadrature::gauss_legendre;
use crate::torus::{FieldState, PeriodicGrid, SpectralPlan, TorusPoint, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    PolynomialBump,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSpec {
    d: usize,
    beta: f64,
    profile: Profile,
    norm_const: f64,
}

/// Surface area of the unit sphere in R^d.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension checked at construction"),
    }
}

/// `int_0^1 u^p (1 - u^2)^3 du` expanded binomially.
fn bump_moment(p: usize) -> f64 {
    const BINOM: [f64; 4] = [1.0, -3.0, 3.0, -1.0];
    BINOM
        .iter()
        .enumerate()
        .map(|(j, c)| c / (p + 2 * j + 1) as f64)
        .sum()
}

impl MollifierSpec {
    pub fn new(d: usize, beta: f64) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(LabError::UnsupportedDimension(d));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(LabError::InvalidParameter {
                name: "beta",
                value: beta,
                constraint: "moderate scaling needs beta in (0, 1)".into(),
            });
        }
        // int_{|x|<1/2} (1-4|x|^2)^3 dx = S_{d-1} 2^{-d} int_0^1 u^{d-1}(1-u^2)^3 du
        let mass = sphere_area(d) * 0.5f64.powi(d as i32) * bump_moment(d - 1);
        Ok(Self {
            d,
            beta,
            profile: Profile::PolynomialBump,
            norm_const: 1.0 / mass,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    /// `c_d`, so that `V` integrates to one.
    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// Spatial contraction factor `N^(beta/d)`.
    pub fn scale(&self, n: usize) -> f64 {
        (n as f64).powf(self.beta / self.d as f64)
    }

    /// Support radius of `V^N`.
    pub fn support_radius(&self, n: usize) -> f64 {
        0.5 / self.scale(n)
    }

    /// First absolute moment `m_1(V) = int V(y)|y| dy`.
    pub fn first_moment(&self) -> f64 {
        let d = self.d;
        self.norm_const * sphere_area(d) * 0.5f64.powi(d as i32 + 1) * bump_moment(d)
    }

    #[inline]
    fn profile_at_sq(&self, r2: f64) -> f64 {
        let s = 1.0 - 4.0 * r2;
        if s <= 0.0 {
            0.0
        } else {
            self.norm_const * s * s * s
        }
    }

    pub fn eval_v(&self, x: &TorusPoint) -> f64 {
        let r2: f64 = x.coords().iter().map(|c| c * c).sum();
        self.profile_at_sq(r2)
    }

    /// `V^N(x)`, for a representative `x` in `[-1/2, 1/2)^d`.
    pub fn eval_vn(&self, n: usize, x: &TorusPoint) -> f64 {
        let s = self.scale(n);
        let r2: f64 = x.coords().iter().map(|c| (c * s).powi(2)).sum();
        (n as f64).powf(self.beta) * self.profile_at_sq(r2)
    }

    /// Analytic gradient of `V` at a point of `R^d`.
    pub fn grad_v(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let s = 1.0 - 4.0 * r2;
        let mut g = [0.0; MAX_DIM];
        if s > 0.0 {
            let f = -24.0 * self.norm_const * s * s;
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi = f * xi;
            }
        }
        g
    }

    /// Largest admissible grid spacing for `N` particles.
    pub fn max_spacing(&self, n: usize) -> f64 {
        1.0 / (8.0 * self.scale(n))
    }

    pub fn check_resolution(&self, n: usize, grid: PeriodicGrid) -> Result<()> {
        let required = self.max_spacing(n);
        if grid.spacing() > required {
            return Err(LabError::Resolution {
                h: grid.spacing(),
                required,
                n,
            });
        }
        Ok(())
    }

    /// `V^N` sampled on the grid and rescaled to unit quadrature mass.
    pub fn sampled_vn(&self, n: usize, grid: PeriodicGrid) -> Result<FieldState> {
        if grid.dim() != self.d {
            return Err(LabError::InvalidInput(format!(
                "mollifier is {}-dimensional, grid is {grid}",
                self.d
            )));
        }
        let s = self.scale(n);
        let amp = (n as f64).powf(self.beta);
        let mut f = FieldState::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| (c * s).powi(2)).sum();
            amp * self.profile_at_sq(r2)
        });
        let mass = f.integral();
        f.values_mut().iter_mut().for_each(|v| *v /= mass);
        Ok(f)
    }

    /// Fourier coefficients of the unit-mass grid kernel; the zero mode is exactly 1.
    pub fn vn_fourier(&self, n: usize, plan: &SpectralPlan) -> Result<Vec<Complex64>> {
        self.check_resolution(n, plan.grid())?;
        let mut coeffs = self.sampled_vn(n, plan.grid())?.dft_forward(plan).fourier().unwrap().to_vec();
        coeffs[0] = Complex64::new(1.0, 0.0);
        Ok(coeffs)
    }

    /// `||grad V^N||_q`, by spectral differentiation of the sampled kernel and
    /// rectangle-rule quadrature.
    pub fn vn_gradient_norm_q(&self, n: usize, q: f64, plan: &SpectralPlan) -> Result<f64> {
        if !(q >= 2.0) {
            return Err(LabError::InvalidParameter {
                name: "q",
                value: q,
                constraint: "gradient scaling is stated for q >= 2".into(),
            });
        }
        let grid = plan.grid();
        self.check_resolution(n, grid)?;
        let s = self.scale(n);
        let amp = (n as f64).powf(self.beta);
        let vn = FieldState::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| (c * s).powi(2)).sum();
            amp * self.profile_at_sq(r2)
        });
        let coeffs = plan.forward(vn.values());
        let mut grad_sq = vec![0.0; grid.len()];
        let mut buf = vec![Complex64::default(); grid.len()];
        for axis in 0..self.d {
            for (i, (b, c)) in buf.iter_mut().zip(&coeffs).enumerate() {
                *b = if grid.is_nyquist(i) {
                    Complex64::default()
                } else {
                    let k = grid.mode(i)[axis] as f64;
                    c * Complex64::new(0.0, 2.0 * PI * k)
                };
            }
            let comp = plan.inverse(&buf);
            for (g, c) in grad_sq.iter_mut().zip(&comp) {
                *g += c * c;
            }
        }
        let integral: f64 =
            grad_sq.iter().map(|g| g.powf(q / 2.0)).sum::<f64>() * grid.cell_volume();
        Ok(integral.powf(1.0 / q))
    }

    /// `||grad V||_q` on R^d by high-order radial quadrature.
    pub fn gradient_norm_q_exact(&self, q: f64) -> f64 {
        // |grad V| = 24 c r (1 - 4r^2)^2 on r < 1/2
        let (nodes, weights) = gauss_legendre(64);
        let c = self.norm_const;
        let d = self.d as i32;
        let integral: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| {
                let r = 0.25 * (t + 1.0);
                let g = 24.0 * c * r * (1.0 - 4.0 * r * r).powi(2);
                0.25 * w * r.powi(d - 1) * g.powf(q)
            })
            .sum();
        (sphere_area(self.d) * integral).powf(1.0 / q)
    }

    /// Exponent `q beta (1 + 1/d) - beta` of `||grad V^N||_q^q / ||grad V||_q^q`.
    pub fn gradient_scaling_exponent(&self, q: f64) -> f64 {
        q * self.beta * (1.0 + 1.0 / self.d as f64) - self.beta
    }
}
