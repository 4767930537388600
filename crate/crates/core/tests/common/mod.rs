//! Reference solutions shared by the integration tests. Nothing here calls
//! into the solver code it is used to check.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Modified Bessel function `I_n(z)` from its power series.
pub fn bessel_i(n: u32, z: f64) -> f64 {
    let half = z / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..40 {
        term *= half * half / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() < 1e-300 {
            break;
        }
    }
    sum
}

/// Cole-Hopf solution of `u_t + u u_x = u_xx / 2` on the unit circle with
/// `u(x, 0) = mean + cos(2 pi x)`.
///
/// With `w(x, t) = u(x + mean t, t) - mean` and `w = -phi_x / phi`, `phi` solves
/// the heat equation from `phi_0 = exp(-sin(2 pi x) / (2 pi))`, whose Fourier
/// series has Bessel coefficients.
#[derive(Clone, Debug)]
pub struct ColeHopf {
    mean: f64,
    /// `(n, c_n, s_n)`: `phi_0 = sum c_n cos(2 pi n x) + s_n sin(2 pi n x)`.
    modes: Vec<(u32, f64, f64)>,
}

impl ColeHopf {
    pub fn new(mean: f64) -> Self {
        let z = -1.0 / (2.0 * PI);
        // exp(z sin t) = I_0 + 2 sum_k (-1)^k [I_{2k+1} sin((2k+1)t) + I_{2k} cos(2kt)]
        let modes = (0..24u32)
            .map(|n| {
                let i = bessel_i(n, z);
                let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
                match n {
                    0 => (0, i, 0.0),
                    _ if n % 2 == 0 => (n, 2.0 * sign * i, 0.0),
                    _ => (n, 0.0, 2.0 * sign * i),
                }
            })
            .collect();
        Self { mean, modes }
    }

    /// `(phi, phi_x)` at `(x, t)`.
    pub fn phi(&self, x: f64, t: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut px = 0.0;
        for &(n, c, s) in &self.modes {
            let w = 2.0 * PI * n as f64;
            let decay = (-0.5 * w * w * t).exp();
            let (sn, cs) = (w * x).sin_cos();
            p += decay * (c * cs + s * sn);
            px += decay * w * (s * cs - c * sn);
        }
        (p, px)
    }

    pub fn u(&self, x: f64, t: f64) -> f64 {
        let (p, px) = self.phi(x - self.mean * t, t);
        self.mean - px / p
    }
}

/// `rho(x, t)` for `rho_t + (rho^2)_x = rho_xx / 2`, `rho_0 = 1 + cos(2 pi x) / 2`.
pub fn burgers_density(x: f64, t: f64) -> f64 {
    ColeHopf::new(2.0).u(x, t) / 2.0
}

/// Kantorovich-Rubinstein distance between two measures carried by the grid
/// `x_j = -1/2 + j/n`, by exhaustive dynamic programming over grid potentials.
///
/// The dual is `max sum_j phi_j (mu_j - nu_j)` over `phi` with neighbour
/// differences in `{-h, 0, h}` (cyclically) and `phi_0 = 0`; the constraint
/// matrix is totally unimodular, so lattice potentials attain the optimum.
pub fn kr_grid_dual(mu: &[f64], nu: &[f64]) -> f64 {
    let n = mu.len();
    assert_eq!(n, nu.len());
    let h = 1.0 / n as f64;
    let span = n as i64;
    let width = (2 * span + 1) as usize;
    let at = |level: i64| (level + span) as usize;
    let c: Vec<f64> = mu.iter().zip(nu).map(|(a, b)| a - b).collect();
    // best[level] = max partial objective with phi_j = level * h
    let mut best = vec![f64::NEG_INFINITY; width];
    best[at(0)] = 0.0;
    for cj in c.iter().skip(1) {
        let mut next = vec![f64::NEG_INFINITY; width];
        for level in -span..=span {
            let prev = (-1..=1)
                .filter_map(|s| {
                    let l = level + s;
                    (l.abs() <= span).then(|| best[at(l)])
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if prev > f64::NEG_INFINITY {
                next[at(level)] = prev + level as f64 * h * cj;
            }
        }
        best = next;
    }
    // close the cycle back to phi_0 = 0
    (-1..=1).map(|l| best[at(l)]).fold(f64::NEG_INFINITY, f64::max)
}
