//! Pseudo-spectral solver for the stochastic nonlinear Fokker-Planck equation
//!
//! ```text
//! d rho = [ (1/2) Lap rho - div(rho F(x, K * rho)) ] dt - sigma grad rho o dB
//! ```
//!
//! Strang splitting per step: half a heat step, the nonlinear transport by
//! SSP-RK2 with 2/3-rule dealiasing, half a heat step, then the exact
//! translation by `sigma dB` (a phase in Fourier space).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::drift::DriftSpec;
use crate::error::{LabError, Result};
use crate::kernel::KernelSpec;
use crate::particles::NoiseModel;
use crate::rng::BrownianPaths;
use crate::torus::{lq_norm_values, FieldState, PeriodicGrid, SpectralPlan};

/// Undershoot mass the zero-clip may remove before the step is rejected.
pub const CLIP_LIMIT: f64 = 1e-6;
/// Growth factor of `||rho||_q` over `||rho_0||_q` treated as blow-up.
pub const BLOW_UP_FACTOR: f64 = 1e3;
const CFL_LIMIT: f64 = 0.5;

/// Solution at one time level.
#[derive(Clone, Debug)]
pub struct SpdeState {
    pub step: usize,
    pub t: f64,
    pub coeffs: Vec<Complex64>,
    pub values: Vec<f64>,
}

impl SpdeState {
    pub fn field(&self, grid: PeriodicGrid) -> FieldState {
        FieldState::new(grid, self.values.clone()).expect("grid-sized state")
    }
}

/// Per-step record of a run.
#[derive(Clone, Debug, Default)]
pub struct SpdeDiagnostics {
    pub times: Vec<f64>,
    pub lq_norms: Vec<f64>,
    pub masses: Vec<f64>,
    pub minima: Vec<f64>,
    pub clipped: f64,
    pub max_cfl: f64,
}

impl SpdeDiagnostics {
    pub fn sup_norm(&self) -> f64 {
        self.lq_norms.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SpdeSolver {
    plan: SpectralPlan,
    tables: Vec<Vec<Complex64>>,
    dirac: bool,
    drift: DriftSpec,
    noise: NoiseModel,
    dt: f64,
    q: f64,
    /// `2 pi k` per mode and axis.
    freq: Vec<[f64; 3]>,
    heat_half: Vec<f64>,
    /// 1 inside the 2/3-rule band, 0 outside and on the Nyquist planes.
    dealias: Vec<f64>,
    nodes: Vec<f64>,
}

impl SpdeSolver {
    pub fn new(grid: PeriodicGrid, kernel: &KernelSpec, drift: DriftSpec, noise: NoiseModel, dt: f64, q: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(LabError::InvalidParameter {
                name: "dt",
                value: dt,
                constraint: "must be positive".into(),
            });
        }
        if noise.dim() != grid.dim() {
            return Err(LabError::InvalidInput(format!(
                "{}-dimensional noise on grid {grid}",
                noise.dim()
            )));
        }
        let d = grid.dim();
        let m = grid.points_per_axis() as i64;
        let plan = SpectralPlan::new(grid);
        let tables = kernel.table(grid)?;
        if tables.len() != d {
            return Err(LabError::InvalidInput(format!(
                "kernel has {} components, transport needs {d}",
                tables.len()
            )));
        }
        let mut freq = Vec::with_capacity(grid.len());
        let mut heat_half = Vec::with_capacity(grid.len());
        let mut dealias = Vec::with_capacity(grid.len());
        for flat in 0..grid.len() {
            let k = grid.mode(flat);
            let mut w = [0.0; 3];
            let mut k2 = 0.0;
            let mut keep = true;
            for a in 0..d {
                w[a] = 2.0 * PI * k[a] as f64;
                k2 += w[a] * w[a];
                keep &= 3 * k[a].abs() < m;
            }
            freq.push(w);
            heat_half.push((-0.5 * k2 * dt / 2.0).exp());
            dealias.push(if keep { 1.0 } else { 0.0 });
        }
        let nodes = (0..grid.len()).flat_map(|i| grid.node(i)[..d].to_vec()).collect();
        Ok(Self {
            plan,
            tables,
            dirac: kernel.is_dirac(),
            drift,
            noise,
            dt,
            q,
            freq,
            heat_half,
            dealias,
            nodes,
        })
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.plan.grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn initial_state(&self, rho0: &FieldState) -> SpdeState {
        let mut coeffs = self.plan.forward(rho0.values());
        let grid = self.grid();
        for (flat, c) in coeffs.iter_mut().enumerate() {
            if grid.is_nyquist(flat) {
                *c = Complex64::default();
            }
        }
        let values = self.plan.inverse(&coeffs);
        SpdeState {
            step: 0,
            t: 0.0,
            coeffs,
            values,
        }
    }

    /// Exact heat flow `exp((tau/2) Lap)` in Fourier space.
    pub fn substep_diffusion(&self, coeffs: &mut [Complex64], tau: f64) {
        if tau == self.dt / 2.0 {
            for (c, m) in coeffs.iter_mut().zip(&self.heat_half) {
                *c *= m;
            }
        } else {
            for (c, w) in coeffs.iter_mut().zip(&self.freq) {
                let k2: f64 = w.iter().map(|x| x * x).sum();
                *c *= (-0.5 * k2 * tau).exp();
            }
        }
    }

    /// `rho(x) <- rho(x - shift)`.
    pub fn substep_common_noise(&self, coeffs: &mut [Complex64], shift: &[f64]) {
        if shift.iter().all(|&s| s == 0.0) {
            return;
        }
        let grid = self.grid();
        for (flat, (c, w)) in coeffs.iter_mut().zip(&self.freq).enumerate() {
            if grid.is_nyquist(flat) {
                continue;
            }
            let phase: f64 = w.iter().zip(shift).map(|(wa, sa)| wa * sa).sum();
            *c *= Complex64::from_polar(1.0, -phase);
        }
    }

    /// `-div(rho F(x, K * rho))`, dealiased. Returns the tendency and `max |F|`.
    fn transport_rhs(&self, coeffs: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
        let grid = self.grid();
        let d = grid.dim();
        let filtered: Vec<Complex64> = coeffs.iter().zip(&self.dealias).map(|(c, m)| c * m).collect();
        let (rho, u) = if self.dirac {
            let rho = self.plan.inverse(&filtered);
            (rho.clone(), vec![rho])
        } else {
            let products: Vec<Vec<Complex64>> = std::iter::once(filtered.clone())
                .chain(self.tables.iter().map(|t| t.iter().zip(&filtered).map(|(s, c)| s * c).collect()))
                .collect();
            let refs: Vec<&[Complex64]> = products.iter().map(|p| p.as_slice()).collect();
            let mut fields = self.plan.inverse_many(&refs);
            let rho = fields.remove(0);
            (rho, fields)
        };
        let mut flux = vec![vec![0.0; grid.len()]; d];
        let mut ui = [0.0; 3];
        let mut fi = [0.0; 3];
        let mut fmax: f64 = 0.0;
        for i in 0..grid.len() {
            for a in 0..d {
                ui[a] = u[a][i];
            }
            self.drift.eval_into(&self.nodes[i * d..(i + 1) * d], &ui[..d], &mut fi[..d])?;
            let mut f2 = 0.0;
            for a in 0..d {
                flux[a][i] = rho[i] * fi[a];
                f2 += fi[a] * fi[a];
            }
            fmax = fmax.max(f2.sqrt());
        }
        if !fmax.is_finite() {
            return Err(LabError::Domain("non-finite drift in the density equation".into()));
        }
        let mut rhs = vec![Complex64::default(); grid.len()];
        let refs: Vec<&[f64]> = flux.iter().map(|f| f.as_slice()).collect();
        for (a, fh) in self.plan.forward_many(&refs).into_iter().enumerate() {
            for (((r, f), w), m) in rhs.iter_mut().zip(&fh).zip(&self.freq).zip(&self.dealias) {
                // -i (2 pi k_a) flux_a
                *r -= Complex64::new(0.0, w[a]) * f * m;
            }
        }
        Ok((rhs, fmax))
    }

    /// SSP-RK2 for the transport part over `dt`. Returns `max |F| dt / h`.
    pub fn substep_nonlinear(&self, coeffs: &mut [Complex64], dt: f64) -> Result<f64> {
        let h = self.grid().spacing();
        let (k1, f1) = self.transport_rhs(coeffs)?;
        let stage: Vec<Complex64> = coeffs.iter().zip(&k1).map(|(c, k)| c + k * dt).collect();
        let (k2, f2) = self.transport_rhs(&stage)?;
        for ((c, s), k) in coeffs.iter_mut().zip(&stage).zip(&k2) {
            *c = 0.5 * *c + 0.5 * (s + k * dt);
        }
        let ratio = f1.max(f2) * dt / h;
        if ratio > CFL_LIMIT {
            return Err(LabError::StepSize { ratio });
        }
        Ok(ratio)
    }

    /// Advance one step with common-noise increment `db`.
    pub fn step(&self, state: &mut SpdeState, db: &[f64], diag: &mut SpdeDiagnostics) -> Result<()> {
        let zero = state.coeffs[0];
        self.substep_diffusion(&mut state.coeffs, self.dt / 2.0);
        let cfl = self.substep_nonlinear(&mut state.coeffs, self.dt)?;
        self.substep_diffusion(&mut state.coeffs, self.dt / 2.0);
        let shift = self.noise.transport(state.t, db);
        self.substep_common_noise(&mut state.coeffs, &shift[..self.grid().dim()]);
        debug_assert_eq!(state.coeffs[0], zero);
        state.coeffs[0] = zero;
        state.step += 1;
        state.t = state.step as f64 * self.dt;
        self.plan.inverse_into(&state.coeffs, &mut state.values);
        diag.max_cfl = diag.max_cfl.max(cfl);
        self.enforce_positivity(state, diag)
    }

    fn enforce_positivity(&self, state: &mut SpdeState, diag: &mut SpdeDiagnostics) -> Result<()> {
        let grid = self.grid();
        let negative: f64 = state.values.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * grid.cell_volume();
        if negative == 0.0 {
            return Ok(());
        }
        if negative > CLIP_LIMIT {
            return Err(LabError::Positivity {
                t: state.t,
                clipped: negative,
                limit: CLIP_LIMIT,
            });
        }
        log::debug!("t = {:.4}: clipped undershoot mass {negative:.3e}", state.t);
        diag.clipped += negative;
        let target = state.coeffs[0].re;
        state.values.iter_mut().for_each(|v| *v = v.max(0.0));
        let mass = state.values.iter().sum::<f64>() * grid.cell_volume();
        state.values.iter_mut().for_each(|v| *v *= target / mass);
        state.coeffs = self.plan.forward(&state.values);
        Ok(())
    }

    fn record(&self, state: &SpdeState, diag: &mut SpdeDiagnostics) -> Result<f64> {
        let grid = self.grid();
        let norm = lq_norm_values(&state.values, grid, self.q)?;
        diag.times.push(state.t);
        diag.lq_norms.push(norm);
        diag.masses.push(state.values.iter().sum::<f64>() * grid.cell_volume());
        diag.minima.push(state.values.iter().copied().fold(f64::INFINITY, f64::min));
        Ok(norm)
    }

    /// Run over all increments of `paths`, calling `observe` at every time level
    /// (including `t = 0`).
    pub fn solve<F>(&self, rho0: &FieldState, paths: &BrownianPaths, mut observe: F) -> Result<(SpdeState, SpdeDiagnostics)>
    where
        F: FnMut(&SpdeState) -> Result<()>,
    {
        if (paths.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(LabError::InvalidInput(format!(
                "path step {} differs from solver step {}",
                paths.dt(),
                self.dt
            )));
        }
        let mut state = self.initial_state(rho0);
        let mut diag = SpdeDiagnostics::default();
        let norm0 = self.record(&state, &mut diag)?;
        let limit = BLOW_UP_FACTOR * norm0;
        observe(&state)?;
        for j in 0..paths.steps() {
            self.step(&mut state, paths.increment(j), &mut diag)?;
            let norm = self.record(&state, &mut diag)?;
            if !(norm <= limit) {
                return Err(LabError::BlowUp { t: state.t, norm, limit });
            }
            observe(&state)?;
        }
        Ok((state, diag))
    }
}
