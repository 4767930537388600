//! The moderately interacting particle system: Euler-Maruyama integration with
//! idiosyncratic noises `W^i` and one common noise `B`, cloud-in-cell
//! deposition of the empirical measure, and the mollified density
//! `rho^N = V^N * S^N`.
//!
//! The interaction `(1/N) sum_k (K * V^N)(X^i - X^k)` is evaluated as
//! `(K * rho^N)(X^i)`: deposit, multiply by `V^N` and `K` in Fourier space,
//! interpolate back. A direct O(N^2) sum over a gridded `G^N` is kept in
//! [`interaction_pairwise`] for cross-checks.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::drift::DriftSpec;
use crate::error::{LabError, Result};
use crate::initial::Sampler;
use crate::kernel::KernelSpec;
use crate::mollifier::MollifierSpec;
use crate::rng::{bridge_stream, normal, particle_stream};
use crate::torus::{wrap_coord, FieldState, PeriodicGrid, SpectralPlan, MAX_DIM};

/// Constant-in-space diffusion: `nu = Id` and a piecewise-constant-in-time `sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    d: usize,
    /// `(start time, row-major d x d matrix)`, sorted by start time.
    pieces: Vec<(f64, Vec<f64>)>,
}

impl NoiseModel {
    pub fn constant(d: usize, sigma: Vec<f64>) -> Result<Self> {
        Self::schedule(d, vec![(0.0, sigma)])
    }

    pub fn scalar(d: usize, s: f64) -> Self {
        let mut m = vec![0.0; d * d];
        for a in 0..d {
            m[a * d + a] = s;
        }
        Self { d, pieces: vec![(0.0, m)] }
    }

    pub fn schedule(d: usize, mut pieces: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(LabError::InvalidInput("empty sigma schedule".into()));
        }
        for (t, m) in &pieces {
            if m.len() != d * d || m.iter().any(|v| !v.is_finite()) || !t.is_finite() {
                return Err(LabError::InvalidInput(format!(
                    "sigma must be a finite {d}x{d} matrix (got {} entries at t = {t})",
                    m.len()
                )));
            }
        }
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { d, pieces })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sigma_at(&self, t: f64) -> &[f64] {
        let idx = self.pieces.partition_point(|(s, _)| *s <= t).max(1) - 1;
        &self.pieces[idx].1
    }

    /// `sigma(t) dB`.
    pub fn transport(&self, t: f64, db: &[f64]) -> [f64; MAX_DIM] {
        let s = self.sigma_at(t);
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.d {
            out[a] = (0..self.d).map(|b| s[a * self.d + b] * db[b]).sum();
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|(_, m)| m.iter().all(|&v| v == 0.0))
    }
}

#[derive(Clone, Debug)]
struct Refinement {
    bridges: Vec<ChaCha8Rng>,
    pending: Vec<f64>,
}

/// Positions of `N` particles on the torus with one random stream each.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    d: usize,
    positions: Vec<f64>,
    streams: Vec<ChaCha8Rng>,
    refinement: Option<Refinement>,
}

impl ParticleEnsemble {
    /// Draw `n` i.i.d. initial positions; particle `i` uses stream `(seed, i)`.
    pub fn sample(n: usize, d: usize, replica_seed: u64, sampler: &Sampler) -> Self {
        let mut positions = vec![0.0; n * d];
        let mut streams: Vec<ChaCha8Rng> = (0..n).map(|i| particle_stream(replica_seed, i)).collect();
        positions
            .par_chunks_mut(d)
            .zip(streams.par_iter_mut())
            .for_each(|(x, rng)| sampler.sample(rng, x));
        Self {
            d,
            positions,
            streams,
            refinement: None,
        }
    }

    pub fn from_positions(d: usize, replica_seed: u64, raw: &[f64]) -> Result<Self> {
        if d == 0 || d > MAX_DIM || !raw.len().is_multiple_of(d) {
            return Err(LabError::InvalidInput(format!(
                "{} coordinates do not form {d}-dimensional points",
                raw.len()
            )));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(LabError::InvalidInput("non-finite particle coordinate".into()));
        }
        let n = raw.len() / d;
        Ok(Self {
            d,
            positions: raw.iter().map(|&x| wrap_coord(x)).collect(),
            streams: (0..n).map(|i| particle_stream(replica_seed, i)).collect(),
            refinement: None,
        })
    }

    /// Switch to half-steps: each pair of half increments is a Brownian bridge
    /// split of the increment the coarse run would draw, so refined and coarse
    /// runs see the same `W^i`.
    pub fn enable_refinement(&mut self, replica_seed: u64) {
        let n = self.len();
        self.refinement = Some(Refinement {
            bridges: (0..n).map(|i| bridge_stream(replica_seed, i)).collect(),
            pending: vec![0.0; n * self.d],
        });
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    /// Idiosyncratic increments for step `step` of size `dt`.
    pub fn draw_increments(&mut self, step: usize, dt: f64) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; self.positions.len()];
        match &mut self.refinement {
            None => {
                let sd = dt.sqrt();
                out.par_chunks_mut(d).zip(self.streams.par_iter_mut()).for_each(|(o, rng)| {
                    for v in o.iter_mut() {
                        *v = sd * normal(rng);
                    }
                });
            }
            Some(r) => {
                if step.is_multiple_of(2) {
                    let coarse_sd = (2.0 * dt).sqrt();
                    out.par_chunks_mut(d)
                        .zip(r.pending.par_chunks_mut(d))
                        .zip(self.streams.par_iter_mut().zip(r.bridges.par_iter_mut()))
                        .for_each(|((o, p), (rng, bridge))| {
                            for (v, pv) in o.iter_mut().zip(p.iter_mut()) {
                                let coarse = coarse_sd * normal(rng);
                                let split = 0.5 * coarse_sd * normal(bridge);
                                *v = 0.5 * coarse + split;
                                *pv = 0.5 * coarse - split;
                            }
                        });
                } else {
                    out.copy_from_slice(&r.pending);
                }
            }
        }
        out
    }

    /// `X^i <- wrap(X^i + F_i dt + dW^i + sigma dB)`, the same `dB` for every particle.
    #[allow(clippy::too_many_arguments)]
    pub fn em_step(
        &mut self,
        drift: &[f64],
        noise: &NoiseModel,
        t: f64,
        dw: &[f64],
        db: &[f64],
        dt: f64,
        step: usize,
    ) -> Result<()> {
        let d = self.d;
        if drift.len() != self.positions.len() || dw.len() != self.positions.len() {
            return Err(LabError::InvalidInput(format!(
                "drift/noise arrays have {} / {} entries, ensemble needs {}",
                drift.len(),
                dw.len(),
                self.positions.len()
            )));
        }
        if let Some(i) = drift.iter().position(|f| !f.is_finite()) {
            return Err(LabError::Integration { particle: i / d, step });
        }
        let shift = noise.transport(t, db);
        self.positions
            .par_chunks_mut(d)
            .zip(drift.par_chunks(d).zip(dw.par_chunks(d)))
            .for_each(|(x, (f, w))| {
                for a in 0..d {
                    x[a] = wrap_coord(x[a] + f[a] * dt + w[a] + shift[a]);
                }
            });
        Ok(())
    }
}

/// Cloud-in-cell weights of the `2^d` nodes around `x`.
#[inline]
pub fn cic_stencil(grid: PeriodicGrid, x: &[f64], idx: &mut [usize; 8], w: &mut [f64; 8]) -> usize {
    let m = grid.points_per_axis();
    let mf = m as f64;
    let d = grid.dim();
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for a in 0..d {
        let s = (x[a] + 0.5) * mf;
        let fl = s.floor();
        frac[a] = s - fl;
        base[a] = (fl as i64).rem_euclid(m as i64) as usize;
    }
    let count = 1 << d;
    for (corner, (ix, wx)) in idx.iter_mut().zip(w.iter_mut()).enumerate().take(count) {
        let mut flat = 0;
        let mut weight = 1.0;
        for a in 0..d {
            let up = (corner >> (d - 1 - a)) & 1 == 1;
            let j = if up { (base[a] + 1) % m } else { base[a] };
            flat = flat * m + j;
            weight *= if up { frac[a] } else { 1.0 - frac[a] };
        }
        *ix = flat;
        *wx = weight;
    }
    count
}

/// Interpolate grid fields at a point.
#[inline]
pub fn cic_interpolate(grid: PeriodicGrid, fields: &[&[f64]], x: &[f64], out: &mut [f64]) {
    let mut idx = [0usize; 8];
    let mut w = [0.0; 8];
    let count = cic_stencil(grid, x, &mut idx, &mut w);
    for (o, f) in out.iter_mut().zip(fields) {
        *o = (0..count).map(|c| w[c] * f[idx[c]]).sum();
    }
}

/// Grid representation of `S^N`: mass `1/N` per particle spread by CIC.
pub fn deposit(ens: &ParticleEnsemble, grid: PeriodicGrid) -> Result<FieldState> {
    if ens.dim() != grid.dim() {
        return Err(LabError::InvalidInput(format!(
            "{}-dimensional particles on grid {grid}",
            ens.dim()
        )));
    }
    let mut values = vec![0.0; grid.len()];
    let unit = 1.0 / (ens.len() as f64 * grid.cell_volume());
    let mut idx = [0usize; 8];
    let mut w = [0.0; 8];
    for x in ens.positions().chunks(ens.dim()) {
        let count = cic_stencil(grid, x, &mut idx, &mut w);
        for c in 0..count {
            values[idx[c]] += w[c] * unit;
        }
    }
    FieldState::new(grid, values)
}

/// Mollified density with its coefficients; `values` are not clipped.
#[derive(Clone, Debug)]
pub struct Mollified {
    pub coeffs: Vec<Complex64>,
    pub values: Vec<f64>,
}

impl Mollified {
    /// Mass the zero-clip of the field would remove (roundoff undershoot).
    pub fn negative_mass(&self, grid: PeriodicGrid) -> f64 {
        self.values.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * grid.cell_volume()
    }

    /// Nonnegative field; returns it with the clipped mass.
    pub fn clipped(&self, grid: PeriodicGrid) -> (FieldState, f64) {
        let clipped = self.negative_mass(grid);
        if clipped > 0.0 {
            log::debug!("mollified density: clipped undershoot mass {clipped:.3e}");
        }
        let values = self.values.iter().map(|v| v.max(0.0)).collect();
        (FieldState::new(grid, values).expect("grid-sized"), clipped)
    }
}

/// `rho^N = V^N * S^N`, returned clipped at zero together with the clipped mass.
pub fn mollify(sn: &FieldState, moll: &MollifierSpec, n: usize, plan: &SpectralPlan) -> Result<(FieldState, f64)> {
    let vhat = moll.vn_fourier(n, plan)?;
    let m = mollify_with(sn, &vhat, plan);
    Ok(m.clipped(plan.grid()))
}

pub fn mollify_with(sn: &FieldState, vhat: &[Complex64], plan: &SpectralPlan) -> Mollified {
    let mut coeffs = plan.forward(sn.values());
    for (c, v) in coeffs.iter_mut().zip(vhat) {
        *c *= v;
    }
    let values = plan.inverse(&coeffs);
    Mollified { coeffs, values }
}

/// Everything needed to turn particle positions into drifts for one `N`.
#[derive(Clone, Debug)]
pub struct InteractionField {
    plan: SpectralPlan,
    vhat: Vec<Complex64>,
    tables: Vec<Vec<Complex64>>,
    dirac: bool,
    n: usize,
}

/// Per-step output of [`InteractionField::evaluate`].
#[derive(Clone, Debug)]
pub struct StepField {
    pub rho_n: Mollified,
    /// `(K * rho^N)` at the nodes, one vector per component.
    pub velocity: Vec<Vec<f64>>,
    /// `u_i = (K * rho^N)(X^i)`, row-major `N x components`.
    pub u: Vec<f64>,
}

impl InteractionField {
    pub fn new(kernel: &KernelSpec, moll: &MollifierSpec, n: usize, plan: &SpectralPlan) -> Result<Self> {
        let vhat = moll.vn_fourier(n, plan)?;
        let tables = kernel.table(plan.grid())?;
        Ok(Self {
            plan: plan.clone(),
            vhat,
            tables,
            dirac: kernel.is_dirac(),
            n,
        })
    }

    pub fn components(&self) -> usize {
        self.tables.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    pub fn evaluate(&self, ens: &ParticleEnsemble) -> Result<StepField> {
        let grid = self.plan.grid();
        let sn = deposit(ens, grid)?;
        let (rho_n, velocity) = if self.dirac {
            let rho_n = mollify_with(&sn, &self.vhat, &self.plan);
            let velocity = vec![rho_n.values.clone()];
            (rho_n, velocity)
        } else {
            let mut coeffs = self.plan.forward(sn.values());
            for (c, v) in coeffs.iter_mut().zip(&self.vhat) {
                *c *= v;
            }
            let products: Vec<Vec<Complex64>> = self
                .tables
                .iter()
                .map(|t| t.iter().zip(&coeffs).map(|(s, c)| s * c).collect())
                .collect();
            let mut refs: Vec<&[Complex64]> = vec![coeffs.as_slice()];
            refs.extend(products.iter().map(|p| p.as_slice()));
            let mut fields = self.plan.inverse_many(&refs);
            let values = fields.remove(0);
            (Mollified { coeffs, values }, fields)
        };
        let u = interpolate_at_particles(grid, &velocity, ens);
        Ok(StepField { rho_n, velocity, u })
    }
}

pub fn interpolate_at_particles(grid: PeriodicGrid, velocity: &[Vec<f64>], ens: &ParticleEnsemble) -> Vec<f64> {
    let nc = velocity.len();
    let fields: Vec<&[f64]> = velocity.iter().map(|v| v.as_slice()).collect();
    let mut u = vec![0.0; ens.len() * nc];
    u.par_chunks_mut(nc)
        .zip(ens.positions().par_chunks(ens.dim()))
        .for_each(|(ui, x)| cic_interpolate(grid, &fields, x, ui));
    u
}

/// Forces `F(X^i, (K * rho^N)(X^i))` for a given mollified density.
/// Returns `(forces, u)`.
pub fn interaction_force(
    ens: &ParticleEnsemble,
    rho_n: &mut FieldState,
    kernel: &KernelSpec,
    drift: &DriftSpec,
    plan: &SpectralPlan,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let coeffs = rho_n.ensure_fourier(plan).to_vec();
    let velocity = if kernel.is_dirac() {
        vec![rho_n.values().to_vec()]
    } else {
        crate::kernel::apply_tables(&kernel.table(plan.grid())?, &coeffs, plan)
    };
    let u = interpolate_at_particles(plan.grid(), &velocity, ens);
    let forces = apply_drift(drift, ens, &u)?;
    Ok((forces, u))
}

pub fn apply_drift(drift: &DriftSpec, ens: &ParticleEnsemble, u: &[f64]) -> Result<Vec<f64>> {
    let d = ens.dim();
    let nc = u.len() / ens.len().max(1);
    if nc != d {
        return Err(LabError::InvalidInput(format!(
            "interaction has {nc} components but particles move in d = {d}"
        )));
    }
    let mut forces = vec![0.0; u.len()];
    match drift {
        DriftSpec::CustomLipschitz { .. } => {
            for ((f, ui), x) in forces.chunks_mut(d).zip(u.chunks(d)).zip(ens.positions().chunks(d)) {
                drift.eval_into(x, ui, f)?;
            }
        }
        _ => {
            forces
                .par_chunks_mut(d)
                .zip(u.par_chunks(d).zip(ens.positions().par_chunks(d)))
                .try_for_each(|(f, (ui, x))| drift.eval_into(x, ui, f))?;
        }
    }
    Ok(forces)
}

/// Reference `(1/N) sum_k G^N(X^i - X^k)` with `G^N` interpolated from the grid.
pub fn interaction_pairwise(ens: &ParticleEnsemble, gn: &[FieldState]) -> Vec<f64> {
    let n = ens.len();
    let d = ens.dim();
    let grid = gn[0].grid();
    let fields: Vec<&[f64]> = gn.iter().map(|f| f.values()).collect();
    let nc = gn.len();
    let mut u = vec![0.0; n * nc];
    let mut tmp = vec![0.0; nc];
    let mut disp = [0.0; MAX_DIM];
    for i in 0..n {
        let xi = ens.position(i);
        for k in 0..n {
            let xk = ens.position(k);
            for a in 0..d {
                disp[a] = wrap_coord(xi[a] - xk[a]);
            }
            cic_interpolate(grid, &fields, &disp[..d], &mut tmp);
            for c in 0..nc {
                u[i * nc + c] += tmp[c] / n as f64;
            }
        }
    }
    u
}

/// Tracks whether `max_i |u_i| <= A` has held at every step so far.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffMonitor {
    a: f64,
    ok: bool,
    worst: f64,
}

impl CutoffMonitor {
    pub fn new(a: f64) -> Self {
        Self { a, ok: true, worst: 0.0 }
    }

    /// Observe uncut interactions (`components` entries per particle).
    pub fn observe(&mut self, u: &[f64], components: usize) -> bool {
        let sup = u
            .chunks(components.max(1))
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt();
        self.worst = self.worst.max(sup);
        if sup > self.a {
            self.ok = false;
        }
        self.ok
    }

    pub fn ok(&self) -> bool {
        self.ok
    }

    pub fn level(&self) -> f64 {
        self.a
    }

    pub fn worst(&self) -> f64 {
        self.worst
    }
}

/// `cutoff_monitor` in functional form.
pub fn cutoff_monitor(monitor: &mut CutoffMonitor, u: &[f64], components: usize) -> bool {
    monitor.observe(u, components)
}
