//! One replica: the SPDE and every ensemble size stepped in lockstep on the
//! same common-noise path.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::harness::config::{CutoffLevel, DriftConfig, ExperimentConfig};
use crate::kernel::{apply_tables, divergence_l2, KernelKind};
use crate::metrics::{kr_distance_1d, lq_distance, Measure1d};
use crate::particles::{apply_drift, CutoffMonitor, InteractionField, ParticleEnsemble};
use crate::rng::BrownianPaths;
use crate::spde::{SpdeDiagnostics, SpdeSolver, SpdeState};
use crate::torus::{FieldState, PeriodicGrid};

/// Per-`(N, replica)` outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleRecord {
    pub n: usize,
    pub seed: u64,
    /// `max_t ||rho^N_t - rho_t||_q`.
    pub sup_lq: f64,
    /// `||rho^N_0 - rho_0||_q`.
    pub init_term: f64,
    pub cutoff_ok: bool,
    pub cutoff_level: f64,
    pub max_interaction: f64,
    /// `||S^N_0 - rho_0||_0` (d = 1 only).
    pub kr0: Option<f64>,
    /// `max` over snapshots of `||S^N_t - rho_t||_0` (d = 1 only).
    pub kr_sup: Option<f64>,
    pub mass_error: f64,
    pub undershoot: f64,
}

/// Solver-side diagnostics of a replica.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpdeSummary {
    pub sup_norm: f64,
    pub mass_error: f64,
    pub clipped: f64,
    pub max_cfl: f64,
    /// Largest `L^2` norm of `div(K * rho)` at snapshots (Biot-Savart only).
    pub divergence: Option<f64>,
}

/// Fields and positions at snapshot times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Snapshots {
    pub times: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
    /// `(N, rho^N at each snapshot)`.
    pub rho_n: Vec<(usize, Vec<Vec<f64>>)>,
    /// `(N, positions at each snapshot)`.
    pub particles: Vec<(usize, Vec<Vec<f64>>)>,
}

#[derive(Clone, Debug)]
pub struct ReplicaResult {
    pub seed: u64,
    pub path_fingerprint: u64,
    pub ensembles: Vec<EnsembleRecord>,
    pub spde: SpdeSummary,
    pub snapshots: Option<Snapshots>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReplicaOptions {
    /// Run at `dt/2` with bridge-refined idiosyncratic noise.
    pub refine: bool,
    pub record_snapshots: bool,
}

/// The common path at `dt` (or `dt/2` when refined); always drawn at `dt/2`
/// and coarsened so every consumer sees the same `B`.
pub fn common_path(cfg: &ExperimentConfig, seed: u64, refine: bool) -> Result<BrownianPaths> {
    let fine = BrownianPaths::generate(seed, cfg.d, cfg.dt / 2.0, 2 * cfg.steps());
    if refine {
        Ok(fine)
    } else {
        fine.coarsen()
    }
}

fn snapshot_steps(total: usize, count: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..=count).map(|k| (k * total + count / 2) / count).collect();
    s.dedup();
    s
}

fn mass(values: &[f64], grid: PeriodicGrid) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}

fn density_measure(values: &[f64], grid: PeriodicGrid) -> FieldState {
    let mut v: Vec<f64> = values.iter().map(|x| x.max(0.0)).collect();
    let m = mass(&v, grid);
    v.iter_mut().for_each(|x| *x /= m);
    FieldState::new(grid, v).expect("grid-sized")
}

/// Cutoff level `C_K (eta + max_t ||rho_t||_q)` from a first SPDE pass.
pub fn auto_cutoff_level(cfg: &ExperimentConfig, paths: &BrownianPaths, dt: f64) -> Result<f64> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel_spec()?;
    let c_k = kernel.grid_holder_constant(grid)?;
    let solver = SpdeSolver::new(grid, &kernel, crate::drift::DriftSpec::Identity, cfg.noise()?, dt, cfg.q)?;
    let (_, diag) = solver.solve(&cfg.rho0.field(grid), paths, |_| Ok(()))?;
    Ok(c_k * (cfg.eta + diag.sup_norm()))
}

struct Lane {
    ens: ParticleEnsemble,
    field: InteractionField,
    monitor: CutoffMonitor,
    sup_lq: f64,
    init_term: f64,
    kr0: Option<f64>,
    kr_sup: Option<f64>,
    mass_error: f64,
    undershoot: f64,
    rho_snaps: Vec<Vec<f64>>,
    pos_snaps: Vec<Vec<f64>>,
}

fn with_context(n: usize, seed: u64) -> impl Fn(LabError) -> LabError {
    move |e| match e {
        LabError::Replica { .. } => e,
        other => LabError::Replica {
            n,
            seed,
            source: Box::new(other),
        },
    }
}

/// Run the coupled experiment for every `N` of `cfg` on one replica seed.
pub fn run_replica(cfg: &ExperimentConfig, seed: u64, opts: &ReplicaOptions) -> Result<ReplicaResult> {
    run_replica_inner(cfg, seed, opts).map_err(with_context(0, seed))
}

fn run_replica_inner(cfg: &ExperimentConfig, seed: u64, opts: &ReplicaOptions) -> Result<ReplicaResult> {
    let grid = cfg.grid()?;
    let kernel = cfg.kernel_spec()?;
    let moll = cfg.mollifier()?;
    let noise = cfg.noise()?;
    let paths = common_path(cfg, seed, opts.refine)?;
    let dt = paths.dt();
    let steps = paths.steps();
    let fingerprint = paths.fingerprint();
    log::info!("replica seed {seed}: common path fingerprint {fingerprint:016x}");

    let level = match cfg.drift {
        DriftConfig::Cutoff { a: CutoffLevel::Fixed(a) } => a,
        _ => auto_cutoff_level(cfg, &paths, dt)?,
    };
    let drift = cfg.drift_spec(level)?;
    let solver = SpdeSolver::new(grid, &kernel, drift.clone(), noise.clone(), dt, cfg.q)?;
    let sampler = cfg.rho0.sampler(cfg.d)?;

    let mut lanes = Vec::with_capacity(cfg.n.len());
    for &n in &cfg.n {
        let mut ens = ParticleEnsemble::sample(n, cfg.d, seed, &sampler);
        if opts.refine {
            ens.enable_refinement(seed);
        }
        let field = InteractionField::new(&kernel, &moll, n, solver.plan()).map_err(with_context(n, seed))?;
        lanes.push(Lane {
            ens,
            field,
            monitor: CutoffMonitor::new(level),
            sup_lq: 0.0,
            init_term: 0.0,
            kr0: None,
            kr_sup: None,
            mass_error: 0.0,
            undershoot: 0.0,
            rho_snaps: Vec::new(),
            pos_snaps: Vec::new(),
        });
    }

    let snaps = snapshot_steps(steps, cfg.snapshots);
    let biot_savart = matches!(kernel.kind(), KernelKind::BiotSavart2d);
    let tables = if biot_savart { Some(kernel.table(grid)?) } else { None };
    let mut state: SpdeState = solver.initial_state(&cfg.rho0.field(grid));
    let mut diag = SpdeDiagnostics::default();
    let mut spde_mass_error: f64 = 0.0;
    let mass0 = 1.0;
    let norm0 = crate::torus::lq_norm_values(&state.values, grid, cfg.q)?;
    let mut sup_norm = norm0;
    let mut divergence: Option<f64> = None;
    let mut snapshots = Snapshots::default();

    for j in 0..=steps {
        let is_snap = snaps.binary_search(&j).is_ok();
        spde_mass_error = spde_mass_error.max((mass(&state.values, grid) - mass0).abs());
        if is_snap {
            if let Some(t) = &tables {
                let u = apply_tables(t, &state.coeffs, solver.plan());
                let r = divergence_l2(&u, solver.plan());
                divergence = Some(divergence.unwrap_or(0.0).max(r));
            }
            if opts.record_snapshots {
                snapshots.times.push(state.t);
                snapshots.rho.push(state.values.clone());
            }
        }
        let rho_measure = if cfg.d == 1 && is_snap {
            Some(density_measure(&state.values, grid))
        } else {
            None
        };
        for lane in lanes.iter_mut() {
            let n = lane.ens.len();
            let ctx = with_context(n, seed);
            let out = lane.field.evaluate(&lane.ens).map_err(&ctx)?;
            let disc = lq_distance(&out.rho_n.values, &state.values, grid, cfg.q).map_err(&ctx)?;
            lane.sup_lq = lane.sup_lq.max(disc);
            lane.mass_error = lane.mass_error.max((mass(&out.rho_n.values, grid) - 1.0).abs());
            lane.undershoot = lane.undershoot.max(out.rho_n.negative_mass(grid));
            lane.monitor.observe(&out.u, lane.field.components());
            if j == 0 {
                lane.init_term = disc;
            }
            if let Some(rho) = &rho_measure {
                let kr = kr_distance_1d(Measure1d::Atoms(lane.ens.positions()), Measure1d::Density(rho)).map_err(&ctx)?;
                if j == 0 {
                    lane.kr0 = Some(kr);
                }
                lane.kr_sup = Some(lane.kr_sup.unwrap_or(0.0).max(kr));
            }
            if is_snap && opts.record_snapshots {
                lane.rho_snaps.push(out.rho_n.values.clone());
                lane.pos_snaps.push(lane.ens.positions().to_vec());
            }
            if j < steps {
                let forces = apply_drift(&drift, &lane.ens, &out.u).map_err(&ctx)?;
                let dw = lane.ens.draw_increments(j, dt);
                lane.ens
                    .em_step(&forces, &noise, state.t, &dw, paths.increment(j), dt, j)
                    .map_err(&ctx)?;
            }
        }
        if j < steps {
            solver.step(&mut state, paths.increment(j), &mut diag)?;
            let norm = crate::torus::lq_norm_values(&state.values, grid, cfg.q)?;
            sup_norm = sup_norm.max(norm);
            let limit = crate::spde::BLOW_UP_FACTOR * norm0;
            if !(norm <= limit) {
                return Err(LabError::BlowUp { t: state.t, norm, limit });
            }
        }
    }

    if opts.record_snapshots {
        for lane in lanes.iter_mut() {
            let n = lane.ens.len();
            snapshots.rho_n.push((n, std::mem::take(&mut lane.rho_snaps)));
            snapshots.particles.push((n, std::mem::take(&mut lane.pos_snaps)));
        }
    }
    let ensembles = lanes
        .iter()
        .map(|l| EnsembleRecord {
            n: l.ens.len(),
            seed,
            sup_lq: l.sup_lq,
            init_term: l.init_term,
            cutoff_ok: l.monitor.ok(),
            cutoff_level: level,
            max_interaction: l.monitor.worst(),
            kr0: l.kr0,
            kr_sup: l.kr_sup,
            mass_error: l.mass_error,
            undershoot: l.undershoot,
        })
        .collect();
    Ok(ReplicaResult {
        seed,
        path_fingerprint: fingerprint,
        ensembles,
        spde: SpdeSummary {
            sup_norm,
            mass_error: spde_mass_error,
            clipped: diag.clipped,
            max_cfl: diag.max_cfl,
            divergence,
        },
        snapshots: opts.record_snapshots.then_some(snapshots),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{KernelConfig, SigmaConfig};

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("burgers1d").unwrap();
        cfg.t_final = 0.05;
        cfg.dt = 0.05 / 64.0;
        cfg.grid_m = 256;
        cfg.n = vec![64, 256];
        cfg.replicas = 2;
        cfg.snapshots = 4;
        cfg
    }

    #[test]
    fn same_seed_gives_identical_records() {
        let cfg = small();
        let a = run_replica(&cfg, 7, &ReplicaOptions::default()).unwrap();
        let b = run_replica(&cfg, 7, &ReplicaOptions::default()).unwrap();
        assert_eq!(a.ensembles, b.ensembles);
        assert_eq!(a.path_fingerprint, b.path_fingerprint);
        let c = run_replica(&cfg, 8, &ReplicaOptions::default()).unwrap();
        assert_ne!(a.ensembles[0].sup_lq, c.ensembles[0].sup_lq);
    }

    #[test]
    fn conservation_and_kr_columns() {
        let cfg = small();
        let r = run_replica(&cfg, 3, &ReplicaOptions { refine: false, record_snapshots: true }).unwrap();
        for e in &r.ensembles {
            assert!(e.mass_error < 1e-12);
            assert!(e.kr0.unwrap() > 0.0 && e.kr_sup.unwrap() >= e.kr0.unwrap());
            assert!(e.cutoff_ok);
            assert!(e.sup_lq >= e.init_term);
        }
        assert!(r.spde.mass_error < 1e-12);
        let s = r.snapshots.unwrap();
        assert_eq!(s.times.len(), 5);
        assert_eq!(s.rho_n[1].1.len(), 5);
        assert_eq!(s.particles[0].1[0].len(), 64);
    }

    #[test]
    fn tiny_cutoff_fires_the_monitor() {
        let mut cfg = small();
        cfg.drift = DriftConfig::Cutoff { a: CutoffLevel::Fixed(0.05) };
        let r = run_replica(&cfg, 5, &ReplicaOptions::default()).unwrap();
        assert!(r.ensembles.iter().all(|e| !e.cutoff_ok));
    }

    #[test]
    fn refined_run_uses_the_same_path() {
        let cfg = small();
        let coarse = common_path(&cfg, 9, false).unwrap();
        let fine = common_path(&cfg, 9, true).unwrap();
        assert_eq!(fine.coarsen().unwrap(), coarse);
        let r = run_replica(&cfg, 9, &ReplicaOptions { refine: true, record_snapshots: false }).unwrap();
        assert_eq!(r.path_fingerprint, fine.fingerprint());
    }

    #[test]
    fn biot_savart_reports_divergence() {
        let mut cfg = ExperimentConfig::preset("navier-stokes-2d").unwrap();
        cfg.t_final = 0.01;
        cfg.dt = 0.01 / 8.0;
        cfg.grid_m = 64;
        cfg.n = vec![128];
        cfg.snapshots = 2;
        cfg.kernel = KernelConfig::BiotSavart;
        cfg.sigma = SigmaConfig::Scalar(0.3);
        let r = run_replica(&cfg, 1, &ReplicaOptions::default()).unwrap();
        assert!(r.spde.divergence.unwrap() < 1e-10);
        assert!(r.ensembles[0].kr0.is_none());
    }
}
