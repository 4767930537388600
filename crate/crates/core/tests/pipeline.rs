//! Library-level checks of the coupled particle / density pipeline.

mod common;

use std::f64::consts::PI;

use moderate_core::drift::DriftSpec;
use moderate_core::harness::{halving_check, run_replica, ExperimentConfig, ReplicaOptions};
use moderate_core::initial::InitialDensity;
use moderate_core::kernel::KernelSpec;
use moderate_core::metrics::{kr_distance_1d, Measure1d};
use moderate_core::particles::{NoiseModel, ParticleEnsemble};
use moderate_core::rng::BrownianPaths;
use moderate_core::spde::SpdeSolver;
use moderate_core::torus::{wrap_coord, FieldState, PeriodicGrid};

fn quick_burgers() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset("burgers1d").unwrap();
    cfg.t_final = 0.1;
    cfg.dt = 0.1 / 256.0;
    cfg.grid_m = 256;
    cfg.n = vec![256, 1024, 4096];
    cfg.replicas = 10;
    cfg.snapshots = 4;
    cfg
}

#[test]
fn common_noise_translates_the_burgers_solution() {
    // transport and diffusion commute with translations, so the noisy solution
    // is the deterministic one shifted by sigma B_t
    let grid = PeriodicGrid::new(1, 256).unwrap();
    let (t_final, steps, sigma) = (0.25, 2048, 0.8);
    let dt = t_final / steps as f64;
    let solver =
        SpdeSolver::new(grid, &KernelSpec::dirac(), DriftSpec::Identity, NoiseModel::scalar(1, sigma), dt, 2.0).unwrap();
    let paths = BrownianPaths::generate(3, 1, dt, steps);
    let rho0 = FieldState::from_fn(grid, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos());
    let (state, _) = solver.solve(&rho0, &paths, |_| Ok(())).unwrap();
    let shift = sigma * paths.value_at(steps)[0];
    let worst = state
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| (v - common::burgers_density(wrap_coord(grid.coordinate(j) - shift), t_final)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

#[test]
fn replicas_are_reproducible_and_converge_in_n() {
    let cfg = quick_burgers();
    let a = run_replica(&cfg, 12, &ReplicaOptions::default()).unwrap();
    let b = run_replica(&cfg, 12, &ReplicaOptions::default()).unwrap();
    assert_eq!(a.path_fingerprint, b.path_fingerprint);
    assert_eq!(a.ensembles, b.ensembles);
    let sup: Vec<f64> = a.ensembles.iter().map(|e| e.sup_lq).collect();
    assert!(sup[2] < sup[0], "{sup:?}");
    for e in &a.ensembles {
        assert!(e.cutoff_ok);
        assert!(e.mass_error < 1e-12);
        let (kr0, kr_sup) = (e.kr0.unwrap(), e.kr_sup.unwrap());
        assert!(kr0 <= kr_sup);
        // empirical measure of N i.i.d. draws: KR ~ N^{-1/2}
        assert!(kr0 < 3.0 / (e.n as f64).sqrt(), "N = {}: {kr0}", e.n);
    }
}

#[test]
fn halving_the_step_barely_moves_the_discrepancy() {
    let rows = halving_check(&quick_burgers(), 0).unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r.relative_change() < 0.1, "N = {}: {} vs {}", r.n, r.coarse, r.fine);
    }
}

#[test]
fn particle_histogram_tracks_the_cosine_density() {
    let rho = InitialDensity::UniformPlusCosine { amplitude: 0.5 };
    let sampler = rho.sampler(1).unwrap();
    let ens = ParticleEnsemble::sample(20_000, 1, 8, &sampler);
    let grid = PeriodicGrid::new(1, 512).unwrap();
    let field = rho.field(grid);
    let kr = kr_distance_1d(Measure1d::Atoms(ens.positions()), Measure1d::Density(&field)).unwrap();
    assert!(kr < 0.01, "{kr}");
}
