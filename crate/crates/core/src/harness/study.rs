//! Convergence studies over replicas and ensemble sizes.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::replica::{run_replica, EnsembleRecord, ReplicaOptions, ReplicaResult};
use crate::metrics::{fit_rate_bootstrap, lm_moment, median, predicted_rate, MomentEstimate, RateFit, RateReport, RateRow};
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, Default)]
pub struct StudyOptions {
    /// Keep fields and positions of the first replica at snapshot times.
    pub record_snapshots: bool,
}

#[derive(Clone, Debug)]
pub struct StudyOutcome {
    pub report: RateReport,
    /// Ordered by `N`, then by replica.
    pub records: Vec<EnsembleRecord>,
    pub replicas: Vec<ReplicaResult>,
    pub warnings: Vec<String>,
}

impl StudyOutcome {
    pub fn for_n(&self, n: usize) -> impl Iterator<Item = &EnsembleRecord> {
        self.records.iter().filter(move |r| r.n == n)
    }

    pub fn ns(&self) -> Vec<usize> {
        self.report.rows.iter().map(|r| r.n).collect()
    }

    pub fn median_sup_lq(&self) -> Vec<f64> {
        self.ns()
            .into_iter()
            .map(|n| median(&self.for_n(n).map(|r| r.sup_lq).collect::<Vec<_>>()))
            .collect()
    }

    /// `#{cutoff_ok = false}` and `#{sup_lq > eta}` over all records.
    pub fn inclusion_counts(&self, eta: f64) -> (usize, usize) {
        let fired = self.records.iter().filter(|r| !r.cutoff_ok).count();
        let above = self.records.iter().filter(|r| r.sup_lq > eta).count();
        (fired, above)
    }

    pub fn replicas_csv(&self) -> String {
        let mut s = String::from("N,seed,sup_lq,cutoff_ok,kr0\n");
        for r in &self.records {
            let kr0 = r.kr0.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!("{},{},{:e},{},{}\n", r.n, r.seed, r.sup_lq, r.cutoff_ok, kr0));
        }
        s
    }
}

/// Replica seeds derived from the master seed; shared by every `N`.
pub fn replica_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.replicas as u64).map(|r| derive_seed(cfg.seed, r)).collect()
}

fn check_study_shape(cfg: &ExperimentConfig) -> Result<()> {
    let mut errs = cfg.validate();
    let mut ns = cfg.n.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() != cfg.n.len() || ns != cfg.n {
        errs.push(format!("N list {:?} must be strictly increasing", cfg.n));
    }
    if ns.len() < 4 {
        errs.push(format!("a rate study needs at least 4 values of N, got {}", ns.len()));
    }
    if let (Some(lo), Some(hi)) = (ns.first(), ns.last()) {
        if *hi < 4 * *lo {
            errs.push(format!("N values {lo}..{hi} span less than 2 octaves"));
        }
    }
    if cfg.replicas < 10 {
        errs.push(format!("a rate study needs at least 10 replicas, got {}", cfg.replicas));
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(LabError::Config(errs))
    }
}

fn run_all(cfg: &ExperimentConfig, opts: &StudyOptions) -> Result<Vec<ReplicaResult>> {
    let seeds = replica_seeds(cfg);
    let results: Vec<Result<ReplicaResult>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let ro = ReplicaOptions {
                refine: false,
                record_snapshots: opts.record_snapshots && i == 0,
            };
            run_replica(cfg, seed, &ro)
        })
        .collect();
    // N = 0 marks the density solver: its abort is a numerical failure of the study
    if let Some(pos) = results
        .iter()
        .position(|r| matches!(r, Err(LabError::Replica { n: 0, source, .. }) if source.exit_code() == 3))
    {
        if let Some(Err(LabError::Replica { source, .. })) = results.into_iter().nth(pos) {
            return Err(*source);
        }
        unreachable!("position found above");
    }
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (res, &seed) in results.into_iter().zip(&seeds) {
        match res {
            Ok(r) => ok.push(r),
            Err(LabError::Replica { n, seed, source }) => failed.push((n, seed, source.to_string())),
            Err(e) => failed.push((0, seed, e.to_string())),
        }
    }
    if !failed.is_empty() {
        for (n, seed, msg) in &failed {
            log::error!("replica failed (N = {n}, seed = {seed}): {msg}");
        }
        return Err(LabError::Study(failed));
    }
    Ok(ok)
}

/// Per-`N` moments of `sup_t ||rho^N_t - rho_t||_q`, the log-log fit and the
/// predicted exponent.
pub fn run_convergence_study(cfg: &ExperimentConfig, opts: &StudyOptions) -> Result<StudyOutcome> {
    check_study_shape(cfg)?;
    let mut warnings = Vec::new();
    if (cfg.replicas as f64) < 5.0 * cfg.m {
        let w = format!("R = {} < 5 m = {}: moment estimates may be unstable", cfg.replicas, 5.0 * cfg.m);
        log::warn!("{w}");
        warnings.push(w);
    }
    let kappa = predicted_rate(cfg.beta, cfg.gamma_value(), cfg.d, cfg.q, cfg.regime())?;
    let replicas = run_all(cfg, opts)?;

    let mut records = Vec::with_capacity(cfg.n.len() * replicas.len());
    let mut rows = Vec::with_capacity(cfg.n.len());
    let mut per_n = Vec::with_capacity(cfg.n.len());
    for (k, &n) in cfg.n.iter().enumerate() {
        let recs: Vec<EnsembleRecord> = replicas.iter().map(|r| r.ensembles[k].clone()).collect();
        let sup: Vec<f64> = recs.iter().map(|r| r.sup_lq).collect();
        let init: Vec<f64> = recs.iter().map(|r| r.init_term).collect();
        let estimate = lm_moment(&sup, cfg.m, derive_seed(cfg.seed, 1 << 32 | k as u64))?;
        let init_term = lm_moment(&init, cfg.m, derive_seed(cfg.seed, 1 << 33 | k as u64))?.estimate;
        rows.push(RateRow { n, m: cfg.m, estimate, init_term });
        per_n.push(sup);
        records.extend(recs);
    }
    let ns: Vec<f64> = cfg.n.iter().map(|&n| n as f64).collect();
    let fit = fit_rate_bootstrap(&ns, &per_n, cfg.m, cfg.seed)?;
    let report = RateReport {
        rows,
        fit,
        kappa_predicted: kappa,
        beta: cfg.beta,
        gamma: cfg.gamma_value(),
        d: cfg.d,
        q: cfg.q,
        m: cfg.m,
    };
    log::info!(
        "study: slope {:.4} (90% CI {:.4} .. {:.4}), predicted kappa {:.4}",
        report.fit.slope,
        report.fit.slope_ci.0,
        report.fit.slope_ci.1,
        kappa
    );
    Ok(StudyOutcome {
        report,
        records,
        replicas,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorollaryRow {
    pub n: usize,
    pub estimate: MomentEstimate,
    /// Moment of `||S^N_0 - rho_0||_0`.
    pub kr0_term: f64,
    /// `N^{-(kappa - epsilon)}` with `epsilon = kappa / 4`.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub rows: Vec<CorollaryRow>,
    pub fit: RateFit,
    pub kappa: f64,
    pub epsilon: f64,
    pub m: f64,
}

impl CorollaryReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,m,estimate,ci_lo,ci_hi,kr0_term,target\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{:e}\n",
                r.n, self.m, r.estimate.estimate, r.estimate.ci_lo, r.estimate.ci_hi, r.kr0_term, r.target
            ));
        }
        s
    }
}

/// Moments of `sup_t ||S^N_t - rho_t||_0` from the records of a 1-d study.
pub fn corollary_report(cfg: &ExperimentConfig, outcome: &StudyOutcome) -> Result<CorollaryReport> {
    if cfg.d != 1 {
        return Err(LabError::UnsupportedDimension(cfg.d));
    }
    let kappa = outcome.report.kappa_predicted;
    let epsilon = kappa / 4.0;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for (k, n) in outcome.ns().into_iter().enumerate() {
        let kr: Vec<f64> = outcome.for_n(n).map(|r| r.kr_sup.unwrap_or(f64::NAN)).collect();
        let kr0: Vec<f64> = outcome.for_n(n).map(|r| r.kr0.unwrap_or(f64::NAN)).collect();
        if kr.iter().chain(&kr0).any(|v| !v.is_finite()) {
            return Err(LabError::InvalidInput("study records lack KR values".into()));
        }
        let estimate = lm_moment(&kr, cfg.m, derive_seed(cfg.seed, 1 << 34 | k as u64))?;
        let kr0_term = lm_moment(&kr0, cfg.m, derive_seed(cfg.seed, 1 << 35 | k as u64))?.estimate;
        rows.push(CorollaryRow {
            n,
            estimate,
            kr0_term,
            target: (n as f64).powf(-(kappa - epsilon)),
        });
        per_n.push(kr);
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let fit = fit_rate_bootstrap(&ns, &per_n, cfg.m, cfg.seed ^ 0xC0)?;
    Ok(CorollaryReport {
        rows,
        fit,
        kappa,
        epsilon,
        m: cfg.m,
    })
}

/// Study plus the Kantorovich-Rubinstein report (d = 1).
pub fn run_corollary_empirical(cfg: &ExperimentConfig, opts: &StudyOptions) -> Result<(StudyOutcome, CorollaryReport)> {
    if cfg.d != 1 {
        return Err(LabError::UnsupportedDimension(cfg.d));
    }
    let outcome = run_convergence_study(cfg, opts)?;
    let report = corollary_report(cfg, &outcome)?;
    Ok((outcome, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HalvingRow {
    pub n: usize,
    pub coarse: f64,
    pub fine: f64,
}

impl HalvingRow {
    /// `|fine - coarse| / coarse`.
    pub fn relative_change(&self) -> f64 {
        (self.fine - self.coarse).abs() / self.coarse
    }
}

/// Rerun one replica at `dt/2` on the refined common path and the bridge-refined
/// idiosyncratic noise; the change should stay below 10% of the discrepancy.
pub fn halving_check(cfg: &ExperimentConfig, replica: usize) -> Result<Vec<HalvingRow>> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(LabError::Config(errs));
    }
    let seed = derive_seed(cfg.seed, replica as u64);
    let coarse = run_replica(cfg, seed, &ReplicaOptions::default())?;
    let fine = run_replica(
        cfg,
        seed,
        &ReplicaOptions {
            refine: true,
            record_snapshots: false,
        },
    )?;
    Ok(coarse
        .ensembles
        .iter()
        .zip(&fine.ensembles)
        .map(|(c, f)| HalvingRow {
            n: c.n,
            coarse: c.sup_lq,
            fine: f.sup_lq,
        })
        .collect())
}
