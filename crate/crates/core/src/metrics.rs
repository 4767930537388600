//! Distances and estimators: sup-in-time `L^q` discrepancy, moment norms over
//! replicas, the Kantorovich-Rubinstein distance on the circle, and log-log
//! rate fits.

use rand::Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::rng::bootstrap_stream;
use crate::torus::{lq_norm_values, FieldState, PeriodicGrid};

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
/// Two-sided level of every reported interval.
pub const CI_LEVEL: f64 = 0.90;

/// `||a - b||_q` for raw grid values.
pub fn lq_distance(a: &[f64], b: &[f64], grid: PeriodicGrid, q: f64) -> Result<f64> {
    if a.len() != grid.len() || b.len() != grid.len() {
        return Err(LabError::InvalidInput(format!(
            "fields of length {} and {} on grid {grid}",
            a.len(),
            b.len()
        )));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    lq_norm_values(&diff, grid, q)
}

/// `max_t ||rho_t - rho^N_t||_q` over shared snapshot times.
pub fn sup_lq_discrepancy(rho: &[FieldState], rho_n: &[FieldState], q: f64) -> Result<f64> {
    if rho.len() != rho_n.len() {
        return Err(LabError::InvalidInput(format!(
            "trajectories have {} and {} snapshots",
            rho.len(),
            rho_n.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for (a, b) in rho.iter().zip(rho_n) {
        if a.grid() != b.grid() {
            return Err(LabError::InvalidInput(format!("grids {} and {} differ", a.grid(), b.grid())));
        }
        worst = worst.max(lq_distance(a.values(), b.values(), a.grid(), q)?);
    }
    Ok(worst)
}

/// Point estimate with a bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn power_mean(values: impl Iterator<Item = f64>, m: f64, count: usize) -> f64 {
    (values.map(|v| v.abs().powf(m)).sum::<f64>() / count as f64).powf(1.0 / m)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interval(mut samples: Vec<f64>) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let tail = (1.0 - CI_LEVEL) / 2.0;
    (percentile(&samples, tail), percentile(&samples, 1.0 - tail))
}

/// `(mean v^m)^(1/m)` with a percentile bootstrap interval.
pub fn lm_moment(values: &[f64], m: f64, seed: u64) -> Result<MomentEstimate> {
    if !(m >= 1.0) {
        return Err(LabError::InvalidParameter {
            name: "m",
            value: m,
            constraint: "moment order must be >= 1".into(),
        });
    }
    if values.len() < 2 {
        return Err(LabError::InvalidInput(format!("{} replicas, need at least 2", values.len())));
    }
    let n = values.len();
    let estimate = power_mean(values.iter().copied(), m, n);
    let mut rng = bootstrap_stream(seed);
    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| power_mean((0..n).map(|_| values[rng.random_range(0..n)]), m, n))
        .collect();
    let (ci_lo, ci_hi) = interval(boot);
    Ok(MomentEstimate { estimate, ci_lo, ci_hi })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

/// A probability measure on the circle `[-1/2, 1/2)`.
#[derive(Clone, Copy, Debug)]
pub enum Measure1d<'a> {
    /// Point masses at wrapped positions, equal weights.
    Atoms(&'a [f64]),
    /// Point masses with explicit weights.
    WeightedAtoms(&'a [f64], &'a [f64]),
    /// Grid density, read as constant on the cell centered at each node.
    Density(&'a FieldState),
}

#[derive(Default)]
struct Pieces {
    atoms: Vec<(f64, f64)>,
    /// `(start, end, density)`, disjoint and sorted.
    segments: Vec<(f64, f64, f64)>,
}

impl Measure1d<'_> {
    fn pieces(&self) -> Result<Pieces> {
        let mut p = Pieces::default();
        match *self {
            Measure1d::Atoms(x) => {
                let w = 1.0 / x.len() as f64;
                p.atoms = x.iter().map(|&a| (a, w)).collect();
            }
            Measure1d::WeightedAtoms(x, w) => {
                if x.len() != w.len() || w.iter().any(|v| *v < 0.0) {
                    return Err(LabError::InvalidInput("atom weights must be nonnegative, one per atom".into()));
                }
                p.atoms = x.iter().copied().zip(w.iter().copied()).collect();
            }
            Measure1d::Density(f) => {
                let g = f.grid();
                if g.dim() != 1 {
                    return Err(LabError::UnsupportedDimension(g.dim()));
                }
                let h = g.spacing();
                let v = f.values();
                if v.iter().any(|x| *x < 0.0) {
                    return Err(LabError::InvalidInput("density has negative values".into()));
                }
                p.segments.push((-0.5, -0.5 + h / 2.0, v[0]));
                for (j, &vj) in v.iter().enumerate().skip(1) {
                    let x = g.coordinate(j);
                    p.segments.push((x - h / 2.0, x + h / 2.0, vj));
                }
                p.segments.push((0.5 - h / 2.0, 0.5, v[0]));
            }
        }
        for a in p.atoms.iter_mut() {
            if !a.0.is_finite() {
                return Err(LabError::InvalidInput("non-finite atom position".into()));
            }
            a.0 = crate::torus::wrap_coord(a.0);
        }
        p.atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mass: f64 =
            p.atoms.iter().map(|a| a.1).sum::<f64>() + p.segments.iter().map(|s| (s.1 - s.0) * s.2).sum::<f64>();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(LabError::InvalidInput(format!("measure has mass {mass}, expected 1")));
        }
        Ok(p)
    }
}

/// `D = F_mu - F_nu` as linear pieces `(length, value at start, value at end)`.
fn cdf_difference(mu: &Pieces, nu: &Pieces) -> Vec<(f64, f64, f64)> {
    let mut breaks: Vec<f64> = vec![-0.5, 0.5];
    for p in [mu, nu] {
        breaks.extend(p.atoms.iter().map(|a| a.0));
        breaks.extend(p.segments.iter().flat_map(|s| [s.0, s.1]));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    // signed atoms and segments, swept left to right
    let mut atoms: Vec<(f64, f64)> = mu.atoms.to_vec();
    atoms.extend(nu.atoms.iter().map(|&(x, w)| (x, -w)));
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let density_at = |segs: &[(f64, f64, f64)], cursor: &mut usize, mid: f64| -> f64 {
        while *cursor < segs.len() && segs[*cursor].1 <= mid {
            *cursor += 1;
        }
        match segs.get(*cursor) {
            Some(s) if s.0 <= mid => s.2,
            _ => 0.0,
        }
    };
    let (mut cm, mut cn, mut ca) = (0, 0, 0);
    let mut value = 0.0;
    let mut out = Vec::with_capacity(breaks.len());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        while ca < atoms.len() && atoms[ca].0 <= a {
            value += atoms[ca].1;
            ca += 1;
        }
        let mid = 0.5 * (a + b);
        let slope = density_at(&mu.segments, &mut cm, mid) - density_at(&nu.segments, &mut cn, mid);
        let end = value + slope * (b - a);
        out.push((b - a, value, end));
        value = end;
    }
    out
}

/// `int |v - alpha|` over a linear piece.
fn abs_integral(len: f64, v0: f64, v1: f64, alpha: f64) -> f64 {
    let (a, b) = (v0 - alpha, v1 - alpha);
    if a * b >= 0.0 {
        0.5 * len * (a.abs() + b.abs())
    } else {
        0.5 * len * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Length of `{v < alpha}` minus length of `{v > alpha}` on a linear piece.
fn below_minus_above(len: f64, v0: f64, v1: f64, alpha: f64) -> f64 {
    if v0 == v1 {
        return if v0 < alpha {
            len
        } else if v0 > alpha {
            -len
        } else {
            0.0
        };
    }
    let frac = ((alpha - v0) / (v1 - v0)).clamp(0.0, 1.0);
    let below = if v1 > v0 { frac } else { 1.0 - frac };
    len * (2.0 * below - 1.0)
}

/// Kantorovich-Rubinstein distance on the circle: the sup of `int phi d(mu - nu)`
/// over `phi` with `|phi| <= 1` and Lipschitz constant `<= 1`.
///
/// On the unit circle a 1-Lipschitz function oscillates by at most 1/2, so after
/// removing its mean the sup-norm constraint cannot bind and the value equals
/// the circle `W_1`, `min_alpha int |F_mu - F_nu - alpha|`.
pub fn kr_distance_1d(mu: Measure1d<'_>, nu: Measure1d<'_>) -> Result<f64> {
    let pm = mu.pieces()?;
    let pn = nu.pieces()?;
    let pieces = cdf_difference(&pm, &pn);
    let (mut lo, mut hi) = pieces
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1).min(p.2), h.max(p.1).max(p.2)));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g: f64 = pieces.iter().map(|p| below_minus_above(p.0, p.1, p.2, mid)).sum();
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok(pieces.iter().map(|p| abs_integral(p.0, p.1, p.2, alpha)).sum())
}

/// Which convergence theorem applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Hölder kernel, `q > d`.
    General,
    /// `K = delta_0`, `d = 1`, `q = 2`.
    Burgers,
}

impl Regime {
    pub fn theorem(self) -> &'static str {
        match self {
            Regime::General => "general kernel theorem",
            Regime::Burgers => "Burgers theorem, d = 1",
        }
    }
}

/// Upper end of the admissible `beta` window.
pub fn beta_window(regime: Regime, d: usize, q: f64) -> f64 {
    match regime {
        Regime::General => 1.0 / (2.0 * (1.0 + 1.0 / d as f64 - 1.0 / q)),
        Regime::Burgers => 1.0 / 3.0,
    }
}

/// Predicted exponent `kappa` of the `N^{-kappa}` bound.
pub fn predicted_rate(beta: f64, gamma: f64, d: usize, q: f64, regime: Regime) -> Result<f64> {
    let bound = beta_window(regime, d, q);
    if !(beta > 0.0 && beta < bound) {
        return Err(LabError::Admissibility {
            beta,
            bound,
            theorem: regime.theorem(),
        });
    }
    Ok(match regime {
        Regime::General => (beta * gamma / d as f64).min(0.5 - beta * (1.0 + 1.0 / d as f64 - 1.0 / q)),
        Regime::Burgers => (beta / 2.0).min(0.5 - 1.5 * beta),
    })
}

/// Least-squares line through `(log N, log e)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn check_points(ns: &[f64], es: &[f64]) -> Result<()> {
    if ns.len() != es.len() || ns.len() < 4 {
        return Err(LabError::InvalidInput(format!(
            "rate fit needs at least 4 (N, e) pairs, got {} / {}",
            ns.len(),
            es.len()
        )));
    }
    if let Some(e) = es.iter().find(|e| !(**e > 0.0)) {
        return Err(LabError::InvalidInput(format!("nonpositive error value {e}")));
    }
    if ns.iter().any(|n| !(*n > 0.0)) {
        return Err(LabError::InvalidInput("N values must be positive".into()));
    }
    Ok(())
}

/// Plain fit without an interval (the interval collapses to the slope).
pub fn fit_rate(ns: &[f64], es: &[f64]) -> Result<RateFit> {
    check_points(ns, es)?;
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let (slope, intercept) = least_squares(&x, &y);
    Ok(RateFit {
        slope,
        intercept,
        slope_ci: (slope, slope),
    })
}

/// Fit of the per-`N` moment estimates, with a slope interval from resampling
/// replica indices (shared across `N`, since replica `r` uses one seed for all `N`).
pub fn fit_rate_bootstrap(ns: &[f64], per_n: &[Vec<f64>], m: f64, seed: u64) -> Result<RateFit> {
    if per_n.len() != ns.len() {
        return Err(LabError::InvalidInput("one replica vector per N is required".into()));
    }
    let r = per_n.iter().map(|v| v.len()).min().unwrap_or(0);
    if r < 2 || per_n.iter().any(|v| v.len() != r) {
        return Err(LabError::InvalidInput("every N needs the same number (>= 2) of replicas".into()));
    }
    let es: Vec<f64> = per_n.iter().map(|v| power_mean(v.iter().copied(), m, r)).collect();
    let mut fit = fit_rate(ns, &es)?;
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let mut rng = bootstrap_stream(seed ^ 0x5EED);
    let mut idx = vec![0usize; r];
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        idx.iter_mut().for_each(|i| *i = rng.random_range(0..r));
        let y: Vec<f64> = per_n
            .iter()
            .map(|v| power_mean(idx.iter().map(|&i| v[i]), m, r).max(f64::MIN_POSITIVE).ln())
            .collect();
        slopes.push(least_squares(&x, &y).0);
    }
    fit.slope_ci = interval(slopes);
    Ok(fit)
}

/// One line of `rates.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub m: f64,
    pub estimate: MomentEstimate,
    /// Moment of `||rho_0 - rho^N_0||_q`, the initial-condition term.
    pub init_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fit: RateFit,
    pub kappa_predicted: f64,
    pub beta: f64,
    pub gamma: f64,
    pub d: usize,
    pub q: f64,
    pub m: f64,
}

impl RateReport {
    /// Reporting margin `epsilon = kappa / 4`.
    pub fn kappa_target(&self) -> f64 {
        0.75 * self.kappa_predicted
    }

    pub fn rates_csv(&self) -> String {
        let mut s = String::from("N,m,estimate,ci_lo,ci_hi,init_term\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e}\n",
                r.n, r.m, r.estimate.estimate, r.estimate.ci_lo, r.estimate.ci_hi, r.init_term
            ));
        }
        s
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "slope": self.fit.slope,
            "slope_ci": [self.fit.slope_ci.0, self.fit.slope_ci.1],
            "kappa_predicted": self.kappa_predicted,
            "beta": self.beta,
            "gamma": self.gamma,
            "d": self.d,
            "q": self.q,
            "intercept": self.fit.intercept,
            "m": self.m,
            "kappa_target": self.kappa_target(),
        })
    }
}
