//! Interaction kernels `K` stored as Fourier multipliers in the
//! `exp(2 pi i k.x)` convention.
//!
//! The Biot-Savart series `(i/2pi) sum exp(i k.x) k^perp / |k|^2` written with
//! `exp(i k.x)` turns into the same expression in our convention once `x` is
//! measured in periods: the velocity `u = grad^perp psi` with `-Lap psi = w`
//! has symbol `2 pi i k^perp / (2 pi |k|)^2 = (i / 2pi) k^perp / |k|^2`.
//! Keller-Segel is the spectral periodization `chi grad G` with `G` the
//! zero-mean Green's function of `-Lap`; its symbol is `chi i k / (2 pi |k|^2)`
//! and points from a particle toward the mass it feels (aggregation).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mollifier::MollifierSpec;
use crate::torus::{FieldState, PeriodicGrid, SpectralPlan, MAX_DIM};

/// Constants of the bound `||K * f||_{C^gamma} <= C_K ||f||_q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderMeta {
    pub gamma: f64,
    pub c_k: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CustomMultiplier {
    d: usize,
    modes: HashMap<[i64; MAX_DIM], Vec<Complex64>>,
}

impl CustomMultiplier {
    /// Parse rows `k_1 .. k_d re_1 im_1 .. re_d im_d`; absent modes are zero.
    pub fn parse(d: usize, text: &str) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(LabError::UnsupportedDimension(d));
        }
        let mut modes = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 3 * d {
                return Err(LabError::InvalidInput(format!(
                    "multiplier row {}: expected {} fields, found {}",
                    lineno + 1,
                    3 * d,
                    tokens.len()
                )));
            }
            let bad = |t: &str| {
                LabError::InvalidInput(format!("multiplier row {}: cannot parse `{t}`", lineno + 1))
            };
            let mut k = [0i64; MAX_DIM];
            for a in 0..d {
                k[a] = tokens[a].parse().map_err(|_| bad(tokens[a]))?;
            }
            let mut sym = Vec::with_capacity(d);
            for c in 0..d {
                let re: f64 = tokens[d + 2 * c].parse().map_err(|_| bad(tokens[d + 2 * c]))?;
                let im: f64 = tokens[d + 2 * c + 1]
                    .parse()
                    .map_err(|_| bad(tokens[d + 2 * c + 1]))?;
                sym.push(Complex64::new(re, im));
            }
            if k == [0; MAX_DIM] {
                log::warn!("custom multiplier: zero mode ignored (fixed to 0)");
                continue;
            }
            modes.insert(k, sym);
        }
        Ok(Self { d, modes })
    }

    pub fn load(d: usize, path: &Path) -> Result<Self> {
        Self::parse(d, &std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    BiotSavart2d,
    KellerSegel { chi: f64, d: usize },
    Dirac,
    Custom(CustomMultiplier),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    holder: Option<HolderMeta>,
}

/// `(i/2pi) k^perp / |k|^2` with `k^perp = (-k_2, k_1)`.
pub fn biot_savart_symbol(k: [i64; 2]) -> Result<[Complex64; 2]> {
    if k == [0, 0] {
        return Err(LabError::Domain("Biot-Savart symbol at k = 0".into()));
    }
    let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
    let f = 1.0 / (2.0 * PI * k2);
    Ok([
        Complex64::new(0.0, -(k[1] as f64) * f),
        Complex64::new(0.0, k[0] as f64 * f),
    ])
}

/// `chi i k / (2 pi |k|^2)`, the symbol of `chi grad G`.
pub fn keller_segel_symbol(k: &[i64], chi: f64) -> Result<Vec<Complex64>> {
    if k.iter().all(|&c| c == 0) {
        return Err(LabError::Domain("Keller-Segel symbol at k = 0".into()));
    }
    let k2: f64 = k.iter().map(|&c| (c * c) as f64).sum();
    let f = chi / (2.0 * PI * k2);
    Ok(k.iter().map(|&c| Complex64::new(0.0, c as f64 * f)).collect())
}

/// Identity convolution, including the zero mode.
pub fn dirac_symbol(_k: i64) -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl KernelSpec {
    pub fn biot_savart() -> Self {
        Self {
            kind: KernelKind::BiotSavart2d,
            holder: None,
        }
    }

    pub fn keller_segel(chi: f64, d: usize) -> Result<Self> {
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(LabError::InvalidParameter {
                name: "chi",
                value: chi,
                constraint: "sensitivity must be finite and nonnegative".into(),
            });
        }
        if d == 0 || d > MAX_DIM {
            return Err(LabError::UnsupportedDimension(d));
        }
        Ok(Self {
            kind: KernelKind::KellerSegel { chi, d },
            holder: None,
        })
    }

    pub fn dirac() -> Self {
        Self {
            kind: KernelKind::Dirac,
            holder: None,
        }
    }

    /// Custom multipliers must carry their own Hölder data.
    pub fn custom(table: CustomMultiplier, holder: HolderMeta) -> Result<Self> {
        if !(holder.gamma > 0.0 && holder.gamma <= 1.0) || holder.c_k <= 0.0 || holder.q <= table.d as f64 {
            return Err(LabError::InvalidInput(format!(
                "custom kernel metadata {holder:?} must have gamma in (0,1], C_K > 0, q > d"
            )));
        }
        Ok(Self {
            kind: KernelKind::Custom(table),
            holder: Some(holder),
        })
    }

    pub fn with_holder(mut self, holder: HolderMeta) -> Self {
        self.holder = Some(holder);
        self
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn holder(&self) -> Option<HolderMeta> {
        self.holder
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.kind, KernelKind::Dirac)
    }

    /// Spatial dimension the kernel lives in, when fixed.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            KernelKind::BiotSavart2d => Some(2),
            KernelKind::KellerSegel { d, .. } => Some(*d),
            KernelKind::Dirac => None,
            KernelKind::Custom(t) => Some(t.d),
        }
    }

    /// Number of output components for a field on a `d`-dimensional grid.
    pub fn components(&self, d: usize) -> usize {
        match &self.kind {
            KernelKind::BiotSavart2d => 2,
            KernelKind::KellerSegel { d, .. } => *d,
            KernelKind::Dirac => 1,
            KernelKind::Custom(_) => d,
        }
    }

    /// Hölder exponent the kernel's regularizing property gives for `L^q` input.
    pub fn natural_gamma(&self, q: f64) -> Option<f64> {
        match &self.kind {
            KernelKind::BiotSavart2d => Some(1.0 - 2.0 / q),
            KernelKind::KellerSegel { d, .. } => Some(1.0 - *d as f64 / q),
            KernelKind::Dirac => None,
            KernelKind::Custom(_) => self.holder.map(|h| h.gamma),
        }
    }

    /// Symbol at frequency `k`, written into `out` (one entry per component).
    pub fn symbol(&self, k: &[i64], out: &mut [Complex64]) {
        let zero = k.iter().all(|&c| c == 0);
        match &self.kind {
            KernelKind::Dirac => out[0] = Complex64::new(1.0, 0.0),
            _ if zero => out.iter_mut().for_each(|o| *o = Complex64::default()),
            KernelKind::BiotSavart2d => {
                let s = biot_savart_symbol([k[0], k[1]]).expect("nonzero mode");
                out[..2].copy_from_slice(&s);
            }
            KernelKind::KellerSegel { chi, .. } => {
                let s = keller_segel_symbol(k, *chi).expect("nonzero mode");
                out.copy_from_slice(&s);
            }
            KernelKind::Custom(t) => {
                let mut key = [0i64; MAX_DIM];
                key[..k.len()].copy_from_slice(k);
                match t.modes.get(&key) {
                    Some(s) => out.copy_from_slice(s),
                    None => out.iter_mut().for_each(|o| *o = Complex64::default()),
                }
            }
        }
    }

    /// Per-component multiplier tables on `grid`. Odd symbols are zeroed at
    /// the Nyquist frequency so real fields map to real fields.
    pub fn table(&self, grid: PeriodicGrid) -> Result<Vec<Vec<Complex64>>> {
        let d = grid.dim();
        if let Some(kd) = self.dim() {
            if kd != d {
                return Err(LabError::InvalidInput(format!(
                    "kernel lives in d = {kd}, grid is {grid}"
                )));
            }
        } else if self.is_dirac() && d != 1 {
            // the Burgers regime is one-dimensional
            return Err(LabError::UnsupportedDimension(d));
        }
        let nc = self.components(d);
        let mut tables = vec![vec![Complex64::default(); grid.len()]; nc];
        let mut sym = vec![Complex64::default(); nc];
        for i in 0..grid.len() {
            if grid.is_nyquist(i) && !self.is_dirac() {
                continue;
            }
            let k = grid.mode(i);
            self.symbol(&k[..d], &mut sym);
            for (t, s) in tables.iter_mut().zip(&sym) {
                t[i] = *s;
            }
        }
        Ok(tables)
    }

    /// `sqrt(sum_k |K(k)|^2)` over the grid modes: by Cauchy-Schwarz and Parseval
    /// `max |K * f| <= C ||f||_2 <= C ||f||_q` for every grid field and `q >= 2`.
    pub fn grid_holder_constant(&self, grid: PeriodicGrid) -> Result<f64> {
        let tables = self.table(grid)?;
        let s: f64 = tables.iter().flat_map(|t| t.iter().map(|z| z.norm_sqr())).sum();
        Ok(s.sqrt())
    }
}

/// `K * f` per component, from the coefficients of `f`.
pub fn apply_tables(
    tables: &[Vec<Complex64>],
    coeffs: &[Complex64],
    plan: &SpectralPlan,
) -> Vec<Vec<f64>> {
    let products: Vec<Vec<Complex64>> = tables
        .iter()
        .map(|t| t.iter().zip(coeffs).map(|(s, c)| s * c).collect())
        .collect();
    let refs: Vec<&[Complex64]> = products.iter().map(|p| p.as_slice()).collect();
    plan.inverse_many(&refs)
}

/// Componentwise `K * f`. When Hölder metadata is present the grid-level
/// bound `max |K * f| <= C_K ||f||_q` is checked and violations are logged.
pub fn apply_kernel(spec: &KernelSpec, f: &mut FieldState, plan: &SpectralPlan) -> Result<Vec<FieldState>> {
    let tables = spec.table(plan.grid())?;
    let coeffs = f.ensure_fourier(plan).to_vec();
    let out = apply_tables(&tables, &coeffs, plan);
    if let Some(h) = spec.holder() {
        let sup = pointwise_sup(&out);
        let bound = h.c_k * f.lq_norm(h.q)?;
        if sup > bound {
            log::warn!("kernel bound exceeded at grid level: sup |K*f| = {sup:.4e} > C_K |f|_q = {bound:.4e}");
        }
    }
    Ok(out
        .into_iter()
        .map(|v| FieldState::new(plan.grid(), v).expect("grid-sized output"))
        .collect())
}

/// Max over nodes of the Euclidean norm of a vector field given by components.
pub fn pointwise_sup(components: &[Vec<f64>]) -> f64 {
    let n = components.first().map_or(0, |c| c.len());
    (0..n)
        .map(|i| components.iter().map(|c| c[i] * c[i]).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// `G^N = K * V^N` on the grid, one field per component.
pub fn mollified_kernel(
    spec: &KernelSpec,
    moll: &MollifierSpec,
    n: usize,
    plan: &SpectralPlan,
) -> Result<Vec<FieldState>> {
    let vhat = moll.vn_fourier(n, plan)?;
    let tables = spec.table(plan.grid())?;
    Ok(apply_tables(&tables, &vhat, plan)
        .into_iter()
        .map(|v| FieldState::new(plan.grid(), v).expect("grid-sized output"))
        .collect())
}

/// L2 norm of the spectral divergence of a vector field.
pub fn divergence_l2(components: &[Vec<f64>], plan: &SpectralPlan) -> f64 {
    let grid = plan.grid();
    let mut div = vec![Complex64::default(); grid.len()];
    for (axis, comp) in components.iter().enumerate() {
        let c = plan.forward(comp);
        for (i, (dv, ci)) in div.iter_mut().zip(&c).enumerate() {
            if !grid.is_nyquist(i) {
                let k = grid.mode(i)[axis] as f64;
                *dv += ci * Complex64::new(0.0, 2.0 * PI * k);
            }
        }
    }
    div.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn biot_savart_examples() {
        let s = biot_savart_symbol([1, 0]).unwrap();
        assert_eq!(s[0], c(0.0, 0.0));
        assert_relative_eq!(s[1].im, 1.0 / (2.0 * PI), epsilon = 1e-16);
        let s = biot_savart_symbol([0, 2]).unwrap();
        assert_relative_eq!(s[0].im, -0.5 / (2.0 * PI), epsilon = 1e-16);
        assert_eq!(s[1], c(0.0, 0.0));
        assert!(matches!(biot_savart_symbol([0, 0]), Err(LabError::Domain(_))));
    }

    #[test]
    fn biot_savart_is_orthogonal_to_k() {
        for k1 in -7i64..=7 {
            for k2 in -7i64..=7 {
                if (k1, k2) == (0, 0) {
                    continue;
                }
                let s = biot_savart_symbol([k1, k2]).unwrap();
                let dot = s[0] * k1 as f64 + s[1] * k2 as f64;
                assert_eq!(dot.re, 0.0);
                assert_eq!(dot.im, 0.0);
            }
        }
    }

    #[test]
    fn keller_segel_examples() {
        let s = keller_segel_symbol(&[1, 0], 1.0).unwrap();
        assert_relative_eq!(s[0].im, 1.0 / (2.0 * PI), epsilon = 1e-16);
        assert_eq!(s[1], c(0.0, 0.0));
        let z = keller_segel_symbol(&[3, -2], 0.0).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
        assert!(keller_segel_symbol(&[0, 0], 1.0).is_err());
        // parallel to k: cross product vanishes
        let s = keller_segel_symbol(&[3, -2], 0.7).unwrap();
        assert!((s[0].im * -2.0 - s[1].im * 3.0).abs() < 1e-16);
    }

    #[test]
    fn dirac_is_identity() {
        assert_eq!(dirac_symbol(0), c(1.0, 0.0));
        assert_eq!(dirac_symbol(7), c(1.0, 0.0));
        let g = PeriodicGrid::new(1, 32).unwrap();
        let plan = SpectralPlan::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f = FieldState::new(g, (0..32).map(|_| rng.random()).collect()).unwrap();
        let before = f.ensure_fourier(&plan).to_vec();
        let tables = KernelSpec::dirac().table(g).unwrap();
        for (t, b) in tables[0].iter().zip(&before) {
            assert_eq!(t * b, *b);
        }
        let out = apply_kernel(&KernelSpec::dirac(), &mut f, &plan).unwrap();
        for (a, b) in out[0].values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_field_has_no_velocity() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let plan = SpectralPlan::new(g);
        for k in [KernelSpec::biot_savart(), KernelSpec::keller_segel(1.0, 2).unwrap()] {
            let mut f = FieldState::constant(g, 3.0);
            let out = apply_kernel(&k, &mut f, &plan).unwrap();
            assert!(out.iter().all(|c| c.values().iter().all(|v| v.abs() < 1e-15)));
        }
    }

    #[test]
    fn biot_savart_single_mode_response() {
        // cos(2 pi x1) -> (0, -sin(2 pi x1) / 2pi)
        let g = PeriodicGrid::new(2, 32).unwrap();
        let plan = SpectralPlan::new(g);
        let mut f = FieldState::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let u = apply_kernel(&KernelSpec::biot_savart(), &mut f, &plan).unwrap();
        for i in 0..g.len() {
            let x = g.node(i);
            assert!(u[0].values()[i].abs() < 1e-15);
            let want = -(2.0 * PI * x[0]).sin() / (2.0 * PI);
            assert!((u[1].values()[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn keller_segel_points_toward_mass() {
        // a bump at the origin pulls the point x = (0.1, 0) toward -x
        let g = PeriodicGrid::new(2, 64).unwrap();
        let plan = SpectralPlan::new(g);
        let mut f = FieldState::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 0.01).exp());
        let u = apply_kernel(&KernelSpec::keller_segel(1.0, 2).unwrap(), &mut f, &plan).unwrap();
        let i = g.flat_index(&[32 + 6, 32]);
        assert!(u[0].values()[i] < 0.0);
        assert!(u[1].values()[i].abs() < 1e-14);
    }

    #[test]
    fn mollified_kernels() {
        let g = PeriodicGrid::new(2, 64).unwrap();
        let plan = SpectralPlan::new(g);
        let moll = MollifierSpec::new(2, 0.3).unwrap();
        let n = 256;
        let gbs = mollified_kernel(&KernelSpec::biot_savart(), &moll, n, &plan).unwrap();
        let comps: Vec<Vec<f64>> = gbs.iter().map(|f| f.values().to_vec()).collect();
        assert!(divergence_l2(&comps, &plan) < 1e-10);
        let gks = mollified_kernel(&KernelSpec::keller_segel(1.0, 2).unwrap(), &moll, n, &plan).unwrap();
        for comp in &gks {
            assert!(comp.integral().abs() < 1e-14);
        }

        let g1 = PeriodicGrid::new(1, 256).unwrap();
        let plan1 = SpectralPlan::new(g1);
        let m1 = MollifierSpec::new(1, 0.25).unwrap();
        let gd = mollified_kernel(&KernelSpec::dirac(), &m1, 1024, &plan1).unwrap();
        let vn = m1.sampled_vn(1024, g1).unwrap();
        for (a, b) in gd[0].values().iter().zip(vn.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_constant_bounds_random_band_limited_fields() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let plan = SpectralPlan::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kernel in [KernelSpec::biot_savart(), KernelSpec::keller_segel(0.5, 2).unwrap()] {
            let ck = kernel.grid_holder_constant(g).unwrap();
            let tables = kernel.table(g).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let mut coeffs = vec![Complex64::default(); g.len()];
                for _ in 0..6 {
                    let k1 = rng.random_range(-6i64..=6);
                    let k2 = rng.random_range(-6i64..=6);
                    let a = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    let idx = |k: i64| (k.rem_euclid(32)) as usize;
                    coeffs[g.flat_index(&[idx(k1), idx(k2)])] += a;
                    coeffs[g.flat_index(&[idx(-k1), idx(-k2)])] += a.conj();
                }
                let f = FieldState::from_fourier(&plan, coeffs.clone());
                let u = apply_tables(&tables, &coeffs, &plan);
                let ratio = pointwise_sup(&u) / f.lq_norm(4.0).unwrap();
                worst = worst.max(ratio);
                assert!(ratio <= ck * (1.0 + 1e-12));
            }
            log::info!("C_K(grid) = {ck:.4}, worst observed ratio {worst:.4}");
        }
    }

    #[test]
    fn custom_table_parsing() {
        let text = "# k1 k2 re1 im1 re2 im2\n1 0  0 0.5  0 0\n-1 0 0 -0.5 0 0\n0 0 9 9 9 9\n";
        let t = CustomMultiplier::parse(2, text).unwrap();
        assert_eq!(t.len(), 2);
        let spec = KernelSpec::custom(t, HolderMeta { gamma: 0.5, c_k: 1.0, q: 4.0 }).unwrap();
        let mut out = [Complex64::default(); 2];
        spec.symbol(&[1, 0], &mut out);
        assert_eq!(out[0], c(0.0, 0.5));
        spec.symbol(&[0, 0], &mut out);
        assert_eq!(out[0], c(0.0, 0.0));
        spec.symbol(&[3, 3], &mut out);
        assert_eq!(out[1], c(0.0, 0.0));
        assert!(CustomMultiplier::parse(2, "1 0 0.5").is_err());
        assert!(CustomMultiplier::parse(1, "x 1 2").is_err());
        let t = CustomMultiplier::parse(1, "1 0 1").unwrap();
        assert!(KernelSpec::custom(t, HolderMeta { gamma: 0.5, c_k: 1.0, q: 0.5 }).is_err());
    }
}
