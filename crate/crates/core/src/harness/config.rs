//! Experiment configuration, presets and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drift::DriftSpec;
use crate::error::{LabError, Result};
use crate::initial::InitialDensity;
use crate::kernel::{pointwise_sup, apply_tables, CustomMultiplier, HolderMeta, KernelSpec};
use crate::metrics::{beta_window, Regime};
use crate::mollifier::MollifierSpec;
use crate::particles::NoiseModel;
use crate::torus::{PeriodicGrid, SpectralPlan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    BiotSavart,
    KellerSegel { chi: f64 },
    Dirac,
    /// Multiplier table on disk with its Hölder data.
    Custom { path: PathBuf, gamma: f64, c_k: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutoffLevel {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftConfig {
    Identity,
    Cutoff { a: CutoffLevel },
}

/// `sigma` as a multiple of the identity or a full matrix (rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaConfig {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig::Scalar(0.0)
    }
}

fn default_m() -> f64 {
    2.0
}

fn default_eta() -> f64 {
    0.5
}

fn default_snapshots() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    #[serde(rename = "M")]
    pub grid_m: usize,
    pub beta: f64,
    /// Hölder exponent; defaults to the kernel's natural value for `q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    #[serde(rename = "R")]
    pub replicas: usize,
    #[serde(default = "default_m")]
    pub m: f64,
    pub q: f64,
    pub kernel: KernelConfig,
    pub drift: DriftConfig,
    #[serde(default)]
    pub sigma: SigmaConfig,
    pub rho0: InitialDensity,
    #[serde(default)]
    pub seed: u64,
    /// Discrepancy level of the cutoff experiment.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Number of evenly spaced snapshot times after `t = 0`.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

pub const PRESETS: [&str; 3] = ["burgers1d", "navier-stokes-2d", "keller-segel-2d"];

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let cfg = match name {
            "burgers1d" => Self {
                d: 1,
                t_final: 0.5,
                dt: 0.5 / 2048.0,
                grid_m: 512,
                beta: 0.25,
                gamma: None,
                n: powers_of_two(8, 13),
                replicas: 20,
                m: 2.0,
                q: 2.0,
                kernel: KernelConfig::Dirac,
                drift: DriftConfig::Identity,
                sigma: SigmaConfig::Scalar(0.5),
                rho0: InitialDensity::UniformPlusCosine { amplitude: 0.5 },
                seed: 1,
                eta: 0.5,
                snapshots: 8,
            },
            "navier-stokes-2d" => Self {
                d: 2,
                t_final: 0.5,
                dt: 0.5 / 2048.0,
                grid_m: 128,
                beta: 1.0 / 3.0,
                gamma: Some(0.5),
                n: powers_of_two(9, 13),
                replicas: 10,
                m: 2.0,
                q: 4.0,
                kernel: KernelConfig::BiotSavart,
                drift: DriftConfig::Cutoff {
                    a: CutoffLevel::Auto(AutoTag::Auto),
                },
                sigma: SigmaConfig::Scalar(0.5),
                rho0: InitialDensity::VortexPair {
                    amplitude: 0.05,
                    width: 0.1,
                    separation: 0.3,
                },
                seed: 2,
                eta: 0.5,
                snapshots: 8,
            },
            "keller-segel-2d" => Self {
                d: 2,
                t_final: 0.25,
                dt: 0.25 / 1024.0,
                grid_m: 128,
                beta: 1.0 / 3.0,
                gamma: Some(0.5),
                n: powers_of_two(9, 13),
                replicas: 10,
                m: 2.0,
                q: 4.0,
                kernel: KernelConfig::KellerSegel {
                    chi: 1.0 / (2.0 * std::f64::consts::PI),
                },
                drift: DriftConfig::Cutoff {
                    a: CutoffLevel::Auto(AutoTag::Auto),
                },
                sigma: SigmaConfig::Scalar(0.25),
                rho0: InitialDensity::GaussianBumpPeriodized { width: 0.1, weight: 0.5 },
                seed: 3,
                eta: 0.5,
                snapshots: 8,
            },
            other => {
                return Err(LabError::Config(vec![format!(
                    "unknown preset `{other}` (available: {})",
                    PRESETS.join(", ")
                )]))
            }
        };
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(vec![format!("config: {e}")]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn regime(&self) -> Regime {
        match self.kernel {
            KernelConfig::Dirac => Regime::Burgers,
            _ => Regime::General,
        }
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.d, self.grid_m)
    }

    pub fn mollifier(&self) -> Result<MollifierSpec> {
        MollifierSpec::new(self.d, self.beta)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        match &self.kernel {
            KernelConfig::BiotSavart => Ok(KernelSpec::biot_savart()),
            KernelConfig::KellerSegel { chi } => KernelSpec::keller_segel(*chi, self.d),
            KernelConfig::Dirac => Ok(KernelSpec::dirac()),
            KernelConfig::Custom { path, gamma, c_k } => {
                let table = CustomMultiplier::load(self.d, path)?;
                KernelSpec::custom(
                    table,
                    HolderMeta {
                        gamma: *gamma,
                        c_k: *c_k,
                        q: self.q,
                    },
                )
            }
        }
    }

    /// Hölder exponent used in the predicted rate.
    pub fn gamma_value(&self) -> f64 {
        if let Some(g) = self.gamma {
            return g;
        }
        self.kernel_spec().ok().and_then(|k| k.natural_gamma(self.q)).unwrap_or(1.0)
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        match &self.sigma {
            SigmaConfig::Scalar(s) => {
                if !s.is_finite() {
                    return Err(LabError::InvalidInput(format!("sigma = {s} is not finite")));
                }
                Ok(NoiseModel::scalar(self.d, *s))
            }
            SigmaConfig::Matrix(rows) => {
                if rows.len() != self.d || rows.iter().any(|r| r.len() != self.d) {
                    return Err(LabError::InvalidInput(format!("sigma must be a {0}x{0} matrix", self.d)));
                }
                NoiseModel::constant(self.d, rows.concat())
            }
        }
    }

    pub fn max_n(&self) -> usize {
        self.n.iter().copied().max().unwrap_or(0)
    }

    /// Every violated constraint, each naming its assumption.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(1..=3).contains(&self.d) {
            errs.push(format!("d = {} unsupported (1, 2 or 3)", self.d));
            return errs;
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            errs.push(format!("T = {} must be positive", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt = {} must be positive", self.dt));
        } else if self.t_final > 0.0 {
            let steps = self.steps();
            if steps == 0 || (steps as f64 * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
                errs.push(format!("T = {} is not an integer multiple of dt = {}", self.t_final, self.dt));
            }
        }
        if self.grid().is_err() {
            errs.push(format!("M = {} must be a power of two >= 2", self.grid_m));
        }
        if self.n.is_empty() || self.n.iter().any(|&n| n < 2) {
            errs.push(format!("N list {:?} must be nonempty with every N >= 2", self.n));
        }
        if self.replicas < 2 {
            errs.push(format!("R = {} replicas, need at least 2", self.replicas));
        }
        if !(self.m >= 1.0) {
            errs.push(format!("moment order m = {} must be >= 1", self.m));
        }
        if !(self.eta > 0.0) {
            errs.push(format!("eta = {} must be positive", self.eta));
        }
        if self.snapshots == 0 {
            errs.push("snapshots must be >= 1".into());
        }
        let regime = self.regime();
        match regime {
            Regime::Burgers => {
                if self.d != 1 {
                    errs.push(format!("(A^I) Dirac kernel requires d = 1, got d = {}", self.d));
                }
                if self.q != 2.0 {
                    errs.push(format!("(A^I) Dirac kernel requires q = 2, got q = {}", self.q));
                }
            }
            Regime::General => {
                if !(self.q >= 2.0 && self.q > self.d as f64) {
                    errs.push(format!("(A^K) q = {} must satisfy q >= 2 and q > d = {}", self.q, self.d));
                }
                let g = self.gamma_value();
                if !(g > 0.0 && g <= 1.0) {
                    errs.push(format!("(A^K) gamma = {g} must lie in (0, 1]"));
                }
            }
        }
        let bound = beta_window(regime, self.d, self.q);
        if !(self.beta > 0.0 && self.beta < bound) {
            let window = match regime {
                Regime::Burgers => "(0, 1/3)".to_string(),
                Regime::General => format!("(0, {bound:.4}) with bound 1/(2[1 + 1/d - 1/q])"),
            };
            errs.push(format!(
                "(A^V) beta = {} violates beta in {window} ({})",
                self.beta,
                regime.theorem()
            ));
        }
        match self.kernel_spec() {
            Ok(k) => {
                if let Some(kd) = k.dim() {
                    if kd != self.d {
                        errs.push(format!("(A^K) kernel lives in d = {kd}, experiment has d = {}", self.d));
                    }
                }
            }
            Err(e) => errs.push(format!("(A^K) kernel: {e}")),
        }
        if let DriftConfig::Cutoff { a: CutoffLevel::Fixed(a) } = self.drift {
            if !(a > 0.0 && a.is_finite()) {
                errs.push(format!("(A^F) cutoff level A = {a} must be positive"));
            }
        }
        if let Err(e) = self.noise() {
            errs.push(format!("(A^c) {e}"));
        }
        errs.extend(self.rho0.validate(self.d));
        if let (Ok(grid), Ok(moll)) = (self.grid(), self.mollifier()) {
            let nmax = self.max_n();
            if nmax >= 2 {
                let need = moll.max_spacing(nmax);
                if grid.spacing() > need {
                    errs.push(format!(
                        "(A^V) resolution: h = {} exceeds N^(-beta/d)/8 = {need:.5} at N = {nmax}",
                        grid.spacing()
                    ));
                }
            }
        }
        if errs.is_empty() {
            if let Err(e) = self.cfl_precheck() {
                errs.push(e);
            }
        }
        errs
    }

    /// Drift speed estimate: `2 sup |K * rho_0|`, capped by the cutoff bound.
    fn cfl_precheck(&self) -> std::result::Result<(), String> {
        let grid = self.grid().map_err(|e| e.to_string())?;
        let plan = SpectralPlan::new(grid);
        let kernel = self.kernel_spec().map_err(|e| e.to_string())?;
        let rho0 = self.rho0.field(grid);
        let coeffs = plan.forward(rho0.values());
        let u = if kernel.is_dirac() {
            vec![rho0.values().to_vec()]
        } else {
            apply_tables(&kernel.table(grid).map_err(|e| e.to_string())?, &coeffs, &plan)
        };
        let mut speed = 2.0 * pointwise_sup(&u);
        if let DriftConfig::Cutoff { a: CutoffLevel::Fixed(a) } = self.drift {
            speed = speed.min(a + 1.0);
        }
        let ratio = speed * self.dt / grid.spacing();
        if ratio > 0.5 {
            return Err(format!(
                "CFL pre-check: estimated max|F| dt / h = {ratio:.3} > 0.5 (reduce dt or M)"
            ));
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(LabError::Config(errs))
        }
    }

    /// Drift for a given cutoff level (`inf` for the identity).
    pub fn drift_spec(&self, auto_level: f64) -> Result<DriftSpec> {
        match self.drift {
            DriftConfig::Identity => Ok(DriftSpec::Identity),
            DriftConfig::Cutoff { a: CutoffLevel::Fixed(a) } => DriftSpec::cutoff(a),
            DriftConfig::Cutoff { a: CutoffLevel::Auto(_) } => DriftSpec::cutoff(auto_level),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            assert!(cfg.validate().is_empty(), "{name}: {:?}", cfg.validate());
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn burgers_beta_window() {
        let mut cfg = ExperimentConfig::preset("burgers1d").unwrap();
        cfg.beta = 0.4;
        let errs = cfg.validate();
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert!(errs[0].contains("(0, 1/3)"));
    }

    #[test]
    fn general_beta_window_names_bound() {
        let mut cfg = ExperimentConfig::preset("navier-stokes-2d").unwrap();
        cfg.beta = 0.41;
        let errs = cfg.validate();
        assert!(errs.iter().any(|e| e.contains("0.4000")), "{errs:?}");
    }

    #[test]
    fn all_violations_are_listed() {
        let mut cfg = ExperimentConfig::preset("burgers1d").unwrap();
        cfg.q = 4.0;
        cfg.grid_m = 100;
        cfg.m = 0.5;
        cfg.rho0 = InitialDensity::UniformPlusCosine { amplitude: 2.0 };
        assert!(cfg.validate().len() >= 4);
    }

    #[test]
    fn resolution_and_cfl() {
        let mut cfg = ExperimentConfig::preset("burgers1d").unwrap();
        cfg.grid_m = 64;
        assert!(cfg.validate().iter().any(|e| e.contains("resolution")));
        let mut cfg = ExperimentConfig::preset("burgers1d").unwrap();
        cfg.dt = cfg.t_final / 64.0;
        assert!(cfg.validate().iter().any(|e| e.contains("CFL")));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cfg = ExperimentConfig::preset("navier-stokes-2d").unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let text = cfg.to_json().replacen("{", "{\"bogus\": 1,", 1);
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = r#"{"d":1,"T":0.5,"dt":0.000244140625,"M":512,"beta":0.25,"N":[256,512],"R":4,"q":2,
            "kernel":{"kind":"dirac"},"drift":{"kind":"cutoff","a":3.5},"sigma":[[0.5]],
            "rho0":{"preset":"uniform-plus-cosine","amplitude":0.5}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.drift, DriftConfig::Cutoff { a: CutoffLevel::Fixed(3.5) });
        assert!(cfg.validate().is_empty());
        assert_eq!(cfg.m, 2.0);
    }
}
