//! Drift nonlinearities `F(x, u)` applied to the interaction field `u = K * rho`.

use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};

/// Blend on `[0, 1]`: `phi(0) = 0, phi'(0) = 1, phi''(0) = 0` and a triple zero at 1.
#[inline]
fn blend(s: f64) -> f64 {
    let t = 1.0 - s;
    s * (1.0 + 3.0 * s) * t * t * t
}

/// Smooth clamp: identity on `[-A, A]`, constant `+-A` beyond `A + 1`, C^2 with `|f'| <= 1`.
pub fn eval_fa(a: f64, x: f64) -> f64 {
    if a.is_infinite() {
        return x;
    }
    let ax = x.abs();
    let y = if ax <= a {
        ax
    } else if ax >= a + 1.0 {
        a
    } else {
        a + blend(ax - a)
    };
    y.copysign(x)
}

/// Componentwise `f_A`.
pub fn eval_big_fa(a: f64, v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| eval_fa(a, x)).collect()
}

pub type DriftMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum DriftSpec {
    Identity,
    Cutoff { a: f64 },
    CustomLipschitz {
        map: DriftMap,
        lipschitz: f64,
        bound: f64,
    },
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftSpec::Identity => write!(f, "Identity"),
            DriftSpec::Cutoff { a } => write!(f, "Cutoff(A = {a})"),
            DriftSpec::CustomLipschitz { lipschitz, bound, .. } => {
                write!(f, "CustomLipschitz(L = {lipschitz}, bound = {bound})")
            }
        }
    }
}

impl DriftSpec {
    pub fn cutoff(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(LabError::InvalidParameter {
                name: "A",
                value: a,
                constraint: "cutoff level must be positive".into(),
            });
        }
        Ok(DriftSpec::Cutoff { a })
    }

    /// Lipschitz constant of `u -> F(x, u)`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            DriftSpec::Identity | DriftSpec::Cutoff { .. } => 1.0,
            DriftSpec::CustomLipschitz { lipschitz, .. } => *lipschitz,
        }
    }

    /// Componentwise sup bound, `inf` for the identity.
    pub fn bound(&self) -> f64 {
        match self {
            DriftSpec::Identity => f64::INFINITY,
            DriftSpec::Cutoff { a } => a + 1.0,
            DriftSpec::CustomLipschitz { bound, .. } => *bound,
        }
    }

    /// `F(x, u)` written into `out`.
    pub fn eval_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != u.len() {
            return Err(LabError::InvalidInput(format!(
                "drift output has {} components, interaction has {}",
                out.len(),
                u.len()
            )));
        }
        match self {
            DriftSpec::Identity => out.copy_from_slice(u),
            DriftSpec::Cutoff { a } => {
                for (o, &v) in out.iter_mut().zip(u) {
                    *o = eval_fa(*a, v);
                }
            }
            DriftSpec::CustomLipschitz { map, bound, .. } => {
                let r = map(x, u);
                if r.len() != u.len() {
                    return Err(LabError::InvalidInput(format!(
                        "custom drift returned {} components, expected {}",
                        r.len(),
                        u.len()
                    )));
                }
                if r.iter().any(|v| v.abs() > *bound) {
                    log::warn!("custom drift exceeded its declared bound {bound}");
                }
                out.copy_from_slice(&r);
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        self.eval_into(x, u, &mut out)?;
        Ok(out)
    }

    /// Largest observed `|F(x,u) - F(y,v)| / (|x-y| + |u-v|)` over sample pairs.
    pub fn sampled_lipschitz(&self, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, (x, u)) in samples.iter().enumerate() {
            let fx = self.eval(x, u)?;
            for (y, v) in &samples[i + 1..] {
                let fy = self.eval(y, v)?;
                let num = dist(&fx, &fy);
                let den = dist(x, y) + dist(u, v);
                if den > 0.0 {
                    worst = worst.max(num / den);
                }
            }
        }
        Ok(worst)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}
