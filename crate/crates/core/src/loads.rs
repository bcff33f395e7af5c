//! External load data: body forces, charge density, polarization forcing and
//! their boundary counterparts, as functions of `(t, x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ScalarFn = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("load `{name}` expects {expected} component(s), got {got}")]
    Components {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("load `{name}` has a non-finite parameter")]
    NonFinite { name: &'static str },
}

/// All load maps of the coupled problem.
///
/// * `f_sigma`: body force in the momentum balance,
/// * `f_d`: free charge density,
/// * `f_p`: polarization forcing,
/// * `t_sigma`, `t_d`, `t_p`: boundary data on the Neumann parts of the
///   displacement, potential and polarization boundaries.
#[derive(Clone)]
pub struct LoadSet {
    pub f_sigma: VectorFn,
    pub f_d: ScalarFn,
    pub f_p: VectorFn,
    pub t_sigma: VectorFn,
    pub t_d: ScalarFn,
    pub t_p: VectorFn,
}

impl fmt::Debug for LoadSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LoadSet { .. }")
    }
}

pub fn zero_scalar() -> ScalarFn {
    Arc::new(|_, _| 0.0)
}

pub fn zero_vector() -> VectorFn {
    Arc::new(|_, _| [0.0; 2])
}

impl LoadSet {
    pub fn zero() -> Self {
        Self {
            f_sigma: zero_vector(),
            f_d: zero_scalar(),
            f_p: zero_vector(),
            t_sigma: zero_vector(),
            t_d: zero_scalar(),
            t_p: zero_vector(),
        }
    }

    pub fn with_f_sigma(mut self, f: impl Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.f_sigma = Arc::new(f);
        self
    }

    pub fn with_f_d(mut self, f: impl Fn(f64, [f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.f_d = Arc::new(f);
        self
    }

    pub fn with_f_p(mut self, f: impl Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.f_p = Arc::new(f);
        self
    }

    pub fn with_t_sigma(mut self, f: impl Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.t_sigma = Arc::new(f);
        self
    }

    pub fn with_t_d(mut self, f: impl Fn(f64, [f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.t_d = Arc::new(f);
        self
    }

    pub fn with_t_p(mut self, f: impl Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.t_p = Arc::new(f);
        self
    }
}

impl Default for LoadSet {
    fn default() -> Self {
        Self::zero()
    }
}

/// Analytic load preset. `value` holds one entry for scalar loads and two
/// for vector loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadPreset {
    /// `value`.
    Constant { value: Vec<f64> },
    /// `value · sin(k π x)`.
    SineX {
        value: Vec<f64>,
        #[serde(default = "one")]
        k: f64,
    },
    /// `value · min(t / duration, 1)`.
    RampT {
        value: Vec<f64>,
        #[serde(default = "one")]
        duration: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl LoadPreset {
    fn value(&self) -> &[f64] {
        match self {
            Self::Constant { value } | Self::SineX { value, .. } | Self::RampT { value, .. } => value,
        }
    }

    fn check(&self, name: &'static str, expected: usize) -> Result<(), LoadError> {
        let v = self.value();
        if v.len() != expected {
            return Err(LoadError::Components {
                name,
                expected,
                got: v.len(),
            });
        }
        let extra = match self {
            Self::Constant { .. } => 1.0,
            Self::SineX { k, .. } => *k,
            Self::RampT { duration, .. } => *duration,
        };
        if v.iter().any(|x| !x.is_finite()) || !extra.is_finite() {
            return Err(LoadError::NonFinite { name });
        }
        if let Self::RampT { duration, .. } = self {
            if *duration <= 0.0 {
                return Err(LoadError::NonFinite { name });
            }
        }
        Ok(())
    }

    fn factor(&self) -> impl Fn(f64, [f64; 2]) -> f64 + Send + Sync + 'static {
        let kind = self.clone();
        move |t, x| match &kind {
            Self::Constant { .. } => 1.0,
            Self::SineX { k, .. } => (k * PI * x[0]).sin(),
            Self::RampT { duration, .. } => (t / duration).min(1.0),
        }
    }

    pub fn scalar(&self, name: &'static str) -> Result<ScalarFn, LoadError> {
        self.check(name, 1)?;
        let a = self.value()[0];
        let f = self.factor();
        Ok(Arc::new(move |t, x| a * f(t, x)))
    }

    pub fn vector(&self, name: &'static str) -> Result<VectorFn, LoadError> {
        self.check(name, 2)?;
        let (a, b) = (self.value()[0], self.value()[1]);
        let f = self.factor();
        Ok(Arc::new(move |t, x| {
            let s = f(t, x);
            [a * s, b * s]
        }))
    }
}

/// Load section of a run configuration. Missing entries are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub f_sigma: Option<LoadPreset>,
    pub f_d: Option<LoadPreset>,
    pub f_p: Option<LoadPreset>,
    pub t_sigma: Option<LoadPreset>,
    pub t_d: Option<LoadPreset>,
    pub t_p: Option<LoadPreset>,
}

impl LoadSpec {
    pub fn build(&self) -> Result<LoadSet, LoadError> {
        let vector = |p: &Option<LoadPreset>, name| p.as_ref().map_or(Ok(zero_vector()), |p| p.vector(name));
        let scalar = |p: &Option<LoadPreset>, name| p.as_ref().map_or(Ok(zero_scalar()), |p| p.scalar(name));
        Ok(LoadSet {
            f_sigma: vector(&self.f_sigma, "f_sigma")?,
            f_d: scalar(&self.f_d, "f_d")?,
            f_p: vector(&self.f_p, "f_p")?,
            t_sigma: vector(&self.t_sigma, "t_sigma")?,
            t_d: scalar(&self.t_d, "t_d")?,
            t_p: vector(&self.t_p, "t_p")?,
        })
    }
}
