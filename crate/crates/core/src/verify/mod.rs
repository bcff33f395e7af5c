//! Verification harness: manufactured solutions with convergence-order
//! fits, a finite-difference check of the bulk-energy gradient, a dense
//! brute-force assembly oracle and an empirical Lipschitz probe of the
//! source.

pub mod mms;
pub mod oracles;

use std::fmt;

use thiserror::Error;

pub use mms::{mms_elliptic, mms_parabolic, EllipticExact, ParabolicExact, ParabolicMms};
pub use oracles::{
    dense_oracle_compare, gradient_check_h, gradient_check_h_with, lipschitz_probe_s, source_ratio, LipschitzReport,
    OracleDeviation, ProbeSetup, ScaledStiffnessDerivative,
};

use crate::driver::DriverError;
use crate::elliptic::EllipticError;
use crate::fem::FemError;
use crate::materials::MaterialError;
use crate::mesh::MeshError;
use crate::parabolic::ParabolicError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid level sequence: {0}")]
    Levels(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Parabolic(#[from] ParabolicError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_order(levels: &[f64], errors: &[f64]) -> f64 {
    let n = levels.len() as f64;
    let xs: Vec<f64> = levels.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Errors over a refinement sequence and the fitted order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Mesh sizes or time steps, strictly decreasing.
    pub levels: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
    pub target: f64,
    pub passed: bool,
    pub diagnostics: Vec<String>,
    /// Errors against the exact solution, when `errors` measures something
    /// else.
    pub exact_errors: Option<Vec<f64>>,
    /// Estimated spatial error floor.
    pub floor: Option<f64>,
    /// Per level: error against the exact solution is within twice the
    /// spatial floor.
    pub saturated: Vec<bool>,
}

impl ConvergenceReport {
    pub fn new(levels: Vec<f64>, errors: Vec<f64>, target: f64) -> Result<Self, VerifyError> {
        check_levels(&levels)?;
        if errors.len() != levels.len() {
            return Err(VerifyError::Levels(format!(
                "{} errors for {} levels",
                errors.len(),
                levels.len()
            )));
        }
        let order = fit_order(&levels, &errors);
        let mut diagnostics = Vec::new();
        if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
            diagnostics.push(format!("error at level {i} is not finite"));
        }
        for i in 1..errors.len() {
            if errors[i] >= errors[i - 1] {
                diagnostics.push(format!(
                    "error does not decrease from level {} ({:.3e}) to level {} ({:.3e})",
                    i - 1,
                    errors[i - 1],
                    i,
                    errors[i]
                ));
            }
        }
        if errors.iter().all(|e| *e < 1e-12) {
            diagnostics.push("all errors at round-off level".into());
        }
        let passed = diagnostics.is_empty() && order >= target;
        Ok(Self {
            saturated: vec![false; levels.len()],
            levels,
            errors,
            order,
            target,
            passed,
            diagnostics,
            exact_errors: None,
            floor: None,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,error,exact_error,saturated\n");
        for i in 0..self.levels.len() {
            let exact = self.exact_errors.as_ref().map(|e| format!("{:e}", e[i])).unwrap_or_default();
            out.push_str(&format!(
                "{:e},{:e},{},{}\n",
                self.levels[i], self.errors[i], exact, self.saturated[i]
            ));
        }
        out
    }
}

fn check_levels(levels: &[f64]) -> Result<(), VerifyError> {
    if levels.len() < 3 {
        return Err(VerifyError::Levels(format!("need at least 3 levels, got {}", levels.len())));
    }
    if levels.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(VerifyError::Levels("levels must be positive and finite".into()));
    }
    if levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(VerifyError::Levels("levels must be strictly decreasing".into()));
    }
    Ok(())
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>12}  {:>12}  {:>12}", "level", "error", "exact")?;
        for i in 0..self.levels.len() {
            let exact = self.exact_errors.as_ref().map(|e| format!("{:12.4e}", e[i])).unwrap_or_else(|| format!("{:>12}", "-"));
            let flag = if self.saturated[i] { "  floor" } else { "" };
            writeln!(f, "{:12.4e}  {:12.4e}  {exact}{flag}", self.levels[i], self.errors[i])?;
        }
        if let Some(floor) = self.floor {
            writeln!(f, "spatial floor {floor:.4e}")?;
        }
        for d in &self.diagnostics {
            writeln!(f, "note: {d}")?;
        }
        write!(
            f,
            "fitted order {:.3} (target {:.2}): {}",
            self.order,
            self.target,
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}
