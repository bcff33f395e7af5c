//! Material assumption checks behind the `check` subcommand.

use serde::Serialize;

use crate::driver::Problem;
use crate::materials::checks::random_samples;
use crate::materials::tensor::Vec2;
use crate::materials::{
    check_decoupling_at_zero, check_pointwise_coercivity, check_smoothness, derivative_self_check, MaterialError,
};

const SMOOTHNESS_H: f64 = 1e-3;
const DERIVATIVE_H: f64 = 1e-6;
const DERIVATIVE_TOL: f64 = 1e-4;
const SEED: u64 = 7;

#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessSummary {
    pub passed: bool,
    pub flagged: Vec<&'static str>,
    pub lipschitz_estimates: std::collections::BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeSummary {
    pub passed: bool,
    pub max_rel_error: f64,
    pub worst_map: &'static str,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivitySummary {
    pub passed: bool,
    pub alpha_min: f64,
    pub samples: usize,
    pub failed_sample: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecouplingSummary {
    pub passed: bool,
    /// Whether this check counts towards the overall verdict.
    pub required: bool,
    pub decoupled: bool,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub model: String,
    pub radius: f64,
    pub passed: bool,
    pub failed: Vec<&'static str>,
    pub smoothness: SmoothnessSummary,
    pub derivatives: DerivativeSummary,
    pub coercivity: CoercivitySummary,
    pub decoupling: DecouplingSummary,
}

/// Runs every material check on the box `[-radius, radius]²`, plus the
/// nodal values of the initial polarization for coercivity.
pub fn run_checks(
    model_name: &str,
    problem: &Problem,
    radius: f64,
    n_samples: usize,
    expect_decoupled: bool,
) -> Result<CheckSummary, MaterialError> {
    let model = problem.model.as_ref();
    let lo = Vec2::new(-radius, -radius);
    let hi = Vec2::new(radius, radius);
    let mut samples = random_samples(lo, hi, n_samples, SEED);

    let smooth = check_smoothness(model, lo, hi, SMOOTHNESS_H)?;
    let deriv = derivative_self_check(model, &samples, DERIVATIVE_H);

    samples.extend(problem.p0.iter().map(|p| Vec2::new(p[0], p[1])));
    samples.push(Vec2::zeros());
    let coerc = check_pointwise_coercivity(model, &samples);
    let dec = check_decoupling_at_zero(model)?;

    let smoothness = SmoothnessSummary {
        passed: smooth.passes(),
        flagged: smooth.flagged.clone(),
        lipschitz_estimates: smooth.ratios,
    };
    let derivatives = DerivativeSummary {
        passed: deriv.passes(DERIVATIVE_TOL),
        max_rel_error: deriv.max_rel_error,
        worst_map: deriv.worst_map,
        tolerance: DERIVATIVE_TOL,
    };
    let coercivity = CoercivitySummary {
        passed: coerc.alpha_min > 0.0,
        alpha_min: coerc.alpha_min,
        samples: coerc.samples,
        failed_sample: coerc.failed_sample.map(|p| [p[0], p[1]]),
    };
    let decoupling = DecouplingSummary {
        passed: dec.decoupled || !expect_decoupled,
        required: expect_decoupled,
        decoupled: dec.decoupled,
        deviation: dec.deviation,
    };
    let mut failed = Vec::new();
    for (name, ok) in [
        ("smoothness", smoothness.passed),
        ("derivatives", derivatives.passed),
        ("coercivity", coercivity.passed),
        ("decoupling", decoupling.passed),
    ] {
        if !ok {
            failed.push(name);
        }
    }
    Ok(CheckSummary {
        model: model_name.to_string(),
        radius,
        passed: failed.is_empty(),
        failed,
        smoothness,
        derivatives,
        coercivity,
        decoupling,
    })
}
