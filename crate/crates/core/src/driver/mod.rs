//! Time integration of the coupled system: per step, the elliptic problem
//! is solved for the current polarization, the source is evaluated and `P`
//! advances by an implicit heat step. An optional Picard loop makes the
//! source implicit. The step size adapts, and the run ends at the final
//! time or when blow-up is detected.

pub mod checkpoint;
pub mod config;

use std::collections::HashMap;
use std::sync::Arc;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use config::{parse_config, parse_config_str, Problem, RunConfig};

use crate::elliptic::{solve_elliptic, EllipticError, EllipticOptions};
use crate::fem::{vector_mass, vector_stiffness, CsrMatrix, DofMap, FemError};
use crate::loads::LoadSet;
use crate::materials::{check_pointwise_coercivity, derivative_self_check, eval_material, tensor::Vec2, MaterialError, MaterialModel};
use crate::mesh::{BoundaryPartition, Mesh, MeshError};
use crate::parabolic::{
    energy_breakdown, eval_source, p_h1, p_inf, polarization_dofs, EnergyBreakdown, HeatOperator, ParabolicError,
    State,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assumption check failed: {0}")]
    Assumption(String),
    #[error("elliptic solve failed: {0}")]
    Elliptic(EllipticError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<EllipticError> for DriverError {
    fn from(e: EllipticError) -> Self {
        match e {
            EllipticError::Assumption(msg) => DriverError::Assumption(msg),
            other => DriverError::Elliptic(other),
        }
    }
}

impl From<ParabolicError> for DriverError {
    fn from(e: ParabolicError) -> Self {
        match e {
            ParabolicError::Material(m) => DriverError::Material(m),
            ParabolicError::Fem(f) => DriverError::Solver(f.to_string()),
        }
    }
}

impl From<FemError> for DriverError {
    fn from(e: FemError) -> Self {
        DriverError::Solver(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub enabled: bool,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            tol: 1e-10,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControl {
    pub t_final: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub blowup_norm_threshold: f64,
}

/// Why a step was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFailure {
    /// Picard iteration did not reach the tolerance.
    PicardStall,
    /// An iterate became non-finite.
    NonFinite,
    /// A Picard iterate exceeded the divergence bound.
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    #[serde(rename = "reached_T")]
    ReachedT,
    BlowupNorm,
    PicardStall,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::ReachedT => "reached_T",
            Outcome::BlowupNorm => "blowup_norm",
            Outcome::PicardStall => "picard_stall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalTimeReport {
    pub t_hat: f64,
    pub outcome: Outcome,
    pub p_inf: f64,
    pub p_h1: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub total_picard_iters: usize,
}

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub p_inf: f64,
    pub p_h1: f64,
    pub picard_iters: usize,
    pub dt: f64,
    pub elliptic_residual: f64,
}

/// Recorded output of a run.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<State>,
}

/// Solver state shared across steps.
pub struct Simulator {
    pub mesh: Mesh,
    pub partition: BoundaryPartition,
    pub model: Arc<dyn MaterialModel>,
    pub loads: LoadSet,
    pub elliptic: EllipticOptions,
    pub pmap: DofMap,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// Max-norm bound on polarization iterates. A Picard iterate beyond it
    /// fails the step; an IMEX result beyond it is returned without the
    /// elliptic re-solve.
    pub divergence_bound: f64,
    heat: HashMap<u64, HeatOperator>,
}

impl Simulator {
    pub fn new(
        mesh: Mesh,
        partition: BoundaryPartition,
        model: Arc<dyn MaterialModel>,
        loads: LoadSet,
        elliptic: EllipticOptions,
    ) -> Self {
        let pmap = polarization_dofs(&mesh, &partition);
        let mass = vector_mass(&mesh);
        let stiffness = vector_stiffness(&mesh);
        Self {
            mesh,
            partition,
            model,
            loads,
            elliptic,
            pmap,
            mass,
            stiffness,
            divergence_bound: f64::INFINITY,
            heat: HashMap::new(),
        }
    }

    pub fn from_problem(problem: &Problem, elliptic: EllipticOptions) -> Self {
        Self::new(
            problem.mesh.clone(),
            problem.partition.clone(),
            problem.model.clone(),
            problem.loads.clone(),
            elliptic,
        )
    }

    fn heat(&mut self, dt: f64) -> Result<&HeatOperator, DriverError> {
        let key = dt.to_bits();
        if !self.heat.contains_key(&key) {
            if self.heat.len() > 64 {
                self.heat.clear();
            }
            let op = HeatOperator::new(&self.mass, &self.stiffness, &self.pmap, dt)?;
            self.heat.insert(key, op);
        }
        Ok(&self.heat[&key])
    }

    /// Elliptic solve at `p`, returned as a consistent state at time `t`.
    pub fn equilibrate(&self, t: f64, p: Vec<[f64; 2]>) -> Result<State, DriverError> {
        let mut p = p;
        for &d in &self.pmap.dirichlet {
            p[d / 2][d % 2] = 0.0;
        }
        let s = solve_elliptic(&self.mesh, &self.partition, self.model.as_ref(), &p, &self.loads, t, &self.elliptic)?;
        Ok(State {
            t,
            p,
            u: s.u,
            phi: s.phi,
            elliptic_residual: s.residual,
        })
    }

    /// Whether `p` is finite and the material maps evaluate to finite
    /// values at every node.
    fn evaluable(&self, p: &[[f64; 2]]) -> bool {
        p.iter()
            .all(|v| v[0].is_finite() && v[1].is_finite() && eval_material(self.model.as_ref(), &Vec2::new(v[0], v[1])).is_ok())
    }

    /// Source at time `t` for the state's fields.
    pub fn source(&self, t: f64, s: &State) -> Result<Vec<f64>, DriverError> {
        Ok(eval_source(
            &self.mesh,
            &self.partition,
            &self.pmap,
            self.model.as_ref(),
            &self.loads,
            t,
            &s.u,
            &s.phi,
            &s.p,
        )?)
    }

    /// One step of size `dt`. Returns the new consistent state and the number
    /// of Picard iterations (one in IMEX mode).
    pub fn advance(&mut self, state: &State, dt: f64, picard: &PicardConfig) -> Result<Result<(State, usize), StepFailure>, DriverError> {
        self.advance_from(state, dt, picard, None)
    }

    /// [`Simulator::advance`] with the Picard loop started from `guess`
    /// instead of the old polarization.
    pub fn advance_from(
        &mut self,
        state: &State,
        dt: f64,
        picard: &PicardConfig,
        guess: Option<&[[f64; 2]]>,
    ) -> Result<Result<(State, usize), StepFailure>, DriverError> {
        let t_new = state.t + dt;
        if !picard.enabled {
            let src = self.source(t_new, state)?;
            let p_new = self.heat(dt)?.step(&state.p, &src)?;
            if !p_new.iter().flatten().all(|v| v.is_finite()) {
                return Ok(Err(StepFailure::NonFinite));
            }
            if p_inf(&p_new) > self.divergence_bound {
                return Ok(Ok((
                    State {
                        t: t_new,
                        p: p_new,
                        ..state.clone()
                    },
                    1,
                )));
            }
            if !self.evaluable(&p_new) {
                return Ok(Err(StepFailure::NonFinite));
            }
            return Ok(Ok((self.equilibrate(t_new, p_new)?, 1)));
        }
        let mut iterate = match guess {
            Some(g) => self.equilibrate(t_new, g.to_vec())?,
            None => State { t: t_new, ..state.clone() },
        };
        for j in 1..=picard.max_iters {
            let src = self.source(t_new, &iterate)?;
            let p_new = self.heat(dt)?.step(&state.p, &src)?;
            if p_inf(&p_new) > self.divergence_bound {
                return Ok(Err(StepFailure::Diverged));
            }
            if !self.evaluable(&p_new) {
                return Ok(Err(StepFailure::NonFinite));
            }
            let change = p_new
                .iter()
                .flatten()
                .zip(iterate.p.iter().flatten())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            iterate = self.equilibrate(t_new, p_new)?;
            debug!("picard t={t_new:.6e} j={j} change={change:.3e}");
            if change <= picard.tol {
                return Ok(Ok((iterate, j)));
            }
            if !change.is_finite() {
                return Ok(Err(StepFailure::NonFinite));
            }
        }
        Ok(Err(StepFailure::PicardStall))
    }

    pub fn record(&self, state: &State, dt: f64, picard_iters: usize) -> Result<StepRecord, DriverError> {
        Ok(StepRecord {
            t: state.t,
            energy: energy_breakdown(&self.mesh, self.model.as_ref(), &self.stiffness, state)?,
            p_inf: p_inf(&state.p),
            p_h1: p_h1(&self.mass, &self.stiffness, &state.p),
            picard_iters,
            dt,
            elliptic_residual: state.elliptic_residual,
        })
    }

    /// Finite-difference check of the supplied material derivatives at up
    /// to 64 nodal values of `p` and at zero.
    pub fn derivative_check(&self, p: &[[f64; 2]]) -> Result<(), DriverError> {
        let stride = p.len().div_ceil(64).max(1);
        let mut samples: Vec<Vec2> = p.iter().step_by(stride).map(|v| Vec2::new(v[0], v[1])).collect();
        samples.push(Vec2::zeros());
        let rep = derivative_self_check(self.model.as_ref(), &samples, DERIVATIVE_CHECK_H);
        if rep.passes(DERIVATIVE_CHECK_TOL) {
            Ok(())
        } else {
            Err(DriverError::Assumption(format!(
                "supplied derivative of `{}` disagrees with finite differences (relative error {:e})",
                rep.worst_map, rep.max_rel_error
            )))
        }
    }

    /// Checks pointwise coercivity at the nodal values of `p`.
    pub fn preflight(&self, p: &[[f64; 2]]) -> Result<(), DriverError> {
        let samples: Vec<Vec2> = p.iter().map(|v| Vec2::new(v[0], v[1])).collect();
        let rep = check_pointwise_coercivity(self.model.as_ref(), &samples);
        if rep.alpha_min > 0.0 {
            Ok(())
        } else {
            Err(DriverError::Assumption(format!(
                "pointwise coercivity fails at the initial polarization (alpha_min = {:e})",
                rep.alpha_min
            )))
        }
    }
}

const DERIVATIVE_CHECK_H: f64 = 1e-6;
const DERIVATIVE_CHECK_TOL: f64 = 1e-4;

/// Adaptive step-size controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    pub streak: usize,
}

pub const GROWTH: f64 = 1.5;
pub const GROWTH_STREAK: usize = 5;

impl StepControl {
    pub fn accept(&mut self, tc: &TimeControl) {
        self.streak += 1;
        if self.streak >= GROWTH_STREAK {
            self.dt = (self.dt * GROWTH).clamp(tc.dt_min, tc.dt_max);
            self.streak = 0;
        }
    }

    pub fn reject(&mut self, tc: &TimeControl, tried: f64) {
        self.streak = 0;
        self.dt = (tried * 0.5).clamp(tc.dt_min, tc.dt_max);
    }
}

/// Progress callback: invoked for the initial state and every recorded step.
pub trait Observer {
    fn on_record(&mut self, record: &StepRecord, state: &State, step: usize) -> Result<(), DriverError>;
    /// Invoked after every accepted step with the controller state.
    fn on_accept(&mut self, _state: &State, _control: &StepControl, _steps: usize) -> Result<(), DriverError> {
        Ok(())
    }
}

/// Observer that keeps everything in memory.
#[derive(Debug, Default)]
pub struct Collect {
    pub trajectory: Trajectory,
    pub keep_snapshots: bool,
}

impl Observer for Collect {
    fn on_record(&mut self, record: &StepRecord, state: &State, _step: usize) -> Result<(), DriverError> {
        self.trajectory.records.push(*record);
        if self.keep_snapshots {
            self.trajectory.snapshots.push(state.clone());
        }
        Ok(())
    }
}

/// Where a run starts.
#[derive(Debug, Clone)]
pub struct Start {
    pub state: State,
    pub control: StepControl,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: MaximalTimeReport,
    pub final_state: State,
    pub control: StepControl,
    pub steps: usize,
}

/// Advances from `start` until `tc.t_final` or detected blow-up. Records
/// every `cadence`-th accepted step and the starting state.
pub fn run_from(
    sim: &mut Simulator,
    start: Start,
    tc: &TimeControl,
    picard: &PicardConfig,
    cadence: usize,
    observer: &mut dyn Observer,
) -> Result<RunResult, DriverError> {
    let Start {
        mut state,
        mut control,
        mut steps,
    } = start;
    let cadence = cadence.max(1);
    sim.divergence_bound = tc.blowup_norm_threshold;
    let first = sim.record(&state, control.dt, 0)?;
    observer.on_record(&first, &state, steps)?;
    let mut rejected = 0;
    let mut min_dt = f64::INFINITY;
    let mut max_dt: f64 = 0.0;
    let mut total_iters = 0;
    let end_tol = 1e-12 * tc.t_final.max(1.0);
    let outcome = loop {
        let remaining = tc.t_final - state.t;
        if remaining <= end_tol {
            state.t = tc.t_final;
            break Outcome::ReachedT;
        }
        let last = control.dt >= remaining - end_tol;
        let dt = if last { remaining } else { control.dt };
        match sim.advance(&state, dt, picard)? {
            Ok((mut next, iters)) => {
                if p_inf(&next.p) > tc.blowup_norm_threshold {
                    info!("norm threshold exceeded at t = {:.9e}", next.t);
                    break Outcome::BlowupNorm;
                }
                if last {
                    next.t = tc.t_final;
                }
                state = next;
                steps += 1;
                total_iters += iters;
                min_dt = min_dt.min(dt);
                max_dt = max_dt.max(dt);
                control.accept(tc);
                observer.on_accept(&state, &control, steps)?;
                if steps % cadence == 0 || last {
                    let rec = sim.record(&state, dt, iters)?;
                    observer.on_record(&rec, &state, steps)?;
                }
            }
            Err(failure) => {
                rejected += 1;
                debug!("step rejected at t = {:.9e}, dt = {dt:e}: {failure:?}", state.t);
                if dt <= tc.dt_min * (1.0 + 1e-12) {
                    info!("step failure at the minimal step size, t = {:.9e}", state.t);
                    break Outcome::PicardStall;
                }
                control.reject(tc, dt);
            }
        }
    };
    let report = MaximalTimeReport {
        t_hat: state.t,
        outcome,
        p_inf: p_inf(&state.p),
        p_h1: p_h1(&sim.mass, &sim.stiffness, &state.p),
        accepted_steps: steps,
        rejected_steps: rejected,
        min_dt: if min_dt.is_finite() { min_dt } else { 0.0 },
        max_dt,
        total_picard_iters: total_iters,
    };
    Ok(RunResult {
        report,
        final_state: state,
        control,
        steps,
    })
}

impl RunConfig {
    pub fn time_control(&self) -> TimeControl {
        TimeControl {
            t_final: self.time.t_final,
            dt0: self.time.dt0,
            dt_min: self.time.dt_min,
            dt_max: self.time.dt_max,
            blowup_norm_threshold: self.time.blowup_norm_threshold,
        }
    }

    pub fn picard_config(&self) -> PicardConfig {
        PicardConfig {
            enabled: self.picard.enabled,
            tol: self.picard.tol,
            max_iters: self.picard.max_iters,
        }
    }

    pub fn elliptic_options(&self) -> EllipticOptions {
        EllipticOptions {
            preflight: self.checks.preflight,
            assume_invertible: self.checks.assume_invertible,
            estimate_norm: false,
        }
    }
}

/// Observer that also writes checkpoints after recorded steps.
struct WithCheckpoint<'a> {
    inner: &'a mut dyn Observer,
    path: std::path::PathBuf,
    hash: String,
    cadence: usize,
}

impl Observer for WithCheckpoint<'_> {
    fn on_record(&mut self, record: &StepRecord, state: &State, step: usize) -> Result<(), DriverError> {
        self.inner.on_record(record, state, step)
    }

    fn on_accept(&mut self, state: &State, control: &StepControl, steps: usize) -> Result<(), DriverError> {
        if steps.is_multiple_of(self.cadence) {
            Checkpoint {
                hash: self.hash.clone(),
                state: state.clone(),
                dt: control.dt,
                streak: control.streak,
                steps,
            }
            .write_atomic(&self.path)?;
        }
        self.inner.on_accept(state, control, steps)
    }
}

/// Runs a configuration from its initial state, or from `restart` if
/// given. Writes a checkpoint at the output cadence and at the end when the
/// configuration names a checkpoint path.
pub fn run(cfg: &RunConfig, restart: Option<&Checkpoint>, observer: &mut dyn Observer) -> Result<RunResult, DriverError> {
    let problem = cfg.build()?;
    let mut sim = Simulator::from_problem(&problem, cfg.elliptic_options());
    let tc = cfg.time_control();
    let hash = cfg.physics_hash();
    let start = match restart {
        Some(c) => {
            if c.hash != hash {
                return Err(DriverError::Checkpoint(format!(
                    "checkpoint was written for a different configuration (hash {} vs {})",
                    c.hash, hash
                )));
            }
            if c.state.p.len() != problem.mesh.num_vertices() {
                return Err(DriverError::Checkpoint("checkpoint node count does not match the mesh".into()));
            }
            Start {
                state: c.state.clone(),
                control: StepControl {
                    dt: c.dt,
                    streak: c.streak,
                },
                steps: c.steps,
            }
        }
        None => {
            sim.derivative_check(&problem.p0)?;
            if cfg.checks.preflight {
                sim.preflight(&problem.p0)?;
            }
            Start {
                state: sim.equilibrate(0.0, problem.p0.clone())?,
                control: StepControl {
                    dt: tc.dt0,
                    streak: 0,
                },
                steps: 0,
            }
        }
    };
    let result = match &cfg.output.checkpoint {
        Some(path) => {
            let mut obs = WithCheckpoint {
                inner: observer,
                path: path.clone(),
                hash: hash.clone(),
                cadence: cfg.output.cadence,
            };
            let r = run_from(&mut sim, start, &tc, &cfg.picard_config(), cfg.output.cadence, &mut obs)?;
            Checkpoint {
                hash,
                state: r.final_state.clone(),
                dt: r.control.dt,
                streak: r.control.streak,
                steps: r.steps,
            }
            .write_atomic(path)?;
            r
        }
        None => run_from(&mut sim, start, &tc, &cfg.picard_config(), cfg.output.cadence, observer)?,
    };
    Ok(result)
}
