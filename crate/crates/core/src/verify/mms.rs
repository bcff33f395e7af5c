//! Manufactured-solution convergence studies.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;

use super::{ConvergenceReport, VerifyError};
use crate::driver::{PicardConfig, Simulator};
use crate::elliptic::{solve_elliptic, EllipticOptions};
use crate::fem::{dofs::flatten, vector_mass, Element, QuadratureRule};
use crate::loads::LoadSet;
use crate::materials::tensor::{from_mandel, to_mandel, Vec2};
use crate::materials::{eval_material, LameLaplace, MaterialError, MaterialModel};
use crate::mesh::{build_structured_mesh, tag_boundary, BoundaryPartition, Mesh, Rect, Side, SideRule};

pub type PointMap<T> = Arc<dyn Fn([f64; 2]) -> T + Send + Sync>;
pub type TimeMap = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;

/// Exact elliptic fields on the unit square with their first derivatives,
/// and the polarization the coefficients are frozen at. Dirichlet data on
/// the listed sides is homogeneous; the remaining sides carry the exact
/// tractions.
#[derive(Clone)]
pub struct EllipticExact {
    pub u: PointMap<[f64; 2]>,
    /// `grad_u(x)[i][j] = ∂u_i/∂x_j`.
    pub grad_u: PointMap<[[f64; 2]; 2]>,
    pub phi: PointMap<f64>,
    pub grad_phi: PointMap<[f64; 2]>,
    pub polarization: PointMap<[f64; 2]>,
    pub dirichlet: Vec<Side>,
}

impl EllipticExact {
    /// `u = (sin πx sin πy, 0)`, `φ = xy(1−x)(1−y)`, `P = 0`, clamped on all
    /// sides.
    pub fn sine_poly() -> Self {
        Self {
            u: Arc::new(|[x, y]| [(PI * x).sin() * (PI * y).sin(), 0.0]),
            grad_u: Arc::new(|[x, y]| {
                [
                    [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()],
                    [0.0, 0.0],
                ]
            }),
            phi: Arc::new(|[x, y]| x * y * (1.0 - x) * (1.0 - y)),
            grad_phi: Arc::new(|[x, y]| [(1.0 - 2.0 * x) * y * (1.0 - y), (1.0 - 2.0 * y) * x * (1.0 - x)]),
            polarization: Arc::new(|_| [0.0, 0.0]),
            dirichlet: vec![Side::Left, Side::Right, Side::Bottom, Side::Top],
        }
    }

    /// `u = (x, x/2)`, `φ = x`, `P = 0`, clamped on the left side only.
    /// Lies in the P1 space of every mesh.
    pub fn affine() -> Self {
        Self {
            u: Arc::new(|[x, _]| [x, 0.5 * x]),
            grad_u: Arc::new(|_| [[1.0, 0.0], [0.5, 0.0]]),
            phi: Arc::new(|[x, _]| x),
            grad_phi: Arc::new(|_| [1.0, 0.0]),
            polarization: Arc::new(|_| [0.0, 0.0]),
            dirichlet: vec![Side::Left],
        }
    }

    pub fn with_polarization(mut self, p: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.polarization = Arc::new(p);
        self
    }

    /// Stress and dielectric displacement of the exact fields.
    pub fn fluxes(&self, model: &dyn MaterialModel, x: [f64; 2]) -> Result<(Matrix2<f64>, Vec2), MaterialError> {
        let p = (self.polarization)(x);
        let mp = eval_material(model, &Vec2::new(p[0], p[1]))?;
        let gu = (self.grad_u)(x);
        let eps = to_mandel(&Matrix2::new(gu[0][0], gu[0][1], gu[1][0], gu[1][1]));
        let gp = (self.grad_phi)(x);
        let g = Vec2::new(gp[0], gp[1]);
        let el = eps - mp.eps0;
        let sigma = mp.c * el + mp.e.transpose() * g;
        let d = mp.e * el - mp.epsd * g + mp.p;
        Ok((from_mandel(&sigma), d))
    }

    /// Body loads `f_σ = −div σ`, `f_D = −div D` by fourth-order central
    /// differences of the exactly evaluated fluxes.
    pub fn body_loads(&self, model: &dyn MaterialModel, x: [f64; 2]) -> Result<([f64; 2], f64), MaterialError> {
        const H: f64 = 1e-3;
        let mut f_sigma = [0.0; 2];
        let mut f_d = 0.0;
        for j in 0..2 {
            let mut acc_s = Matrix2::zeros();
            let mut acc_d = Vec2::zeros();
            for (k, c) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
                let mut y = x;
                y[j] += k * H;
                let (s, d) = self.fluxes(model, y)?;
                acc_s += s * c;
                acc_d += d * c;
            }
            for i in 0..2 {
                f_sigma[i] -= acc_s[(i, j)] / (12.0 * H);
            }
            f_d -= acc_d[j] / (12.0 * H);
        }
        Ok((f_sigma, f_d))
    }

    /// Loads for which these fields solve the elliptic problem.
    pub fn loads(&self, model: Arc<dyn MaterialModel>) -> LoadSet {
        let rect = Rect::unit();
        let normal = move |x: [f64; 2]| match Side::locate(&rect, x) {
            Some(Side::Left) => Some([-1.0, 0.0]),
            Some(Side::Right) => Some([1.0, 0.0]),
            Some(Side::Bottom) => Some([0.0, -1.0]),
            Some(Side::Top) => Some([0.0, 1.0]),
            None => None,
        };
        let (e1, m1) = (self.clone(), model.clone());
        let (e2, m2) = (self.clone(), model.clone());
        let (e3, m3) = (self.clone(), model.clone());
        let (e4, m4) = (self.clone(), model);
        LoadSet::zero()
            .with_f_sigma(move |_, x| e1.body_loads(m1.as_ref(), x).map(|l| l.0).unwrap_or([f64::NAN; 2]))
            .with_f_d(move |_, x| e2.body_loads(m2.as_ref(), x).map(|l| l.1).unwrap_or(f64::NAN))
            .with_t_sigma(move |_, x| match (normal(x), e3.fluxes(m3.as_ref(), x)) {
                (Some(n), Ok((s, _))) => [s[(0, 0)] * n[0] + s[(0, 1)] * n[1], s[(1, 0)] * n[0] + s[(1, 1)] * n[1]],
                _ => [f64::NAN; 2],
            })
            .with_t_d(move |_, x| match (normal(x), e4.fluxes(m4.as_ref(), x)) {
                (Some(n), Ok((_, d))) => d[0] * n[0] + d[1] * n[1],
                _ => f64::NAN,
            })
    }

    fn partition(&self, mesh: &Mesh) -> Result<BoundaryPartition, VerifyError> {
        let rect = Rect::unit();
        let rule = SideRule {
            rect,
            dirichlet: self.dirichlet.clone(),
        };
        Ok(tag_boundary(mesh, &rule, &rule, &SideRule::all_dirichlet(rect))?)
    }
}

/// `L²` error of P1 fields `(u, φ)` against the exact fields.
pub fn elliptic_l2_error(mesh: &Mesh, exact: &EllipticExact, u: &[[f64; 2]], phi: &[f64]) -> f64 {
    let rule = QuadratureRule::order5();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        for (xi, w) in rule.iter() {
            let x = el.map(xi);
            let uh = el.interpolate_vec(u, xi);
            let ue = (exact.u)(x);
            let dp = el.interpolate_scalar(phi, xi) - (exact.phi)(x);
            total += w * el.jacobian() * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2) + dp * dp);
        }
    }
    total.sqrt()
}

/// Elliptic solves on `n × n` unit-square meshes for each `n` in `ns`,
/// with `L²` errors of `(u, φ)` fitted against `h = 1/n`. Target order 1.8.
pub fn mms_elliptic(ns: &[usize], model: Arc<dyn MaterialModel>, exact: &EllipticExact) -> Result<ConvergenceReport, VerifyError> {
    let loads = exact.loads(model.clone());
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for &n in ns {
        let mesh = build_structured_mesh(n, n, Rect::unit())?;
        let partition = exact.partition(&mesh)?;
        for v in partition.dirichlet_vertices(&mesh, crate::mesh::Field::Displacement) {
            let x = mesh.vertices[v];
            let (u, phi) = ((exact.u)(x), (exact.phi)(x));
            if u[0].abs().max(u[1].abs()).max(phi.abs()) > 1e-12 {
                return Err(VerifyError::Precondition(format!(
                    "exact solution is nonzero at Dirichlet vertex ({}, {})",
                    x[0], x[1]
                )));
            }
        }
        let p: Vec<[f64; 2]> = mesh.vertices.iter().map(|&x| (exact.polarization)(x)).collect();
        let s = solve_elliptic(&mesh, &partition, model.as_ref(), &p, &loads, 0.0, &EllipticOptions::default())?;
        levels.push(1.0 / n as f64);
        errors.push(elliptic_l2_error(&mesh, exact, &s.u, &s.phi));
    }
    ConvergenceReport::new(levels, errors, 1.8)
}

/// Exact polarization and the matching `f_P`.
#[derive(Clone)]
pub struct ParabolicExact {
    pub p: TimeMap,
    pub f_p: TimeMap,
}

/// Divergence-free field vanishing on the boundary of the unit square,
/// the curl of `sin²πx sin²πy`.
pub fn vortex(x: [f64; 2]) -> [f64; 2] {
    let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
    [PI * sx * sx * (2.0 * PI * x[1]).sin(), -PI * (2.0 * PI * x[0]).sin() * sy * sy]
}

/// Laplacian of [`vortex`].
pub fn vortex_laplacian(x: [f64; 2]) -> [f64; 2] {
    let c = 2.0 * PI.powi(3);
    [
        c * (2.0 * PI * x[1]).sin() * (2.0 * (2.0 * PI * x[0]).cos() - 1.0),
        -c * (2.0 * PI * x[0]).sin() * (2.0 * (2.0 * PI * x[1]).cos() - 1.0),
    ]
}

impl ParabolicExact {
    /// `P = e^{−t} v(x)` with `v` the boundary-vanishing vortex. Being
    /// divergence free, it induces no potential in the continuous problem.
    pub fn decaying_vortex() -> Self {
        Self {
            p: Arc::new(|t, x| vortex(x).map(|v| (-t).exp() * v)),
            f_p: Arc::new(|t, x| {
                let (v, l) = (vortex(x), vortex_laplacian(x));
                [0, 1].map(|i| (-t).exp() * (-v[i] - l[i]))
            }),
        }
    }

    /// Time-independent `P = v(x)`.
    pub fn stationary_vortex() -> Self {
        Self {
            p: Arc::new(|_, x| vortex(x)),
            f_p: Arc::new(|_, x| vortex_laplacian(x).map(|l| -l)),
        }
    }
}

/// Fixed-mesh setup of the temporal study.
#[derive(Debug, Clone)]
pub struct ParabolicMms {
    pub n: usize,
    pub t_final: f64,
    pub model: Arc<dyn MaterialModel>,
}

impl Default for ParabolicMms {
    fn default() -> Self {
        Self {
            n: 32,
            t_final: 0.5,
            model: Arc::new(LameLaplace::default()),
        }
    }
}

fn l2_vec_error(mesh: &Mesh, p: &[[f64; 2]], f: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let rule = QuadratureRule::order5();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        for (xi, w) in rule.iter() {
            let ph = el.interpolate_vec(p, xi);
            let pe = f(el.map(xi));
            total += w * el.jacobian() * ((ph[0] - pe[0]).powi(2) + (ph[1] - pe[1]).powi(2));
        }
    }
    total.sqrt()
}

/// Temporal convergence on a fixed mesh with all fields clamped. The error
/// of step `dt` is measured against the run with step `dt/2`; the errors
/// against the exact solution and an extrapolated spatial floor are
/// reported alongside. Target order 0.9.
pub fn mms_parabolic(setup: &ParabolicMms, dts: &[f64], exact: &ParabolicExact) -> Result<ConvergenceReport, VerifyError> {
    super::check_levels(dts)?;
    let rect = Rect::unit();
    let mesh = build_structured_mesh(setup.n, setup.n, rect)?;
    let all = SideRule::all_dirichlet(rect);
    let partition = tag_boundary(&mesh, &all, &all, &all)?;
    let f_p = exact.f_p.clone();
    let loads = LoadSet::zero().with_f_p(move |t, x| f_p(t, x));
    let mut sim = Simulator::new(mesh.clone(), partition, setup.model.clone(), loads, EllipticOptions::default());
    let p0: Vec<[f64; 2]> = mesh.vertices.iter().map(|&x| (exact.p)(0.0, x)).collect();
    let t_final = setup.t_final;

    let mut cache: HashMap<u64, Vec<[f64; 2]>> = HashMap::new();
    let mut solve = |dt: f64| -> Result<Vec<[f64; 2]>, VerifyError> {
        if let Some(p) = cache.get(&dt.to_bits()) {
            return Ok(p.clone());
        }
        let steps = (t_final / dt).round() as usize;
        if steps == 0 || ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
            return Err(VerifyError::Levels(format!("time step {dt} does not divide {t_final}")));
        }
        let mut state = sim.equilibrate(0.0, p0.clone())?;
        for k in 1..=steps {
            state = match sim.advance(&state, dt, &PicardConfig::default())? {
                Ok((s, _)) => s,
                Err(f) => return Err(VerifyError::Precondition(format!("step {k} with dt = {dt} failed: {f:?}"))),
            };
        }
        cache.insert(dt.to_bits(), state.p.clone());
        Ok(state.p)
    };

    let mut errors = Vec::new();
    let mut runs = Vec::new();
    for &dt in dts {
        let coarse = solve(dt)?;
        let fine = solve(0.5 * dt)?;
        let diff: Vec<[f64; 2]> = coarse.iter().zip(&fine).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
        let m = vector_mass(&mesh);
        let d = flatten(&diff);
        errors.push(m.pair(&d, &d).max(0.0).sqrt());
        runs.push((coarse, fine));
    }
    let exact_t = |x| (exact.p)(t_final, x);
    let exact_errors: Vec<f64> = runs.iter().map(|(c, _)| l2_vec_error(&mesh, c, exact_t)).collect();
    let (c, f) = runs.last().expect("at least three levels");
    let extrapolated: Vec<[f64; 2]> = c.iter().zip(f).map(|(a, b)| [2.0 * b[0] - a[0], 2.0 * b[1] - a[1]]).collect();
    let floor = l2_vec_error(&mesh, &extrapolated, exact_t);

    let mut report = ConvergenceReport::new(dts.to_vec(), errors, 0.9)?;
    report.saturated = exact_errors.iter().map(|e| *e < 2.0 * floor).collect();
    if report.saturated.iter().any(|s| *s) {
        report
            .diagnostics
            .push(format!("levels within twice the spatial floor {floor:.3e} are flagged"));
    }
    report.exact_errors = Some(exact_errors);
    report.floor = Some(floor);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::PolyPiezo;

    fn closed_form_loads(x: [f64; 2]) -> ([f64; 2], f64) {
        let (l, m, g) = (1.0, 1.0, 1.0);
        let [x, y] = x;
        let (sx, sy, cx, cy) = ((PI * x).sin(), (PI * y).sin(), (PI * x).cos(), (PI * y).cos());
        let p2 = PI * PI;
        let f_sigma = [(l + m) * p2 * sx * sy + 2.0 * m * p2 * sx * sy, -(l + m) * p2 * cx * cy];
        let lap_phi = -2.0 * y * (1.0 - y) - 2.0 * x * (1.0 - x);
        (f_sigma, g * lap_phi)
    }

    #[test]
    fn manufactured_loads_match_closed_form() {
        let exact = EllipticExact::sine_poly();
        let model = LameLaplace::default();
        for x in [[0.3, 0.7], [0.5, 0.5], [0.11, 0.93]] {
            let (fs, fd) = exact.body_loads(&model, x).unwrap();
            let (gs, gd) = closed_form_loads(x);
            for i in 0..2 {
                assert!((fs[i] - gs[i]).abs() < 1e-8, "{fs:?} {gs:?}");
            }
            assert!((fd - gd).abs() < 1e-8, "{fd} {gd}");
        }
    }

    #[test]
    fn vortex_laplacian_matches_differences() {
        let h = 1e-3;
        for x in [[0.2, 0.6], [0.45, 0.1]] {
            let l = vortex_laplacian(x);
            let c = vortex(x);
            let mut fd = [0.0; 2];
            for d in 0..2 {
                let mut a = x;
                let mut b = x;
                a[d] += h;
                b[d] -= h;
                let (va, vb) = (vortex(a), vortex(b));
                for i in 0..2 {
                    fd[i] += (va[i] - 2.0 * c[i] + vb[i]) / (h * h);
                }
            }
            for i in 0..2 {
                assert!((fd[i] - l[i]).abs() < 1e-3 * l[i].abs().max(1.0), "{fd:?} {l:?}");
            }
        }
    }

    #[test]
    fn vortex_is_divergence_free_and_vanishes_on_boundary() {
        let h = 1e-5;
        let x = [0.37, 0.81];
        let div = (vortex([x[0] + h, x[1]])[0] - vortex([x[0] - h, x[1]])[0]) / (2.0 * h)
            + (vortex([x[0], x[1] + h])[1] - vortex([x[0], x[1] - h])[1]) / (2.0 * h);
        assert!(div.abs() < 1e-8);
        for s in [0.0, 0.3, 1.0] {
            for p in [[0.0, s], [1.0, s], [s, 0.0], [s, 1.0]] {
                let v = vortex(p);
                assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn affine_solution_is_reproduced() {
        let r = mms_elliptic(&[2, 4, 8], Arc::new(LameLaplace::default()), &EllipticExact::affine()).unwrap();
        assert!(r.errors.iter().all(|e| *e < 1e-11), "{r}");
    }

    #[test]
    fn affine_solution_with_frozen_polarization_is_reproduced() {
        let exact = EllipticExact::affine().with_polarization(|_| [0.2, -0.1]);
        let r = mms_elliptic(&[2, 4, 8], Arc::new(PolyPiezo::default()), &exact).unwrap();
        assert!(r.errors.iter().all(|e| *e < 1e-10), "{r}");
    }

    #[test]
    fn nonzero_dirichlet_data_rejected() {
        let mut exact = EllipticExact::affine();
        exact.dirichlet = vec![Side::Right];
        assert!(matches!(
            mms_elliptic(&[2, 4, 8], Arc::new(LameLaplace::default()), &exact),
            Err(VerifyError::Precondition(_))
        ));
    }

    #[test]
    fn stationary_solution_sits_on_the_floor() {
        let setup = ParabolicMms {
            n: 8,
            t_final: 0.5,
            ..Default::default()
        };
        let r = mms_parabolic(&setup, &[0.1, 0.05, 0.025], &ParabolicExact::stationary_vortex()).unwrap();
        let e = r.exact_errors.as_ref().unwrap();
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
        assert!(hi / lo < 1.05, "{r}");
        assert!(r.saturated.iter().all(|s| *s), "{r}");
    }

    #[test]
    fn coarse_mesh_small_steps_flag_floor() {
        let setup = ParabolicMms {
            n: 4,
            t_final: 0.5,
            ..Default::default()
        };
        let r = mms_parabolic(&setup, &[0.05, 0.025, 0.0125], &ParabolicExact::decaying_vortex()).unwrap();
        assert!(r.saturated.iter().any(|s| *s), "{r}");
    }
}
