//! Polarization evolution: energies, the nonlinear source and the implicit
//! heat step `(M + dt K) P_new = M P_old + dt S`.

use nalgebra::DVector;

use thiserror::Error;

use crate::elliptic::facet_load;
use crate::fem::dofs::{flatten, unflatten};
use crate::fem::{
    assemble_facets, assemble_vector, constrain_homogeneous, shape, vector_mass, vector_stiffness, CsrMatrix,
    DofMap, Element, FemError, LuFactor, QuadratureRule,
};
use crate::fem::sparse::dot;
use crate::loads::LoadSet;
use crate::materials::tensor::{strain, Mandel, Vec2};
use crate::materials::{eval_material, MaterialError, MaterialModel, MaterialPoint};
use crate::mesh::{BcKind, BoundaryPartition, Field, Mesh};

#[derive(Debug, Error)]
pub enum ParabolicError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Coupled state at one time level. `u` and `φ` solve the elliptic problem
/// for this `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub p: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
    pub phi: Vec<f64>,
    pub elliptic_residual: f64,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self {
            t: 0.0,
            p: vec![[0.0; 2]; n],
            u: vec![[0.0; 2]; n],
            phi: vec![0.0; n],
            elliptic_residual: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    /// `∫ H`.
    pub bulk: f64,
    /// `∫ ω(P)`.
    pub separation: f64,
    /// `½ ∫ |∇P|²`.
    pub exchange: f64,
    pub total: f64,
    /// `½ ∫ P·∇φ`.
    pub electrostatic: f64,
}

impl EnergyBreakdown {
    /// Energy with the bulk term replaced by `½ ∫ P·∇φ`; a Lyapunov function
    /// of the flow without coupling or spontaneous strain.
    pub fn reduced_total(&self) -> f64 {
        self.electrostatic + self.separation + self.exchange
    }
}

/// Bulk energy density
/// `H = ½C(ε−ε⁰):(ε−ε⁰) − e(ε−ε⁰)·g − ½ εd g·g + g·P`, with `g = ∇φ`.
pub fn bulk_energy_density(mp: &MaterialPoint, eps: &Mandel, g: &Vec2, p: &Vec2) -> f64 {
    let ep = eps - mp.eps0;
    0.5 * ep.dot(&(mp.c * ep)) - (mp.e * ep).dot(g) - 0.5 * g.dot(&(mp.epsd * g)) + g.dot(p)
}

/// Gradient of `H` with respect to `P` at fixed `(ε, g)`.
pub fn bulk_energy_gradient(mp: &MaterialPoint, eps: &Mandel, g: &Vec2) -> Vec2 {
    let ep = eps - mp.eps0;
    let mut h = *g;
    for k in 0..2 {
        let s1 = 0.5 * (ep.dot(&(mp.dc[k] * ep)) - 2.0 * g.dot(&(mp.de[k] * ep)) - g.dot(&(mp.depsd[k] * g)));
        let s2 = -(mp.c * mp.deps0[k]).dot(&ep) + (mp.e * mp.deps0[k]).dot(g);
        h[k] += s1 + s2;
    }
    h
}

pub fn polarization_dofs(mesh: &Mesh, partition: &BoundaryPartition) -> DofMap {
    DofMap::new(mesh, partition, Field::Polarization, 0)
}

struct Kinematics {
    eps: Mandel,
    g: Vec2,
}

fn kinematics(el: &Element, u: &[[f64; 2]], phi: &[f64]) -> Kinematics {
    Kinematics {
        eps: strain(&el.local_vec(u), &el.grads),
        g: el.gradient(phi),
    }
}

fn at(model: &dyn MaterialModel, el: &Element, p: &[[f64; 2]], xi: [f64; 2]) -> Result<MaterialPoint, MaterialError> {
    eval_material(model, &el.interpolate_vec(p, xi))
}

/// `∫ H dx`.
pub fn bulk_energy(mesh: &Mesh, model: &dyn MaterialModel, u: &[[f64; 2]], phi: &[f64], p: &[[f64; 2]]) -> Result<f64, MaterialError> {
    let rule = QuadratureRule::order2();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        let k = kinematics(&el, u, phi);
        for (xi, w) in rule.iter() {
            let mp = at(model, &el, p, xi)?;
            total += w * el.jacobian() * bulk_energy_density(&mp, &k.eps, &k.g, &mp.p);
        }
    }
    Ok(total)
}

pub fn separation_energy(mesh: &Mesh, model: &dyn MaterialModel, p: &[[f64; 2]]) -> f64 {
    let rule = QuadratureRule::order2();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        for (xi, w) in rule.iter() {
            total += w * el.jacobian() * model.separation(&el.interpolate_vec(p, xi));
        }
    }
    total
}

pub fn exchange_energy(stiffness: &CsrMatrix, p: &[[f64; 2]]) -> f64 {
    let v = flatten(p);
    0.5 * stiffness.pair(&v, &v)
}

pub fn electrostatic_energy(mesh: &Mesh, p: &[[f64; 2]], phi: &[f64]) -> f64 {
    let rule = QuadratureRule::order2();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        let g = el.gradient(phi);
        for (xi, w) in rule.iter() {
            total += w * el.jacobian() * el.interpolate_vec(p, xi).dot(&g);
        }
    }
    0.5 * total
}

pub fn energy_breakdown(
    mesh: &Mesh,
    model: &dyn MaterialModel,
    stiffness: &CsrMatrix,
    state: &State,
) -> Result<EnergyBreakdown, MaterialError> {
    let bulk = bulk_energy(mesh, model, &state.u, &state.phi, &state.p)?;
    let separation = separation_energy(mesh, model, &state.p);
    let exchange = exchange_energy(stiffness, &state.p);
    Ok(EnergyBreakdown {
        bulk,
        separation,
        exchange,
        total: bulk + separation + exchange,
        electrostatic: electrostatic_energy(mesh, &state.p, &state.phi),
    })
}

fn assemble_pointwise(
    mesh: &Mesh,
    map: &DofMap,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
    f: impl Fn(&Element, &MaterialPoint) -> Vec2,
) -> Result<Vec<f64>, ParabolicError> {
    let rule = QuadratureRule::order2();
    assemble_vector(mesh, &[map], map.end(), |el| {
        let mut v = DVector::zeros(6);
        for (xi, w) in rule.iter() {
            let mp = at(model, el, p, xi)?;
            let h = f(el, &mp);
            let n = shape(xi);
            let wj = w * el.jacobian();
            for a in 0..3 {
                for c in 0..2 {
                    v[2 * a + c] += wj * n[a] * h[c];
                }
            }
        }
        Ok::<_, ParabolicError>(v)
    })
}

/// `∫ D_P H · P̄` for every hat `P̄`, with `(u, φ)` frozen.
pub fn assemble_dph(
    mesh: &Mesh,
    map: &DofMap,
    model: &dyn MaterialModel,
    u: &[[f64; 2]],
    phi: &[f64],
    p: &[[f64; 2]],
) -> Result<Vec<f64>, ParabolicError> {
    assemble_pointwise(mesh, map, model, p, |el, mp| {
        let k = kinematics(el, u, phi);
        bulk_energy_gradient(mp, &k.eps, &k.g)
    })
}

/// `∫ D_P ω · P̄`.
pub fn assemble_domega(mesh: &Mesh, map: &DofMap, model: &dyn MaterialModel, p: &[[f64; 2]]) -> Result<Vec<f64>, ParabolicError> {
    assemble_pointwise(mesh, map, model, p, |_, mp| mp.domega)
}

/// `∫ f_P·P̄ + ∫_{Neumann(P)} t_P·P̄`.
pub fn assemble_l3(mesh: &Mesh, partition: &BoundaryPartition, map: &DofMap, loads: &LoadSet, t: f64) -> Vec<f64> {
    let rule = QuadratureRule::order2();
    let n = map.end();
    let body = assemble_vector::<FemError, _>(mesh, &[map], n, |el| {
        let mut v = DVector::zeros(6);
        for (xi, w) in rule.iter() {
            let f = (loads.f_p)(t, el.map(xi));
            let nn = shape(xi);
            for a in 0..3 {
                for c in 0..2 {
                    v[2 * a + c] += w * el.jacobian() * nn[a] * f[c];
                }
            }
        }
        Ok(v)
    })
    .expect("polarization DOFs are in range");
    let edge = assemble_facets::<FemError, _>(mesh, &[map], n, partition.facets(Field::Polarization, BcKind::Neumann), |f| {
        Ok(facet_load(mesh, f, 2, |x| (loads.t_p)(t, x)))
    })
    .expect("polarization DOFs are in range");
    body.iter().zip(&edge).map(|(a, b)| a + b).collect()
}

/// Source `S = −D_P H − D_P ω + ℓ₃` as a dual vector on the P unknowns.
#[allow(clippy::too_many_arguments)]
pub fn eval_source(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    map: &DofMap,
    model: &dyn MaterialModel,
    loads: &LoadSet,
    t: f64,
    u: &[[f64; 2]],
    phi: &[f64],
    p: &[[f64; 2]],
) -> Result<Vec<f64>, ParabolicError> {
    let dph = assemble_dph(mesh, map, model, u, phi, p)?;
    let dw = assemble_domega(mesh, map, model, p)?;
    let l3 = assemble_l3(mesh, partition, map, loads, t);
    Ok((0..dph.len()).map(|i| -dph[i] - dw[i] + l3[i]).collect())
}

/// Factorized `M + dt K` with homogeneous Dirichlet rows.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    pub dt: f64,
    mass: CsrMatrix,
    dirichlet: Vec<usize>,
    lu: LuFactor,
}

impl HeatOperator {
    pub fn new(mass: &CsrMatrix, stiffness: &CsrMatrix, map: &DofMap, dt: f64) -> Result<Self, FemError> {
        if !(dt > 0.0) {
            return Err(FemError::Dimension(format!("time step {dt} must be positive")));
        }
        let a = mass.add_scaled(dt, stiffness);
        let sys = constrain_homogeneous(&a, &vec![0.0; a.nrows()], &map.dirichlet)?;
        Ok(Self {
            dt,
            mass: mass.clone(),
            dirichlet: map.dirichlet.clone(),
            lu: LuFactor::new(&sys.matrix)?,
        })
    }

    /// One step from `p_old` with the given source.
    pub fn step(&self, p_old: &[[f64; 2]], source: &[f64]) -> Result<Vec<[f64; 2]>, FemError> {
        let mut rhs = self.mass.matvec(&flatten(p_old));
        for (r, s) in rhs.iter_mut().zip(source) {
            *r += self.dt * s;
        }
        for &d in &self.dirichlet {
            rhs[d] = 0.0;
        }
        let (x, _) = self.lu.solve(&rhs)?;
        let mut p = unflatten(&x);
        for &d in &self.dirichlet {
            p[d / 2][d % 2] = 0.0;
        }
        Ok(p)
    }
}

/// One implicit-Laplacian, explicit-source step.
pub fn step_imex(
    state: &State,
    dt: f64,
    source: &[f64],
    mesh: &Mesh,
    partition: &BoundaryPartition,
) -> Result<Vec<[f64; 2]>, FemError> {
    let map = polarization_dofs(mesh, partition);
    HeatOperator::new(&vector_mass(mesh), &vector_stiffness(mesh), &map, dt)?.step(&state.p, source)
}

pub fn p_inf(p: &[[f64; 2]]) -> f64 {
    p.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Discrete `H¹` norm `(PᵀMP + PᵀKP)^½`.
pub fn p_h1(mass: &CsrMatrix, stiffness: &CsrMatrix, p: &[[f64; 2]]) -> f64 {
    let v = flatten(p);
    (dot(&v, &mass.matvec(&v)) + dot(&v, &stiffness.matvec(&v))).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::tensor::isotropic;
    use crate::materials::{LameLaplace, PolyPiezo};
    use crate::mesh::{build_structured_mesh, Rect};

    fn point(c: crate::materials::tensor::Stiffness, gamma: f64) -> MaterialPoint {
        let mut mp = eval_material(&LameLaplace::new(1.0, 1.0, gamma), &Vec2::zeros()).unwrap();
        mp.c = c;
        mp
    }

    #[test]
    fn density_examples() {
        let zero = point(isotropic(1.0, 1.0), 1.0);
        assert_eq!(bulk_energy_density(&zero, &Mandel::zeros(), &Vec2::zeros(), &Vec2::zeros()), 0.0);

        let mp = point(crate::materials::tensor::Stiffness::identity() * 2.0, 1.0);
        let h = bulk_energy_density(&mp, &Mandel::new(1.0, 1.0, 0.0), &Vec2::new(1.0, 0.0), &Vec2::new(0.0, 1.0));
        assert!((h - 1.5).abs() < 1e-15);

        let h = bulk_energy_density(&zero, &Mandel::zeros(), &Vec2::new(1.0, 0.0), &Vec2::new(1.0, 0.0));
        assert!((h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_model_dph_is_field_load() {
        let m = build_structured_mesh(3, 3, Rect::unit()).unwrap();
        let part = BoundaryPartition::uniform(&m, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann);
        let map = polarization_dofs(&m, &part);
        let n = m.num_vertices();
        let phi: Vec<f64> = m.vertices.iter().map(|v| v[0] * v[0] - 0.5 * v[1]).collect();
        let u: Vec<[f64; 2]> = m.vertices.iter().map(|v| [v[1], -v[0] * v[1]]).collect();
        let p: Vec<[f64; 2]> = (0..n).map(|i| [0.1 * i as f64, -0.05]).collect();
        let got = assemble_dph(&m, &map, &LameLaplace::default(), &u, &phi, &p).unwrap();
        // ∫ ∇φ·P̄ with constant ∇φ per triangle: area/3 per vertex.
        let mut expected = vec![0.0; 2 * n];
        for t in 0..m.num_triangles() {
            let el = Element::new(&m, t);
            let g = el.gradient(&phi);
            for &v in &el.nodes {
                expected[2 * v] += el.area / 3.0 * g[0];
                expected[2 * v + 1] += el.area / 3.0 * g[1];
            }
        }
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let zero = assemble_dph(&m, &map, &LameLaplace::default(), &u, &vec![0.0; n], &p).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_separation_source_is_mass_action() {
        let m = build_structured_mesh(3, 2, Rect::unit()).unwrap();
        let part = BoundaryPartition::uniform(&m, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann);
        let map = polarization_dofs(&m, &part);
        let n = m.num_vertices();
        let p = vec![[1.0, 0.0]; n];
        let model = LameLaplace::with_separation(1.0, 1.0, 1.0, 1.0);
        let s = eval_source(&m, &part, &map, &model, &LoadSet::zero(), 0.0, &vec![[0.0; 2]; n], &vec![0.0; n], &p).unwrap();
        let mp = vector_mass(&m).matvec(&flatten(&p));
        for (a, b) in s.iter().zip(&mp) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn l3_examples() {
        let m = build_structured_mesh(4, 4, Rect::unit()).unwrap();
        let part = BoundaryPartition::uniform(&m, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann);
        let map = polarization_dofs(&m, &part);
        assert!(assemble_l3(&m, &part, &map, &LoadSet::zero(), 0.0).iter().all(|&v| v == 0.0));
        let l = assemble_l3(&m, &part, &map, &LoadSet::zero().with_f_p(|_, _| [1.0, 0.0]), 0.0);
        assert!((l.iter().step_by(2).sum::<f64>() - 1.0).abs() < 1e-13);
        let top = LoadSet::zero().with_t_p(|_, x| if (x[1] - 1.0).abs() < 1e-12 { [0.0, 1.0] } else { [0.0; 2] });
        let l = assemble_l3(&m, &part, &map, &top, 0.0);
        assert!((l.iter().skip(1).step_by(2).sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(l.iter().step_by(2).all(|&v| v == 0.0));
    }

    #[test]
    fn constants_are_preserved_without_dirichlet() {
        let m = build_structured_mesh(5, 5, Rect::unit()).unwrap();
        let part = BoundaryPartition::uniform(&m, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann);
        let mut s = State::zeros(m.num_vertices());
        s.p = vec![[0.3, -1.2]; m.num_vertices()];
        let p = step_imex(&s, 0.1, &vec![0.0; 2 * m.num_vertices()], &m, &part).unwrap();
        for v in p {
            assert!((v[0] - 0.3).abs() < 1e-12 && (v[1] + 1.2).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_nodes_stay_zero() {
        let m = build_structured_mesh(4, 4, Rect::unit()).unwrap();
        let part = BoundaryPartition::uniform(&m, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Dirichlet);
        let map = polarization_dofs(&m, &part);
        let s = State::zeros(m.num_vertices());
        let p = step_imex(&s, 0.05, &vec![1.0; 2 * m.num_vertices()], &m, &part).unwrap();
        for &d in &map.dirichlet {
            assert_eq!(p[d / 2][d % 2], 0.0);
        }
        assert!(p_inf(&p) > 0.0);
    }

    #[test]
    fn dph_matches_energy_differences() {
        let m = build_structured_mesh(3, 3, Rect::unit()).unwrap();
        let part = BoundaryPartition::uniform(&m, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann);
        let map = polarization_dofs(&m, &part);
        let n = m.num_vertices();
        let model = PolyPiezo::default();
        let u: Vec<[f64; 2]> = m.vertices.iter().map(|v| [0.1 * v[0] * v[1], 0.2 * v[0]]).collect();
        let phi: Vec<f64> = m.vertices.iter().map(|v| v[0] - 0.3 * v[1] * v[1]).collect();
        let p: Vec<[f64; 2]> = m.vertices.iter().map(|v| [0.5 * v[1], 0.4 - v[0]]).collect();
        let dir: Vec<[f64; 2]> = (0..n).map(|i| [((i * 7) % 5) as f64 - 2.0, ((i * 3) % 4) as f64 - 1.5]).collect();
        let g = assemble_dph(&m, &map, &model, &u, &phi, &p).unwrap();
        let pairing = dot(&g, &flatten(&dir));
        let h = 1e-5;
        let shift = |s: f64| -> Vec<[f64; 2]> { p.iter().zip(&dir).map(|(a, d)| [a[0] + s * d[0], a[1] + s * d[1]]).collect() };
        let fd = (bulk_energy(&m, &model, &u, &phi, &shift(h)).unwrap() - bulk_energy(&m, &model, &u, &phi, &shift(-h)).unwrap()) / (2.0 * h);
        assert!((fd - pairing).abs() <= 1e-6 * pairing.abs().max(1.0));
    }
}
