//! Independent oracles: finite differences of the bulk energy, dense
//! brute-force assembly, and an empirical Lipschitz constant of the source.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::VerifyError;
use crate::driver::{DriverError, Simulator};
use crate::elliptic::{assemble_l1, assemble_l2, local_l_p, EllipticDofs, EllipticOptions};
use crate::fem::{
    assemble_bilinear, dofs::flatten, local_mass, scalar_stiffness, DofMap, QuadratureRule,
};
use crate::loads::LoadSet;
use crate::materials::tensor::{from_mandel, to_mandel, Coupling, Dielectric, Mandel, Stiffness, Vec2};
use crate::materials::{eval_material, MaterialModel};
use crate::mesh::{build_structured_mesh, BcKind, BoundaryPartition, Field, Mesh, Rect};
use crate::parabolic::{assemble_dph, assemble_l3, bulk_energy, polarization_dofs, State};

/// Model whose stiffness derivative is scaled by `factor`; every other map
/// is delegated unchanged.
#[derive(Debug, Clone)]
pub struct ScaledStiffnessDerivative<M> {
    pub inner: M,
    pub factor: f64,
}

impl<M: MaterialModel> MaterialModel for ScaledStiffnessDerivative<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn stiffness(&self, p: &Vec2) -> Stiffness {
        self.inner.stiffness(p)
    }
    fn stiffness_grad(&self, p: &Vec2) -> [Stiffness; 2] {
        self.inner.stiffness_grad(p).map(|d| d * self.factor)
    }
    fn dielectric(&self, p: &Vec2) -> Dielectric {
        self.inner.dielectric(p)
    }
    fn dielectric_grad(&self, p: &Vec2) -> [Dielectric; 2] {
        self.inner.dielectric_grad(p)
    }
    fn coupling(&self, p: &Vec2) -> Coupling {
        self.inner.coupling(p)
    }
    fn coupling_grad(&self, p: &Vec2) -> [Coupling; 2] {
        self.inner.coupling_grad(p)
    }
    fn plastic_strain(&self, p: &Vec2) -> Mandel {
        self.inner.plastic_strain(p)
    }
    fn plastic_strain_grad(&self, p: &Vec2) -> [Mandel; 2] {
        self.inner.plastic_strain_grad(p)
    }
    fn separation(&self, p: &Vec2) -> f64 {
        self.inner.separation(p)
    }
    fn separation_grad(&self, p: &Vec2) -> Vec2 {
        self.inner.separation_grad(p)
    }
}

fn uniform_field(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp)]).collect()
}

/// [`gradient_check_h_with`] at step `1e-5` and a fixed seed.
pub fn gradient_check_h(model: &dyn MaterialModel, n_samples: usize) -> Result<f64, VerifyError> {
    gradient_check_h_with(model, n_samples, 1e-5, 2024)
}

/// Largest relative deviation between the assembled `D_P H` paired with a
/// random nodal direction and the central difference of the bulk energy
/// along it. Samples random `(u, φ, P)` on a 4×4 unit-square mesh.
pub fn gradient_check_h_with(model: &dyn MaterialModel, n_samples: usize, h: f64, seed: u64) -> Result<f64, VerifyError> {
    let mesh = build_structured_mesh(4, 4, Rect::unit())?;
    let map = DofMap::free(&mesh, Field::Polarization, 0);
    let n = mesh.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let p = uniform_field(&mut rng, n, 0.6);
        let u = uniform_field(&mut rng, n, 0.3);
        let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..=0.2)).collect();
        let dir = uniform_field(&mut rng, n, 1.0);
        let grad = assemble_dph(&mesh, &map, model, &u, &phi, &p)?;
        let analytic: f64 = grad.iter().zip(flatten(&dir)).map(|(g, d)| g * d).sum();
        let shifted = |s: f64| -> Vec<[f64; 2]> {
            p.iter().zip(&dir).map(|(a, d)| [a[0] + s * d[0], a[1] + s * d[1]]).collect()
        };
        let hp = bulk_energy(&mesh, model, &u, &phi, &shifted(h))?;
        let hm = bulk_energy(&mesh, model, &u, &phi, &shifted(-h))?;
        let fd = (hp - hm) / (2.0 * h);
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Largest absolute deviation per operator between the sparse pipeline and
/// a dense brute-force assembly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleDeviation {
    pub l_p: f64,
    pub mass: f64,
    pub stiffness: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl OracleDeviation {
    pub fn max(&self) -> f64 {
        [self.l_p, self.mass, self.stiffness, self.l1, self.l2, self.l3]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Hat-function data of one triangle from the inverse Vandermonde matrix.
struct DenseTriangle {
    x: [[f64; 2]; 3],
    area: f64,
    grad: [[f64; 2]; 3],
}

impl DenseTriangle {
    fn new(mesh: &Mesh, t: usize) -> Self {
        let x = mesh.triangles[t].map(|v| mesh.vertices[v]);
        let v = Matrix3::new(1.0, x[0][0], x[0][1], 1.0, x[1][0], x[1][1], 1.0, x[2][0], x[2][1]);
        let area = 0.5 * v.determinant().abs();
        let c = v.try_inverse().expect("non-degenerate triangle");
        let grad = [0, 1, 2].map(|a| [c[(1, a)], c[(2, a)]]);
        Self { x, area, grad }
    }

    /// Barycentric coordinates and weights of the three-point rule.
    fn points(&self) -> Vec<([f64; 3], [f64; 2], f64)> {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        [[a, b, b], [b, a, b], [b, b, a]]
            .into_iter()
            .map(|l| {
                let p = [0, 1].map(|d| l[0] * self.x[0][d] + l[1] * self.x[1][d] + l[2] * self.x[2][d]);
                (l, p, self.area / 3.0)
            })
            .collect()
    }

    fn strain(&self, a: usize, c: usize) -> Matrix2<f64> {
        let mut g = Matrix2::zeros();
        g[(c, 0)] = self.grad[a][0];
        g[(c, 1)] = self.grad[a][1];
        (g + g.transpose()) * 0.5
    }
}

fn contract(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn max_dense_dev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn max_vec_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn edge_points(mesh: &Mesh, f: usize) -> ([usize; 2], Vec<([f64; 2], [f64; 2], f64)>) {
    let [a, b] = mesh.boundary_facets[f].vertices;
    let (xa, xb) = (mesh.vertices[a], mesh.vertices[b]);
    let len = ((xb[0] - xa[0]).powi(2) + (xb[1] - xa[1]).powi(2)).sqrt();
    let d = 0.5 / 3f64.sqrt();
    let pts = [0.5 - d, 0.5 + d]
        .into_iter()
        .map(|s| ([1.0 - s, s], [xa[0] + s * (xb[0] - xa[0]), xa[1] + s * (xb[1] - xa[1])], 0.5 * len))
        .collect();
    ([a, b], pts)
}

/// Dense brute-force assembly of `L_P`, the scalar mass and stiffness
/// matrices and the load functionals, compared with the sparse pipeline.
/// The sparse `L_P` and mass use `rule`; the dense side always uses its own
/// three-point rule. Limited to meshes of at most 8 triangles.
#[allow(clippy::too_many_arguments)]
pub fn dense_oracle_compare(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
    loads: &LoadSet,
    t: f64,
    rule: &QuadratureRule,
) -> Result<OracleDeviation, VerifyError> {
    if mesh.num_triangles() > 8 {
        return Err(VerifyError::Precondition(format!(
            "dense oracle needs at most 8 triangles, mesh has {}",
            mesh.num_triangles()
        )));
    }
    let n = mesh.num_vertices();
    let ne = 3 * n;
    let ui = |v: usize, c: usize| 2 * v + c;
    let fi = |v: usize| 2 * n + v;

    let mut a = DMatrix::zeros(ne, ne);
    let mut m = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    let mut l1 = vec![0.0; ne];
    let mut l2 = vec![0.0; ne];
    let mut l3 = vec![0.0; 2 * n];
    for tri in 0..mesh.num_triangles() {
        let el = DenseTriangle::new(mesh, tri);
        let nodes = mesh.triangles[tri];
        for i in 0..3 {
            for j in 0..3 {
                k[(nodes[i], nodes[j])] += el.area * (el.grad[i][0] * el.grad[j][0] + el.grad[i][1] * el.grad[j][1]);
            }
        }
        for (lam, x, w) in el.points() {
            let pq = (0..3).fold(Vec2::zeros(), |acc, i| acc + Vec2::new(p[nodes[i]][0], p[nodes[i]][1]) * lam[i]);
            let mp = eval_material(model, &pq)?;
            let stress = |eps: &Matrix2<f64>| from_mandel(&(mp.c * to_mandel(eps)));
            let e_of = |eps: &Matrix2<f64>| mp.e * to_mandel(eps);
            let et_of = |g: &Vec2| from_mandel(&(mp.e.transpose() * g));
            for i in 0..3 {
                for j in 0..3 {
                    m[(nodes[i], nodes[j])] += w * lam[i] * lam[j];
                }
                let gi = Vec2::new(el.grad[i][0], el.grad[i][1]);
                for j in 0..3 {
                    let gj = Vec2::new(el.grad[j][0], el.grad[j][1]);
                    for ci in 0..2 {
                        let ei = el.strain(i, ci);
                        for cj in 0..2 {
                            let ej = el.strain(j, cj);
                            a[(ui(nodes[i], ci), ui(nodes[j], cj))] += w * contract(&stress(&ej), &ei);
                        }
                        a[(ui(nodes[i], ci), fi(nodes[j]))] += w * contract(&et_of(&gj), &ei);
                        a[(fi(nodes[i]), ui(nodes[j], ci))] -= w * e_of(&el.strain(j, ci)).dot(&gi);
                    }
                    a[(fi(nodes[i]), fi(nodes[j]))] += w * (mp.epsd * gj).dot(&gi);
                }
                let c_eps0 = from_mandel(&(mp.c * mp.eps0));
                let f_sigma = (loads.f_sigma)(t, x);
                let f_p = (loads.f_p)(t, x);
                for ci in 0..2 {
                    l1[ui(nodes[i], ci)] += w * contract(&c_eps0, &el.strain(i, ci));
                    l2[ui(nodes[i], ci)] += w * f_sigma[ci] * lam[i];
                    l3[ui(nodes[i], ci)] += w * f_p[ci] * lam[i];
                }
                l1[fi(nodes[i])] -= w * (mp.e * mp.eps0 - pq).dot(&gi);
                l2[fi(nodes[i])] -= w * (loads.f_d)(t, x) * lam[i];
            }
        }
    }
    for f in 0..mesh.boundary_facets.len() {
        let (verts, pts) = edge_points(mesh, f);
        for (lam, x, w) in pts {
            for (s, &v) in verts.iter().enumerate() {
                if partition.displacement[f] == BcKind::Neumann {
                    let ts = (loads.t_sigma)(t, x);
                    for c in 0..2 {
                        l2[ui(v, c)] += w * ts[c] * lam[s];
                    }
                }
                if partition.potential[f] == BcKind::Neumann {
                    l2[fi(v)] -= w * (loads.t_d)(t, x) * lam[s];
                }
                if partition.polarization[f] == BcKind::Neumann {
                    let tp = (loads.t_p)(t, x);
                    for c in 0..2 {
                        l3[ui(v, c)] += w * tp[c] * lam[s];
                    }
                }
            }
        }
    }

    let dofs = EllipticDofs::new(mesh, partition);
    let sparse_a = assemble_bilinear(mesh, &[&dofs.u, &dofs.phi], dofs.len(), |el| {
        local_l_p(model, el, p, rule).map_err(VerifyError::from)
    })?;
    let smap = DofMap::free(mesh, Field::Potential, 0);
    let sparse_m = assemble_bilinear(mesh, &[&smap], n, |el| Ok::<_, VerifyError>(local_mass(el, rule)))?;
    let pmap = polarization_dofs(mesh, partition);
    Ok(OracleDeviation {
        l_p: max_dense_dev(&sparse_a.to_dense(), &a),
        mass: max_dense_dev(&sparse_m.to_dense(), &m),
        stiffness: max_dense_dev(&scalar_stiffness(mesh).to_dense(), &k),
        l1: max_vec_dev(&assemble_l1(mesh, &dofs, model, p)?, &l1),
        l2: max_vec_dev(&assemble_l2(mesh, partition, &dofs, loads, t)?, &l2),
        l3: max_vec_dev(&assemble_l3(mesh, partition, &pmap, loads, t), &l3),
    })
}

/// Mesh, boundary partition and loads of the Lipschitz probe.
#[derive(Clone)]
pub struct ProbeSetup {
    pub mesh: Mesh,
    pub partition: BoundaryPartition,
    pub loads: LoadSet,
    pub t: f64,
    pub seed: u64,
}

impl ProbeSetup {
    /// `n × n` unit square, `u` and `φ` clamped, `P` free, zero loads.
    pub fn unit_square(n: usize) -> Result<Self, VerifyError> {
        let mesh = build_structured_mesh(n, n, Rect::unit())?;
        let partition = BoundaryPartition::uniform(&mesh, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann);
        Ok(Self {
            mesh,
            partition,
            loads: LoadSet::zero(),
            t: 0.0,
            seed: 11,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub m: f64,
    /// Largest observed ratio.
    pub h_m: f64,
    /// Sampling radii.
    pub radii: Vec<f64>,
    pub pairs: usize,
    /// Pairs closer than `1e-12` in the max norm.
    pub rejected: usize,
    /// Pairs skipped because a solve failed.
    pub failed: usize,
}

fn dual_norm(weights: &[f64], free: &[usize], s: &[f64]) -> f64 {
    free.iter().map(|&i| s[i] * s[i] / weights[i]).sum::<f64>().sqrt()
}

/// `‖S(P₁) − S(P₂)‖_dual / ‖P₁ − P₂‖_∞` with the elliptic problem solved
/// for each polarization. `None` when the polarizations agree to `1e-12`.
/// The dual norm uses lumped-mass weights on the free polarization unknowns.
pub fn source_ratio(sim: &Simulator, t: f64, p1: &[[f64; 2]], p2: &[[f64; 2]]) -> Result<Option<f64>, DriverError> {
    Ok(source_gap(sim, t, p1, p2)?.map(|(q, _)| q))
}

fn source_gap(sim: &Simulator, t: f64, p1: &[[f64; 2]], p2: &[[f64; 2]]) -> Result<Option<(f64, Vec<f64>)>, DriverError> {
    let diff = p1
        .iter()
        .flatten()
        .zip(p2.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if diff < 1e-12 {
        return Ok(None);
    }
    let eval = |p: &[[f64; 2]]| -> Result<Vec<f64>, DriverError> {
        let s: State = sim.equilibrate(t, p.to_vec())?;
        sim.source(t, &s)
    };
    let (s1, s2) = (eval(p1)?, eval(p2)?);
    let (weights, free) = lumped_weights(sim);
    let ds: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a - b).collect();
    Ok(Some((dual_norm(&weights, &free, &ds) / diff, ds)))
}

fn lumped_weights(sim: &Simulator) -> (Vec<f64>, Vec<usize>) {
    let weights = sim.mass.matvec(&vec![1.0; sim.mass.nrows()]);
    let free = (0..weights.len()).filter(|i| !sim.pmap.is_dirichlet(*i)).collect();
    (weights, free)
}

/// Next probe direction from a source difference: `M_L⁻¹ ΔS` on the free
/// unknowns, scaled to unit max norm. `None` if it vanishes.
fn ascent_direction(sim: &Simulator, ds: &[f64]) -> Option<Vec<[f64; 2]>> {
    let (weights, free) = lumped_weights(sim);
    let mut d = vec![0.0; ds.len()];
    for &i in &free {
        d[i] = ds[i] / weights[i];
    }
    let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return None;
    }
    Some(d.chunks(2).map(|c| [c[0] / peak, c[1] / peak]).collect())
}

/// Power-iteration refinements per radius in [`lipschitz_probe_s`].
pub const ASCENT_STEPS: usize = 6;

/// Empirical Lipschitz constant of the source over `‖P‖_∞ ≤ m`. Pairs are
/// drawn at the dyadic radii `2⁻⁴, 2⁻³, …` below `m` and at `m` itself,
/// `n_pairs` per radius, so probes of larger balls contain those of
/// smaller dyadic balls. Each pair is `P₁ = r ξ / 1.1`, `P₂ = P₁ + r η / 11`
/// with `ξ` drawn per radius and `η` shared across radii. Even pairs draw
/// `ξ` and `η` independently per node; odd pairs use spatially constant
/// fields, which probe the directions where nodewise noise averages out.
/// The best pair at each radius is then refined by
/// [`ASCENT_STEPS`] power-iteration steps on `η` with `P₁` held fixed.
pub fn lipschitz_probe_s(
    setup: &ProbeSetup,
    model: Arc<dyn MaterialModel>,
    m: f64,
    n_pairs: usize,
) -> Result<LipschitzReport, VerifyError> {
    if !(m > 0.0) {
        return Err(VerifyError::Precondition(format!("radius must be positive, got {m}")));
    }
    let sim = Simulator::new(
        setup.mesh.clone(),
        setup.partition.clone(),
        model,
        setup.loads.clone(),
        EllipticOptions::default(),
    );
    let mut radii: Vec<f64> = (-4..)
        .map(|k| 2f64.powi(k))
        .take_while(|r| *r < m * (1.0 - 1e-12))
        .collect();
    radii.push(m);
    let n = setup.mesh.num_vertices();
    let mut report = LipschitzReport {
        m,
        h_m: 0.0,
        radii: radii.clone(),
        pairs: 0,
        rejected: 0,
        failed: 0,
    };
    for &r in &radii {
        let mut shape_rng = ChaCha8Rng::seed_from_u64(setup.seed ^ r.to_bits());
        let mut dir_rng = ChaCha8Rng::seed_from_u64(setup.seed);
        let mut best: Option<(f64, Vec<[f64; 2]>, Vec<f64>)> = None;
        for k in 0..n_pairs {
            let (xi, eta) = if k % 2 == 0 {
                (uniform_field(&mut shape_rng, n, 1.0), uniform_field(&mut dir_rng, n, 1.0))
            } else {
                let c = uniform_field(&mut shape_rng, 1, 1.0)[0];
                let d = uniform_field(&mut dir_rng, 1, 1.0)[0];
                (vec![c; n], vec![d; n])
            };
            let p1: Vec<[f64; 2]> = xi.iter().map(|v| v.map(|c| r * c / 1.1)).collect();
            let p2: Vec<[f64; 2]> = p1
                .iter()
                .zip(&eta)
                .map(|(a, d)| [a[0] + r * d[0] / 11.0, a[1] + r * d[1] / 11.0])
                .collect();
            match source_gap(&sim, setup.t, &p1, &p2) {
                Ok(Some((q, ds))) => {
                    report.pairs += 1;
                    report.h_m = report.h_m.max(q);
                    if best.as_ref().is_none_or(|b| q > b.0) {
                        best = Some((q, p1, ds));
                    }
                }
                Ok(None) => report.rejected += 1,
                Err(e) => {
                    log::debug!("probe pair skipped at radius {r}: {e}");
                    report.failed += 1;
                }
            }
        }
        let Some((_, p1, mut ds)) = best else { continue };
        for _ in 0..ASCENT_STEPS {
            let Some(eta) = ascent_direction(&sim, &ds) else { break };
            let p2: Vec<[f64; 2]> = p1
                .iter()
                .zip(&eta)
                .map(|(a, d)| [a[0] + r * d[0] / 11.0, a[1] + r * d[1] / 11.0])
                .collect();
            match source_gap(&sim, setup.t, &p1, &p2) {
                Ok(Some((q, next))) => {
                    report.pairs += 1;
                    report.h_m = report.h_m.max(q);
                    ds = next;
                }
                Ok(None) => {
                    report.rejected += 1;
                    break;
                }
                Err(e) => {
                    log::debug!("probe ascent stopped at radius {r}: {e}");
                    report.failed += 1;
                    break;
                }
            }
        }
    }
    if report.pairs == 0 {
        return Err(VerifyError::Precondition("no usable sample pairs".into()));
    }
    Ok(report)
}
