//! The coupled elastic/electrostatic subproblem for given polarization:
//! find `(u, φ)` with `L_P(u, φ) = ℓ₁(P) + ℓ₂(t)`, and estimates of the
//! norm of `L_P⁻¹`.

use nalgebra::{DMatrix, DVector, SMatrix};
use thiserror::Error;

use crate::fem::dofs::{flatten, unflatten};
use crate::fem::{
    assemble_bilinear, assemble_facets, assemble_vector, constrain_homogeneous, edge_rule, scalar_mass,
    scalar_stiffness, CsrMatrix, DofMap, Element, FemError, LuFactor, QuadratureRule,
};
use crate::fem::element::shape;
use crate::fem::sparse::{dot, norm2};
use crate::loads::LoadSet;
use crate::materials::tensor::{Mandel, Vec2, SQRT2};
use crate::materials::{check_pointwise_coercivity, eval_material, MaterialError, MaterialModel, MaterialPoint};
use crate::mesh::{BcKind, BoundaryPartition, Field, Mesh};

#[derive(Debug, Error)]
pub enum EllipticError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("inverse-norm estimate did not converge after {iterations} iterations (last change {change:e})")]
    Estimate { iterations: usize, change: f64 },
}

/// Strain-displacement matrix of a triangle: column `2a + c` is the Mandel
/// strain of the hat function of vertex `a` in direction `c`.
pub fn strain_matrix(el: &Element) -> SMatrix<f64, 3, 6> {
    let mut b = SMatrix::<f64, 3, 6>::zeros();
    for a in 0..3 {
        let g = el.grads[a];
        b[(0, 2 * a)] = g[0];
        b[(2, 2 * a)] = g[1] / SQRT2;
        b[(1, 2 * a + 1)] = g[1];
        b[(2, 2 * a + 1)] = g[0] / SQRT2;
    }
    b
}

/// Hat-function gradients as columns.
pub fn grad_matrix(el: &Element) -> SMatrix<f64, 2, 3> {
    SMatrix::<f64, 2, 3>::from_columns(&el.grads)
}

/// Elliptic unknowns: interleaved displacement first, potential after.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticDofs {
    pub u: DofMap,
    pub phi: DofMap,
}

impl EllipticDofs {
    pub fn new(mesh: &Mesh, partition: &BoundaryPartition) -> Self {
        let u = DofMap::new(mesh, partition, Field::Displacement, 0);
        let phi = DofMap::new(mesh, partition, Field::Potential, u.end());
        Self { u, phi }
    }

    pub fn len(&self) -> usize {
        self.phi.end()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dirichlet(&self) -> Vec<usize> {
        self.u.dirichlet.iter().chain(&self.phi.dirichlet).copied().collect()
    }

    pub fn free(&self) -> Vec<usize> {
        let mut fixed = vec![false; self.len()];
        for d in self.dirichlet() {
            fixed[d] = true;
        }
        (0..self.len()).filter(|&i| !fixed[i]).collect()
    }

    pub fn join(&self, u: &[[f64; 2]], phi: &[f64]) -> Vec<f64> {
        let mut x = flatten(u);
        x.extend_from_slice(phi);
        x
    }

    pub fn split(&self, x: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>) {
        (unflatten(&x[..self.u.end()]), x[self.phi.offset..].to_vec())
    }
}

fn material_at(model: &dyn MaterialModel, el: &Element, p: &[[f64; 2]], xi: [f64; 2]) -> Result<MaterialPoint, MaterialError> {
    eval_material(model, &el.interpolate_vec(p, xi))
}

/// Local 9×9 block of `L_P` in the order (u vertex-major, then φ).
pub fn local_l_p(model: &dyn MaterialModel, el: &Element, p: &[[f64; 2]], rule: &QuadratureRule) -> Result<DMatrix<f64>, MaterialError> {
    let bu = strain_matrix(el);
    let g = grad_matrix(el);
    let mut k = DMatrix::zeros(9, 9);
    for (xi, w) in rule.iter() {
        let mp = material_at(model, el, p, xi)?;
        let wj = w * el.jacobian();
        let kuu = bu.transpose() * mp.c * bu;
        let kup = bu.transpose() * mp.e.transpose() * g;
        let kpu = -(g.transpose() * mp.e * bu);
        let kpp = g.transpose() * mp.epsd * g;
        let mut view = k.view_mut((0, 0), (6, 6));
        view += kuu * wj;
        let mut view = k.view_mut((0, 6), (6, 3));
        view += kup * wj;
        let mut view = k.view_mut((6, 0), (3, 6));
        view += kpu * wj;
        let mut view = k.view_mut((6, 6), (3, 3));
        view += kpp * wj;
    }
    Ok(k)
}

/// Unconstrained matrix of the bilinear form
/// `∫ (Cε(u) + eᵀ∇φ):ε(ū) + (−eε(u) + εd∇φ)·∇φ̄`.
pub fn assemble_l_p(
    mesh: &Mesh,
    dofs: &EllipticDofs,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
) -> Result<CsrMatrix, EllipticError> {
    let rule = QuadratureRule::order2();
    assemble_bilinear(mesh, &[&dofs.u, &dofs.phi], dofs.len(), |el| {
        local_l_p(model, el, p, &rule).map_err(EllipticError::from)
    })
}

/// Polarization-induced load `∫ Cε⁰:ε(ū) − (eε⁰ − P)·∇φ̄`.
pub fn assemble_l1(
    mesh: &Mesh,
    dofs: &EllipticDofs,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
) -> Result<Vec<f64>, EllipticError> {
    let rule = QuadratureRule::order2();
    assemble_vector(mesh, &[&dofs.u, &dofs.phi], dofs.len(), |el| {
        let bu = strain_matrix(el);
        let g = grad_matrix(el);
        let mut v = DVector::zeros(9);
        for (xi, w) in rule.iter() {
            let mp = material_at(model, el, p, xi)?;
            let wj = w * el.jacobian();
            let su = bu.transpose() * (mp.c * mp.eps0) * wj;
            let sp = g.transpose() * (mp.e * mp.eps0 - mp.p) * (-wj);
            for i in 0..6 {
                v[i] += su[i];
            }
            for i in 0..3 {
                v[6 + i] += sp[i];
            }
        }
        Ok::<_, EllipticError>(v)
    })
}

/// Body integral of scalar or vector data against hats on one triangle.
fn body_load(el: &Element, rule: &QuadratureRule, comps: usize, f: impl Fn([f64; 2]) -> [f64; 2]) -> DVector<f64> {
    let mut v = DVector::zeros(3 * comps);
    for (xi, w) in rule.iter() {
        let n = shape(xi);
        let val = f(el.map(xi));
        let wj = w * el.jacobian();
        for a in 0..3 {
            for c in 0..comps {
                v[a * comps + c] += wj * n[a] * val[c];
            }
        }
    }
    v
}

/// Boundary integral over one facet against the two facet hats.
pub(crate) fn facet_load(mesh: &Mesh, facet: usize, comps: usize, f: impl Fn([f64; 2]) -> [f64; 2]) -> DVector<f64> {
    let [a, b] = mesh.boundary_facets[facet].vertices;
    let (xa, xb) = (mesh.vertices[a], mesh.vertices[b]);
    let len = mesh.facet_length(facet);
    let mut v = DVector::zeros(2 * comps);
    for (s, w) in edge_rule() {
        let x = [(1.0 - s) * xa[0] + s * xb[0], (1.0 - s) * xa[1] + s * xb[1]];
        let val = f(x);
        let n = [1.0 - s, s];
        for k in 0..2 {
            for c in 0..comps {
                v[k * comps + c] += w * len * n[k] * val[c];
            }
        }
    }
    v
}

/// External load `∫ f_σ·ū − f_D φ̄ + ∫_{Neumann(u)} t_σ·ū − ∫_{Neumann(φ)} t_D φ̄`.
pub fn assemble_l2(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    dofs: &EllipticDofs,
    loads: &LoadSet,
    t: f64,
) -> Result<Vec<f64>, EllipticError> {
    let rule = QuadratureRule::order2();
    let n = dofs.len();
    let mut out = assemble_vector(mesh, &[&dofs.u], n, |el| {
        Ok::<_, EllipticError>(body_load(el, &rule, 2, |x| (loads.f_sigma)(t, x)))
    })?;
    let phi = assemble_vector(mesh, &[&dofs.phi], n, |el| {
        Ok::<_, EllipticError>(body_load(el, &rule, 1, |x| [-(loads.f_d)(t, x), 0.0]))
    })?;
    let ts = assemble_facets(mesh, &[&dofs.u], n, partition.facets(Field::Displacement, BcKind::Neumann), |f| {
        Ok::<_, EllipticError>(facet_load(mesh, f, 2, |x| (loads.t_sigma)(t, x)))
    })?;
    let td = assemble_facets(mesh, &[&dofs.phi], n, partition.facets(Field::Potential, BcKind::Neumann), |f| {
        Ok::<_, EllipticError>(facet_load(mesh, f, 1, |x| [-(loads.t_d)(t, x), 0.0]))
    })?;
    for i in 0..n {
        out[i] += phi[i] + ts[i] + td[i];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticOptions {
    /// Check pointwise coercivity at the nodal polarization values first.
    pub preflight: bool,
    /// Allow empty Dirichlet parts for `u` or `φ`.
    pub assume_invertible: bool,
    /// Also estimate the inverse-operator norm.
    pub estimate_norm: bool,
}

impl Default for EllipticOptions {
    fn default() -> Self {
        Self {
            preflight: true,
            assume_invertible: false,
            estimate_norm: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSolve {
    pub u: Vec<[f64; 2]>,
    pub phi: Vec<f64>,
    pub residual: f64,
    pub c_p_estimate: Option<f64>,
}

fn check_setup(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
    opts: &EllipticOptions,
) -> Result<EllipticDofs, EllipticError> {
    if p.len() != mesh.num_vertices() {
        return Err(FemError::Dimension(format!("P has {} nodes, mesh {}", p.len(), mesh.num_vertices())).into());
    }
    let dofs = EllipticDofs::new(mesh, partition);
    if !opts.assume_invertible {
        for (field, map) in [(Field::Displacement, &dofs.u), (Field::Potential, &dofs.phi)] {
            if map.dirichlet.is_empty() {
                return Err(EllipticError::Assumption(format!(
                    "Dirichlet boundary of `{field}` is empty; the operator may be singular"
                )));
            }
        }
    }
    if opts.preflight {
        let samples: Vec<Vec2> = p.iter().map(|v| Vec2::new(v[0], v[1])).collect();
        let rep = check_pointwise_coercivity(model, &samples);
        if !(rep.alpha_min > 0.0) {
            return Err(EllipticError::Assumption(format!(
                "pointwise coercivity fails (alpha_min = {:e}) at P = {:?}",
                rep.alpha_min,
                rep.failed_sample.map(|s| [s[0], s[1]])
            )));
        }
    }
    Ok(dofs)
}

/// Assembled and constrained elliptic system.
#[derive(Debug, Clone)]
pub struct EllipticSystem {
    pub dofs: EllipticDofs,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constrained: crate::fem::ConstrainedSystem,
}

#[allow(clippy::too_many_arguments)]
pub fn build_system(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
    loads: &LoadSet,
    t: f64,
    opts: &EllipticOptions,
) -> Result<EllipticSystem, EllipticError> {
    let dofs = check_setup(mesh, partition, model, p, opts)?;
    let matrix = assemble_l_p(mesh, &dofs, model, p)?;
    let l1 = assemble_l1(mesh, &dofs, model, p)?;
    let l2 = assemble_l2(mesh, partition, &dofs, loads, t)?;
    let rhs: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| a + b).collect();
    let constrained = constrain_homogeneous(&matrix, &rhs, &dofs.dirichlet())?;
    Ok(EllipticSystem {
        dofs,
        matrix,
        rhs,
        constrained,
    })
}

/// Solves the elliptic problem with homogeneous Dirichlet data.
pub fn solve_elliptic(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
    loads: &LoadSet,
    t: f64,
    opts: &EllipticOptions,
) -> Result<EllipticSolve, EllipticError> {
    let sys = build_system(mesh, partition, model, p, loads, t, opts)?;
    let lu = LuFactor::new(&sys.constrained.matrix)?;
    let (x, report) = lu.solve(&sys.constrained.rhs)?;
    let c_p_estimate = if opts.estimate_norm {
        Some(estimate_from_matrix(mesh, &sys.dofs, &sys.matrix, NormPair::Energy)?.c_p)
    } else {
        None
    };
    let (u, phi) = sys.dofs.split(&x);
    Ok(EllipticSolve {
        u,
        phi,
        residual: report.residual,
        c_p_estimate,
    })
}

/// Norms for the inverse-operator estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormPair {
    /// Discrete H¹ (stiffness + mass) on unknowns, lumped-mass dual norm on
    /// data.
    Energy,
    /// Euclidean norms of the coefficient vectors.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseNormEstimate {
    /// Estimate of `‖A⁻¹‖`.
    pub c_p: f64,
    /// Smallest generalized singular value of `A`.
    pub sigma_min: f64,
    pub iterations: usize,
}

pub const INVERSE_NORM_TOL: f64 = 1e-10;
pub const INVERSE_NORM_MAX_ITERS: usize = 10_000;

/// Estimates `‖A⁻¹‖` from dual norm `ℓ ↦ (ℓᵀ W⁻¹ ℓ)^½` to primal norm
/// `v ↦ (vᵀ G v)^½`, by inverse iteration on `AᵀW⁻¹A v = σ² G v`.
pub fn inverse_norm(a: &CsrMatrix, g: &CsrMatrix, w: &[f64], tol: f64, max_iters: usize) -> Result<InverseNormEstimate, EllipticError> {
    let n = a.nrows();
    if n == 0 {
        return Err(FemError::Dimension("empty operator".into()).into());
    }
    let lu = LuFactor::new(a)?;
    let gnorm = |v: &[f64]| g.pair(v, v).sqrt();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    let s = gnorm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let quotient = |v: &[f64]| {
        let av = a.matvec(v);
        let num: f64 = av.iter().zip(w).map(|(x, wi)| x * x / wi).sum();
        num / g.pair(v, v)
    };
    let mut rho = quotient(&v);
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let gv = g.matvec(&v);
        let (mut z, _) = lu.solve_transpose(&gv)?;
        z.iter_mut().zip(w).for_each(|(x, wi)| *x *= wi);
        let (mut next, _) = lu.solve(&z)?;
        let s = gnorm(&next);
        next.iter_mut().for_each(|x| *x /= s);
        let r = quotient(&next);
        change = (r - rho).abs() / r.abs().max(f64::MIN_POSITIVE);
        v = next;
        rho = r;
        if change <= tol {
            let sigma = rho.sqrt();
            return Ok(InverseNormEstimate {
                c_p: 1.0 / sigma,
                sigma_min: sigma,
                iterations: it,
            });
        }
    }
    Err(EllipticError::Estimate {
        iterations: max_iters,
        change,
    })
}

/// Primal norm matrix on the elliptic unknowns: stiffness plus mass per
/// component.
pub fn primal_norm_matrix(mesh: &Mesh, dofs: &EllipticDofs) -> CsrMatrix {
    let s = scalar_stiffness(mesh).add_scaled(1.0, &scalar_mass(mesh));
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(3 * s.nnz());
    for (i, j, v) in s.triplets() {
        t.push((2 * i, 2 * j, v));
        t.push((2 * i + 1, 2 * j + 1, v));
        t.push((dofs.phi.offset + i, dofs.phi.offset + j, v));
    }
    debug_assert_eq!(dofs.len(), 3 * n);
    CsrMatrix::from_triplets(dofs.len(), dofs.len(), t)
}

/// Lumped-mass weights of the dual norm, one per elliptic unknown.
pub fn dual_weights(mesh: &Mesh, dofs: &EllipticDofs) -> Vec<f64> {
    let lumped = scalar_mass(mesh).matvec(&vec![1.0; mesh.num_vertices()]);
    let mut w = vec![0.0; dofs.len()];
    for (i, m) in lumped.iter().enumerate() {
        w[2 * i] = *m;
        w[2 * i + 1] = *m;
        w[dofs.phi.offset + i] = *m;
    }
    w
}

fn estimate_from_matrix(mesh: &Mesh, dofs: &EllipticDofs, matrix: &CsrMatrix, norms: NormPair) -> Result<InverseNormEstimate, EllipticError> {
    let free = dofs.free();
    let a = matrix.principal_submatrix(&free);
    let (g, w) = match norms {
        NormPair::Energy => {
            let g = primal_norm_matrix(mesh, dofs).principal_submatrix(&free);
            let w0 = dual_weights(mesh, dofs);
            (g, free.iter().map(|&i| w0[i]).collect::<Vec<_>>())
        }
        NormPair::Euclidean => (CsrMatrix::identity(free.len()), vec![1.0; free.len()]),
    };
    inverse_norm(&a, &g, &w, INVERSE_NORM_TOL, INVERSE_NORM_MAX_ITERS)
}

/// Estimate of `‖L_P⁻¹‖` on the unknowns free of Dirichlet constraints.
pub fn estimate_inverse_norm(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    model: &dyn MaterialModel,
    p: &[[f64; 2]],
    norms: NormPair,
) -> Result<InverseNormEstimate, EllipticError> {
    let opts = EllipticOptions {
        preflight: false,
        assume_invertible: true,
        estimate_norm: false,
    };
    let dofs = check_setup(mesh, partition, model, p, &opts)?;
    let matrix = assemble_l_p(mesh, &dofs, model, p)?;
    estimate_from_matrix(mesh, &dofs, &matrix, norms)
}

/// Primal norm of a solution and dual norm of a load vector, both restricted
/// to the free unknowns, in the [`NormPair::Energy`] pair.
pub fn energy_norms(mesh: &Mesh, dofs: &EllipticDofs, x: &[f64], load: &[f64]) -> (f64, f64) {
    let free = dofs.free();
    let g = primal_norm_matrix(mesh, dofs);
    let w = dual_weights(mesh, dofs);
    let mut xf = vec![0.0; dofs.len()];
    for &i in &free {
        xf[i] = x[i];
    }
    let primal = dot(&xf, &g.matvec(&xf)).sqrt();
    let dual = free.iter().map(|&i| load[i] * load[i] / w[i]).sum::<f64>().sqrt();
    (primal, dual)
}

/// `vᵀ A v` for a nodal pair against the direct energy integral.
pub fn coercive_energy(mesh: &Mesh, model: &dyn MaterialModel, p: &[[f64; 2]], u: &[[f64; 2]], phi: &[f64]) -> Result<f64, MaterialError> {
    let rule = QuadratureRule::order2();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        let eps: Mandel = crate::materials::tensor::strain(&el.local_vec(u), &el.grads);
        let g = el.gradient(phi);
        for (xi, w) in rule.iter() {
            let mp = material_at(model, &el, p, xi)?;
            total += w * el.jacobian() * (eps.dot(&(mp.c * eps)) + g.dot(&(mp.epsd * g)));
        }
    }
    Ok(total)
}

pub fn residual_norm(matrix: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = matrix.matvec(x);
    norm2(&ax.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>())
}
