//! P1 finite-element primitives shared by the elliptic and parabolic solvers.

pub mod assembly;
pub mod dofs;
pub mod element;
pub mod lu;
pub mod quadrature;
pub mod sparse;

use std::collections::BTreeMap;

use thiserror::Error;

pub use assembly::{
    assemble_bilinear, assemble_facets, assemble_vector, local_mass, local_stiffness, scalar_mass, scalar_stiffness,
    vector_mass, vector_stiffness,
};
pub use dofs::DofMap;
pub use element::{shape, Element};
pub use lu::{rcm_ordering, LuFactor};
pub use quadrature::{edge_rule, quadrature_rule, QuadratureRule};
pub use sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("unsupported quadrature order {0}")]
    UnsupportedQuadrature(usize),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("singular system: residual {residual:e} after solve, {replaced_pivots} pivots replaced")]
    Singular { residual: f64, replaced_pivots: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Statistics of one linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    /// Euclidean norm of `b − A x` for the returned `x`.
    pub residual: f64,
    pub n: usize,
    /// Lower and upper bandwidth after reordering.
    pub bandwidth: (usize, usize),
    pub refinements: usize,
}

/// Linear system after Dirichlet row replacement.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Dirichlet DOFs with their prescribed values, sorted by DOF.
    pub dirichlet: Vec<(usize, f64)>,
    pub report: Option<SolveReport>,
}

/// Replaces each Dirichlet row by the identity row with the prescribed value
/// as right-hand side, and moves the Dirichlet columns of the remaining rows
/// to the right-hand side.
pub fn constrain(
    matrix: &CsrMatrix,
    rhs: &[f64],
    dirichlet: &[usize],
    values: &BTreeMap<usize, f64>,
) -> Result<ConstrainedSystem, FemError> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(FemError::Dimension(format!(
            "matrix {}x{}, rhs {}",
            n,
            matrix.ncols(),
            rhs.len()
        )));
    }
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut list = Vec::with_capacity(dirichlet.len());
    for &d in dirichlet {
        if d >= n {
            return Err(FemError::Constraint(format!("Dirichlet DOF {d} out of range {n}")));
        }
        let v = *values
            .get(&d)
            .ok_or_else(|| FemError::Constraint(format!("no value for Dirichlet DOF {d}")))?;
        fixed[d] = Some(v);
    }
    for (d, v) in fixed.iter().enumerate() {
        if let Some(v) = v {
            list.push((d, *v));
        }
    }
    if list.is_empty() {
        return Ok(ConstrainedSystem {
            matrix: matrix.clone(),
            rhs: rhs.to_vec(),
            dirichlet: list,
            report: None,
        });
    }
    let mut b = rhs.to_vec();
    let mut trip = Vec::with_capacity(matrix.nnz());
    for i in 0..n {
        if let Some(v) = fixed[i] {
            trip.push((i, i, 1.0));
            b[i] = v;
            continue;
        }
        for (j, a) in matrix.row(i) {
            match fixed[j] {
                Some(g) => b[i] -= a * g,
                None => trip.push((i, j, a)),
            }
        }
    }
    Ok(ConstrainedSystem {
        matrix: CsrMatrix::from_triplets(n, n, trip),
        rhs: b,
        dirichlet: list,
        report: None,
    })
}

/// [`constrain`] with every Dirichlet value zero.
pub fn constrain_homogeneous(
    matrix: &CsrMatrix,
    rhs: &[f64],
    dirichlet: &[usize],
) -> Result<ConstrainedSystem, FemError> {
    let values = dirichlet.iter().map(|&d| (d, 0.0)).collect();
    constrain(matrix, rhs, dirichlet, &values)
}

/// Direct sparse solve. Does not assume symmetry.
pub fn solve_linear(system: &mut ConstrainedSystem) -> Result<Vec<f64>, FemError> {
    let lu = LuFactor::new(&system.matrix)?;
    let (x, report) = lu.solve(&system.rhs)?;
    system.report = Some(report);
    Ok(x)
}
