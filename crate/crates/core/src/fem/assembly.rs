use nalgebra::{DMatrix, DVector};

use super::dofs::DofMap;
use super::element::{shape, Element};
use super::quadrature::QuadratureRule;
use super::sparse::CsrMatrix;
use super::FemError;
use crate::mesh::{Field, Mesh};

fn local_dofs(fields: &[&DofMap], nodes: &[usize]) -> Vec<usize> {
    fields.iter().flat_map(|f| f.element_dofs(nodes)).collect()
}

fn check_range(dofs: &[usize], ndofs: usize, what: usize) -> Result<(), FemError> {
    match dofs.iter().find(|&&d| d >= ndofs) {
        Some(d) => Err(FemError::Assembly(format!(
            "DOF {d} of entity {what} out of range {ndofs}"
        ))),
        None => Ok(()),
    }
}

/// Scatter-adds per-triangle blocks into a sparse matrix. Local ordering is
/// field, then vertex, then component. Triangles are visited in index order,
/// so the result is deterministic.
pub fn assemble_bilinear<E, F>(
    mesh: &Mesh,
    fields: &[&DofMap],
    ndofs: usize,
    mut kernel: F,
) -> Result<CsrMatrix, E>
where
    E: From<FemError>,
    F: FnMut(&Element) -> Result<DMatrix<f64>, E>,
{
    let mut trip = Vec::new();
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        let dofs = local_dofs(fields, &el.nodes);
        check_range(&dofs, ndofs, t)?;
        let block = kernel(&el)?;
        if block.nrows() != dofs.len() || block.ncols() != dofs.len() {
            return Err(FemError::Assembly(format!(
                "triangle {t}: local block {}x{}, expected {}",
                block.nrows(),
                block.ncols(),
                dofs.len()
            ))
            .into());
        }
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                trip.push((i, j, block[(a, b)]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(ndofs, ndofs, trip))
}

/// Scatter-adds per-triangle vectors.
pub fn assemble_vector<E, F>(mesh: &Mesh, fields: &[&DofMap], ndofs: usize, mut kernel: F) -> Result<Vec<f64>, E>
where
    E: From<FemError>,
    F: FnMut(&Element) -> Result<DVector<f64>, E>,
{
    let mut out = vec![0.0; ndofs];
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        let dofs = local_dofs(fields, &el.nodes);
        check_range(&dofs, ndofs, t)?;
        let v = kernel(&el)?;
        if v.len() != dofs.len() {
            return Err(FemError::Assembly(format!(
                "triangle {t}: local vector {}, expected {}",
                v.len(),
                dofs.len()
            ))
            .into());
        }
        for (a, &i) in dofs.iter().enumerate() {
            out[i] += v[a];
        }
    }
    Ok(out)
}

/// Scatter-adds per-facet vectors over the listed boundary facets. The
/// kernel receives the facet index and returns values for the two facet
/// vertices in facet order.
pub fn assemble_facets<E, F>(
    mesh: &Mesh,
    fields: &[&DofMap],
    ndofs: usize,
    facets: impl IntoIterator<Item = usize>,
    mut kernel: F,
) -> Result<Vec<f64>, E>
where
    E: From<FemError>,
    F: FnMut(usize) -> Result<DVector<f64>, E>,
{
    let mut out = vec![0.0; ndofs];
    for f in facets {
        let nodes = mesh.boundary_facets[f].vertices;
        let dofs = local_dofs(fields, &nodes);
        check_range(&dofs, ndofs, f)?;
        let v = kernel(f)?;
        if v.len() != dofs.len() {
            return Err(FemError::Assembly(format!(
                "facet {f}: local vector {}, expected {}",
                v.len(),
                dofs.len()
            ))
            .into());
        }
        for (a, &i) in dofs.iter().enumerate() {
            out[i] += v[a];
        }
    }
    Ok(out)
}

/// Local P1 mass matrix by the given rule.
pub fn local_mass(el: &Element, rule: &QuadratureRule) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3, 3);
    for (xi, w) in rule.iter() {
        let n = shape(xi);
        let wj = w * el.jacobian();
        for a in 0..3 {
            for b in 0..3 {
                m[(a, b)] += wj * n[a] * n[b];
            }
        }
    }
    m
}

pub fn local_stiffness(el: &Element) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |a, b| el.area * el.grads[a].dot(&el.grads[b]))
}

fn replicate(local: &DMatrix<f64>, comps: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(3 * comps, 3 * comps);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..comps {
                out[(a * comps + c, b * comps + c)] = local[(a, b)];
            }
        }
    }
    out
}

fn componentwise(mesh: &Mesh, field: Field, f: impl Fn(&Element) -> DMatrix<f64>) -> CsrMatrix {
    let map = DofMap::free(mesh, field, 0);
    let comps = map.comps();
    assemble_bilinear::<FemError, _>(mesh, &[&map], map.len(), |el| Ok(replicate(&f(el), comps)))
        .expect("scalar operators use in-range DOFs")
}

/// Consistent P1 mass matrix of a scalar field.
pub fn scalar_mass(mesh: &Mesh) -> CsrMatrix {
    let rule = QuadratureRule::order2();
    componentwise(mesh, Field::Potential, |el| local_mass(el, &rule))
}

/// P1 stiffness matrix of `−Δ` for a scalar field.
pub fn scalar_stiffness(mesh: &Mesh) -> CsrMatrix {
    componentwise(mesh, Field::Potential, local_stiffness)
}

/// Mass matrix acting componentwise on an interleaved 2-vector field.
pub fn vector_mass(mesh: &Mesh) -> CsrMatrix {
    let rule = QuadratureRule::order2();
    componentwise(mesh, Field::Polarization, |el| local_mass(el, &rule))
}

/// Stiffness of the vector Laplacian on an interleaved 2-vector field.
pub fn vector_stiffness(mesh: &Mesh) -> CsrMatrix {
    componentwise(mesh, Field::Polarization, local_stiffness)
}
