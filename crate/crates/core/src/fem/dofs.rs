use crate::mesh::{BoundaryPartition, Field, Mesh};

/// Global numbering of one field. Components of a node are contiguous:
/// DOF `offset + node * comps + comp`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub field: Field,
    pub offset: usize,
    pub n_nodes: usize,
    /// Sorted global indices of the Dirichlet DOFs.
    pub dirichlet: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, partition: &BoundaryPartition, field: Field, offset: usize) -> Self {
        let comps = field.components();
        let mut dirichlet: Vec<usize> = partition
            .dirichlet_vertices(mesh, field)
            .into_iter()
            .flat_map(|v| (0..comps).map(move |c| offset + v * comps + c))
            .collect();
        dirichlet.sort_unstable();
        dirichlet.dedup();
        Self {
            field,
            offset,
            n_nodes: mesh.num_vertices(),
            dirichlet,
        }
    }

    /// Map without Dirichlet DOFs.
    pub fn free(mesh: &Mesh, field: Field, offset: usize) -> Self {
        Self {
            field,
            offset,
            n_nodes: mesh.num_vertices(),
            dirichlet: Vec::new(),
        }
    }

    pub fn comps(&self) -> usize {
        self.field.components()
    }

    pub fn len(&self) -> usize {
        self.n_nodes * self.comps()
    }

    pub fn is_empty(&self) -> bool {
        self.n_nodes == 0
    }

    pub fn end(&self) -> usize {
        self.offset + self.len()
    }

    pub fn index(&self, node: usize, comp: usize) -> usize {
        debug_assert!(node < self.n_nodes && comp < self.comps());
        self.offset + node * self.comps() + comp
    }

    /// Global DOFs of the element nodes, vertex-major.
    pub fn element_dofs(&self, nodes: &[usize]) -> impl Iterator<Item = usize> + '_ {
        let c = self.comps();
        nodes
            .iter()
            .flat_map(move |&n| (0..c).map(move |k| self.offset + n * c + k))
            .collect::<Vec<_>>()
            .into_iter()
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet.binary_search(&dof).is_ok()
    }

    /// Zeros the Dirichlet entries of a global vector.
    pub fn zero_dirichlet(&self, v: &mut [f64]) {
        for &d in &self.dirichlet {
            v[d] = 0.0;
        }
    }
}

/// Interleaved DOF vector of a nodal 2-vector field.
pub fn flatten(nodal: &[[f64; 2]]) -> Vec<f64> {
    nodal.iter().flat_map(|v| v.iter().copied()).collect()
}

pub fn unflatten(v: &[f64]) -> Vec<[f64; 2]> {
    v.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, BcKind, Rect};

    #[test]
    fn contiguous_indices_and_boundary_dirichlet() {
        let m = build_structured_mesh(3, 3, Rect::unit()).unwrap();
        let part = BoundaryPartition::uniform(&m, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann);
        let u = DofMap::new(&m, &part, Field::Displacement, 0);
        let phi = DofMap::new(&m, &part, Field::Potential, u.end());
        let p = DofMap::new(&m, &part, Field::Polarization, 0);
        assert_eq!(u.len(), 32);
        assert_eq!(phi.offset, 32);
        assert_eq!(phi.end(), 48);
        assert_eq!(u.dirichlet.len(), 24);
        assert_eq!(phi.dirichlet.len(), 12);
        assert!(p.dirichlet.is_empty());
        assert!(phi.dirichlet.iter().all(|d| (32..48).contains(d)));
        assert_eq!(u.element_dofs(&[2, 5]).collect::<Vec<_>>(), vec![4, 5, 10, 11]);
    }

    #[test]
    fn flatten_roundtrip() {
        let f = vec![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(unflatten(&flatten(&f)), f);
    }
}
