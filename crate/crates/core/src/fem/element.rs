use crate::materials::tensor::Vec2;
use crate::mesh::Mesh;

/// Geometry of one P1 triangle: vertex coordinates, area and the constant
/// gradients of its three hat functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub index: usize,
    pub nodes: [usize; 3],
    pub coords: [[f64; 2]; 3],
    pub area: f64,
    pub grads: [Vec2; 3],
}

impl Element {
    pub fn new(mesh: &Mesh, index: usize) -> Self {
        let nodes = mesh.triangles[index];
        let coords = nodes.map(|v| mesh.vertices[v]);
        let area = mesh.triangle_area(index);
        let grads = [0, 1, 2].map(|a| {
            let b = coords[(a + 1) % 3];
            let c = coords[(a + 2) % 3];
            Vec2::new(b[1] - c[1], c[0] - b[0]) / (2.0 * area)
        });
        Self {
            index,
            nodes,
            coords,
            area,
            grads,
        }
    }

    /// Physical point of reference coordinates `xi`.
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let n = shape(xi);
        [0, 1].map(|d| (0..3).map(|a| n[a] * self.coords[a][d]).sum())
    }

    /// Physical weight of a reference-triangle quadrature weight.
    pub fn jacobian(&self) -> f64 {
        2.0 * self.area
    }

    /// Value at `xi` of the P1 interpolant of nodal 2-vectors.
    pub fn interpolate_vec(&self, nodal: &[[f64; 2]], xi: [f64; 2]) -> Vec2 {
        let n = shape(xi);
        (0..3).fold(Vec2::zeros(), |acc, a| {
            let v = nodal[self.nodes[a]];
            acc + Vec2::new(v[0], v[1]) * n[a]
        })
    }

    pub fn interpolate_scalar(&self, nodal: &[f64], xi: [f64; 2]) -> f64 {
        let n = shape(xi);
        (0..3).map(|a| n[a] * nodal[self.nodes[a]]).sum()
    }

    /// Constant gradient of a P1 scalar field.
    pub fn gradient(&self, nodal: &[f64]) -> Vec2 {
        (0..3).fold(Vec2::zeros(), |acc, a| acc + self.grads[a] * nodal[self.nodes[a]])
    }

    pub fn local_vec(&self, nodal: &[[f64; 2]]) -> [[f64; 2]; 3] {
        self.nodes.map(|v| nodal[v])
    }
}

/// Hat-function values at reference point `xi`.
pub fn shape(xi: [f64; 2]) -> [f64; 3] {
    [1.0 - xi[0] - xi[1], xi[0], xi[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};

    #[test]
    fn gradients_reproduce_linear_fields() {
        let m = build_structured_mesh(3, 2, Rect::new(0.0, -1.0, 2.0, 1.5)).unwrap();
        let f: Vec<f64> = m.vertices.iter().map(|v| 2.0 * v[0] - 3.0 * v[1] + 0.5).collect();
        for t in 0..m.num_triangles() {
            let e = Element::new(&m, t);
            let g = e.gradient(&f);
            assert!((g - Vec2::new(2.0, -3.0)).norm() < 1e-13);
            let sum: Vec2 = e.grads.iter().sum();
            assert!(sum.norm() < 1e-13);
        }
    }

    #[test]
    fn map_centroid() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        let e = Element::new(&m, 0);
        let c = e.map([1.0 / 3.0, 1.0 / 3.0]);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15 && (c[1] - 1.0 / 3.0).abs() < 1e-15);
    }
}
