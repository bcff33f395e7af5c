//! Mandel (scaled Voigt) representation of symmetric 2x2 tensors.
//!
//! A symmetric tensor `a` maps to `[a_xx, a_yy, sqrt(2) a_xy]`, so that
//! `a : b` equals the Euclidean dot product of the Mandel vectors and the
//! eigenvalues of a 3x3 Mandel stiffness are the eigenvalues of the
//! corresponding operator on symmetric tensors.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Mandel = Vector3<f64>;
pub type Stiffness = Matrix3<f64>;
/// Linear map from Mandel strain vectors to 2-vectors.
pub type Coupling = nalgebra::Matrix2x3<f64>;
pub type Dielectric = Matrix2<f64>;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn to_mandel(a: &Matrix2<f64>) -> Mandel {
    Mandel::new(a[(0, 0)], a[(1, 1)], SQRT2 * 0.5 * (a[(0, 1)] + a[(1, 0)]))
}

pub fn from_mandel(v: &Mandel) -> Matrix2<f64> {
    let s = v[2] / SQRT2;
    Matrix2::new(v[0], s, s, v[1])
}

/// Mandel vector of the identity.
pub fn identity() -> Mandel {
    Mandel::new(1.0, 1.0, 0.0)
}

/// Mandel vector of `p ⊗ p`.
pub fn outer(p: &Vec2) -> Mandel {
    Mandel::new(p[0] * p[0], p[1] * p[1], SQRT2 * p[0] * p[1])
}

/// Mandel vector of `(p ⊗ q + q ⊗ p) / 2`.
pub fn sym_outer(p: &Vec2, q: &Vec2) -> Mandel {
    Mandel::new(
        p[0] * q[0],
        p[1] * q[1],
        SQRT2 * 0.5 * (p[0] * q[1] + p[1] * q[0]),
    )
}

/// Mandel stiffness of the isotropic law `a -> lambda tr(a) I + 2 mu a`.
pub fn isotropic(lambda: f64, mu: f64) -> Stiffness {
    let m = identity();
    m * m.transpose() * lambda + Stiffness::identity() * (2.0 * mu)
}

/// Mandel strain of the symmetric gradient of a P1 vector field, given
/// the nodal values and the constant hat-function gradients.
pub fn strain(nodal: &[[f64; 2]; 3], grads: &[Vec2; 3]) -> Mandel {
    let mut g = Matrix2::zeros();
    for a in 0..3 {
        for i in 0..2 {
            for j in 0..2 {
                g[(i, j)] += nodal[a][i] * grads[a][j];
            }
        }
    }
    to_mandel(&(0.5 * (g + g.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_contraction_is_dot_product() {
        let a = Matrix2::new(1.0, 0.3, 0.3, -2.0);
        let b = Matrix2::new(0.5, -1.5, -1.5, 4.0);
        let direct: f64 = a.component_mul(&b).sum();
        assert!((to_mandel(&a).dot(&to_mandel(&b)) - direct).abs() < 1e-15);
        assert!((from_mandel(&to_mandel(&a)) - a).abs().max() < 1e-15);
    }

    #[test]
    fn isotropic_eigenvalues() {
        let c = isotropic(1.0, 1.0);
        let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 2.0).abs() < 1e-13);
        assert!((eig[1] - 2.0).abs() < 1e-13);
        assert!((eig[2] - 4.0).abs() < 1e-13);
    }
}
