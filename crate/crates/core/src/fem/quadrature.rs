/// Quadrature on the reference triangle `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`.
/// Weights sum to the reference area `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// Three interior points, exact for polynomials of degree two. Used for
    /// all assembly.
    pub fn order2() -> Self {
        let a = 1.0 / 6.0;
        let b = 2.0 / 3.0;
        Self {
            points: vec![[a, a], [b, a], [a, b]],
            weights: vec![1.0 / 6.0; 3],
        }
    }

    /// Seven-point rule exact for degree five. Used for error norms.
    pub fn order5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = (9.0 + 2.0 * s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = (9.0 - 2.0 * s15) / 21.0;
        let w1 = (155.0 - s15) / 2400.0;
        let w2 = (155.0 + s15) / 2400.0;
        Self {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0],
                [a1, a1],
                [b1, a1],
                [a1, b1],
                [a2, a2],
                [b2, a2],
                [a2, b2],
            ],
            weights: vec![9.0 / 80.0, w1, w1, w1, w2, w2, w2],
        }
    }
}

/// Rule of the requested polynomial order on the reference triangle.
pub fn quadrature_rule(order: usize) -> Result<QuadratureRule, super::FemError> {
    match order {
        2 => Ok(QuadratureRule::order2()),
        5 => Ok(QuadratureRule::order5()),
        other => Err(super::FemError::UnsupportedQuadrature(other)),
    }
}

/// Two-point Gauss–Legendre rule on `[0, 1]` (weights sum to one).
pub fn edge_rule() -> [(f64, f64); 2] {
    let d = 3f64.sqrt() / 6.0;
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}
