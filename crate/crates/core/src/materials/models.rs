//! Built-in material models.
//!
//! * [`LameLaplace`]: polarization-independent isotropic elasticity and
//!   scalar permittivity, no coupling. Decoupled by construction.
//! * [`PolyPiezo`]: every map polynomial of degree at most two in `P`, with
//!   `e(0) = 0` and a double-well separation energy `κ(|P|² − 1)²`.
//! * [`BlowupTest`]: Lamé–Laplace elliptic part with the destabilizing
//!   separation energy `−a|P|⁴/4`, whose spatially constant dynamics
//!   `p' = a p³` blow up in finite time.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::tensor::{identity, isotropic, outer, sym_outer, Coupling, Dielectric, Mandel, Stiffness, Vec2, SQRT2};
use super::{MaterialError, MaterialModel};

#[derive(Debug, Clone, PartialEq)]
pub struct LameLaplace {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    /// Curvature of the optional separation energy `omega2 |P|² / 2`.
    pub omega2: f64,
}

impl LameLaplace {
    pub fn new(lambda: f64, mu: f64, gamma: f64) -> Self {
        Self::with_separation(lambda, mu, gamma, 0.0)
    }

    pub fn with_separation(lambda: f64, mu: f64, gamma: f64, omega2: f64) -> Self {
        Self {
            lambda,
            mu,
            gamma,
            omega2,
        }
    }
}

impl Default for LameLaplace {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

impl MaterialModel for LameLaplace {
    fn name(&self) -> &str {
        "lame_laplace"
    }
    fn stiffness(&self, _: &Vec2) -> Stiffness {
        isotropic(self.lambda, self.mu)
    }
    fn stiffness_grad(&self, _: &Vec2) -> [Stiffness; 2] {
        [Stiffness::zeros(); 2]
    }
    fn dielectric(&self, _: &Vec2) -> Dielectric {
        Dielectric::identity() * self.gamma
    }
    fn dielectric_grad(&self, _: &Vec2) -> [Dielectric; 2] {
        [Dielectric::zeros(); 2]
    }
    fn separation(&self, p: &Vec2) -> f64 {
        0.5 * self.omega2 * p.norm_squared()
    }
    fn separation_grad(&self, p: &Vec2) -> Vec2 {
        p * self.omega2
    }
}

/// Quadratic-in-`P` piezoelectric model.
///
/// ```text
/// C(P)  = C_iso(λ, μ) + c_p w wᵀ,          w = (P₀, P₁, 0)   (Mandel)
/// e(P)ε = e₁ tr(ε) P + e₂ ε P
/// ε⁰(P) = s_a P ⊗ P − s_b |P|² I
/// εd(P) = γ I + g_p P ⊗ P
/// ω(P)  = κ (|P|² − 1)²
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPiezo {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub c_p: f64,
    pub e1: f64,
    pub e2: f64,
    pub s_a: f64,
    pub s_b: f64,
    pub g_p: f64,
    pub kappa: f64,
}

impl Default for PolyPiezo {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            gamma: 1.0,
            c_p: 0.5,
            e1: 0.3,
            e2: 0.2,
            s_a: 0.05,
            s_b: 0.02,
            g_p: 0.3,
            kappa: 1.0,
        }
    }
}

impl PolyPiezo {
    /// Variant without coupling and spontaneous strain; the elliptic problem
    /// then reduces to electrostatics driven by `P`.
    pub fn reduced() -> Self {
        Self {
            e1: 0.0,
            e2: 0.0,
            s_a: 0.0,
            s_b: 0.0,
            ..Self::default()
        }
    }

    fn unit(k: usize) -> Vec2 {
        if k == 0 {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(0.0, 1.0)
        }
    }
}

impl MaterialModel for PolyPiezo {
    fn name(&self) -> &str {
        "poly_piezo"
    }

    fn stiffness(&self, p: &Vec2) -> Stiffness {
        let w = Mandel::new(p[0], p[1], 0.0);
        isotropic(self.lambda, self.mu) + w * w.transpose() * self.c_p
    }

    fn stiffness_grad(&self, p: &Vec2) -> [Stiffness; 2] {
        let w = Mandel::new(p[0], p[1], 0.0);
        [0, 1].map(|k| {
            let mut ek = Mandel::zeros();
            ek[k] = 1.0;
            (ek * w.transpose() + w * ek.transpose()) * self.c_p
        })
    }

    fn coupling(&self, p: &Vec2) -> Coupling {
        let r = 1.0 / SQRT2;
        p * identity().transpose() * self.e1
            + Coupling::new(p[0], 0.0, p[1] * r, 0.0, p[1], p[0] * r) * self.e2
    }

    fn coupling_grad(&self, _p: &Vec2) -> [Coupling; 2] {
        let r = 1.0 / SQRT2;
        [
            Coupling::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0) * self.e1
                + Coupling::new(1.0, 0.0, 0.0, 0.0, 0.0, r) * self.e2,
            Coupling::new(0.0, 0.0, 0.0, 1.0, 1.0, 0.0) * self.e1
                + Coupling::new(0.0, 0.0, r, 0.0, 1.0, 0.0) * self.e2,
        ]
    }

    fn plastic_strain(&self, p: &Vec2) -> Mandel {
        outer(p) * self.s_a - identity() * (self.s_b * p.norm_squared())
    }

    fn plastic_strain_grad(&self, p: &Vec2) -> [Mandel; 2] {
        [0, 1].map(|k| {
            sym_outer(&Self::unit(k), p) * (2.0 * self.s_a) - identity() * (2.0 * self.s_b * p[k])
        })
    }

    fn dielectric(&self, p: &Vec2) -> Dielectric {
        Dielectric::identity() * self.gamma + p * p.transpose() * self.g_p
    }

    fn dielectric_grad(&self, p: &Vec2) -> [Dielectric; 2] {
        [0, 1].map(|k| {
            let ek = Self::unit(k);
            (ek * p.transpose() + p * ek.transpose()) * self.g_p
        })
    }

    fn separation(&self, p: &Vec2) -> f64 {
        let s = p.norm_squared() - 1.0;
        self.kappa * s * s
    }

    fn separation_grad(&self, p: &Vec2) -> Vec2 {
        p * (4.0 * self.kappa * (p.norm_squared() - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupTest {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub a: f64,
}

impl Default for BlowupTest {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            gamma: 1.0,
            a: 1.0,
        }
    }
}

impl MaterialModel for BlowupTest {
    fn name(&self) -> &str {
        "blowup_test"
    }
    fn stiffness(&self, _: &Vec2) -> Stiffness {
        isotropic(self.lambda, self.mu)
    }
    fn stiffness_grad(&self, _: &Vec2) -> [Stiffness; 2] {
        [Stiffness::zeros(); 2]
    }
    fn dielectric(&self, _: &Vec2) -> Dielectric {
        Dielectric::identity() * self.gamma
    }
    fn dielectric_grad(&self, _: &Vec2) -> [Dielectric; 2] {
        [Dielectric::zeros(); 2]
    }
    fn separation(&self, p: &Vec2) -> f64 {
        -0.25 * self.a * p.norm_squared().powi(2)
    }
    fn separation_grad(&self, p: &Vec2) -> Vec2 {
        p * (-self.a * p.norm_squared())
    }
}

fn apply_params(
    model: &str,
    params: &BTreeMap<String, f64>,
    slots: &mut [(&str, &mut f64)],
) -> Result<(), MaterialError> {
    for (key, &value) in params {
        let slot = slots
            .iter_mut()
            .find(|(name, _)| name == key)
            .ok_or_else(|| MaterialError::UnknownParameter {
                model: model.to_string(),
                key: key.clone(),
            })?;
        if !value.is_finite() {
            return Err(MaterialError::InvalidParameter(format!(
                "{model}.{key} must be finite"
            )));
        }
        *slot.1 = value;
    }
    Ok(())
}

/// Parameter names accepted by each built-in model.
pub fn parameter_names(name: &str) -> Option<&'static [&'static str]> {
    match name {
        "lame_laplace" => Some(&["lambda", "mu", "gamma", "omega2"]),
        "poly_piezo" => Some(&[
            "lambda", "mu", "gamma", "c_p", "e1", "e2", "s_a", "s_b", "g_p", "kappa",
        ]),
        "blowup_test" => Some(&["lambda", "mu", "gamma", "a"]),
        _ => None,
    }
}

/// Builds a built-in model by name, overriding defaults from `params`.
pub fn material_from_name(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<Arc<dyn MaterialModel>, MaterialError> {
    match name {
        "lame_laplace" => {
            let mut m = LameLaplace::default();
            apply_params(
                name,
                params,
                &mut [
                    ("lambda", &mut m.lambda),
                    ("mu", &mut m.mu),
                    ("gamma", &mut m.gamma),
                    ("omega2", &mut m.omega2),
                ],
            )?;
            Ok(Arc::new(m))
        }
        "poly_piezo" => {
            let mut m = PolyPiezo::default();
            apply_params(
                name,
                params,
                &mut [
                    ("lambda", &mut m.lambda),
                    ("mu", &mut m.mu),
                    ("gamma", &mut m.gamma),
                    ("c_p", &mut m.c_p),
                    ("e1", &mut m.e1),
                    ("e2", &mut m.e2),
                    ("s_a", &mut m.s_a),
                    ("s_b", &mut m.s_b),
                    ("g_p", &mut m.g_p),
                    ("kappa", &mut m.kappa),
                ],
            )?;
            Ok(Arc::new(m))
        }
        "blowup_test" => {
            let mut m = BlowupTest::default();
            apply_params(
                name,
                params,
                &mut [
                    ("lambda", &mut m.lambda),
                    ("mu", &mut m.mu),
                    ("gamma", &mut m.gamma),
                    ("a", &mut m.a),
                ],
            )?;
            Ok(Arc::new(m))
        }
        other => Err(MaterialError::UnknownModel(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::eval_material;

    #[test]
    fn from_name_applies_overrides() {
        let mut params = BTreeMap::new();
        params.insert("kappa".to_string(), 2.0);
        let m = material_from_name("poly_piezo", &params).unwrap();
        let mp = eval_material(m.as_ref(), &Vec2::zeros()).unwrap();
        assert_eq!(mp.omega, 2.0);

        params.insert("nope".to_string(), 1.0);
        assert!(matches!(
            material_from_name("poly_piezo", &params),
            Err(MaterialError::UnknownParameter { .. })
        ));
        assert!(material_from_name("granite", &BTreeMap::new()).is_err());
    }

    #[test]
    fn poly_piezo_coupling_vanishes_at_zero() {
        let m = PolyPiezo::default();
        assert_eq!(m.coupling(&Vec2::zeros()), Coupling::zeros());
        // e(P) ε for ε = I: e1 tr(I) P + e2 P = (2 e1 + e2) P
        let p = Vec2::new(0.4, -0.9);
        let got = m.coupling(&p) * identity();
        assert!((got - p * (2.0 * m.e1 + m.e2)).norm() < 1e-15);
    }

    #[test]
    fn blowup_source_is_cubic() {
        let m = BlowupTest::default();
        let p = Vec2::new(0.6, 0.8);
        assert!((m.separation_grad(&p) + p).norm() < 1e-15);
    }
}
