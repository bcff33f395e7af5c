//! Polarization-dependent material maps and the coupled block tensor.
//!
//! A [`MaterialModel`] supplies the five maps of the constitutive law as
//! functions of the polarization `P`:
//!
//! * `C(P)`   elastic stiffness, a symmetric operator on symmetric strains,
//! * `e(P)`   piezoelectric coupling, strains to 2-vectors,
//! * `ε⁰(P)`  spontaneous (plastic) strain,
//! * `εd(P)`  dielectric matrix,
//! * `ω(P)`   separation energy density,
//!
//! together with their partial derivatives with respect to `P[0]` and
//! `P[1]`. Stress and dielectric displacement read
//!
//! ```text
//! σ = C(P)(ε(u) − ε⁰(P)) + e(P)ᵀ∇φ
//! D = e(P)(ε(u) − ε⁰(P)) − εd(P)∇φ + P
//! ```
//!
//! Tensors use the Mandel convention of [`tensor`].

pub mod checks;
pub mod models;
pub mod tensor;

use std::fmt;

use thiserror::Error;

pub use checks::{
    check_decoupling_at_zero, check_pointwise_coercivity, check_smoothness,
    derivative_self_check, CoercivityReport, DecouplingReport, DerivativeCheck, SmoothnessReport,
};
pub use models::{material_from_name, BlowupTest, LameLaplace, PolyPiezo};
use tensor::{Coupling, Dielectric, Mandel, Stiffness, Vec2};

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("material map `{map}` is not finite at P = ({}, {})", p[0], p[1])]
    NonFinite { map: &'static str, p: [f64; 2] },
    #[error("material map `{map}` is not symmetric at P = ({}, {})", p[0], p[1])]
    Asymmetric { map: &'static str, p: [f64; 2] },
    #[error("unknown material model `{0}`")]
    UnknownModel(String),
    #[error("material `{model}` has no parameter `{key}`")]
    UnknownParameter { model: String, key: String },
    #[error("invalid material parameter: {0}")]
    InvalidParameter(String),
    #[error("evaluation failed at sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<MaterialError>,
    },
}

/// Material law as functions of the polarization. Derivative methods return
/// partials with respect to `P[0]` and `P[1]`. Coupling, spontaneous strain
/// and separation energy default to zero.
pub trait MaterialModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn stiffness(&self, p: &Vec2) -> Stiffness;
    fn stiffness_grad(&self, p: &Vec2) -> [Stiffness; 2];

    fn dielectric(&self, p: &Vec2) -> Dielectric;
    fn dielectric_grad(&self, p: &Vec2) -> [Dielectric; 2];

    fn coupling(&self, _p: &Vec2) -> Coupling {
        Coupling::zeros()
    }
    fn coupling_grad(&self, _p: &Vec2) -> [Coupling; 2] {
        [Coupling::zeros(); 2]
    }

    fn plastic_strain(&self, _p: &Vec2) -> Mandel {
        Mandel::zeros()
    }
    fn plastic_strain_grad(&self, _p: &Vec2) -> [Mandel; 2] {
        [Mandel::zeros(); 2]
    }

    fn separation(&self, _p: &Vec2) -> f64 {
        0.0
    }
    fn separation_grad(&self, _p: &Vec2) -> Vec2 {
        Vec2::zeros()
    }
}

/// All maps and partial derivatives evaluated at one polarization value.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPoint {
    pub p: Vec2,
    pub c: Stiffness,
    pub dc: [Stiffness; 2],
    pub e: Coupling,
    pub de: [Coupling; 2],
    pub eps0: Mandel,
    pub deps0: [Mandel; 2],
    pub epsd: Dielectric,
    pub depsd: [Dielectric; 2],
    pub omega: f64,
    pub domega: Vec2,
}

fn finite<'a>(map: &'static str, p: &Vec2, vals: impl IntoIterator<Item = &'a f64>) -> Result<(), MaterialError> {
    if vals.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MaterialError::NonFinite {
            map,
            p: [p[0], p[1]],
        })
    }
}

fn symmetric<const N: usize>(
    map: &'static str,
    p: &Vec2,
    m: &nalgebra::SMatrix<f64, N, N>,
) -> Result<(), MaterialError> {
    let scale = m.abs().max().max(1.0);
    if (m - m.transpose()).abs().max() <= 1e-12 * scale {
        Ok(())
    } else {
        Err(MaterialError::Asymmetric {
            map,
            p: [p[0], p[1]],
        })
    }
}

/// Evaluates every map of `model` at `p`, rejecting non-finite output and
/// asymmetric stiffness or dielectric tensors.
pub fn eval_material(model: &dyn MaterialModel, p: &Vec2) -> Result<MaterialPoint, MaterialError> {
    let mp = MaterialPoint {
        p: *p,
        c: model.stiffness(p),
        dc: model.stiffness_grad(p),
        e: model.coupling(p),
        de: model.coupling_grad(p),
        eps0: model.plastic_strain(p),
        deps0: model.plastic_strain_grad(p),
        epsd: model.dielectric(p),
        depsd: model.dielectric_grad(p),
        omega: model.separation(p),
        domega: model.separation_grad(p),
    };
    finite("C", p, mp.c.iter())?;
    finite("dC", p, mp.dc.iter().flat_map(|m| m.iter()))?;
    finite("e", p, mp.e.iter())?;
    finite("de", p, mp.de.iter().flat_map(|m| m.iter()))?;
    finite("eps0", p, mp.eps0.iter())?;
    finite("deps0", p, mp.deps0.iter().flat_map(|m| m.iter()))?;
    finite("epsd", p, mp.epsd.iter())?;
    finite("depsd", p, mp.depsd.iter().flat_map(|m| m.iter()))?;
    finite("omega", p, std::iter::once(&mp.omega))?;
    finite("domega", p, mp.domega.iter())?;
    symmetric("C", p, &mp.c)?;
    symmetric("epsd", p, &mp.epsd)?;
    for k in 0..2 {
        symmetric("dC", p, &mp.dc[k])?;
        symmetric("depsd", p, &mp.depsd[k])?;
    }
    Ok(mp)
}

impl MaterialPoint {
    pub fn dc_dir(&self, d: &Vec2) -> Stiffness {
        self.dc[0] * d[0] + self.dc[1] * d[1]
    }
    pub fn de_dir(&self, d: &Vec2) -> Coupling {
        self.de[0] * d[0] + self.de[1] * d[1]
    }
    pub fn deps0_dir(&self, d: &Vec2) -> Mandel {
        self.deps0[0] * d[0] + self.deps0[1] * d[1]
    }
    pub fn depsd_dir(&self, d: &Vec2) -> Dielectric {
        self.depsd[0] * d[0] + self.depsd[1] * d[1]
    }
    pub fn domega_dir(&self, d: &Vec2) -> f64 {
        self.domega.dot(d)
    }

    pub fn block(&self) -> BlockOperator {
        assemble_b(self)
    }

    /// Directional derivative of the block tensor along `d`.
    pub fn block_derivative(&self, d: &Vec2) -> BlockOperator {
        BlockOperator {
            c: self.dc_dir(d),
            e: self.de_dir(d),
            epsd: self.depsd_dir(d),
        }
    }
}

/// The block tensor `B = [[C, eᵀ], [−e, εd]]` acting on (strain, vector)
/// pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOperator {
    pub c: Stiffness,
    pub e: Coupling,
    pub epsd: Dielectric,
}

impl BlockOperator {
    pub fn apply(&self, eps: &Mandel, g: &Vec2) -> (Mandel, Vec2) {
        (
            self.c * eps + self.e.transpose() * g,
            -(self.e * eps) + self.epsd * g,
        )
    }

    /// `B(eps_a, g_a) : (eps_b, g_b)`.
    pub fn pair(&self, a: (&Mandel, &Vec2), b: (&Mandel, &Vec2)) -> f64 {
        let (s, d) = self.apply(a.0, a.1);
        s.dot(b.0) + d.dot(b.1)
    }
}

pub fn assemble_b(mp: &MaterialPoint) -> BlockOperator {
    BlockOperator {
        c: mp.c,
        e: mp.e,
        epsd: mp.epsd,
    }
}
