//! Numerical checks of the material assumptions: derivative consistency,
//! Lipschitz continuity of the derivatives, pointwise coercivity and
//! decoupling of the elliptic system at zero polarization.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{isotropic, Dielectric, Vec2};
use super::{eval_material, MaterialError, MaterialModel, MaterialPoint};

/// Map names in the order used by every report.
pub const MAP_NAMES: [&str; 5] = ["C", "e", "eps0", "epsd", "omega"];

type Flat = (Vec<f64>, [Vec<f64>; 2]);

fn flatten(mp: &MaterialPoint) -> [Flat; 5] {
    fn grads<'a, I: IntoIterator<Item = &'a f64>>(a: I, b: I) -> [Vec<f64>; 2] {
        [a.into_iter().copied().collect(), b.into_iter().copied().collect()]
    }
    [
        (mp.c.iter().copied().collect(), grads(mp.dc[0].iter(), mp.dc[1].iter())),
        (mp.e.iter().copied().collect(), grads(mp.de[0].iter(), mp.de[1].iter())),
        (
            mp.eps0.iter().copied().collect(),
            grads(mp.deps0[0].iter(), mp.deps0[1].iter()),
        ),
        (
            mp.epsd.iter().copied().collect(),
            grads(mp.depsd[0].iter(), mp.depsd[1].iter()),
        ),
        (vec![mp.omega], [vec![mp.domega[0]], vec![mp.domega[1]]]),
    ]
}

fn norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    /// `‖fd − supplied‖ / max(‖supplied‖, 1)` maximized over maps, samples
    /// and both partial derivatives.
    pub max_rel_error: f64,
    pub worst_map: &'static str,
    pub worst_sample: Option<Vec2>,
}

impl DerivativeCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Compares supplied partial derivatives against central differences of the
/// maps with step `h`. Evaluation errors count as infinite error.
pub fn derivative_self_check(model: &dyn MaterialModel, samples: &[Vec2], h: f64) -> DerivativeCheck {
    let mut out = DerivativeCheck {
        max_rel_error: 0.0,
        worst_map: MAP_NAMES[0],
        worst_sample: None,
    };
    for p in samples {
        let centre = eval_material(model, p);
        let mut shifted = Vec::with_capacity(2);
        for k in 0..2 {
            let mut dp = Vec2::zeros();
            dp[k] = h;
            shifted.push((eval_material(model, &(p + dp)), eval_material(model, &(p - dp))));
        }
        let Ok(centre) = centre else {
            out.max_rel_error = f64::INFINITY;
            out.worst_sample = Some(*p);
            continue;
        };
        let centre = flatten(&centre);
        for (k, (plus, minus)) in shifted.into_iter().enumerate() {
            let (Ok(plus), Ok(minus)) = (plus, minus) else {
                out.max_rel_error = f64::INFINITY;
                out.worst_sample = Some(*p);
                continue;
            };
            let (plus, minus) = (flatten(&plus), flatten(&minus));
            for m in 0..5 {
                let supplied = &centre[m].1[k];
                let diff = norm(
                    plus[m]
                        .0
                        .iter()
                        .zip(&minus[m].0)
                        .zip(supplied)
                        .map(|((a, b), d)| (a - b) / (2.0 * h) - d),
                );
                let rel = diff / norm(supplied.iter().copied()).max(1.0);
                if !(rel <= out.max_rel_error) {
                    out.max_rel_error = rel;
                    out.worst_map = MAP_NAMES[m];
                    out.worst_sample = Some(*p);
                }
            }
        }
    }
    out
}

/// `n` seeded uniform samples of the box `[lo, hi]`.
pub fn random_samples(lo: Vec2, hi: Vec2, n: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vec2::new(rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessReport {
    /// Largest `‖Df(x) − Df(y)‖ / |x − y|` over sampled pairs at step `h`.
    pub ratios: BTreeMap<&'static str, f64>,
    /// Maps whose ratio is non-finite or grows when the step shrinks.
    pub flagged: Vec<&'static str>,
}

impl SmoothnessReport {
    pub fn passes(&self) -> bool {
        self.flagged.is_empty()
    }
}

const GRID: usize = 11;

/// Estimates Lipschitz constants of the derivative maps on the box
/// `[lo, hi]` from centred pairs `x ± s d / 2` around an 11x11 grid, for
/// `s = h` and `s = h / 10`. A ratio that more than doubles under the
/// smaller step is taken as divergence (a kink) and flagged.
pub fn check_smoothness(
    model: &dyn MaterialModel,
    lo: Vec2,
    hi: Vec2,
    h: f64,
) -> Result<SmoothnessReport, MaterialError> {
    if !(h > 0.0) || (hi - lo).iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(MaterialError::InvalidParameter(
            "smoothness check needs h > 0 and a bounded box".into(),
        ));
    }
    let dirs = [
        Vec2::new(1.0, 0.0),
        Vec2::new(0.0, 1.0),
        Vec2::new(1.0, 1.0).normalize(),
        Vec2::new(1.0, -1.0).normalize(),
    ];
    let mut coarse = [0.0f64; 5];
    let mut fine = [0.0f64; 5];
    let mut index = 0;
    for j in 0..GRID {
        for i in 0..GRID {
            let x = Vec2::new(
                lo[0] + (hi[0] - lo[0]) * i as f64 / (GRID - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (GRID - 1) as f64,
            );
            for d in &dirs {
                for (step, acc) in [(h, &mut coarse), (h / 10.0, &mut fine)] {
                    let eval = |y: Vec2| {
                        eval_material(model, &y).map_err(|e| MaterialError::Sample {
                            index,
                            source: Box::new(e),
                        })
                    };
                    let a = flatten(&eval(x - d * (0.5 * step))?);
                    let b = flatten(&eval(x + d * (0.5 * step))?);
                    for m in 0..5 {
                        let diff = norm((0..2).flat_map(|k| {
                            a[m].1[k].iter().zip(&b[m].1[k]).map(|(p, q)| q - p)
                        }));
                        let ratio = diff / step;
                        if !(ratio <= acc[m]) {
                            acc[m] = ratio;
                        }
                    }
                }
                index += 1;
            }
        }
    }
    let mut ratios = BTreeMap::new();
    let mut flagged = Vec::new();
    for m in 0..5 {
        ratios.insert(MAP_NAMES[m], coarse[m]);
        let exploding = fine[m] > 2.0 * coarse[m] + 1e-9;
        if !coarse[m].is_finite() || !fine[m].is_finite() || exploding {
            flagged.push(MAP_NAMES[m]);
        }
    }
    Ok(SmoothnessReport { ratios, flagged })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    pub alpha_min: f64,
    pub samples: usize,
    pub failed_sample: Option<Vec2>,
}

/// Pointwise ellipticity constant `min(λ_min C(P), λ_min εd(P))`.
pub fn pointwise_alpha(mp: &MaterialPoint) -> f64 {
    let c = mp.c.symmetric_eigenvalues().min();
    let d = mp.epsd.symmetric_eigenvalues().min();
    c.min(d)
}

/// Minimum pointwise ellipticity constant over `samples`; the first sample
/// with a non-positive (or non-finite) constant is recorded.
pub fn check_pointwise_coercivity(model: &dyn MaterialModel, samples: &[Vec2]) -> CoercivityReport {
    let mut alpha_min = f64::INFINITY;
    let mut failed_sample = None;
    for p in samples {
        let alpha = match eval_material(model, p) {
            Ok(mp) => pointwise_alpha(&mp),
            Err(_) => f64::NAN,
        };
        if !(alpha > 0.0) && failed_sample.is_none() {
            failed_sample = Some(*p);
        }
        if !(alpha >= alpha_min) {
            alpha_min = if alpha.is_nan() { f64::NEG_INFINITY } else { alpha };
        }
    }
    if samples.is_empty() {
        alpha_min = f64::NAN;
    }
    CoercivityReport {
        alpha_min,
        samples: samples.len(),
        failed_sample,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingReport {
    pub decoupled: bool,
    /// Largest absolute deviation from the decoupled Lamé–Laplace form.
    pub deviation: f64,
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
}

/// Checks `e(0) = 0`, `C(0)` isotropic and `εd(0)` a multiple of the
/// identity, each to 1e-12 absolute.
pub fn check_decoupling_at_zero(model: &dyn MaterialModel) -> Result<DecouplingReport, MaterialError> {
    let mp = eval_material(model, &Vec2::zeros())?;
    let mu = 0.5 * mp.c[(2, 2)];
    let lambda = mp.c[(0, 1)];
    let gamma = 0.5 * mp.epsd.trace();
    let dev_c = (mp.c - isotropic(lambda, mu)).abs().max();
    let dev_e = mp.e.abs().max();
    let dev_d = (mp.epsd - Dielectric::identity() * gamma).abs().max();
    let deviation = dev_c.max(dev_e).max(dev_d);
    Ok(DecouplingReport {
        decoupled: dev_c <= 1e-12 && dev_e <= 1e-12 && dev_d <= 1e-12,
        deviation,
        lambda,
        mu,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tensor::{Coupling, Stiffness};
    use super::super::{BlowupTest, LameLaplace, PolyPiezo};
    use super::*;

    /// Lamé–Laplace elliptic part with a configurable separation energy.
    #[derive(Debug)]
    struct WithOmega(fn(&Vec2) -> f64, fn(&Vec2) -> Vec2);
    impl MaterialModel for WithOmega {
        fn name(&self) -> &str {
            "with_omega"
        }
        fn stiffness(&self, _: &Vec2) -> Stiffness {
            isotropic(1.0, 1.0)
        }
        fn stiffness_grad(&self, _: &Vec2) -> [Stiffness; 2] {
            [Stiffness::zeros(); 2]
        }
        fn dielectric(&self, _: &Vec2) -> Dielectric {
            Dielectric::identity()
        }
        fn dielectric_grad(&self, _: &Vec2) -> [Dielectric; 2] {
            [Dielectric::zeros(); 2]
        }
        fn separation(&self, p: &Vec2) -> f64 {
            (self.0)(p)
        }
        fn separation_grad(&self, p: &Vec2) -> Vec2 {
            (self.1)(p)
        }
    }

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        let samples = random_samples(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), 50, 11);
        for m in [
            &PolyPiezo::default() as &dyn MaterialModel,
            &LameLaplace::with_separation(1.0, 1.0, 1.0, 0.7),
            &BlowupTest::default(),
        ] {
            let r = derivative_self_check(m, &samples, 1e-5);
            assert!(r.passes(1e-6), "{}: {r:?}", m.name());
        }
    }

    #[test]
    fn affine_model_has_zero_ratio() {
        let r = check_smoothness(
            &LameLaplace::default(),
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, 1.0),
            1e-3,
        )
        .unwrap();
        assert!(r.passes());
        assert!(r.ratios.values().all(|&v| v <= 1e-10), "{r:?}");
    }

    #[test]
    fn quartic_ratio_bounded() {
        let m = WithOmega(|p| 0.25 * p.norm_squared().powi(2), |p| p * p.norm_squared());
        let r = check_smoothness(&m, Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), 1e-4).unwrap();
        assert!(r.passes(), "{r:?}");
        let omega = r.ratios["omega"];
        assert!(omega > 5.0 && omega <= 7.0, "{omega}");
    }

    #[test]
    fn kink_is_flagged() {
        let m = WithOmega(|p| p.norm(), |p| p / p.norm());
        let r = check_smoothness(&m, Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), 1e-4).unwrap();
        assert_eq!(r.flagged, vec!["omega"]);
    }

    #[test]
    fn lame_laplace_alpha_is_one() {
        // brute-force check of the Mandel eigenvalues first
        let mut eig: Vec<f64> = isotropic(1.0, 1.0).symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 2.0).abs() < 1e-13 && (eig[2] - 4.0).abs() < 1e-13);

        let samples = random_samples(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), 20, 3);
        let r = check_pointwise_coercivity(&LameLaplace::default(), &samples);
        assert!((r.alpha_min - 1.0).abs() < 1e-13);
        assert!(r.failed_sample.is_none());
        assert_eq!(r.samples, 20);
    }

    #[test]
    fn negative_permittivity_fails() {
        #[derive(Debug)]
        struct Neg;
        impl MaterialModel for Neg {
            fn name(&self) -> &str {
                "neg"
            }
            fn stiffness(&self, _: &Vec2) -> Stiffness {
                isotropic(1.0, 1.0)
            }
            fn stiffness_grad(&self, _: &Vec2) -> [Stiffness; 2] {
                [Stiffness::zeros(); 2]
            }
            fn dielectric(&self, _: &Vec2) -> Dielectric {
                -Dielectric::identity()
            }
            fn dielectric_grad(&self, _: &Vec2) -> [Dielectric; 2] {
                [Dielectric::zeros(); 2]
            }
        }
        let r = check_pointwise_coercivity(&Neg, &[Vec2::new(0.1, 0.2)]);
        assert!(r.alpha_min <= 0.0);
        assert_eq!(r.failed_sample, Some(Vec2::new(0.1, 0.2)));
    }

    #[test]
    fn degenerate_stiffness_at_sample() {
        // C(P) = C_iso(0, μ(P)) with μ vanishing at P = (1, 0) on the shear mode
        #[derive(Debug)]
        struct Degenerate;
        impl MaterialModel for Degenerate {
            fn name(&self) -> &str {
                "degenerate"
            }
            fn stiffness(&self, p: &Vec2) -> Stiffness {
                let d = (p - Vec2::new(1.0, 0.0)).norm_squared();
                let mut c = isotropic(1.0, 1.0);
                c[(2, 2)] = 2.0 * d;
                c
            }
            fn stiffness_grad(&self, p: &Vec2) -> [Stiffness; 2] {
                let q = p - Vec2::new(1.0, 0.0);
                [0, 1].map(|k| {
                    let mut g = Stiffness::zeros();
                    g[(2, 2)] = 4.0 * q[k];
                    g
                })
            }
            fn dielectric(&self, _: &Vec2) -> Dielectric {
                Dielectric::identity()
            }
            fn dielectric_grad(&self, _: &Vec2) -> [Dielectric; 2] {
                [Dielectric::zeros(); 2]
            }
        }
        let r = check_pointwise_coercivity(&Degenerate, &[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]);
        assert_eq!(r.alpha_min, 0.0);
        assert_eq!(r.failed_sample, Some(Vec2::new(1.0, 0.0)));
    }

    #[test]
    fn adding_samples_never_increases_alpha() {
        let m = PolyPiezo::default();
        let all = random_samples(Vec2::new(-2.0, -2.0), Vec2::new(2.0, 2.0), 40, 5);
        let mut prev = f64::INFINITY;
        for n in 1..=all.len() {
            let a = check_pointwise_coercivity(&m, &all[..n]).alpha_min;
            assert!(a <= prev);
            prev = a;
        }
    }

    #[test]
    fn decoupling() {
        let r = check_decoupling_at_zero(&LameLaplace::new(2.0, 0.7, 3.0)).unwrap();
        assert!(r.decoupled && r.deviation < 1e-15);
        assert!((r.lambda - 2.0).abs() < 1e-15 && (r.mu - 0.7).abs() < 1e-15);
        assert!(check_decoupling_at_zero(&PolyPiezo::default()).unwrap().decoupled);

        #[derive(Debug)]
        struct Coupled;
        impl MaterialModel for Coupled {
            fn name(&self) -> &str {
                "coupled"
            }
            fn stiffness(&self, _: &Vec2) -> Stiffness {
                isotropic(1.0, 1.0)
            }
            fn stiffness_grad(&self, _: &Vec2) -> [Stiffness; 2] {
                [Stiffness::zeros(); 2]
            }
            fn dielectric(&self, _: &Vec2) -> Dielectric {
                Dielectric::identity()
            }
            fn dielectric_grad(&self, _: &Vec2) -> [Dielectric; 2] {
                [Dielectric::zeros(); 2]
            }
            fn coupling(&self, _: &Vec2) -> Coupling {
                Coupling::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
        }
        let r = check_decoupling_at_zero(&Coupled).unwrap();
        assert!(!r.decoupled);
        assert!((r.deviation - 0.1).abs() < 1e-15);
    }
}
