//! Interaction kernels with a singularity classification.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    flat_distance, geodesic_distance_s3, timelike_distance, ScaleFactorModel, SpacetimePoint,
    SpatialPoint,
};

pub type KernelFn = Arc<dyn Fn(&SpacetimePoint, &SpacetimePoint) -> Complex64 + Send + Sync>;

/// The singular factor multiplying the bounded part of a kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Singularity {
    None,
    /// 1/|x₁ − x₂| in flat space.
    InverseSpatial,
    /// 1/sin s(q₁, q₂) on S³.
    InverseSine,
}

/// Convention for the Heaviside function on the light cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeavisideAtZero {
    One,
    Zero,
}

#[derive(Clone)]
pub struct InteractionKernel {
    name: String,
    bounded_factor: KernelFn,
    singularity: Singularity,
    sup_bound: f64,
}

impl fmt::Debug for InteractionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InteractionKernel")
            .field("name", &self.name)
            .field("singularity", &self.singularity)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl InteractionKernel {
    /// A kernel from its bounded factor and a declared bound `sup |f|`.
    pub fn new(
        name: impl Into<String>,
        singularity: Singularity,
        sup_bound: f64,
        f: impl Fn(&SpacetimePoint, &SpacetimePoint) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(sup_bound.is_finite() && sup_bound >= 0.0) {
            return Err(Error::model(format!(
                "kernel sup bound must be finite and non-negative, got {sup_bound}"
            )));
        }
        Ok(Self {
            name: name.into(),
            bounded_factor: Arc::new(f),
            singularity,
            sup_bound,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn singularity(&self) -> Singularity {
        self.singularity
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// The bounded factor f(x₁, x₂).
    pub fn bounded(&self, x1: &SpacetimePoint, x2: &SpacetimePoint) -> Complex64 {
        (self.bounded_factor)(x1, x2)
    }

    /// Full kernel value including the singular factor.
    pub fn evaluate(&self, x1: &SpacetimePoint, x2: &SpacetimePoint) -> Result<Complex64> {
        let f = self.bounded(x1, x2);
        match self.singularity {
            Singularity::None => Ok(f),
            Singularity::InverseSpatial => {
                let r = flat_distance(&x1.spatial, &x2.spatial)?;
                if r == 0.0 {
                    return Err(Error::Singular("1/|x₁−x₂| at coincident points".into()));
                }
                Ok(f / r)
            }
            Singularity::InverseSine => {
                let s = sphere_distance(x1, x2)?;
                let sin = s.sin();
                if s == 0.0 || s == PI || sin == 0.0 {
                    return Err(Error::Singular(format!("1/sin s at s = {s}")));
                }
                Ok(f / sin)
            }
        }
    }

    /// K'(x₁,x₂) = a^p(η₁) a^p(η₂) K(x₁,x₂).
    pub fn scale_weighted(&self, model: &ScaleFactorModel, power: f64) -> InteractionKernel {
        let inner = self.bounded_factor.clone();
        let model = model.clone();
        let sup_a = model.sup_norm();
        let factor = move |x1: &SpacetimePoint, x2: &SpacetimePoint| {
            let w = model.value(x1.eta).powf(power) * model.value(x2.eta).powf(power);
            inner(x1, x2) * w
        };
        InteractionKernel {
            name: format!("{}*a^{power}a^{power}", self.name),
            bounded_factor: Arc::new(factor),
            singularity: self.singularity,
            sup_bound: self.sup_bound * sup_a.powf(2.0 * power),
        }
    }
}

fn sphere_distance(x1: &SpacetimePoint, x2: &SpacetimePoint) -> Result<f64> {
    match (&x1.spatial, &x2.spatial) {
        (SpatialPoint::Sphere(a), SpatialPoint::Sphere(b)) => geodesic_distance_s3(a, b),
        _ => Err(Error::domain("1/sin s kernels need points on S³")),
    }
}

fn heaviside(x: f64, scale: f64, at_zero: HeavisideAtZero) -> f64 {
    let tol = 1e-12 * scale.max(1.0);
    if x > tol {
        1.0
    } else if x >= -tol {
        match at_zero {
            HeavisideAtZero::One => 1.0,
            HeavisideAtZero::Zero => 0.0,
        }
    } else {
        0.0
    }
}

/// ½H((η₁−η₂)² − |z₁−z₂|²) with H(0) = 1.
pub fn natural_kernel_1d() -> InteractionKernel {
    natural_kernel_1d_with(HeavisideAtZero::One)
}

/// ½H((η₁−η₂)² − |z₁−z₂|²) with an explicit light-cone convention.
pub fn natural_kernel_1d_with(at_zero: HeavisideAtZero) -> InteractionKernel {
    let f = move |x1: &SpacetimePoint, x2: &SpacetimePoint| {
        let dz = flat_distance(&x1.spatial, &x2.spatial).unwrap_or(f64::INFINITY);
        let dt = (x1.eta - x2.eta).abs();
        Complex64::new(0.5 * heaviside(dt - dz, dt + dz, at_zero), 0.0)
    };
    InteractionKernel {
        name: "natural-1d".into(),
        bounded_factor: Arc::new(f),
        singularity: Singularity::None,
        sup_bound: 0.5,
    }
}

/// K ≡ c.
pub fn constant_kernel(c: Complex64) -> InteractionKernel {
    InteractionKernel {
        name: "constant".into(),
        bounded_factor: Arc::new(move |_: &SpacetimePoint, _: &SpacetimePoint| c),
        singularity: Singularity::None,
        sup_bound: c.norm(),
    }
}

/// f(d(x₁,x₂)) on time-like pairs, 0 otherwise, with d the FLRW time-like distance.
pub fn covariant_bounded_kernel(
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    sup_bound: Option<f64>,
    model: &ScaleFactorModel,
) -> Result<InteractionKernel> {
    let sup =
        sup_bound.ok_or_else(|| Error::model("covariant kernel needs a declared sup bound"))?;
    let model = model.clone();
    InteractionKernel::new("covariant", Singularity::None, sup, move |x1, x2| {
        match timelike_distance(x1, x2, &model) {
            Ok(Some(d)) => Complex64::new(f(d), 0.0),
            _ => Complex64::new(0.0, 0.0),
        }
    })
}

/// f/|x₁ − x₂| in flat three-space.
pub fn singular_kernel_flat3d(
    f: impl Fn(&SpacetimePoint, &SpacetimePoint) -> Complex64 + Send + Sync + 'static,
    sup_bound: f64,
) -> Result<InteractionKernel> {
    InteractionKernel::new("singular-flat", Singularity::InverseSpatial, sup_bound, f)
}

/// f/sin s(q₁, q₂) on S³.
pub fn singular_kernel_closed(
    f: impl Fn(&SpacetimePoint, &SpacetimePoint) -> Complex64 + Send + Sync + 'static,
    sup_bound: f64,
) -> Result<InteractionKernel> {
    InteractionKernel::new("singular-closed", Singularity::InverseSine, sup_bound, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Curvature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(eta: f64, z: f64) -> SpacetimePoint {
        SpacetimePoint::new(eta, SpatialPoint::Line(z))
    }

    fn space(eta: f64, x: [f64; 3]) -> SpacetimePoint {
        SpacetimePoint::new(eta, SpatialPoint::Space(x))
    }

    fn sphere(eta: f64, alpha: f64) -> SpacetimePoint {
        SpacetimePoint::new(
            eta,
            SpatialPoint::Sphere([alpha.cos(), 0.0, alpha.sin(), 0.0]),
        )
    }

    fn random_sphere(rng: &mut ChaCha8Rng) -> [f64; 4] {
        loop {
            let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n > 0.1 && n < 1.0 {
                return v.map(|c| c / n);
            }
        }
    }

    #[test]
    fn natural_kernel_values() {
        let k = natural_kernel_1d();
        assert_eq!(
            k.evaluate(&line(2.0, 0.0), &line(0.5, 1.0)).unwrap().re,
            0.5
        );
        assert_eq!(
            k.evaluate(&line(1.0, 0.0), &line(0.5, 1.0)).unwrap().re,
            0.0
        );
        assert_eq!(
            k.evaluate(&line(1.5, 0.0), &line(0.5, 1.0)).unwrap().re,
            0.5
        );
        let k0 = natural_kernel_1d_with(HeavisideAtZero::Zero);
        assert_eq!(
            k0.evaluate(&line(1.5, 0.0), &line(0.5, 1.0)).unwrap().re,
            0.0
        );
        assert_eq!(k.sup_bound(), 0.5);
        assert_eq!(k.singularity(), Singularity::None);
    }

    #[test]
    fn covariant_kernel_values() {
        let one = ScaleFactorModel::constant(1.0, 10.0).unwrap();
        let k = covariant_bounded_kernel(|_| 1.0, Some(1.0), &one).unwrap();
        assert_eq!(
            k.evaluate(&line(1.0, 0.0), &line(1.0, 3.0)).unwrap().re,
            0.0
        );
        let c = covariant_bounded_kernel(|_| 0.7, Some(0.7), &one).unwrap();
        assert_eq!(
            c.evaluate(&line(3.0, 0.0), &line(1.0, 0.5)).unwrap().re,
            0.7
        );
        let e = covariant_bounded_kernel(|d| (-d).exp(), Some(1.0), &one).unwrap();
        let v = e.evaluate(&line(3.0, 1.0), &line(1.0, 0.0)).unwrap().re;
        assert!((v - (-1f64).exp()).abs() < 1e-14);
        assert!(covariant_bounded_kernel(|d| d, None, &one).is_err());
    }

    #[test]
    fn covariant_kernel_depends_only_on_distance() {
        let dust = ScaleFactorModel::dust(Curvature::Flat, 4.0).unwrap();
        let k = covariant_bounded_kernel(|d| (-d).exp(), Some(1.0), &dust).unwrap();
        let base = k
            .evaluate(&space(3.0, [0.0, 0.0, 0.0]), &space(1.0, [0.5, 0.0, 0.0]))
            .unwrap();
        // Same times, rotated and translated spatial separation of equal length.
        for (a, b) in [
            ([1.0, 1.0, 1.0], [1.0, 1.5, 1.0]),
            ([0.3, -0.2, 0.0], [0.3, -0.2, -0.5]),
            ([0.0, 0.0, 0.0], [0.3, 0.4, 0.0]),
        ] {
            let v = k.evaluate(&space(3.0, a), &space(1.0, b)).unwrap();
            assert!((v - base).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_kernels() {
        let k = singular_kernel_flat3d(|_, _| Complex64::new(1.0, 0.0), 1.0).unwrap();
        let v = k
            .evaluate(&space(1.0, [0.0, 0.0, 0.0]), &space(1.0, [2.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(v.re, 0.5);
        assert!(matches!(
            k.evaluate(&space(1.0, [0.0; 3]), &space(2.0, [0.0; 3])),
            Err(Error::Singular(_))
        ));
        let zero = singular_kernel_flat3d(|_, _| Complex64::new(0.0, 0.0), 0.0).unwrap();
        assert_eq!(
            zero.evaluate(&space(1.0, [0.0; 3]), &space(1.0, [1.0, 2.0, 0.0]))
                .unwrap()
                .re,
            0.0
        );
        let half = singular_kernel_flat3d(|_, _| Complex64::new(0.5, 0.0), 0.5).unwrap();
        assert_eq!(
            half.evaluate(&space(1.0, [0.0; 3]), &space(1.0, [0.0, 4.0, 0.0]))
                .unwrap()
                .re,
            0.125
        );

        let c = singular_kernel_closed(|_, _| Complex64::new(1.0, 0.0), 1.0).unwrap();
        assert!(
            (c.evaluate(&sphere(1.0, 0.0), &sphere(1.0, PI / 2.0))
                .unwrap()
                .re
                - 1.0)
                .abs()
                < 1e-15
        );
        assert!(matches!(
            c.evaluate(&sphere(1.0, 0.3), &sphere(2.0, 0.3)),
            Err(Error::Singular(_))
        ));
        let near = c
            .evaluate(&sphere(1.0, 0.0), &sphere(1.0, 1e-6))
            .unwrap()
            .re;
        assert!((near * 1e-6 - 1.0).abs() < 1e-9);

        let sine = singular_kernel_closed(
            |x1, x2| Complex64::new(sphere_distance(x1, x2).unwrap().sin(), 0.0),
            1.0,
        )
        .unwrap();
        for a in [0.1, 1.0, 2.0, 3.0] {
            let v = sine
                .evaluate(&sphere(1.0, 0.0), &sphere(0.5, a))
                .unwrap()
                .re;
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn catalogue_is_symmetric_and_bounded() {
        let dust = ScaleFactorModel::dust(Curvature::Flat, 3.0).unwrap();
        let closed = ScaleFactorModel::closed_dust();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let flat: Vec<InteractionKernel> = vec![
            natural_kernel_1d(),
            natural_kernel_1d_with(HeavisideAtZero::Zero),
            constant_kernel(Complex64::new(0.25, -0.5)),
            covariant_bounded_kernel(|d| (-d).exp(), Some(1.0), &dust).unwrap(),
            natural_kernel_1d().scale_weighted(&dust, 2.0),
        ];
        for _ in 0..10_000 {
            let x1 = line(rng.random_range(0.0..3.0), rng.random_range(-2.0..2.0));
            let x2 = line(rng.random_range(0.0..3.0), rng.random_range(-2.0..2.0));
            for k in &flat {
                let a = k.evaluate(&x1, &x2).unwrap();
                assert_eq!(a, k.evaluate(&x2, &x1).unwrap(), "{}", k.name());
                assert!(a.norm() <= k.sup_bound() * (1.0 + 1e-12), "{}", k.name());
            }
        }
        let f =
            |x1: &SpacetimePoint, x2: &SpacetimePoint| Complex64::new((x1.eta * x2.eta).cos(), 0.0);
        let flat3 = singular_kernel_flat3d(f, 1.0).unwrap();
        let sphere_k = singular_kernel_closed(f, 1.0)
            .unwrap()
            .scale_weighted(&closed, 1.0);
        for _ in 0..10_000 {
            let x1 = space(
                rng.random_range(0.0..3.0),
                std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            );
            let x2 = space(
                rng.random_range(0.0..3.0),
                std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            );
            assert_eq!(
                flat3.evaluate(&x1, &x2).unwrap(),
                flat3.evaluate(&x2, &x1).unwrap()
            );
            assert!(flat3.bounded(&x1, &x2).norm() <= flat3.sup_bound());
            let q1 = SpacetimePoint::new(
                rng.random_range(0.0..2.0 * PI),
                SpatialPoint::Sphere(random_sphere(&mut rng)),
            );
            let q2 = SpacetimePoint::new(
                rng.random_range(0.0..2.0 * PI),
                SpatialPoint::Sphere(random_sphere(&mut rng)),
            );
            assert_eq!(
                sphere_k.evaluate(&q1, &q2).unwrap(),
                sphere_k.evaluate(&q2, &q1).unwrap()
            );
            assert!(sphere_k.bounded(&q1, &q2).norm() <= sphere_k.sup_bound() * (1.0 + 1e-12));
        }
    }
}
