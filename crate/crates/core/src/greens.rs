//! Green's functions of the Klein-Gordon equation with a structural
//! representation of light-cone deltas and symbolic conformal prefactors.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{
    flat_distance, geodesic_distance_h3, geodesic_distance_s3, ScaleFactorModel, SpacetimePoint,
    SpatialPoint,
};
use crate::special::{bessel_j0, bessel_j1};

/// Relative tolerance deciding whether a point lies on a delta support.
const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Retarded,
    Advanced,
    Symmetric,
}

/// A factor [a(η) a(η')]^exponent kept unevaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalPrefactor {
    pub exponent: f64,
    pub a: f64,
    pub a_prime: f64,
}

impl ConformalPrefactor {
    /// Numeric value, or `None` when a root of a meets a negative exponent.
    pub fn value(&self) -> Option<f64> {
        let w = self.a.powf(self.exponent) * self.a_prime.powf(self.exponent);
        w.is_finite().then_some(w)
    }

    /// Combines with a positive power [a a']^p from a volume element.
    pub fn absorb(&self, power: f64) -> ConformalPrefactor {
        ConformalPrefactor {
            exponent: self.exponent + power,
            ..*self
        }
    }
}

/// Value of a Green's function at a pair of points: a regular function part
/// plus a delta term on the light cone.
///
/// `delta_coeff` is the coefficient of the delta evaluated at the pair and
/// `on_cone` records whether the pair lies on the delta's support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreensValue {
    pub regular: f64,
    pub delta_coeff: f64,
    pub on_cone: bool,
    pub support: Support,
    pub prefactor: Option<ConformalPrefactor>,
}

impl GreensValue {
    fn plain(regular: f64, support: Support) -> Self {
        Self {
            regular,
            delta_coeff: 0.0,
            on_cone: false,
            support,
            prefactor: None,
        }
    }

    /// Delta coefficient where the delta is supported, 0 elsewhere.
    pub fn effective_delta(&self) -> f64 {
        if self.on_cone {
            self.delta_coeff
        } else {
            0.0
        }
    }

    fn weight(&self) -> Result<f64> {
        match self.prefactor {
            None => Ok(1.0),
            Some(p) => p
                .value()
                .ok_or_else(|| Error::Singular("conformal prefactor at a root of a".into())),
        }
    }

    /// Regular part with the conformal prefactor applied.
    pub fn regular_value(&self) -> Result<f64> {
        Ok(self.regular * self.weight()?)
    }

    /// Delta coefficient with the conformal prefactor applied.
    pub fn delta_value(&self) -> Result<f64> {
        Ok(self.delta_coeff * self.weight()?)
    }

    /// True when the stored prefactor cannot be evaluated numerically.
    pub fn singular_prefactor(&self) -> bool {
        self.prefactor.is_some_and(|p| p.value().is_none())
    }

    fn restrict(mut self, keep: bool) -> Self {
        if !keep {
            self.regular = 0.0;
            self.on_cone = false;
        }
        self
    }
}

/// Spacetime displacement x − x' in Minkowski coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Displacement {
    pub time: f64,
    pub space: [f64; 3],
}

impl Displacement {
    pub fn new(time: f64, space: &[f64]) -> Self {
        let mut s = [0.0; 3];
        s[..space.len()].copy_from_slice(space);
        Self { time, space: s }
    }

    fn spatial_norm(&self, d: usize) -> f64 {
        self.space[..d].iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Minkowski square t² − |x|².
    pub fn square(&self, d: usize) -> f64 {
        let r = self.spatial_norm(d);
        (self.time - r) * (self.time + r)
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "Green's functions exist for d ∈ {{1,2,3}}, got {d}"
        )))
    }
}

fn on_lightcone(x: &Displacement, d: usize) -> bool {
    let r = x.spatial_norm(d);
    (x.time.abs() - r).abs() <= SUPPORT_TOLERANCE * (x.time.abs() + r).max(1.0)
}

/// Symmetric Green's function of the Klein-Gordon equation on ℝ^{1,d}.
pub fn minkowski_gsym(d: usize, m: f64, x: &Displacement) -> Result<GreensValue> {
    check_dimension(d)?;
    let x2 = x.square(d);
    let inside = x2 >= 0.0;
    Ok(match d {
        1 => GreensValue::plain(
            if inside {
                0.5 * bessel_j0(m * x2.sqrt())
            } else {
                0.0
            },
            Support::Symmetric,
        ),
        2 => {
            if x2 == 0.0 {
                return Err(Error::Singular(
                    "d=2 Green's function on the light cone".into(),
                ));
            }
            let regular = if inside {
                (m * x2.sqrt()).cos() / (2.0 * PI * x2.sqrt())
            } else {
                0.0
            };
            GreensValue::plain(regular, Support::Symmetric)
        }
        _ => {
            let regular = if !inside {
                0.0
            } else if x2 == 0.0 {
                -m * m / (8.0 * PI)
            } else {
                let r = x2.sqrt();
                -m / (4.0 * PI * r) * bessel_j1(m * r)
            };
            GreensValue {
                regular,
                delta_coeff: 1.0 / (2.0 * PI),
                on_cone: on_lightcone(x, d),
                support: Support::Symmetric,
                prefactor: None,
            }
        }
    })
}

/// Retarded Green's function H(x⁰) G_sym.
pub fn minkowski_gret(d: usize, m: f64, x: &Displacement) -> Result<GreensValue> {
    let g = minkowski_gsym(d, m, x)?;
    let mut g = g.restrict(x.time >= 0.0);
    g.support = Support::Retarded;
    Ok(g)
}

/// Symmetric Green's function of the massless conformally coupled equation on
/// flat FLRW. The factor [a(η)a(η')]^{-(d-1)/2} is kept symbolic.
pub fn flat_flrw_gsym(
    d: usize,
    model: &ScaleFactorModel,
    x: &SpacetimePoint,
    xp: &SpacetimePoint,
) -> Result<GreensValue> {
    check_dimension(d)?;
    let a = crate::geometry::scale_factor(model, x.eta)?;
    let ap = crate::geometry::scale_factor(model, xp.eta)?;
    let r = flat_distance(&x.spatial, &xp.spatial)?;
    let dt = x.eta - xp.eta;
    let sq = (dt - r) * (dt + r);
    let inside = sq >= 0.0;
    let prefactor = (d > 1).then_some(ConformalPrefactor {
        exponent: -0.5 * (d as f64 - 1.0),
        a,
        a_prime: ap,
    });
    let mut g = match d {
        1 => GreensValue::plain(if inside { 0.5 } else { 0.0 }, Support::Symmetric),
        2 => {
            if sq == 0.0 {
                return Err(Error::Singular(
                    "d=2 Green's function on the light cone".into(),
                ));
            }
            GreensValue::plain(
                if inside {
                    1.0 / (2.0 * PI * sq.sqrt())
                } else {
                    0.0
                },
                Support::Symmetric,
            )
        }
        _ => GreensValue {
            regular: 0.0,
            delta_coeff: 1.0 / (2.0 * PI),
            on_cone: (dt.abs() - r).abs() <= SUPPORT_TOLERANCE * (dt.abs() + r).max(1.0),
            support: Support::Symmetric,
            prefactor: None,
        },
    };
    g.prefactor = prefactor;
    Ok(g)
}

fn hyperboloid(p: &SpatialPoint) -> Result<&[f64; 4]> {
    match p {
        SpatialPoint::Hyperboloid(x) => Ok(x),
        _ => Err(Error::domain(
            "open FLRW points must lie on the hyperboloid",
        )),
    }
}

fn sphere(p: &SpatialPoint) -> Result<&[f64; 4]> {
    match p {
        SpatialPoint::Sphere(q) => Ok(q),
        _ => Err(Error::domain("closed FLRW points must lie on S³")),
    }
}

/// Retarded Green's function on open FLRW: a delta on η − η' = s with
/// coefficient [a(η)a(η')]^{-1}/(4π sinh s).
pub fn open_flrw_gret(
    model: &ScaleFactorModel,
    x: &SpacetimePoint,
    xp: &SpacetimePoint,
) -> Result<GreensValue> {
    let a = crate::geometry::scale_factor(model, x.eta)?;
    let ap = crate::geometry::scale_factor(model, xp.eta)?;
    let s = geodesic_distance_h3(hyperboloid(&x.spatial)?, hyperboloid(&xp.spatial)?)?;
    if s == 0.0 {
        return Err(Error::Singular(
            "coincidence limit s = 0 of the open Green's function".into(),
        ));
    }
    let dt = x.eta - xp.eta;
    Ok(GreensValue {
        regular: 0.0,
        delta_coeff: 1.0 / (4.0 * PI * s.sinh()),
        on_cone: (dt - s).abs() <= SUPPORT_TOLERANCE * (dt.abs() + s).max(1.0),
        support: Support::Retarded,
        prefactor: Some(ConformalPrefactor {
            exponent: -1.0,
            a,
            a_prime: ap,
        }),
    })
}

/// One image term of the closed-universe Green's function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindingTerm {
    pub n: i64,
    /// |s + 2πn|, the delta radius in conformal time.
    pub radius: f64,
    /// sgn(s + 2πn), with sgn(0) = +1.
    pub sign: f64,
    /// 1/sin s.
    pub amplitude: f64,
    /// −(1/4π)(s + 2πn)/sin s, the delta coefficient before the conformal prefactor.
    pub coefficient: f64,
    /// Whether (η − η')² = (s + 2πn)² holds at the evaluated pair.
    pub on_cone: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindingSum {
    pub terms: Vec<WindingTerm>,
    pub prefactor: ConformalPrefactor,
}

/// Winding indices n with |s + 2πn| ≤ T.
pub fn reachable_windings(s: f64, horizon: f64) -> Vec<i64> {
    let tol = SUPPORT_TOLERANCE * horizon.max(1.0);
    let lo = ((-horizon - s) / (2.0 * PI)).floor() as i64 - 1;
    let hi = ((horizon - s) / (2.0 * PI)).ceil() as i64 + 1;
    (lo..=hi)
        .filter(|&n| (s + 2.0 * PI * n as f64).abs() <= horizon + tol)
        .collect()
}

/// sgn(s + 2πn) with the winding convention sgn(0) = +1 for n ≥ 0.
pub fn winding_sign(s: f64, n: i64) -> f64 {
    let v = s + 2.0 * PI * n as f64;
    if v > 0.0 || (v == 0.0 && n >= 0) {
        1.0
    } else {
        -1.0
    }
}

/// Symmetric Green's function of the closed FLRW universe as a sum over
/// winding images reachable within `[0, T]`.
pub fn closed_flrw_gsym(
    model: &ScaleFactorModel,
    x: &SpacetimePoint,
    xp: &SpacetimePoint,
) -> Result<WindingSum> {
    let a = crate::geometry::scale_factor(model, x.eta)?;
    let ap = crate::geometry::scale_factor(model, xp.eta)?;
    let s = geodesic_distance_s3(sphere(&x.spatial)?, sphere(&xp.spatial)?)?;
    let sin = s.sin();
    if s == 0.0 || s == PI || sin.abs() < 1e-300 {
        return Err(Error::Singular(format!(
            "closed Green's amplitude 1/sin s at s = {s}"
        )));
    }
    let dt = (x.eta - xp.eta).abs();
    let terms = reachable_windings(s, model.horizon())
        .into_iter()
        .map(|n| {
            let v = s + 2.0 * PI * n as f64;
            WindingTerm {
                n,
                radius: v.abs(),
                sign: winding_sign(s, n),
                amplitude: 1.0 / sin,
                coefficient: -v / (4.0 * PI * sin),
                on_cone: (dt - v.abs()).abs() <= SUPPORT_TOLERANCE * (dt + v.abs()).max(1.0),
            }
        })
        .collect();
    Ok(WindingSum {
        terms,
        prefactor: ConformalPrefactor {
            exponent: -1.0,
            a,
            a_prime: ap,
        },
    })
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "conformal factor must be positive, got {omega}"
        )))
    }
}

/// G̃ = Ω^{-(d-1)/2}(x) Ω^{-(d-1)/2}(x') G.
pub fn conformal_transform_greens(
    g: &GreensValue,
    omega_x: f64,
    omega_xp: f64,
    d: usize,
) -> Result<GreensValue> {
    check_omega(omega_x)?;
    check_omega(omega_xp)?;
    if d == 1 {
        return Ok(*g);
    }
    let e = -0.5 * (d as f64 - 1.0);
    let w = omega_x.powf(e) * omega_xp.powf(e);
    Ok(GreensValue {
        regular: g.regular * w,
        delta_coeff: g.delta_coeff * w,
        ..*g
    })
}

/// m̃ = m/Ω.
pub fn transform_mass(m: f64, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    Ok(m / omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Curvature;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disp(t: f64, x: &[f64]) -> Displacement {
        Displacement::new(t, x)
    }

    #[test]
    fn minkowski_examples() {
        assert_eq!(
            minkowski_gsym(1, 0.0, &disp(1.0, &[0.3])).unwrap().regular,
            0.5
        );
        assert_eq!(
            minkowski_gsym(1, 2.0, &disp(0.3, &[1.0])).unwrap().regular,
            0.0
        );
        let g = minkowski_gsym(2, 0.0, &disp(2.5, &[1.5, 0.0])).unwrap();
        assert!((g.regular - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!(minkowski_gsym(4, 0.0, &disp(1.0, &[0.0])).is_err());

        assert_eq!(
            minkowski_gret(1, 0.0, &disp(-1.0, &[0.0])).unwrap().regular,
            0.0
        );
        assert_eq!(
            minkowski_gret(1, 0.0, &disp(1.0, &[0.5])).unwrap().regular,
            0.5
        );
        assert_eq!(
            minkowski_gret(2, 0.0, &disp(-2.0, &[0.5, 0.5]))
                .unwrap()
                .regular,
            0.0
        );

        let cone = minkowski_gret(3, 0.0, &disp(5.0, &[3.0, 4.0, 0.0])).unwrap();
        assert!(cone.on_cone);
        assert_eq!(cone.effective_delta(), 1.0 / (2.0 * PI));
        let past = minkowski_gret(3, 0.0, &disp(-5.0, &[3.0, 4.0, 0.0])).unwrap();
        assert_eq!(past.effective_delta(), 0.0);
    }

    #[test]
    fn d3_regular_part_matches_bessel_formula() {
        let m = 1.3;
        let x = disp(2.0, &[0.5, 0.2, -0.4]);
        let r = x.square(3).sqrt();
        let g = minkowski_gsym(3, m, &x).unwrap();
        assert!((g.regular + m / (4.0 * PI * r) * bessel_j1(m * r)).abs() < 1e-16);
        assert!(!g.on_cone);
    }

    #[test]
    fn flat_flrw_examples() {
        let one = ScaleFactorModel::constant(1.0, 10.0).unwrap();
        let p = |eta: f64, x: [f64; 2]| SpacetimePoint::new(eta, SpatialPoint::Plane(x));
        let g = flat_flrw_gsym(2, &one, &p(3.0, [0.0, 0.0]), &p(1.0, [0.0, 0.0])).unwrap();
        assert!((g.regular_value().unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);

        let custom =
            ScaleFactorModel::custom(|eta| if eta > 1.5 { 4.0 } else { 1.0 }, 10.0).unwrap();
        // (Δη)² − r² = 2.25 − 1.25 = 1 with a(3) = 4, a(1.5) = 1.
        let r = 1.25f64.sqrt();
        let g = flat_flrw_gsym(2, &custom, &p(3.0, [0.0, 0.0]), &p(1.5, [r, 0.0])).unwrap();
        assert!((g.regular_value().unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);

        let line = |eta: f64, z: f64| SpacetimePoint::new(eta, SpatialPoint::Line(z));
        let dust = ScaleFactorModel::dust(Curvature::Flat, 2.0).unwrap();
        assert_eq!(
            flat_flrw_gsym(1, &dust, &line(1.0, 0.0), &line(0.5, 0.1))
                .unwrap()
                .regular_value()
                .unwrap(),
            0.5
        );
    }

    #[test]
    fn singular_prefactor_is_flagged_not_infinite() {
        let dust = ScaleFactorModel::dust(Curvature::Flat, 2.0).unwrap();
        let p = |eta: f64| SpacetimePoint::new(eta, SpatialPoint::Plane([0.0, 0.0]));
        let g = flat_flrw_gsym(2, &dust, &p(1.0), &p(0.0)).unwrap();
        assert!(g.singular_prefactor());
        assert!(matches!(g.regular_value(), Err(Error::Singular(_))));
        assert!(g.regular.is_finite());
    }

    #[test]
    fn open_examples() {
        let one = ScaleFactorModel::constant(1.0, 10.0).unwrap();
        let o = SpatialPoint::Hyperboloid([1.0, 0.0, 0.0, 0.0]);
        let p = SpatialPoint::Hyperboloid([1f64.cosh(), 1f64.sinh(), 0.0, 0.0]);
        let g = open_flrw_gret(
            &one,
            &SpacetimePoint::new(2.0, p),
            &SpacetimePoint::new(1.0, o),
        )
        .unwrap();
        assert!((g.delta_value().unwrap() - 1.0 / (4.0 * PI * 1f64.sinh())).abs() < 1e-16);
        assert!(g.on_cone);
        assert_eq!(g.regular, 0.0);
        let off = open_flrw_gret(
            &one,
            &SpacetimePoint::new(2.5, p),
            &SpacetimePoint::new(1.0, o),
        )
        .unwrap();
        assert_eq!(off.effective_delta(), 0.0);
        let swap1 = open_flrw_gret(
            &one,
            &SpacetimePoint::new(1.0, p),
            &SpacetimePoint::new(1.0, o),
        )
        .unwrap();
        let swap2 = open_flrw_gret(
            &one,
            &SpacetimePoint::new(1.0, o),
            &SpacetimePoint::new(1.0, p),
        )
        .unwrap();
        assert_eq!(swap1.delta_coeff, swap2.delta_coeff);
        assert!(matches!(
            open_flrw_gret(
                &one,
                &SpacetimePoint::new(1.0, o),
                &SpacetimePoint::new(0.5, o)
            ),
            Err(Error::Singular(_))
        ));
    }

    fn sphere_point(alpha: f64) -> SpatialPoint {
        SpatialPoint::Sphere([alpha.cos(), alpha.sin(), 0.0, 0.0])
    }

    #[test]
    fn closed_winding_examples() {
        let dust = ScaleFactorModel::closed_dust();
        for s in [0.1, 1.0, 2.0, 3.0] {
            let w = closed_flrw_gsym(
                &dust,
                &SpacetimePoint::new(1.0, sphere_point(0.0)),
                &SpacetimePoint::new(2.0, sphere_point(s)),
            )
            .unwrap();
            let ns: Vec<i64> = w.terms.iter().map(|t| t.n).collect();
            assert_eq!(ns, vec![-1, 0]);
        }
        let rad = ScaleFactorModel::closed_radiation();
        let w = closed_flrw_gsym(
            &rad,
            &SpacetimePoint::new(1.0, sphere_point(0.0)),
            &SpacetimePoint::new(2.0, sphere_point(PI / 2.0)),
        )
        .unwrap();
        assert_eq!(w.terms.len(), 1);
        assert_eq!(w.terms[0].n, 0);
        assert!(closed_flrw_gsym(
            &rad,
            &SpacetimePoint::new(1.0, sphere_point(0.0)),
            &SpacetimePoint::new(2.0, sphere_point(0.0))
        )
        .is_err());
    }

    #[test]
    fn closed_term_values() {
        let dust = ScaleFactorModel::closed_dust();
        let s = 1.0;
        let w = closed_flrw_gsym(
            &dust,
            &SpacetimePoint::new(2.0, sphere_point(0.0)),
            &SpacetimePoint::new(1.0, sphere_point(s)),
        )
        .unwrap();
        let t0 = w.terms.iter().find(|t| t.n == 0).unwrap();
        assert!(t0.on_cone);
        assert_eq!(t0.sign, 1.0);
        assert!((t0.coefficient + s / (4.0 * PI * s.sin())).abs() < 1e-16);
        let tm = w.terms.iter().find(|t| t.n == -1).unwrap();
        assert_eq!(tm.sign, -1.0);
        assert!((tm.radius - (2.0 * PI - s)).abs() < 1e-15);
    }

    #[test]
    fn transforms() {
        let g = minkowski_gsym(1, 0.0, &disp(1.0, &[0.0])).unwrap();
        assert_eq!(conformal_transform_greens(&g, 3.0, 7.0, 1).unwrap(), g);
        let g3 = minkowski_gsym(3, 0.0, &disp(1.0, &[1.0, 0.0, 0.0])).unwrap();
        let t = conformal_transform_greens(&g3, 2.0, 2.0, 3).unwrap();
        assert_eq!(t.delta_coeff, g3.delta_coeff / 4.0);
        assert!(conformal_transform_greens(&g3, 0.0, 2.0, 3).is_err());
        assert_eq!(transform_mass(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(transform_mass(1.0, 2.0).unwrap(), 0.5);
        assert_eq!(transform_mass(3.0, 0.5).unwrap(), 6.0);
        assert!(transform_mass(1.0, -1.0).is_err());
    }

    #[test]
    fn massless_limit_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=3 {
            for _ in 0..200 {
                let r: f64 = rng.random_range(0.0..2.0);
                let t = r + rng.random_range(0.01..2.0);
                let x = disp(t, &[r, 0.0, 0.0][..d]);
                let g0 = minkowski_gsym(d, 0.0, &x).unwrap();
                let gm = minkowski_gsym(d, 1e-6, &x).unwrap();
                assert!((gm.regular - g0.regular).abs() <= 1e-5 * g0.regular.abs().max(1.0));
                assert_eq!(gm.delta_coeff, g0.delta_coeff);
            }
        }
    }

    proptest! {
        #[test]
        fn spacelike_values_vanish(t in -3.0f64..3.0, dir in prop::array::uniform3(-1.0f64..1.0), m in 0.0f64..3.0, d in 1usize..=3) {
            let n = dir[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assume!(n > 1e-3);
            let scale = (t.abs() + 0.1) / n * 1.5;
            let space: Vec<f64> = dir[..d].iter().map(|c| c * scale).collect();
            let x = Displacement::new(t, &space);
            let g = minkowski_gsym(d, m, &x).unwrap();
            prop_assert_eq!(g.regular, 0.0);
            prop_assert_eq!(g.effective_delta(), 0.0);
            let r = minkowski_gret(d, m, &x).unwrap();
            prop_assert_eq!(r.regular, 0.0);
            prop_assert_eq!(r.effective_delta(), 0.0);
        }

        #[test]
        fn winding_count_is_bounded(s in 1e-6f64..(PI - 1e-6), horizon in 0.1f64..20.0) {
            let n = reachable_windings(s, horizon).len();
            prop_assert!(n <= (horizon / PI).floor() as usize + 1);
        }
    }
}
