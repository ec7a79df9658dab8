//! Spatial slices, scale factors, conformal weights and covariant distances.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::adaptive_simpson;

/// Tolerance for round-off when clamping inner products and checking
/// normalisation of embedded points.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Number of uniform intervals used to estimate `‖a‖∞`.
pub const SUP_NORM_INTERVALS: usize = 4096;

/// Spatial curvature of an FLRW slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Curvature {
    Open,
    Flat,
    Closed,
}

impl Curvature {
    pub fn sign(self) -> i32 {
        match self {
            Curvature::Open => -1,
            Curvature::Flat => 0,
            Curvature::Closed => 1,
        }
    }
}

/// The spacetimes on which the integral equation is posed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpacetimeKind {
    MinkowskiHalfSpace(usize),
    FlatFlrw(usize),
    OpenFlrw3,
    ClosedFlrw3,
}

impl SpacetimeKind {
    pub fn spatial_dim(self) -> usize {
        match self {
            SpacetimeKind::MinkowskiHalfSpace(d) | SpacetimeKind::FlatFlrw(d) => d,
            SpacetimeKind::OpenFlrw3 | SpacetimeKind::ClosedFlrw3 => 3,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            SpacetimeKind::MinkowskiHalfSpace(d) | SpacetimeKind::FlatFlrw(d)
                if !(1..=3).contains(&d) =>
            {
                Err(Error::model(format!(
                    "spatial dimension must be 1, 2 or 3, got {d}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Curvature of the spatial slices; `None` for Minkowski half-space.
    pub fn curvature(self) -> Option<Curvature> {
        match self {
            SpacetimeKind::MinkowskiHalfSpace(_) => None,
            SpacetimeKind::FlatFlrw(_) => Some(Curvature::Flat),
            SpacetimeKind::OpenFlrw3 => Some(Curvature::Open),
            SpacetimeKind::ClosedFlrw3 => Some(Curvature::Closed),
        }
    }

    pub fn is_flrw(self) -> bool {
        self.curvature().is_some()
    }
}

impl fmt::Display for SpacetimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpacetimeKind::MinkowskiHalfSpace(d) => write!(f, "minkowski-half-space(d={d})"),
            SpacetimeKind::FlatFlrw(d) => write!(f, "flat-flrw(d={d})"),
            SpacetimeKind::OpenFlrw3 => write!(f, "open-flrw(d=3)"),
            SpacetimeKind::ClosedFlrw3 => write!(f, "closed-flrw(d=3)"),
        }
    }
}

pub type ScaleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Functional form of a(η). All prefactors are fixed to 1.
#[derive(Clone)]
pub enum ScaleProfile {
    Dust(Curvature),
    Radiation(Curvature),
    Constant(f64),
    /// Samples on a uniform partition of `[0, T]`, linearly interpolated.
    Sampled(Vec<f64>),
    Custom(ScaleFn),
}

impl fmt::Debug for ScaleProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleProfile::Dust(k) => write!(f, "Dust({k:?})"),
            ScaleProfile::Radiation(k) => write!(f, "Radiation({k:?})"),
            ScaleProfile::Constant(c) => write!(f, "Constant({c})"),
            ScaleProfile::Sampled(v) => write!(f, "Sampled({} values)", v.len()),
            ScaleProfile::Custom(_) => write!(f, "Custom(<fn>)"),
        }
    }
}

/// Scale factor a(η) on the conformal-time interval `[0, T]`.
#[derive(Clone, Debug)]
pub struct ScaleFactorModel {
    profile: ScaleProfile,
    horizon: f64,
}

impl ScaleFactorModel {
    pub fn new(profile: ScaleProfile, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::model(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if let ScaleProfile::Sampled(v) = &profile {
            if v.len() < 2 || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::model(
                    "sampled scale factor needs at least two finite values",
                ));
            }
        }
        Ok(Self { profile, horizon })
    }

    pub fn dust(k: Curvature, horizon: f64) -> Result<Self> {
        Self::new(ScaleProfile::Dust(k), horizon)
    }

    pub fn radiation(k: Curvature, horizon: f64) -> Result<Self> {
        Self::new(ScaleProfile::Radiation(k), horizon)
    }

    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(ScaleProfile::Constant(value), horizon)
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static, horizon: f64) -> Result<Self> {
        Self::new(ScaleProfile::Custom(Arc::new(f)), horizon)
    }

    /// Closed dust universe, Big Crunch at η = 2π.
    pub fn closed_dust() -> Self {
        Self {
            profile: ScaleProfile::Dust(Curvature::Closed),
            horizon: 2.0 * PI,
        }
    }

    /// Closed radiation universe, Big Crunch at η = π.
    pub fn closed_radiation() -> Self {
        Self {
            profile: ScaleProfile::Radiation(Curvature::Closed),
            horizon: PI,
        }
    }

    pub fn profile(&self) -> &ScaleProfile {
        &self.profile
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Curvature implied by a Table-style profile, if any.
    pub fn curvature(&self) -> Option<Curvature> {
        match self.profile {
            ScaleProfile::Dust(k) | ScaleProfile::Radiation(k) => Some(k),
            _ => None,
        }
    }

    /// a(η) without the range check. Arguments are clamped into `[0, T]`.
    pub fn value(&self, eta: f64) -> f64 {
        let eta = eta.clamp(0.0, self.horizon);
        match &self.profile {
            ScaleProfile::Dust(Curvature::Closed) => 1.0 - eta.cos(),
            ScaleProfile::Dust(Curvature::Flat) => eta * eta,
            ScaleProfile::Dust(Curvature::Open) => eta.cosh() - 1.0,
            ScaleProfile::Radiation(Curvature::Closed) => eta.sin(),
            ScaleProfile::Radiation(Curvature::Flat) => eta.abs(),
            ScaleProfile::Radiation(Curvature::Open) => eta.sinh(),
            ScaleProfile::Constant(c) => *c,
            ScaleProfile::Sampled(v) => {
                let n = v.len() - 1;
                let x = eta / self.horizon * n as f64;
                let j = (x.floor() as usize).min(n - 1);
                let t = x - j as f64;
                v[j] * (1.0 - t) + v[j + 1] * t
            }
            ScaleProfile::Custom(f) => f(eta),
        }
    }

    /// `‖a‖∞` estimated on a uniform partition with [`SUP_NORM_INTERVALS`] intervals.
    pub fn sup_norm(&self) -> f64 {
        (0..=SUP_NORM_INTERVALS)
            .map(|j| {
                self.value(self.horizon * j as f64 / SUP_NORM_INTERVALS as f64)
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Checks a(0) = 0, a > 0 inside, and a(T) = 0 when a crunch is required.
    pub fn validate_big_bang(&self, require_crunch: bool) -> Result<()> {
        let scale = self.sup_norm().max(1.0);
        if self.value(0.0).abs() > 1e-12 * scale {
            return Err(Error::model(format!(
                "scale factor must vanish at η=0, got a(0)={}",
                self.value(0.0)
            )));
        }
        if require_crunch && self.value(self.horizon).abs() > 1e-12 * scale {
            return Err(Error::model(format!(
                "closed universe needs a(T)=0, got a({})={}",
                self.horizon,
                self.value(self.horizon)
            )));
        }
        for j in 1..SUP_NORM_INTERVALS {
            let eta = self.horizon * j as f64 / SUP_NORM_INTERVALS as f64;
            let a = self.value(eta);
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::model(format!(
                    "scale factor must be positive inside (0,T), a({eta})={a}"
                )));
            }
        }
        Ok(())
    }
}

/// a(η) with the domain check.
pub fn scale_factor(model: &ScaleFactorModel, eta: f64) -> Result<f64> {
    if !(0.0..=model.horizon).contains(&eta) {
        return Err(Error::domain(format!(
            "η={eta} outside [0, {}]",
            model.horizon
        )));
    }
    Ok(model.value(eta))
}

/// A point of a spatial slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpatialPoint {
    Line(f64),
    Plane([f64; 2]),
    Space([f64; 3]),
    /// Unit hyperboloid in ℝ^{1,3}, time component first.
    Hyperboloid([f64; 4]),
    /// Unit vector in ℝ⁴.
    Sphere([f64; 4]),
}

impl SpatialPoint {
    /// Flat coordinates, if the point lives in ℝᵈ.
    pub fn flat_coords(&self) -> Option<&[f64]> {
        match self {
            SpatialPoint::Line(z) => Some(std::slice::from_ref(z)),
            SpatialPoint::Plane(x) => Some(x),
            SpatialPoint::Space(x) => Some(x),
            _ => None,
        }
    }

    pub fn hyperboloid_from_chart(y: [f64; 3]) -> Self {
        let n2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        SpatialPoint::Hyperboloid([(1.0 + n2).sqrt(), y[0], y[1], y[2]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacetimePoint {
    pub eta: f64,
    pub spatial: SpatialPoint,
}

impl SpacetimePoint {
    pub fn new(eta: f64, spatial: SpatialPoint) -> Self {
        Self { eta, spatial }
    }
}

/// Euclidean distance of two flat points of equal dimension.
pub fn flat_distance(x: &SpatialPoint, y: &SpatialPoint) -> Result<f64> {
    match (x.flat_coords(), y.flat_coords()) {
        (Some(a), Some(b)) if a.len() == b.len() => Ok(a
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()),
        _ => Err(Error::domain(
            "flat distance needs two flat points of equal dimension",
        )),
    }
}

fn check_unit_sphere(q: &[f64; 4]) -> Result<()> {
    let n2: f64 = q.iter().map(|c| c * c).sum();
    if !n2.is_finite() || (n2 - 1.0).abs() > CLAMP_TOLERANCE {
        return Err(Error::domain(format!(
            "point {q:?} is not a unit vector (|q|²={n2})"
        )));
    }
    Ok(())
}

/// Great-circle angle between two unit vectors of ℝ⁴.
///
/// Evaluated through the chord length so that nearly coincident and nearly
/// antipodal pairs keep full relative accuracy; this equals arccos(q·q').
pub fn geodesic_distance_s3(q: &[f64; 4], qp: &[f64; 4]) -> Result<f64> {
    check_unit_sphere(q)?;
    check_unit_sphere(qp)?;
    Ok(sphere_angle(q, qp))
}

/// Unchecked great-circle angle.
pub(crate) fn sphere_angle(q: &[f64; 4], qp: &[f64; 4]) -> f64 {
    let mut minus = 0.0;
    let mut plus = 0.0;
    for i in 0..4 {
        minus += (q[i] - qp[i]) * (q[i] - qp[i]);
        plus += (q[i] + qp[i]) * (q[i] + qp[i]);
    }
    if minus <= plus {
        2.0 * (0.5 * minus.sqrt()).min(1.0).asin()
    } else {
        PI - 2.0 * (0.5 * plus.sqrt()).min(1.0).asin()
    }
}

fn check_hyperboloid(x: &[f64; 4]) -> Result<()> {
    let m = x[0] * x[0] - x[1] * x[1] - x[2] * x[2] - x[3] * x[3];
    if !m.is_finite() || x[0] <= 0.0 || (m - 1.0).abs() > CLAMP_TOLERANCE * x[0] * x[0] {
        return Err(Error::domain(format!(
            "point {x:?} is off the unit hyperboloid (⟨x,x⟩={m})"
        )));
    }
    Ok(())
}

/// Geodesic distance on ℍ³ for points embedded in the unit hyperboloid.
///
/// Uses s = 2 asinh(|x−x'|/2) with the (spacelike) Minkowski length of the
/// difference, which equals arcosh⟨x,x'⟩ but is accurate for small s.
pub fn geodesic_distance_h3(x: &[f64; 4], xp: &[f64; 4]) -> Result<f64> {
    check_hyperboloid(x)?;
    check_hyperboloid(xp)?;
    let inner = x[0] * xp[0] - x[1] * xp[1] - x[2] * xp[2] - x[3] * xp[3];
    if inner < 1.0 - CLAMP_TOLERANCE * x[0] * xp[0] {
        return Err(Error::domain(format!(
            "hyperboloid inner product {inner} below 1"
        )));
    }
    Ok(hyperbolic_angle(x, xp))
}

pub(crate) fn hyperbolic_angle(x: &[f64; 4], xp: &[f64; 4]) -> f64 {
    let d0 = x[0] - xp[0];
    let ds = (1..4).map(|i| (x[i] - xp[i]) * (x[i] - xp[i])).sum::<f64>();
    let chord2 = (ds - d0 * d0).max(0.0);
    2.0 * (0.5 * chord2.sqrt()).asinh()
}

/// Time-like distance of two flat FLRW points, or `None` when they are not
/// time-like related. Coincident points have distance 0.
pub fn timelike_distance(
    x1: &SpacetimePoint,
    x2: &SpacetimePoint,
    model: &ScaleFactorModel,
) -> Result<Option<f64>> {
    for x in [x1, x2] {
        if !(0.0..=model.horizon).contains(&x.eta) {
            return Err(Error::domain(format!(
                "η={} outside [0, {}]",
                x.eta, model.horizon
            )));
        }
    }
    let dx = flat_distance(&x1.spatial, &x2.spatial)?;
    if x1 == x2 {
        return Ok(Some(0.0));
    }
    // Fixed argument order makes the result exactly symmetric.
    let (lo, hi) = if (x1.eta, coords_key(x1)) <= (x2.eta, coords_key(x2)) {
        (x1, x2)
    } else {
        (x2, x1)
    };
    let deta = hi.eta - lo.eta;
    if deta <= dx {
        return Ok(None);
    }
    let mean_a = adaptive_simpson(
        &|t: f64| model.value(t * hi.eta + (1.0 - t) * lo.eta),
        0.0,
        1.0,
        1e-10,
    );
    Ok(Some((deta - dx) * mean_a))
}

fn coords_key(x: &SpacetimePoint) -> [f64; 3] {
    let mut key = [0.0; 3];
    if let Some(c) = x.spatial.flat_coords() {
        key[..c.len()].copy_from_slice(c);
    }
    key
}

/// a(η₁)^{(d−1)/2} a(η₂)^{(d−1)/2}; identically 1 for d = 1.
pub fn conformal_weight(d: usize, eta1: f64, eta2: f64, model: &ScaleFactorModel) -> Result<f64> {
    let a1 = scale_factor(model, eta1)?;
    let a2 = scale_factor(model, eta2)?;
    Ok(weight_from_values(d, a1, a2))
}

pub(crate) fn weight_from_values(d: usize, a1: f64, a2: f64) -> f64 {
    match d {
        1 => 1.0,
        2 => a1.sqrt() * a2.sqrt(),
        3 => a1 * a2,
        _ => (a1 * a2).powf(0.5 * (d as f64 - 1.0)),
    }
}
