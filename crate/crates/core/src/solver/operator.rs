//! Discrete integral operator χ ↦ λ c (W₁ ⊗ W₂)(K ∘ χ).
//!
//! W_k are sparse single-particle matrices built from the quadrature rules
//! (cone weights, Green's function factors, scale-factor powers and
//! interpolation stencils). K is the kernel sampled at node pairs.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::fields::grid::{MultiTimeGrid, SpatialLayout};
use crate::fields::MultiTimeField;
use crate::geometry::{flat_distance, sphere_angle, ScaleFactorModel, SpacetimeKind, SpatialPoint};
use crate::kernels::Singularity;
use crate::quadrature::nodes::{s3_exclusion_radius, s3_singular_ball};
use crate::quadrature::{
    ball_rule_grid_3d, closed_rule, cone_sqrt_rule_2d, cube_inverse_distance_constant,
    hyperbolic_rule_grid, volterra_rule_1d, ConeRule, Sample,
};
use crate::special::bessel_j0;

/// Per-sample factor of a single-particle rule.
#[derive(Clone, Debug)]
pub enum ParticleFactor {
    Unit,
    /// J₀(m√(Δη² − r²)).
    Bessel(f64),
    /// cos(m√(Δη² − r²)).
    Cosine(f64),
    /// a(τ)^p.
    ScalePower(ScaleFactorModel, f64),
    /// a(τ)² · a(τ)^e with a(τ) = 0 mapped to 0; the unreduced flat equations.
    Physical(ScaleFactorModel, f64),
}

impl ParticleFactor {
    pub fn eval(&self, s: &Sample) -> f64 {
        match self {
            ParticleFactor::Unit => 1.0,
            ParticleFactor::Bessel(m) => bessel_j0(m * (s.dt * s.dt - s.r * s.r).max(0.0).sqrt()),
            ParticleFactor::Cosine(m) => (m * (s.dt * s.dt - s.r * s.r).max(0.0).sqrt()).cos(),
            ParticleFactor::ScalePower(a, p) => {
                let v = a.value(s.tau);
                if *p == 1.0 {
                    v
                } else if *p == 2.0 {
                    v * v
                } else {
                    v.powf(*p)
                }
            }
            ParticleFactor::Physical(a, e) => {
                let v = a.value(s.tau);
                if v == 0.0 {
                    0.0
                } else {
                    v.powi(2) * v.powf(*e)
                }
            }
        }
    }
}

/// Rule factor of the reduced equation for a particle of mass `mass`.
pub fn particle_factor(model: &ModelSpec, mass: f64) -> ParticleFactor {
    match (model.spacetime, &model.scale) {
        (SpacetimeKind::MinkowskiHalfSpace(1), _) if mass != 0.0 => ParticleFactor::Bessel(mass),
        (SpacetimeKind::MinkowskiHalfSpace(2), _) if mass != 0.0 => ParticleFactor::Cosine(mass),
        (SpacetimeKind::MinkowskiHalfSpace(_), _) => ParticleFactor::Unit,
        (SpacetimeKind::FlatFlrw(d), Some(a)) => {
            ParticleFactor::ScalePower(a.clone(), 2.0 - 0.5 * (d as f64 - 1.0))
        }
        (_, Some(a)) => ParticleFactor::ScalePower(a.clone(), 1.0),
        (_, None) => ParticleFactor::Unit,
    }
}

/// Checks that `grid` discretizes the spacetime of `model`.
pub(crate) fn check_grid(model: &ModelSpec, grid: &MultiTimeGrid) -> Result<()> {
    let ok = match (model.spacetime, grid.space().layout()) {
        (
            SpacetimeKind::MinkowskiHalfSpace(d) | SpacetimeKind::FlatFlrw(d),
            SpatialLayout::Cartesian { dim, .. },
        ) => d == *dim,
        (SpacetimeKind::OpenFlrw3, SpatialLayout::HyperbolicChart { .. }) => true,
        (SpacetimeKind::ClosedFlrw3, SpatialLayout::Sphere) => true,
        _ => false,
    };
    if !ok {
        return Err(Error::GridMismatch(format!(
            "{} cannot be discretized on {:?}",
            model.spacetime,
            grid.space().layout()
        )));
    }
    let t = grid.time().horizon();
    if (t - model.horizon).abs() > 1e-12 * model.horizon.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "grid horizon {t} differs from model horizon {}",
            model.horizon
        )));
    }
    Ok(())
}

/// Exclusion radius of the closed-universe singular sets on this grid.
pub(crate) fn closed_exclusion(grid: &MultiTimeGrid) -> f64 {
    s3_exclusion_radius(grid.space().len())
}

/// Single-particle rule of the model at particle index `p`.
pub fn particle_rule(
    model: &ModelSpec,
    grid: &MultiTimeGrid,
    p: usize,
    factor: &ParticleFactor,
) -> Result<ConeRule> {
    let (i, k) = grid.split(p);
    let f = |s: &Sample| factor.eval(s);
    match model.spacetime {
        SpacetimeKind::MinkowskiHalfSpace(1) | SpacetimeKind::FlatFlrw(1) => {
            volterra_rule_1d(grid, i, k, f)
        }
        SpacetimeKind::MinkowskiHalfSpace(2) | SpacetimeKind::FlatFlrw(2) => {
            cone_sqrt_rule_2d(grid, i, k, f)
        }
        SpacetimeKind::MinkowskiHalfSpace(_) | SpacetimeKind::FlatFlrw(_) => {
            ball_rule_grid_3d(grid, i, k, f)
        }
        SpacetimeKind::OpenFlrw3 => hyperbolic_rule_grid(grid, i, k, f),
        SpacetimeKind::ClosedFlrw3 => closed_rule(grid, i, k, closed_exclusion(grid), f),
    }
}

/// Kernel value at the node pair (q₁, q₂), with the singular classes
/// regularized on the grid: 1/|x₁−x₂| uses its cell average at coincident
/// nodes; 1/sin s drops pairs inside the exclusion radius and puts the
/// exact ball integral on coincident and antipodal nodes.
pub fn kernel_entry(model: &ModelSpec, grid: &MultiTimeGrid, q1: usize, q2: usize) -> Complex64 {
    let x1 = grid.point(q1);
    let x2 = grid.point(q2);
    let f = model.kernel.bounded(&x1, &x2);
    match model.kernel.singularity() {
        Singularity::None => f,
        Singularity::InverseSpatial => {
            let r = flat_distance(&x1.spatial, &x2.spatial).unwrap_or(f64::NAN);
            if r == 0.0 {
                let h = grid.space().step().unwrap_or(f64::NAN);
                f * (cube_inverse_distance_constant() / h)
            } else {
                f / r
            }
        }
        Singularity::InverseSine => {
            let (_, k1) = grid.split(q1);
            let (_, k2) = grid.split(q2);
            let eps = closed_exclusion(grid);
            if k1 == k2 || grid.space().antipode(k1) == Some(k2) {
                return f * (s3_singular_ball(1, eps) / grid.space().weights()[k1]);
            }
            let s = match (&x1.spatial, &x2.spatial) {
                (SpatialPoint::Sphere(a), SpatialPoint::Sphere(b)) => sphere_angle(a, b),
                _ => f64::NAN,
            };
            if s < eps || s > PI - eps {
                Complex64::new(0.0, 0.0)
            } else {
                f / s.sin()
            }
        }
    }
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Csr {
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Csr {
    fn from_rules(rules: Vec<ConeRule>) -> Self {
        let mut offsets = Vec::with_capacity(rules.len() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for r in rules {
            entries.extend_from_slice(r.entries());
            offsets.push(entries.len());
        }
        Self { offsets, entries }
    }

    pub(crate) fn row(&self, p: usize) -> &[(usize, f64)] {
        &self.entries[self.offsets[p]..self.offsets[p + 1]]
    }

    fn nnz(&self) -> usize {
        self.entries.len()
    }
}

fn build_rows(model: &ModelSpec, grid: &MultiTimeGrid, factor: &ParticleFactor) -> Result<Csr> {
    let rules: Result<Vec<ConeRule>> = (0..grid.particle_len())
        .into_par_iter()
        .map(|p| particle_rule(model, grid, p, factor))
        .collect();
    Ok(Csr::from_rules(rules?))
}

/// Assembled discrete operator of one model on one grid.
#[derive(Clone, Debug)]
pub struct Operator {
    grid: Arc<MultiTimeGrid>,
    coefficient: Complex64,
    w1: Arc<Csr>,
    w2: Arc<Csr>,
    kmat: Vec<Complex64>,
    exponent: f64,
}

impl Operator {
    /// Reduced operator acting on χ (scale exponent 0).
    pub fn build(model: &ModelSpec, grid: Arc<MultiTimeGrid>) -> Result<Self> {
        model.validate()?;
        check_grid(model, &grid)?;
        let f1 = particle_factor(model, model.masses.0);
        let w1 = Arc::new(build_rows(model, &grid, &f1)?);
        let w2 = if model.masses.0 == model.masses.1 {
            w1.clone()
        } else {
            Arc::new(build_rows(
                model,
                &grid,
                &particle_factor(model, model.masses.1),
            )?)
        };
        Ok(Self::assemble(model, grid, w1, w2, 0.0))
    }

    /// Unreduced flat-FLRW operator acting on ψ stored with exponent
    /// −(d−1)/2: the a²(η') volume factors and the a^{−(d−1)/2}(η) prefactor
    /// are applied as they stand in the physical equation.
    pub fn build_physical(model: &ModelSpec, grid: Arc<MultiTimeGrid>) -> Result<Self> {
        model.validate()?;
        check_grid(model, &grid)?;
        let (SpacetimeKind::FlatFlrw(d), Some(a)) = (model.spacetime, &model.scale) else {
            return Err(Error::model(
                "the physical operator is defined for flat FLRW only",
            ));
        };
        let e = -0.5 * (d as f64 - 1.0);
        let w = Arc::new(build_rows(
            model,
            &grid,
            &ParticleFactor::Physical(a.clone(), e),
        )?);
        Ok(Self::assemble(model, grid, w.clone(), w, e))
    }

    fn assemble(
        model: &ModelSpec,
        grid: Arc<MultiTimeGrid>,
        w1: Arc<Csr>,
        w2: Arc<Csr>,
        exponent: f64,
    ) -> Self {
        let p = grid.particle_len();
        let kmat: Vec<Complex64> = (0..p)
            .into_par_iter()
            .flat_map_iter(|q1| {
                let g = &grid;
                (0..p).map(move |q2| kernel_entry(model, g, q1, q2))
            })
            .collect();
        Self {
            coefficient: model.lambda * model.prefactor(),
            grid,
            w1,
            w2,
            kmat,
            exponent,
        }
    }

    pub fn grid(&self) -> &Arc<MultiTimeGrid> {
        &self.grid
    }

    /// λ·c.
    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    /// Scale exponent of the fields the operator acts on.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn kernel_matrix(&self) -> &[Complex64] {
        &self.kmat
    }

    /// Row `p` of W₁ (`particle` = 0) or W₂ (`particle` = 1).
    pub fn row(&self, particle: usize, p: usize) -> &[(usize, f64)] {
        if particle == 0 {
            self.w1.row(p)
        } else {
            self.w2.row(p)
        }
    }

    /// Number of stored single-particle weights (W₁ plus W₂ when distinct).
    pub fn nnz(&self) -> usize {
        if Arc::ptr_eq(&self.w1, &self.w2) {
            self.w1.nnz()
        } else {
            self.w1.nnz() + self.w2.nnz()
        }
    }

    /// Operator output on raw values. Each output slot is summed in a fixed
    /// order, so the result does not depend on the thread count.
    pub fn apply_values(&self, values: &[Complex64]) -> Vec<Complex64> {
        let p = self.grid.particle_len();
        let zero = Complex64::new(0.0, 0.0);
        let y: Vec<Complex64> = self
            .kmat
            .par_iter()
            .zip(values.par_iter())
            .map(|(k, v)| k * v)
            .collect();
        let mut t = vec![zero; p * p];
        t.par_chunks_mut(p).enumerate().for_each(|(p1, row)| {
            for &(q1, w) in self.w1.row(p1) {
                let src = &y[q1 * p..(q1 + 1) * p];
                for (dst, s) in row.iter_mut().zip(src) {
                    *dst += s * w;
                }
            }
        });
        let mut out = vec![zero; p * p];
        out.par_chunks_mut(p).enumerate().for_each(|(p1, row)| {
            let trow = &t[p1 * p..(p1 + 1) * p];
            for (p2, dst) in row.iter_mut().enumerate() {
                let mut acc = zero;
                for &(q2, w) in self.w2.row(p2) {
                    acc += trow[q2] * w;
                }
                *dst = acc * self.coefficient;
            }
        });
        out
    }

    pub fn apply(&self, chi: &MultiTimeField) -> Result<MultiTimeField> {
        if !crate::fields::same_grid(chi.grid(), &self.grid) {
            return Err(Error::GridMismatch(
                "field and operator live on different grids".into(),
            ));
        }
        if chi.scale_exponent() != self.exponent {
            return Err(Error::GridMismatch(format!(
                "operator acts on fields with scale exponent {}, got {}",
                self.exponent,
                chi.scale_exponent()
            )));
        }
        Ok(MultiTimeField::from_parts(
            self.grid.clone(),
            self.apply_values(chi.values()),
            self.exponent,
        ))
    }
}
