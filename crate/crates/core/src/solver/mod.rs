//! Model specification, operator assembly and fixed-point solvers.

mod operator;
mod picard;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::MultiTimeField;
use crate::geometry::{Curvature, ScaleFactorModel, SpacetimeKind};
use crate::kernels::{InteractionKernel, Singularity};

pub use operator::{kernel_entry, particle_factor, particle_rule, Operator, ParticleFactor};
pub use picard::{
    neumann_solve, physical_picard_solve, picard_solve, picard_solve_with, residual, residual_with,
    SolutionReport, ABOVE_BOUND, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

/// Which Green's functions enter the equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreensSupport {
    Retarded,
    Symmetric,
}

/// One instance of the integral equation.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub spacetime: SpacetimeKind,
    /// Scale factor; required exactly for FLRW kinds.
    pub scale: Option<ScaleFactorModel>,
    pub greens_support: GreensSupport,
    /// Bounded kernel K̃ (or f for the singular classes) without a-factors.
    pub kernel: InteractionKernel,
    pub lambda: Complex64,
    pub masses: (f64, f64),
    pub horizon: f64,
}

impl ModelSpec {
    pub fn spatial_dim(&self) -> usize {
        self.spacetime.spatial_dim()
    }

    /// Checks every structural rule; the error names the violated one.
    pub fn validate(&self) -> Result<()> {
        self.spacetime.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::model(format!(
                "horizon T must be positive and finite, got {}",
                self.horizon
            )));
        }
        if !(self.lambda.re.is_finite() && self.lambda.im.is_finite()) {
            return Err(Error::model("coupling λ must be finite"));
        }
        let closed = matches!(self.spacetime, SpacetimeKind::ClosedFlrw3);
        match (closed, self.greens_support) {
            (true, GreensSupport::Retarded) => {
                return Err(Error::model(
                    "closed FLRW requires symmetric Green's functions",
                ));
            }
            (false, GreensSupport::Symmetric) => {
                return Err(Error::model(format!(
                    "symmetric Green's functions are only supported on closed FLRW; {} requires retarded ones",
                    self.spacetime
                )));
            }
            _ => {}
        }
        let (m1, m2) = self.masses;
        if !(m1.is_finite() && m2.is_finite() && m1 >= 0.0 && m2 >= 0.0) {
            return Err(Error::model("masses must be finite and non-negative"));
        }
        let massive = m1 != 0.0 || m2 != 0.0;
        match self.spacetime {
            SpacetimeKind::MinkowskiHalfSpace(3) if massive => {
                return Err(Error::model("the d = 3 Minkowski equation is massless"));
            }
            SpacetimeKind::MinkowskiHalfSpace(_) => {}
            _ if massive => return Err(Error::model("masses must be 0 off Minkowski half-space")),
            _ => {}
        }
        match (&self.scale, self.spacetime.curvature()) {
            (Some(_), None) => {
                return Err(Error::model("Minkowski half-space takes no scale factor"))
            }
            (None, Some(_)) => {
                return Err(Error::model(format!(
                    "{} requires a scale factor",
                    self.spacetime
                )))
            }
            (Some(scale), Some(k)) => {
                if let Some(sk) = scale.curvature() {
                    if sk != k {
                        return Err(Error::model(format!(
                            "scale factor curvature {sk:?} does not match spacetime curvature {k:?}"
                        )));
                    }
                }
                if (scale.horizon() - self.horizon).abs() > 1e-12 * self.horizon.max(1.0) {
                    return Err(Error::model(format!(
                        "scale factor horizon {} differs from model horizon {}",
                        scale.horizon(),
                        self.horizon
                    )));
                }
                scale.validate_big_bang(k == Curvature::Closed)?;
            }
            (None, None) => {}
        }
        let d = self.spatial_dim();
        match self.kernel.singularity() {
            Singularity::None => {}
            Singularity::InverseSpatial => {
                if !matches!(
                    self.spacetime,
                    SpacetimeKind::MinkowskiHalfSpace(3) | SpacetimeKind::FlatFlrw(3)
                ) {
                    return Err(Error::model(format!(
                        "1/|x₁−x₂| kernels need flat three-space, got {} (d = {d})",
                        self.spacetime
                    )));
                }
            }
            Singularity::InverseSine => {
                if !closed {
                    return Err(Error::model(
                        "1/sin s kernels are only defined on closed FLRW",
                    ));
                }
            }
        }
        if matches!(self.spacetime, SpacetimeKind::OpenFlrw3)
            && self.kernel.singularity() != Singularity::None
        {
            return Err(Error::model("open FLRW supports bounded kernels only"));
        }
        Ok(())
    }

    /// Exponent (d−1)/2 of the conformal reduction; 0 on Minkowski.
    pub fn reduction_exponent(&self) -> f64 {
        if self.spacetime.is_flrw() {
            0.5 * (self.spatial_dim() as f64 - 1.0)
        } else {
            0.0
        }
    }

    /// Numerical constant in front of the reduced integral.
    pub fn prefactor(&self) -> f64 {
        match self.spacetime {
            SpacetimeKind::MinkowskiHalfSpace(1) | SpacetimeKind::FlatFlrw(1) => 0.25,
            SpacetimeKind::MinkowskiHalfSpace(2) | SpacetimeKind::FlatFlrw(2) => {
                1.0 / (4.0 * PI * PI)
            }
            SpacetimeKind::ClosedFlrw3 => 1.0 / (64.0 * PI * PI),
            _ => 1.0 / (16.0 * PI * PI),
        }
    }

    /// ‖a‖_∞ (1 on Minkowski).
    pub fn scale_sup(&self) -> f64 {
        self.scale.as_ref().map_or(1.0, |s| s.sup_norm())
    }
}

/// Largest |λ| for which the closed-universe operator is a contraction:
/// (π²/√2 · (⌊T/π⌋+1)² · ‖a‖²_∞ · ‖f‖_∞)^{−1}.
///
/// For bounded kernels K̃ the factor f = K̃ sin s obeys ‖f‖_∞ ≤ ‖K̃‖_∞.
pub fn contraction_bound(model: &ModelSpec) -> Result<f64> {
    if !matches!(model.spacetime, SpacetimeKind::ClosedFlrw3) {
        return Err(Error::model(format!(
            "contraction bound applies to closed FLRW only, got {}",
            model.spacetime
        )));
    }
    let scale = model
        .scale
        .as_ref()
        .ok_or_else(|| Error::model("closed FLRW requires a scale factor"))?;
    let windings = (model.horizon / PI).floor() + 1.0;
    let a = scale.sup_norm();
    let denom = PI * PI / 2f64.sqrt() * windings * windings * a * a * model.kernel.sup_bound();
    Ok(if denom == 0.0 {
        f64::INFINITY
    } else {
        1.0 / denom
    })
}

fn scale_values(field: &MultiTimeField, scale: &ScaleFactorModel) -> Vec<f64> {
    field
        .grid()
        .time()
        .nodes()
        .iter()
        .map(|&t| scale.value(t))
        .collect()
}

/// χ = a^{(d−1)/2}(η₁) a^{(d−1)/2}(η₂) ψ. A pending symbolic exponent is
/// cancelled first; any remainder is multiplied out.
pub fn reduce_conformal(
    psi: &MultiTimeField,
    scale: &ScaleFactorModel,
    d: usize,
) -> Result<MultiTimeField> {
    let e = psi.scale_exponent() + 0.5 * (d as f64 - 1.0);
    if e == 0.0 {
        return MultiTimeField::new(psi.grid().clone(), psi.values().to_vec());
    }
    let a = scale_values(psi, scale);
    let g = psi.grid();
    let (nt, ns) = (g.time().len(), g.space().len());
    let mut values = psi.values().to_vec();
    for (idx, v) in values.iter_mut().enumerate() {
        let p1 = idx / g.particle_len();
        let p2 = idx % g.particle_len();
        let (i1, i2) = (p1 / ns, p2 / ns);
        debug_assert!(i1 < nt && i2 < nt);
        *v *= (a[i1] * a[i2]).powf(e);
    }
    MultiTimeField::new(g.clone(), values).map_err(|_| {
        Error::Singular("reduction weight is singular at a root of the scale factor".into())
    })
}

/// ψ = a^{−(d−1)/2}(η₁) a^{−(d−1)/2}(η₂) χ, kept symbolic in the exponent.
pub fn unreduce_conformal(chi: &MultiTimeField, d: usize) -> Result<MultiTimeField> {
    MultiTimeField::with_exponent(
        chi.grid().clone(),
        chi.values().to_vec(),
        chi.scale_exponent() - 0.5 * (d as f64 - 1.0),
    )
}

/// Max over the time pairs with max(i₁, i₂) < `n_nodes_near_zero` of the
/// spatial L² distance between χ and χ_free, divided by bnorm(χ_free).
pub fn bigbang_asymptotics_check(
    report: &SolutionReport,
    chi_free: &MultiTimeField,
    n_nodes_near_zero: usize,
) -> Result<f64> {
    let diff = report.chi.sub(chi_free)?;
    let nt = chi_free.grid().time().len();
    let n = n_nodes_near_zero.min(nt);
    let norms = diff.slice_norms();
    let mut worst: f64 = 0.0;
    for i1 in 0..n {
        for i2 in 0..n {
            worst = worst.max(norms[i1 * nt + i2]);
        }
    }
    let scale = chi_free.bnorm();
    Ok(if scale == 0.0 { worst } else { worst / scale })
}
