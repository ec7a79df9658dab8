use num_complex::Complex64;

use super::{contraction_bound, ModelSpec, Operator};
use crate::error::{Error, Result};
use crate::fields::MultiTimeField;
use crate::geometry::SpacetimeKind;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Warning attached when a closed-universe run is attempted outside the
/// proven contraction range.
pub const ABOVE_BOUND: &str = "above-bound";

#[derive(Clone, Debug)]
pub struct SolutionReport {
    /// Last iterate (the reduced unknown χ).
    pub chi: MultiTimeField,
    /// bnorm(χ_{n+1} − χ_n) per iteration.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    /// Contraction threshold on |λ| (closed FLRW only).
    pub lambda_bound: Option<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SolutionReport {
    /// Ratios of successive increments.
    pub fn increment_ratios(&self) -> Vec<f64> {
        self.residual_history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

fn check_inputs(chi_free: &MultiTimeField, tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if chi_free
        .values()
        .iter()
        .any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::domain("free field contains non-finite values"));
    }
    Ok(())
}

/// Picard iteration χ_{n+1} = χ_free + Aχ_n from χ₀ = χ_free with a
/// prebuilt operator.
pub fn picard_solve_with(
    op: &Operator,
    chi_free: &MultiTimeField,
    tol: f64,
    max_iter: usize,
) -> Result<SolutionReport> {
    check_inputs(chi_free, tol)?;
    let target = tol * chi_free.bnorm();
    let mut chi = chi_free.clone();
    let mut history = Vec::new();
    let mut converged = false;
    for it in 1..=max_iter.max(1) {
        let a = op.apply(&chi)?;
        let next = chi_free.add(&a)?;
        if next
            .values()
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Diverged { iteration: it });
        }
        let inc = next.sub(&chi)?.bnorm();
        history.push(inc);
        chi = next;
        if inc <= target {
            converged = true;
            break;
        }
    }
    Ok(SolutionReport {
        chi,
        iterations: history.len(),
        residual_history: history,
        lambda_bound: None,
        converged,
        warnings: Vec::new(),
    })
}

/// Builds the reduced operator and runs Picard iteration. Closed-universe
/// runs record the contraction bound and flag couplings at or above it.
pub fn picard_solve(
    model: &ModelSpec,
    chi_free: &MultiTimeField,
    tol: f64,
    max_iter: usize,
) -> Result<SolutionReport> {
    check_inputs(chi_free, tol)?;
    let op = Operator::build(model, chi_free.grid().clone())?;
    let mut report = picard_solve_with(&op, chi_free, tol, max_iter)?;
    if matches!(model.spacetime, SpacetimeKind::ClosedFlrw3) {
        let bound = contraction_bound(model)?;
        report.lambda_bound = Some(bound);
        if model.lambda.norm() >= bound {
            report.warnings.push(ABOVE_BOUND.to_string());
        }
    }
    Ok(report)
}

/// Picard iteration on the unreduced flat-FLRW equation. `psi_free` must
/// carry scale exponent −(d−1)/2; the returned report holds ψ in `chi`.
pub fn physical_picard_solve(
    model: &ModelSpec,
    psi_free: &MultiTimeField,
    tol: f64,
    max_iter: usize,
) -> Result<SolutionReport> {
    check_inputs(psi_free, tol)?;
    let op = Operator::build_physical(model, psi_free.grid().clone())?;
    picard_solve_with(&op, psi_free, tol, max_iter)
}

/// bnorm(χ − χ_free − Aχ).
pub fn residual_with(
    op: &Operator,
    chi: &MultiTimeField,
    chi_free: &MultiTimeField,
) -> Result<f64> {
    let a = op.apply(chi)?;
    Ok(chi.sub(chi_free)?.sub(&a)?.bnorm())
}

pub fn residual(model: &ModelSpec, chi: &MultiTimeField, chi_free: &MultiTimeField) -> Result<f64> {
    let op = Operator::build(model, chi.grid().clone())?;
    residual_with(&op, chi, chi_free)
}

/// Partial Neumann sum Σ_{n=0}^{N} Aⁿ χ_free.
pub fn neumann_solve(
    model: &ModelSpec,
    chi_free: &MultiTimeField,
    n_terms: usize,
) -> Result<MultiTimeField> {
    let op = Operator::build(model, chi_free.grid().clone())?;
    let mut term = chi_free.clone();
    let mut sum = chi_free.clone();
    for _ in 0..n_terms {
        term = op.apply(&term)?;
        sum = sum.combine(Complex64::new(1.0, 0.0), &term, Complex64::new(1.0, 0.0))?;
    }
    Ok(sum)
}
