//! Scenario files: `[model]`, `[grid]`, `[free_field]`, `[solver]`, `[outputs]`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{
    dalembert_free_1d, esu_mode_closed, flrw_free_from_minkowski, h3_spherical_wave,
    plane_wave_free, product_free, MultiTimeField, MultiTimeGrid,
};
use crate::geometry::{ScaleFactorModel, SpacetimeKind};
use crate::kernels::{
    constant_kernel, natural_kernel_1d, singular_kernel_closed, singular_kernel_flat3d,
    InteractionKernel,
};
use crate::solver::{
    contraction_bound, reduce_conformal, GreensSupport, ModelSpec, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSection,
    pub grid: GridSection,
    pub free_field: FreeFieldSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// minkowski | flat | open | closed
    pub spacetime: String,
    /// Spatial dimension for minkowski and flat (1, 2 or 3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// dust | radiation | constant
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_value: Option<f64>,
    /// retarded | symmetric; defaults to what the spacetime requires.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greens: Option<String>,
    /// natural-1d | constant | inverse-distance | inverse-sine
    pub kernel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_im: Option<f64>,
    /// λ as a multiple of the closed-universe contraction bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_over_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<[f64; 2]>,
    /// Time horizon; defaults to the crunch time on closed models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_t: usize,
    /// Observation half-width L₀ (flat) or geodesic radius (open).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s3: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeFieldSection {
    /// constant | plane-wave | dalembert-gaussian | esu-mode | h3-wave
    pub factory: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Time pairs (η₁, η₂) exported as slices after the run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub time_slices: Vec<[f64; 2]>,
}

fn scenario_err(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

/// A scenario turned into solver objects.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub model: ModelSpec,
    pub grid: Arc<MultiTimeGrid>,
    pub chi_free: MultiTimeField,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| scenario_err(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Canonical text; parsing it yields an identical scenario.
    pub fn canonical_text(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }

    fn spacetime(&self) -> Result<SpacetimeKind> {
        let m = &self.model;
        let dim = || {
            m.dim.ok_or_else(|| {
                scenario_err(format!(
                    "model.dim is required for spacetime {:?}",
                    m.spacetime
                ))
            })
        };
        let kind = match m.spacetime.as_str() {
            "minkowski" => SpacetimeKind::MinkowskiHalfSpace(dim()?),
            "flat" => SpacetimeKind::FlatFlrw(dim()?),
            "open" | "closed" => {
                if let Some(d) = m.dim.filter(|&d| d != 3) {
                    return Err(scenario_err(format!("model.dim = {d}: {} FLRW is three-dimensional", m.spacetime)));
                }
                if m.spacetime == "open" {
                    SpacetimeKind::OpenFlrw3
                } else {
                    SpacetimeKind::ClosedFlrw3
                }
            }
            other => {
                return Err(scenario_err(format!(
                    "model.spacetime: unknown value {other:?} (expected minkowski, flat, open or closed)"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    fn horizon(&self, kind: SpacetimeKind) -> Result<f64> {
        match (self.model.horizon, kind) {
            (Some(t), _) => Ok(t),
            (None, SpacetimeKind::ClosedFlrw3) => match self.model.scale.as_deref() {
                Some("radiation") => Ok(PI),
                _ => Ok(2.0 * PI),
            },
            (None, _) => Err(scenario_err("model.horizon is required")),
        }
    }

    fn scale(&self, kind: SpacetimeKind, horizon: f64) -> Result<Option<ScaleFactorModel>> {
        let m = &self.model;
        let Some(k) = kind.curvature() else {
            return match &m.scale {
                Some(_) => Err(scenario_err(
                    "model.scale: Minkowski half-space takes no scale factor",
                )),
                None => Ok(None),
            };
        };
        let name = m
            .scale
            .as_deref()
            .ok_or_else(|| scenario_err("model.scale is required on FLRW spacetimes"))?;
        let model = match name {
            "dust" => ScaleFactorModel::dust(k, horizon)?,
            "radiation" => ScaleFactorModel::radiation(k, horizon)?,
            "constant" => {
                let v = m.scale_value.ok_or_else(|| {
                    scenario_err("model.scale_value is required for scale = constant")
                })?;
                ScaleFactorModel::constant(v, horizon)?
            }
            other => {
                return Err(scenario_err(format!(
                    "model.scale: unknown value {other:?} (expected dust, radiation or constant)"
                )))
            }
        };
        Ok(Some(model))
    }

    fn kernel(&self) -> Result<InteractionKernel> {
        let v = self.model.kernel_value.unwrap_or(1.0);
        let c = Complex64::new(v, 0.0);
        match self.model.kernel.as_str() {
            "natural-1d" => Ok(natural_kernel_1d()),
            "constant" => Ok(constant_kernel(c)),
            "inverse-distance" => singular_kernel_flat3d(move |_, _| c, v.abs()),
            "inverse-sine" => singular_kernel_closed(move |_, _| c, v.abs()),
            other => Err(scenario_err(format!(
                "model.kernel: unknown kernel {other:?} (expected natural-1d, constant, inverse-distance or inverse-sine)"
            ))),
        }
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let kind = self.spacetime()?;
        let horizon = self.horizon(kind)?;
        let scale = self.scale(kind, horizon)?;
        let greens_support = match m.greens.as_deref() {
            None if kind == SpacetimeKind::ClosedFlrw3 => GreensSupport::Symmetric,
            None | Some("retarded") => GreensSupport::Retarded,
            Some("symmetric") => GreensSupport::Symmetric,
            Some(other) => {
                return Err(scenario_err(format!(
                    "model.greens: unknown value {other:?} (expected retarded or symmetric)"
                )))
            }
        };
        let masses = m.masses.unwrap_or([0.0, 0.0]);
        let mut model = ModelSpec {
            spacetime: kind,
            scale,
            greens_support,
            kernel: self.kernel()?,
            lambda: Complex64::new(0.0, 0.0),
            masses: (masses[0], masses[1]),
            horizon,
        };
        model.lambda = match (m.lambda, m.lambda_over_bound) {
            (Some(_), Some(_)) => {
                return Err(scenario_err(
                    "model.lambda and model.lambda_over_bound are mutually exclusive",
                ));
            }
            (Some(re), None) => Complex64::new(re, m.lambda_im.unwrap_or(0.0)),
            (None, Some(f)) => {
                if m.lambda_im.is_some() {
                    return Err(scenario_err(
                        "model.lambda_im cannot be combined with model.lambda_over_bound",
                    ));
                }
                model.validate()?;
                Complex64::new(f * contraction_bound(&model)?, 0.0)
            }
            (None, None) => {
                return Err(scenario_err(
                    "model.lambda or model.lambda_over_bound is required",
                ))
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn build_grid(&self, model: &ModelSpec) -> Result<MultiTimeGrid> {
        let g = &self.grid;
        let window = g.window.unwrap_or(0.0);
        match model.spacetime {
            SpacetimeKind::MinkowskiHalfSpace(d) | SpacetimeKind::FlatFlrw(d) => {
                MultiTimeGrid::flat(d, model.horizon, g.n_t, window)
            }
            SpacetimeKind::OpenFlrw3 => {
                let step = g
                    .chart_step
                    .ok_or_else(|| scenario_err("grid.chart_step is required on open FLRW"))?;
                MultiTimeGrid::hyperbolic(model.horizon, g.n_t, window, step)
            }
            SpacetimeKind::ClosedFlrw3 => {
                let n = g
                    .n_s3
                    .ok_or_else(|| scenario_err("grid.n_s3 is required on closed FLRW"))?;
                MultiTimeGrid::sphere(model.horizon, g.n_t, n)
            }
        }
    }

    /// ψ_free from the named factory, reduced to χ_free. The `constant`
    /// factory gives χ_free directly.
    pub fn free_field(
        &self,
        model: &ModelSpec,
        grid: &Arc<MultiTimeGrid>,
    ) -> Result<MultiTimeField> {
        let f = &self.free_field;
        let d = model.spatial_dim();
        let single = match f.factory.as_str() {
            "constant" => {
                let v = f.value.unwrap_or(1.0);
                return Ok(MultiTimeField::constant(
                    grid.clone(),
                    Complex64::new(v, 0.0),
                ));
            }
            "plane-wave" => {
                let k = f.k.clone().unwrap_or_else(|| vec![0.0; d]);
                let phi = plane_wave_free(grid.clone(), &k)?;
                if model.spacetime.is_flrw() {
                    flrw_free_from_minkowski(&phi, d)?
                } else {
                    phi
                }
            }
            "dalembert-gaussian" => {
                let w = f.width.unwrap_or(0.5);
                if !(w > 0.0) {
                    return Err(scenario_err("free_field.width must be positive"));
                }
                let bump = move |u: f64| Complex64::new((-(u * u) / (w * w)).exp(), 0.0);
                let phi = dalembert_free_1d(grid.clone(), bump, bump)?;
                if model.spacetime.is_flrw() {
                    flrw_free_from_minkowski(&phi, d)?
                } else {
                    phi
                }
            }
            "esu-mode" => esu_mode_closed(
                grid.clone(),
                f.n.unwrap_or(0),
                f.label.as_deref().unwrap_or("zonal"),
            )?,
            "h3-wave" => h3_spherical_wave(grid.clone(), f.omega.unwrap_or(1.0))?,
            other => {
                return Err(scenario_err(format!(
                    "free_field.factory: unknown factory {other:?} \
                     (expected constant, plane-wave, dalembert-gaussian, esu-mode or h3-wave)"
                )))
            }
        };
        let psi = product_free(&single, &single)?;
        match &model.scale {
            Some(a) => reduce_conformal(&psi, a, d),
            None => Ok(psi),
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        if !(self.solver.tol > 0.0 && self.solver.tol.is_finite()) {
            return Err(scenario_err(format!(
                "solver.tol must be positive, got {}",
                self.solver.tol
            )));
        }
        let model = self.model()?;
        let grid = Arc::new(self.build_grid(&model)?);
        let chi_free = self.free_field(&model, &grid)?;
        for s in &self.outputs.time_slices {
            for &t in s {
                if !(t >= 0.0 && t <= model.horizon) {
                    return Err(scenario_err(format!(
                        "outputs.time_slices: time {t} outside [0, {}]",
                        model.horizon
                    )));
                }
            }
        }
        Ok(Prepared {
            model,
            grid,
            chi_free,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const D1: &str = r#"
[model]
spacetime = "minkowski"
dim = 1
kernel = "natural-1d"
lambda = 1.0
horizon = 1.0

[grid]
n_t = 5

[free_field]
factory = "dalembert-gaussian"
width = 0.5
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::parse(D1).unwrap();
        assert_eq!(s.solver, SolverSection::default());
        let text = s.canonical_text();
        let back = Scenario::parse(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.canonical_text(), text);
        let p = s.prepare().unwrap();
        assert_eq!(p.grid.time().len(), 5);
    }

    #[test]
    fn parse_errors_name_the_location() {
        let bad = D1.replace("n_t = 5", "n_t = \"five\"");
        let msg = Scenario::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("n_t"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
        let unknown = D1.replace("width = 0.5", "widht = 0.5");
        assert!(Scenario::parse(&unknown)
            .unwrap_err()
            .to_string()
            .contains("widht"));
    }

    #[test]
    fn model_rules_are_reported() {
        let s = Scenario::parse(&D1.replace(
            "spacetime = \"minkowski\"",
            "spacetime = \"flat\"\nscale = \"dust\"\ngreens = \"symmetric\"",
        ))
        .unwrap();
        let msg = s.prepare().unwrap_err().to_string();
        assert!(msg.contains("symmetric"), "{msg}");
    }

    #[test]
    fn closed_defaults_and_bound_multiple() {
        let text = r#"
[model]
spacetime = "closed"
scale = "dust"
kernel = "inverse-sine"
lambda_over_bound = 0.5

[grid]
n_t = 3
n_s3 = 12

[free_field]
factory = "esu-mode"
n = 1
"#;
        let p = Scenario::parse(text).unwrap().prepare().unwrap();
        assert!((p.model.horizon - 2.0 * PI).abs() < 1e-15);
        let expect = 0.5 * 2f64.sqrt() / (36.0 * PI * PI);
        assert!((p.model.lambda.re - expect).abs() < 1e-15);
        assert_eq!(p.chi_free.scale_exponent(), 0.0);
    }
}
