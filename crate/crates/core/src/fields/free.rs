//! Free solutions used as ψ_free.

use std::sync::Arc;

use num_complex::Complex64;

use super::grid::{MultiTimeGrid, SpatialLayout};
use super::{same_grid, MultiTimeField};
use crate::error::{Error, Result};
use crate::geometry::SpatialPoint;

/// Single-particle amplitude per (η, x) node. Represents `a(η)^e · v`.
#[derive(Clone, Debug)]
pub struct SingleParticleField {
    grid: Arc<MultiTimeGrid>,
    values: Vec<Complex64>,
    scale_exponent: f64,
}

impl SingleParticleField {
    pub fn new(
        grid: Arc<MultiTimeGrid>,
        values: Vec<Complex64>,
        scale_exponent: f64,
    ) -> Result<Self> {
        if values.len() != grid.particle_len() {
            return Err(Error::GridMismatch(format!(
                "single-particle field has {} values, grid has {}",
                values.len(),
                grid.particle_len()
            )));
        }
        Ok(Self {
            grid,
            values,
            scale_exponent,
        })
    }

    fn sample(
        grid: &Arc<MultiTimeGrid>,
        f: impl Fn(f64, &SpatialPoint) -> Complex64,
    ) -> Vec<Complex64> {
        let t = grid.time().nodes();
        let pts = grid.space().points();
        t.iter()
            .flat_map(|&eta| pts.iter().map(move |p| (eta, p)))
            .map(|(eta, p)| f(eta, p))
            .collect()
    }

    pub fn grid(&self) -> &Arc<MultiTimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scale_exponent(&self) -> f64 {
        self.scale_exponent
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.values[self.grid.particle_index(i, k)]
    }

    /// Weighted spatial L² norm at time node `i`.
    pub fn slice_norm(&self, i: usize) -> f64 {
        let w = self.grid.space().weights();
        (0..w.len())
            .map(|k| w[k] * self.get(i, k).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// φ(η, z) = f(η − z) + g(η + z) on a d = 1 grid.
pub fn dalembert_free_1d(
    grid: Arc<MultiTimeGrid>,
    f: impl Fn(f64) -> Complex64,
    g: impl Fn(f64) -> Complex64,
) -> Result<SingleParticleField> {
    let values = SingleParticleField::sample(&grid, |eta, p| match p {
        SpatialPoint::Line(z) => f(eta - z) + g(eta + z),
        _ => Complex64::new(f64::NAN, 0.0),
    });
    if !matches!(
        grid.space().layout(),
        SpatialLayout::Cartesian { dim: 1, .. }
    ) {
        return Err(Error::GridMismatch(
            "d'Alembert solution needs a d = 1 grid".into(),
        ));
    }
    SingleParticleField::new(grid, values, 0.0)
}

/// Massless plane wave exp(−i(|k|η − k·x)) on a flat grid.
pub fn plane_wave_free(grid: Arc<MultiTimeGrid>, k: &[f64]) -> Result<SingleParticleField> {
    let dim = match grid.space().layout() {
        SpatialLayout::Cartesian { dim, .. } => *dim,
        _ => return Err(Error::GridMismatch("plane waves need a flat grid".into())),
    };
    if k.len() != dim {
        return Err(Error::GridMismatch(format!(
            "wave vector has {} components, grid has dimension {dim}",
            k.len()
        )));
    }
    let omega = k.iter().map(|c| c * c).sum::<f64>().sqrt();
    let values = SingleParticleField::sample(&grid, |eta, p| {
        let x = p.flat_coords().unwrap_or(&[]);
        let phase = omega * eta - k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        Complex64::from_polar(1.0, -phase)
    });
    SingleParticleField::new(grid, values, 0.0)
}

/// φ̃ = a^{−(d−1)/2} φ, recorded symbolically in the exponent.
pub fn flrw_free_from_minkowski(
    phi: &SingleParticleField,
    d: usize,
) -> Result<SingleParticleField> {
    if !(1..=3).contains(&d) {
        return Err(Error::domain(format!(
            "spatial dimension must be 1, 2 or 3, got {d}"
        )));
    }
    let mut out = phi.clone();
    out.scale_exponent -= (d as f64 - 1.0) / 2.0;
    Ok(out)
}

/// ψ_free(x₁, x₂) = φ₁(x₁) φ₂(x₂).
pub fn product_free(
    phi1: &SingleParticleField,
    phi2: &SingleParticleField,
) -> Result<MultiTimeField> {
    if !same_grid(&phi1.grid, &phi2.grid) {
        return Err(Error::GridMismatch(
            "single-particle fields live on different grids".into(),
        ));
    }
    if phi1.scale_exponent != phi2.scale_exponent {
        return Err(Error::GridMismatch(
            "single-particle fields carry different scale exponents".into(),
        ));
    }
    let values = phi1
        .values
        .iter()
        .flat_map(|a| phi2.values.iter().map(move |b| a * b))
        .collect();
    MultiTimeField::with_exponent(phi1.grid.clone(), values, phi1.scale_exponent)
}

fn discrete_esu_residual(omega: f64, h: f64, n: usize) -> f64 {
    let lam = (n * (n + 2)) as f64 + 1.0;
    (2.0 * (omega * h).cos() - 2.0) / (h * h) + lam
}

/// Frequency minimizing |r(ω)| by golden-section search on `[0, π/h]`.
fn minimize_residual(h: f64, n: usize) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, std::f64::consts::PI / h);
    let r = |w: f64| discrete_esu_residual(w, h, n).abs();
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (r(c), r(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = r(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = r(d);
        }
        if b - a < 1e-15 * b {
            break;
        }
    }
    0.5 * (a + b)
}

/// Frequency of the n-th conformally coupled ESU mode: the residual
/// minimizer of the second-difference time equation at steps h and h/2,
/// combined by Richardson extrapolation.
pub fn esu_frequency(n: usize, h: f64) -> f64 {
    let coarse = minimize_residual(h, n);
    let fine = minimize_residual(0.5 * h, n);
    (4.0 * fine - coarse) / 3.0
}

fn harmonic_axis(label: &str) -> Result<usize> {
    match label {
        "zonal" => Ok(0),
        "zonal-x1" => Ok(1),
        "zonal-x2" => Ok(2),
        "zonal-x3" => Ok(3),
        other => Err(Error::domain(format!(
            "unsupported harmonic label '{other}' (expected zonal, zonal-x1, zonal-x2 or zonal-x3)"
        ))),
    }
}

/// Zonal hyperspherical harmonic sin((n+1)α)/sin α about the given axis.
pub(crate) fn zonal_harmonic(n: usize, axis: usize, q: &[f64; 4]) -> f64 {
    let c = q[axis].clamp(-1.0, 1.0);
    let alpha = c.acos();
    let s = alpha.sin();
    let m = (n + 1) as f64;
    if s < 1e-8 {
        let sign = if c > 0.0 || n.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        sign * m
    } else {
        (m * alpha).sin() / s
    }
}

/// a(η)^{−1} e^{−iω_n η} Y_n(q) on [0, T] × S³.
pub fn esu_mode_closed(
    grid: Arc<MultiTimeGrid>,
    n: usize,
    label: &str,
) -> Result<SingleParticleField> {
    if !matches!(grid.space().layout(), SpatialLayout::Sphere) {
        return Err(Error::GridMismatch("ESU modes need an S³ grid".into()));
    }
    let axis = harmonic_axis(label)?;
    let omega = esu_frequency(n, grid.time().step());
    let values = SingleParticleField::sample(&grid, |eta, p| match p {
        SpatialPoint::Sphere(q) => {
            Complex64::from_polar(1.0, -omega * eta) * zonal_harmonic(n, axis, q)
        }
        _ => Complex64::new(f64::NAN, 0.0),
    });
    SingleParticleField::new(grid, values, -1.0)
}

/// a(η)^{−1} e^{−iωη} sin(ωs)/sinh s, with s the distance to the chart origin.
pub fn h3_spherical_wave(grid: Arc<MultiTimeGrid>, omega: f64) -> Result<SingleParticleField> {
    if !matches!(grid.space().layout(), SpatialLayout::HyperbolicChart { .. }) {
        return Err(Error::GridMismatch(
            "spherical waves on ℍ³ need a hyperbolic grid".into(),
        ));
    }
    let values = SingleParticleField::sample(&grid, |eta, p| match p {
        SpatialPoint::Hyperboloid(x) => {
            let s = x[0].max(1.0).acosh();
            let radial = if s < 1e-8 {
                omega
            } else {
                (omega * s).sin() / s.sinh()
            };
            Complex64::from_polar(1.0, -omega * eta) * radial
        }
        _ => Complex64::new(f64::NAN, 0.0),
    });
    SingleParticleField::new(grid, values, -1.0)
}
