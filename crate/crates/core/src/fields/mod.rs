//! Discretized two-particle fields and their B-norm.

pub mod free;
pub mod grid;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::ScaleFactorModel;

pub use free::{
    dalembert_free_1d, esu_frequency, esu_mode_closed, flrw_free_from_minkowski, h3_spherical_wave,
    plane_wave_free, product_free, SingleParticleField,
};
pub use grid::{MultiTimeGrid, SpatialGrid, SpatialLayout, TimeAxis};

/// Complex amplitude per (η₁, x₁, η₂, x₂) node, row-major with η₁ outermost.
///
/// The stored values are `v` and the represented function is
/// `[a(η₁)a(η₂)]^e · v` with `e = scale_exponent`. Reduced fields χ carry `e = 0`.
#[derive(Clone, Debug)]
pub struct MultiTimeField {
    grid: Arc<MultiTimeGrid>,
    values: Vec<Complex64>,
    scale_exponent: f64,
}

pub(crate) fn same_grid(a: &Arc<MultiTimeGrid>, b: &Arc<MultiTimeGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl MultiTimeField {
    pub fn new(grid: Arc<MultiTimeGrid>, values: Vec<Complex64>) -> Result<Self> {
        Self::with_exponent(grid, values, 0.0)
    }

    pub fn with_exponent(
        grid: Arc<MultiTimeGrid>,
        values: Vec<Complex64>,
        scale_exponent: f64,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Domain(format!(
                "non-finite field value at flat index {pos}"
            )));
        }
        Ok(Self {
            grid,
            values,
            scale_exponent,
        })
    }

    /// Builds a field without the finiteness scan; used for solver iterates.
    pub(crate) fn from_parts(
        grid: Arc<MultiTimeGrid>,
        values: Vec<Complex64>,
        scale_exponent: f64,
    ) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid,
            values,
            scale_exponent,
        }
    }

    pub fn zeros(grid: Arc<MultiTimeGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            scale_exponent: 0.0,
        }
    }

    pub fn constant(grid: Arc<MultiTimeGrid>, c: Complex64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
            scale_exponent: 0.0,
        }
    }

    /// Samples `f(p₁, p₂)` over single-particle indices.
    pub fn from_fn(
        grid: Arc<MultiTimeGrid>,
        f: impl Fn(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let p = grid.particle_len();
        let values = (0..p * p).map(|idx| f(idx / p, idx % p)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<MultiTimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale_exponent(&self) -> f64 {
        self.scale_exponent
    }

    /// Flat index of (i₁, k₁, i₂, k₂).
    pub fn index(&self, i1: usize, k1: usize, i2: usize, k2: usize) -> usize {
        let g = &self.grid;
        g.particle_index(i1, k1) * g.particle_len() + g.particle_index(i2, k2)
    }

    pub fn get(&self, i1: usize, k1: usize, i2: usize, k2: usize) -> Complex64 {
        self.values[self.index(i1, k1, i2, k2)]
    }

    /// Weighted spatial L² norm at every time pair, indexed `i₁·N_t + i₂`.
    pub fn slice_norms(&self) -> Vec<f64> {
        let g = &self.grid;
        let (nt, ns) = (g.time().len(), g.space().len());
        let w = g.space().weights();
        let mut out = vec![0.0; nt * nt];
        for i1 in 0..nt {
            for i2 in 0..nt {
                let mut acc = 0.0;
                for k1 in 0..ns {
                    let row = self.index(i1, k1, i2, 0);
                    let inner: f64 = w
                        .iter()
                        .zip(&self.values[row..row + ns])
                        .map(|(wk, v)| wk * v.norm_sqr())
                        .sum();
                    acc += w[k1] * inner;
                }
                out[i1 * nt + i2] = acc.sqrt();
            }
        }
        out
    }

    /// Discrete B-norm of the stored values: max over time pairs of the
    /// weighted spatial L² norm.
    pub fn bnorm(&self) -> f64 {
        self.slice_norms().into_iter().fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        if self.scale_exponent != other.scale_exponent {
            return Err(Error::GridMismatch(format!(
                "scale exponents differ: {} vs {}",
                self.scale_exponent, other.scale_exponent
            )));
        }
        Ok(())
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self::from_parts(
            self.grid.clone(),
            values,
            self.scale_exponent,
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.values.iter().map(|v| alpha * v).collect(),
            self.scale_exponent,
        )
    }

    /// Pointwise `[a(η₁)a(η₂)]^e · v`; `None` where the weight is singular.
    pub fn materialize(&self, model: &ScaleFactorModel) -> Vec<Option<Complex64>> {
        let g = &self.grid;
        let (nt, ns) = (g.time().len(), g.space().len());
        let e = self.scale_exponent;
        let a: Vec<f64> = g.time().nodes().iter().map(|&t| model.value(t)).collect();
        let mut out = Vec::with_capacity(self.values.len());
        for i1 in 0..nt {
            for _k1 in 0..ns {
                for i2 in 0..nt {
                    let weight = if e == 0.0 {
                        1.0
                    } else {
                        (a[i1] * a[i2]).powf(e)
                    };
                    for _k2 in 0..ns {
                        let v = self.values[out.len()];
                        out.push(if weight.is_finite() {
                            Some(v * weight)
                        } else {
                            None
                        });
                    }
                }
            }
        }
        out
    }
}
