//! Time axes and spatial node sets shared by both particles.

use crate::error::{Error, Result};
use crate::geometry::{SpacetimePoint, SpatialPoint};
use crate::quadrature::nodes::{s3_antipode, s3_nodes, S3_VOLUME};

/// Interpolation fractions this close to a node snap onto it.
const SNAP: f64 = 1e-12;

/// Uniform conformal-time nodes on `[0, T]`, both ends included.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeAxis {
    nodes: Vec<f64>,
    step: f64,
    horizon: f64,
}

impl TimeAxis {
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridMismatch(format!(
                "time axis needs at least 2 nodes, got {n}"
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::GridMismatch(format!(
                "time horizon must be positive, got {horizon}"
            )));
        }
        let last = (n - 1) as f64;
        let nodes = (0..n).map(|j| horizon * j as f64 / last).collect();
        Ok(Self {
            nodes,
            step: horizon / last,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Trapezoid weights on `[0, η_i]`.
    pub fn trapezoid_weight(&self, i: usize, j: usize) -> f64 {
        if j > i || i == 0 {
            0.0
        } else if j == 0 || j == i {
            0.5 * self.step
        } else {
            self.step
        }
    }

    /// Linear interpolation stencil at τ; `None` outside `[0, T]`.
    pub fn stencil(&self, tau: f64) -> Option<[(usize, f64); 2]> {
        let tol = SNAP * self.horizon.max(1.0);
        if tau < -tol || tau > self.horizon + tol {
            return None;
        }
        let n = self.nodes.len();
        let x = (tau / self.step).clamp(0.0, (n - 1) as f64);
        let mut j = (x.floor() as usize).min(n - 2);
        let mut t = x - j as f64;
        if t < SNAP {
            t = 0.0;
        } else if t > 1.0 - SNAP {
            j += 1;
            t = 0.0;
            if j == n - 1 {
                return Some([(j, 1.0), (j, 0.0)]);
            }
        }
        Some([(j, 1.0 - t), (j + 1, t)])
    }

    /// Nearest node and the distance to it.
    pub fn nearest(&self, eta: f64) -> (usize, f64) {
        let j = ((eta / self.step).round().max(0.0) as usize).min(self.nodes.len() - 1);
        (j, (eta - self.nodes[j]).abs())
    }
}

/// How the spatial nodes are laid out.
#[derive(Clone, Debug, PartialEq)]
pub enum SpatialLayout {
    /// Uniform box `[−h·m, h·m]^dim` with `n_side = 2m + 1` nodes per side.
    Cartesian {
        dim: usize,
        n_side: usize,
        step: f64,
    },
    /// Uniform box in the chart y ↦ (√(1+|y|²), y) of ℍ³.
    HyperbolicChart { n_side: usize, step: f64 },
    /// Antipodally closed quasi-uniform nodes on S³.
    Sphere,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    layout: SpatialLayout,
    points: Vec<SpatialPoint>,
    weights: Vec<f64>,
}

fn box_coords(n_side: usize, step: f64, dim: usize, k: usize) -> [f64; 3] {
    let half = (n_side / 2) as f64;
    let mut c = [0.0; 3];
    let mut rest = k;
    for axis in (0..dim).rev() {
        c[axis] = ((rest % n_side) as f64 - half) * step;
        rest /= n_side;
    }
    c
}

fn box_weight(n_side: usize, step: f64, dim: usize, k: usize) -> f64 {
    let mut w = 1.0;
    let mut rest = k;
    for _ in 0..dim {
        let m = rest % n_side;
        w *= if m == 0 || m == n_side - 1 {
            0.5 * step
        } else {
            step
        };
        rest /= n_side;
    }
    w
}

impl SpatialGrid {
    /// Flat box of half-width at least `half_width` with the given spacing.
    pub fn cartesian(dim: usize, step: f64, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) || !(step > 0.0) || !(half_width >= 0.0) {
            return Err(Error::GridMismatch(format!(
                "invalid box: dim={dim}, step={step}, half width={half_width}"
            )));
        }
        let m = ((half_width / step) - 1e-9).ceil().max(0.0) as usize;
        let n_side = 2 * m + 1;
        let count = n_side.pow(dim as u32);
        let mut points = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for k in 0..count {
            let c = box_coords(n_side, step, dim, k);
            points.push(match dim {
                1 => SpatialPoint::Line(c[0]),
                2 => SpatialPoint::Plane([c[0], c[1]]),
                _ => SpatialPoint::Space(c),
            });
            weights.push(box_weight(n_side, step, dim, k));
        }
        Ok(Self {
            layout: SpatialLayout::Cartesian { dim, n_side, step },
            points,
            weights,
        })
    }

    /// Chart box of ℍ³ covering the geodesic ball of radius `radius` about the origin.
    pub fn hyperbolic(step: f64, radius: f64) -> Result<Self> {
        if !(step > 0.0) || !(radius >= 0.0) {
            return Err(Error::GridMismatch(format!(
                "invalid chart box: step={step}, radius={radius}"
            )));
        }
        let half_width = radius.sinh();
        let m = ((half_width / step) - 1e-9).ceil().max(0.0) as usize;
        let n_side = 2 * m + 1;
        let count = n_side.pow(3);
        let mut points = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for k in 0..count {
            let y = box_coords(n_side, step, 3, k);
            let n2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
            points.push(SpatialPoint::hyperboloid_from_chart(y));
            weights.push(box_weight(n_side, step, 3, k) / (1.0 + n2).sqrt());
        }
        Ok(Self {
            layout: SpatialLayout::HyperbolicChart { n_side, step },
            points,
            weights,
        })
    }

    /// `n` equal-weight nodes on S³.
    pub fn sphere(n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::GridMismatch(format!(
                "S³ node count must be even and ≥ 2, got {n}"
            )));
        }
        let points = s3_nodes(n).into_iter().map(SpatialPoint::Sphere).collect();
        Ok(Self {
            layout: SpatialLayout::Sphere,
            points,
            weights: vec![S3_VOLUME / n as f64; n],
        })
    }

    pub fn layout(&self) -> &SpatialLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpatialPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node spacing of box layouts.
    pub fn step(&self) -> Option<f64> {
        match self.layout {
            SpatialLayout::Cartesian { step, .. } | SpatialLayout::HyperbolicChart { step, .. } => {
                Some(step)
            }
            SpatialLayout::Sphere => None,
        }
    }

    /// Antipodal node of a sphere node.
    pub fn antipode(&self, k: usize) -> Option<usize> {
        match self.layout {
            SpatialLayout::Sphere => Some(s3_antipode(self.points.len(), k)),
            _ => None,
        }
    }

    /// Box coordinates (flat coordinates or chart coordinates) of node `k`.
    pub fn box_coords(&self, k: usize) -> Option<[f64; 3]> {
        match self.layout {
            SpatialLayout::Cartesian { dim, n_side, step } => {
                Some(box_coords(n_side, step, dim, k))
            }
            SpatialLayout::HyperbolicChart { n_side, step } => Some(box_coords(n_side, step, 3, k)),
            SpatialLayout::Sphere => None,
        }
    }

    /// Multilinear interpolation stencil at box coordinates `c`, written into
    /// `out`. Returns false when `c` lies outside the box.
    pub fn box_stencil(&self, c: &[f64], out: &mut Vec<(usize, f64)>) -> bool {
        out.clear();
        let (dim, n_side, step) = match self.layout {
            SpatialLayout::Cartesian { dim, n_side, step } => (dim, n_side, step),
            SpatialLayout::HyperbolicChart { n_side, step } => (3, n_side, step),
            SpatialLayout::Sphere => return false,
        };
        let half = (n_side / 2) as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for axis in 0..dim {
            let x = c[axis] / step + half;
            let top = (n_side - 1) as f64;
            if x < -SNAP * top.max(1.0) || x > top + SNAP * top.max(1.0) {
                return false;
            }
            let x = x.clamp(0.0, top);
            let mut j = (x.floor() as usize).min(n_side.saturating_sub(2));
            let mut t = x - j as f64;
            if t < SNAP {
                t = 0.0;
            } else if t > 1.0 - SNAP {
                j += 1;
                t = 0.0;
            }
            if n_side == 1 {
                j = 0;
                t = 0.0;
            }
            base[axis] = j;
            frac[axis] = t;
        }
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut index = 0;
            for axis in 0..dim {
                let up = (corner >> (dim - 1 - axis)) & 1;
                let t = frac[axis];
                let wa = if up == 1 { t } else { 1.0 - t };
                if wa == 0.0 {
                    w = 0.0;
                    break;
                }
                w *= wa;
                index = index * n_side + base[axis] + up;
            }
            if w != 0.0 {
                out.push((index, w));
            }
        }
        true
    }
}

/// Tensor grid of the two-particle configuration space. Both particles use
/// the same time axis and spatial node set.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiTimeGrid {
    time: TimeAxis,
    space: SpatialGrid,
}

impl MultiTimeGrid {
    pub fn new(time: TimeAxis, space: SpatialGrid) -> Self {
        Self { time, space }
    }

    /// Flat box whose spacing equals the time step and whose half-width
    /// covers the observation window plus the light-cone reach T.
    pub fn flat(dim: usize, horizon: f64, n_t: usize, window: f64) -> Result<Self> {
        let time = TimeAxis::uniform(horizon, n_t)?;
        let space = SpatialGrid::cartesian(dim, time.step(), window + horizon)?;
        Ok(Self { time, space })
    }

    /// ℍ³ chart box covering the geodesic ball of radius `window + T`.
    pub fn hyperbolic(horizon: f64, n_t: usize, window: f64, chart_step: f64) -> Result<Self> {
        let time = TimeAxis::uniform(horizon, n_t)?;
        let space = SpatialGrid::hyperbolic(chart_step, window + horizon)?;
        Ok(Self { time, space })
    }

    pub fn sphere(horizon: f64, n_t: usize, n_nodes: usize) -> Result<Self> {
        Ok(Self {
            time: TimeAxis::uniform(horizon, n_t)?,
            space: SpatialGrid::sphere(n_nodes)?,
        })
    }

    pub fn time(&self) -> &TimeAxis {
        &self.time
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.space
    }

    /// Number of single-particle nodes (time × space).
    pub fn particle_len(&self) -> usize {
        self.time.len() * self.space.len()
    }

    /// Number of two-particle nodes.
    pub fn len(&self) -> usize {
        self.particle_len() * self.particle_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Single-particle index of (time node i, spatial node k).
    pub fn particle_index(&self, i: usize, k: usize) -> usize {
        i * self.space.len() + k
    }

    /// (time node, spatial node) of a single-particle index.
    pub fn split(&self, p: usize) -> (usize, usize) {
        (p / self.space.len(), p % self.space.len())
    }

    pub fn point(&self, p: usize) -> SpacetimePoint {
        let (i, k) = self.split(p);
        SpacetimePoint::new(self.time.nodes()[i], self.space.points()[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_axis_and_stencils() {
        let t = TimeAxis::uniform(1.0, 5).unwrap();
        assert_eq!(t.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(t.stencil(0.5).unwrap()[0], (2, 1.0));
        assert_eq!(t.stencil(1.0).unwrap()[0], (4, 1.0));
        let s = t.stencil(0.3).unwrap();
        assert_eq!(s[0].0, 1);
        assert!((s[0].1 - 0.8).abs() < 1e-14 && (s[1].1 - 0.2).abs() < 1e-14);
        assert!(t.stencil(1.1).is_none());
        assert_eq!(t.nearest(0.49), (2, 0.010000000000000009));
        assert!(TimeAxis::uniform(1.0, 1).is_err());
    }

    #[test]
    fn trapezoid_weights_sum_to_interval() {
        let t = TimeAxis::uniform(2.0, 9).unwrap();
        for i in 0..9 {
            let s: f64 = (0..9).map(|j| t.trapezoid_weight(i, j)).sum();
            assert!((s - t.nodes()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn box_weights_sum_to_volume() {
        for dim in 1..=3 {
            let g = SpatialGrid::cartesian(dim, 0.25, 1.0).unwrap();
            let total: f64 = g.weights().iter().sum();
            assert!((total - 2f64.powi(dim as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn box_stencil_reproduces_linear_functions() {
        let g = SpatialGrid::cartesian(3, 0.5, 1.0).unwrap();
        let mut st = Vec::new();
        for c in [[0.1, -0.3, 0.77], [1.0, 1.0, -1.0], [0.0, 0.5, 0.25]] {
            assert!(g.box_stencil(&c, &mut st));
            let wsum: f64 = st.iter().map(|(_, w)| w).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            let f = |p: [f64; 3]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2];
            let v: f64 = st
                .iter()
                .map(|&(k, w)| w * f(g.box_coords(k).unwrap()))
                .sum();
            assert!((v - f(c)).abs() < 1e-13);
        }
        assert!(!g.box_stencil(&[1.2, 0.0, 0.0], &mut st));
    }

    #[test]
    fn sphere_grid() {
        let g = SpatialGrid::sphere(100).unwrap();
        assert!((g.weights().iter().sum::<f64>() - S3_VOLUME).abs() < 1e-12);
        assert_eq!(g.antipode(3), Some(53));
        assert!(SpatialGrid::sphere(7).is_err());
    }

    #[test]
    fn hyperbolic_chart_weights_approximate_ball_volume() {
        // Volume of the geodesic ball of radius 1 is π(sinh 2 − 2).
        let g = SpatialGrid::hyperbolic(0.05, 1.2).unwrap();
        let vol: f64 = g
            .points()
            .iter()
            .zip(g.weights())
            .filter(|(p, _)| matches!(p, SpatialPoint::Hyperboloid(x) if x[0].acosh() <= 1.0))
            .map(|(_, w)| w)
            .sum();
        let exact = std::f64::consts::PI * (2f64.sinh() - 2.0);
        assert!((vol - exact).abs() / exact < 1e-2, "{vol} vs {exact}");
    }

    #[test]
    fn flat_grid_covers_window_plus_horizon() {
        let g = MultiTimeGrid::flat(1, 1.0, 5, 0.0).unwrap();
        assert_eq!(g.space().len(), 9);
        assert_eq!(g.particle_len(), 45);
        assert_eq!(g.split(g.particle_index(3, 7)), (3, 7));
    }
}
