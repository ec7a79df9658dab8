//! Quadrature rules for the cone integrals and the singular weights.
//!
//! Grid-level rules return a [`ConeRule`]: merged `(particle index, weight)`
//! pairs such that `Σ w·F(node)` approximates the single-particle integral of
//! `factor · F`. Off-node sample points are spread onto grid nodes with the
//! linear time stencil and the multilinear spatial stencil.

pub mod nodes;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::grid::{MultiTimeGrid, SpatialLayout};
use crate::geometry::{sphere_angle, SpatialPoint};
use crate::greens::winding_sign;
use nodes::{fibonacci_s2, s3_nodes, s3_singular_ball, S3_VOLUME};

/// Relative tolerance of the per-node Heaviside checks.
const CONE_TOLERANCE: f64 = 1e-12;

/// Geometry of one sample point seen from the outer node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    /// Conformal time of the sample.
    pub tau: f64,
    /// Conformal time separation |η − τ|.
    pub dt: f64,
    /// Spatial separation (flat distance or geodesic distance).
    pub r: f64,
}

/// Merged `(particle index, weight)` list, sorted by index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConeRule {
    entries: Vec<(usize, f64)>,
}

impl ConeRule {
    /// Sorts by index and sums duplicate indices in insertion order.
    pub fn from_raw(mut raw: Vec<(usize, f64)>) -> Self {
        raw.sort_by_key(|e| e.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (idx, w) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == idx => last.1 += w,
                _ => entries.push((idx, w)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Σ w·values[index].
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * values[i]).sum()
    }
}

/// One node of a continuum rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleNode {
    /// Position (absolute for ball rules, a unit direction for hyperbolic rules).
    pub point: [f64; 3],
    /// Radial coordinate of the node.
    pub r: f64,
    pub weight: f64,
}

/// Continuum product rule whose weights already contain the singular factor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SingularRule {
    pub nodes: Vec<RuleNode>,
}

impl SingularRule {
    pub fn total(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn integrate(&self, f: impl Fn(&RuleNode) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n)).sum()
    }
}

/// Shells of equal width on `[0, radius]`.
fn shells(radius: f64, n_radial: usize) -> impl Iterator<Item = (f64, f64)> {
    let dr = radius / n_radial as f64;
    (0..n_radial).map(move |j| {
        (
            j as f64 * dr,
            if j + 1 == n_radial {
                radius
            } else {
                (j + 1) as f64 * dr
            },
        )
    })
}

/// ∫_a^b r dr with its centroid (the 1/r weight times the r² Jacobian).
fn flat_shell(a: f64, b: f64) -> (f64, f64) {
    let w = 0.5 * (b * b - a * a);
    let rc = (2.0 / 3.0) * (b * b * b - a * a * a) / (b * b - a * a);
    (w, rc)
}

/// ∫_a^b sinh s ds with its centroid.
fn hyperbolic_shell(a: f64, b: f64) -> (f64, f64) {
    let w = b.cosh() - a.cosh();
    let m = |s: f64| s * s.cosh() - s.sinh();
    (w, (m(b) - m(a)) / w)
}

/// Angular count proportional to the shell area in units of `spacing²`.
fn angular_count(area: f64, spacing: f64) -> usize {
    ((area / (spacing * spacing)).ceil() as usize).max(12)
}

/// Product rule for ∫_{|x−c|<R} F(x)/|x−c| d³x: the radial weight r dr is
/// integrated exactly on each shell and the shell is sampled at its
/// centroid along `n_angular` Fibonacci directions.
pub fn ball_rule_3d(
    center: [f64; 3],
    radius: f64,
    n_radial: usize,
    n_angular: usize,
) -> SingularRule {
    if !(radius > 0.0) || n_radial == 0 || n_angular == 0 {
        return SingularRule::default();
    }
    let dirs = fibonacci_s2(n_angular);
    let mut nodes = Vec::with_capacity(n_radial * n_angular);
    for (a, b) in shells(radius, n_radial) {
        let (w, rc) = flat_shell(a, b);
        for u in &dirs {
            nodes.push(RuleNode {
                point: [
                    center[0] + rc * u[0],
                    center[1] + rc * u[1],
                    center[2] + rc * u[2],
                ],
                r: rc,
                weight: w * 4.0 * PI / n_angular as f64,
            });
        }
    }
    SingularRule { nodes }
}

/// Product rule for ∫_{ℍ³, s<R} F/sinh s dV about a point; nodes carry the
/// unit direction and the geodesic radius.
pub fn hyperbolic_ball_rule(radius: f64, n_radial: usize, n_angular: usize) -> SingularRule {
    if !(radius > 0.0) || n_radial == 0 || n_angular == 0 {
        return SingularRule::default();
    }
    let dirs = fibonacci_s2(n_angular);
    let mut nodes = Vec::with_capacity(n_radial * n_angular);
    for (a, b) in shells(radius, n_radial) {
        let (w, sc) = hyperbolic_shell(a, b);
        for u in &dirs {
            nodes.push(RuleNode {
                point: *u,
                r: sc,
                weight: w * 4.0 * PI / n_angular as f64,
            });
        }
    }
    SingularRule { nodes }
}

/// Radial product weights for ∫₀^D r G(r)/√(D²−r²) dr, exact for piecewise
/// linear G on `n` equal intervals.
pub fn sqrt_radial_weights(d: f64, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    if !(d > 0.0) || n == 0 {
        return w;
    }
    let root = |r: f64| (d * d - r * r).max(0.0).sqrt();
    let big_f = |r: f64| 0.5 * d * d * (r / d).clamp(-1.0, 1.0).asin() - 0.5 * r * root(r);
    let dr = d / n as f64;
    for j in 0..n {
        let a = j as f64 * dr;
        let b = if j + 1 == n { d } else { (j + 1) as f64 * dr };
        let i0 = root(a) - root(b);
        let i1 = big_f(b) - big_f(a);
        w[j] += (b * i0 - i1) / (b - a);
        w[j + 1] += (i1 - a * i0) / (b - a);
    }
    w
}

/// Angular count on a circle of radius `r`, a multiple of 4 and at least 8.
fn circle_count(r: f64, spacing: f64) -> usize {
    let n = ((2.0 * PI * r / spacing).ceil() as usize).max(8);
    n.div_ceil(4) * 4
}

/// Product rule for one time slice of the d = 2 cone:
/// ∫_{|y|<Δη} F(y)/√(Δη²−|y|²) d²y with `n_radial` radial intervals.
pub fn cone_slice_rule_2d(dt: f64, n_radial: usize, n_theta: usize) -> SingularRule {
    if !(dt > 0.0) || n_radial == 0 {
        return SingularRule::default();
    }
    let radial = sqrt_radial_weights(dt, n_radial);
    let dr = dt / n_radial as f64;
    let mut nodes = vec![RuleNode {
        point: [0.0; 3],
        r: 0.0,
        weight: 2.0 * PI * radial[0],
    }];
    let n_theta = n_theta.max(1);
    for (j, &wr) in radial.iter().enumerate().skip(1) {
        let r = j as f64 * dr;
        for t in 0..n_theta {
            let th = 2.0 * PI * t as f64 / n_theta as f64;
            nodes.push(RuleNode {
                point: [r * th.cos(), r * th.sin(), 0.0],
                r,
                weight: wr * 2.0 * PI / n_theta as f64,
            });
        }
    }
    SingularRule { nodes }
}

/// ∫_{[−½,½]³} 1/|x| d³x: the cell average of 1/r times the cell size.
pub fn cube_inverse_distance_constant() -> f64 {
    let s3 = 3f64.sqrt();
    2.0 * (1.5 * ((s3 + 1.0) / (s3 - 1.0)).ln() - 0.25 * PI)
}

/// Spreads a sample at conformal time τ and box coordinates `c` onto the grid.
struct Spreader<'a> {
    grid: &'a MultiTimeGrid,
    space: Vec<(usize, f64)>,
    raw: Vec<(usize, f64)>,
}

impl<'a> Spreader<'a> {
    fn new(grid: &'a MultiTimeGrid) -> Self {
        Self {
            grid,
            space: Vec::with_capacity(8),
            raw: Vec::new(),
        }
    }

    fn push_box(&mut self, tau: f64, c: &[f64], weight: f64) {
        if weight == 0.0 {
            return;
        }
        let Some(ts) = self.grid.time().stencil(tau) else {
            return;
        };
        if !self.grid.space().box_stencil(c, &mut self.space) {
            return;
        }
        for &(j, wt) in &ts {
            if wt == 0.0 {
                continue;
            }
            for &(k, ws) in &self.space {
                self.raw
                    .push((self.grid.particle_index(j, k), weight * wt * ws));
            }
        }
    }

    fn push_node(&mut self, tau: f64, k: usize, weight: f64) {
        if weight == 0.0 {
            return;
        }
        let Some(ts) = self.grid.time().stencil(tau) else {
            return;
        };
        for &(j, wt) in &ts {
            if wt != 0.0 {
                self.raw.push((self.grid.particle_index(j, k), weight * wt));
            }
        }
    }

    fn finish(self) -> ConeRule {
        ConeRule::from_raw(self.raw)
    }
}

fn heaviside_cone(dt: f64, r: f64) -> f64 {
    let tol = CONE_TOLERANCE * dt.abs().max(1.0);
    if dt - r > tol {
        1.0
    } else if dt - r >= -tol {
        0.5
    } else {
        0.0
    }
}

fn require_cartesian(grid: &MultiTimeGrid, want: usize) -> Result<()> {
    match grid.space().layout() {
        SpatialLayout::Cartesian { dim, .. } if *dim == want => Ok(()),
        other => Err(Error::GridMismatch(format!(
            "rule needs a flat d = {want} grid, got {other:?}"
        ))),
    }
}

/// Trapezoid rule over the backward triangle {0 ≤ η' ≤ η_i − |z_k − z'|}.
///
/// Nodes exactly on the cone edge carry H = ½.
pub fn volterra_rule_1d(
    grid: &MultiTimeGrid,
    i: usize,
    k: usize,
    factor: impl Fn(&Sample) -> f64,
) -> Result<ConeRule> {
    require_cartesian(grid, 1)?;
    let time = grid.time();
    let space = grid.space();
    let eta = time.nodes()[i];
    let z = space.box_coords(k).expect("box layout")[0];
    let mut raw = Vec::new();
    for j in 0..=i {
        let tw = time.trapezoid_weight(i, j);
        if tw == 0.0 {
            continue;
        }
        let dt = eta - time.nodes()[j];
        for (kp, &ws) in space.weights().iter().enumerate() {
            let r = (z - space.box_coords(kp).expect("box layout")[0]).abs();
            let h = heaviside_cone(dt, r);
            if h == 0.0 {
                continue;
            }
            let f = factor(&Sample {
                tau: time.nodes()[j],
                dt,
                r,
            });
            raw.push((grid.particle_index(j, kp), tw * ws * h * f));
        }
    }
    Ok(ConeRule::from_raw(raw))
}

/// Product-integration rule for the d = 2 cone with weight 1/√(Δη² − r²).
///
/// Slices follow the time nodes (trapezoid in η'); each slice uses the
/// radial product weights on intervals of half the spatial step and an
/// angular trapezoid.
pub fn cone_sqrt_rule_2d(
    grid: &MultiTimeGrid,
    i: usize,
    k: usize,
    factor: impl Fn(&Sample) -> f64,
) -> Result<ConeRule> {
    require_cartesian(grid, 2)?;
    let time = grid.time();
    let h = grid.space().step().expect("box layout");
    let c = grid.space().box_coords(k).expect("box layout");
    let eta = time.nodes()[i];
    let mut sp = Spreader::new(grid);
    for j in 0..i {
        let tw = time.trapezoid_weight(i, j);
        let tau = time.nodes()[j];
        let dt = eta - tau;
        let n_r = ((dt / (0.5 * h)) - 1e-9).ceil().max(1.0) as usize;
        let radial = sqrt_radial_weights(dt, n_r);
        let dr = dt / n_r as f64;
        for (jr, &wr) in radial.iter().enumerate() {
            let r = jr as f64 * dr;
            let f = factor(&Sample { tau, dt, r });
            if jr == 0 {
                sp.push_box(tau, &c, tw * wr * 2.0 * PI * f);
                continue;
            }
            let n_th = circle_count(r, 0.5 * h);
            let w = tw * wr * 2.0 * PI / n_th as f64 * f;
            for t in 0..n_th {
                let th = 2.0 * PI * t as f64 / n_th as f64;
                sp.push_box(tau, &[c[0] + r * th.cos(), c[1] + r * th.sin()], w);
            }
        }
    }
    Ok(sp.finish())
}

/// Delta-integrated d = 3 rule: ∫_{|x'−x|<η} F(η − |x−x'|, x')/|x−x'| d³x'.
pub fn ball_rule_grid_3d(
    grid: &MultiTimeGrid,
    i: usize,
    k: usize,
    factor: impl Fn(&Sample) -> f64,
) -> Result<ConeRule> {
    require_cartesian(grid, 3)?;
    let h = grid.space().step().expect("box layout");
    let c = grid.space().box_coords(k).expect("box layout");
    let eta = grid.time().nodes()[i];
    let mut sp = Spreader::new(grid);
    if i == 0 {
        return Ok(sp.finish());
    }
    let dr = 0.5 * h;
    let n_r = ((eta / dr) - 1e-9).ceil().max(1.0) as usize;
    for (a, b) in shells(eta, n_r) {
        let (w, rc) = flat_shell(a, b);
        let n_ang = angular_count(4.0 * PI * rc * rc, dr);
        let tau = eta - rc;
        let f = factor(&Sample { tau, dt: rc, r: rc });
        let wn = w * 4.0 * PI / n_ang as f64 * f;
        for u in fibonacci_s2(n_ang) {
            sp.push_box(
                tau,
                &[c[0] + rc * u[0], c[1] + rc * u[1], c[2] + rc * u[2]],
                wn,
            );
        }
    }
    Ok(sp.finish())
}

/// Unit tangent at `x` ∈ ℍ³ obtained by boosting the chart direction `u`.
fn hyperbolic_tangent(x: &[f64; 4], u: &[f64; 3]) -> [f64; 4] {
    let xu = x[1] * u[0] + x[2] * u[1] + x[3] * u[2];
    let c = xu / (1.0 + x[0]);
    [xu, u[0] + x[1] * c, u[1] + x[2] * c, u[2] + x[3] * c]
}

/// Delta-integrated open-universe rule:
/// ∫_{s(x,x')<η} F(η − s, x')/sinh s dV(x') on the ℍ³ chart grid.
pub fn hyperbolic_rule_grid(
    grid: &MultiTimeGrid,
    i: usize,
    k: usize,
    factor: impl Fn(&Sample) -> f64,
) -> Result<ConeRule> {
    let h = match grid.space().layout() {
        SpatialLayout::HyperbolicChart { step, .. } => *step,
        other => {
            return Err(Error::GridMismatch(format!(
                "rule needs an ℍ³ chart grid, got {other:?}"
            )))
        }
    };
    let x = match grid.space().points()[k] {
        SpatialPoint::Hyperboloid(x) => x,
        _ => unreachable!("chart grids hold hyperboloid points"),
    };
    let eta = grid.time().nodes()[i];
    let mut sp = Spreader::new(grid);
    if i == 0 {
        return Ok(sp.finish());
    }
    let ds = 0.5 * h;
    let n_r = ((eta / ds) - 1e-9).ceil().max(1.0) as usize;
    for (a, b) in shells(eta, n_r) {
        let (w, sc) = hyperbolic_shell(a, b);
        let n_ang = angular_count(4.0 * PI * sc.sinh().powi(2), ds);
        let tau = eta - sc;
        let f = factor(&Sample { tau, dt: sc, r: sc });
        let wn = w * 4.0 * PI / n_ang as f64 * f;
        let (sh, ch) = (sc.sinh(), sc.cosh());
        for u in fibonacci_s2(n_ang) {
            let v = hyperbolic_tangent(&x, &u);
            let y = [
                ch * x[1] + sh * v[1],
                ch * x[2] + sh * v[2],
                ch * x[3] + sh * v[3],
            ];
            sp.push_box(tau, &y, wn);
        }
    }
    Ok(sp.finish())
}

/// Closed-universe rule for one particle: for every reachable winding l and
/// branch σ = ±1,
/// ∫_{S³} sgn(s+2πl)/sin s · 𝟙_{[0,T]}(τ) F(τ, q') dΩ₃(q'), τ = η + σ|s+2πl|.
///
/// Node pairs with s < ε or s > π − ε are dropped; the self node and the
/// antipode carry the analytic ball integral 4π(1 − cos ε) of 1/sin s.
pub fn closed_rule(
    grid: &MultiTimeGrid,
    i: usize,
    k: usize,
    eps: f64,
    factor: impl Fn(&Sample) -> f64,
) -> Result<ConeRule> {
    let antipode = grid
        .space()
        .antipode(k)
        .ok_or_else(|| Error::GridMismatch("closed rule needs an S³ grid".into()))?;
    let horizon = grid.time().horizon();
    let tol = CONE_TOLERANCE * horizon.max(1.0);
    let eta = grid.time().nodes()[i];
    let points = grid.space().points();
    let weights = grid.space().weights();
    let q = match points[k] {
        SpatialPoint::Sphere(q) => q,
        _ => unreachable!("sphere grids hold S³ points"),
    };
    let add_back = s3_singular_ball(1, eps);
    let l_max = (horizon / (2.0 * PI)).ceil() as i64 + 1;
    let mut sp = Spreader::new(grid);
    for (kp, p) in points.iter().enumerate() {
        let (s, base) = if kp == k {
            (0.0, add_back)
        } else if kp == antipode {
            (PI, add_back)
        } else {
            let SpatialPoint::Sphere(qp) = p else {
                unreachable!()
            };
            let s = sphere_angle(&q, qp);
            if s < eps || s > PI - eps {
                continue;
            }
            (s, weights[kp] / s.sin())
        };
        for l in -l_max..=l_max {
            let v = (s + 2.0 * PI * l as f64).abs();
            if v > horizon + tol {
                continue;
            }
            let sign = winding_sign(s, l);
            for sigma in [-1.0, 1.0] {
                let tau = eta + sigma * v;
                if tau < -tol || tau > horizon + tol {
                    continue;
                }
                let f = factor(&Sample { tau, dt: v, r: s });
                sp.push_node(tau, kp, base * sign * f);
            }
        }
    }
    Ok(sp.finish())
}

/// Equal-weight quadrature over S³ × S³ with optional exclusion of the
/// singular sets s = 0 and s = π.
#[derive(Clone, Debug)]
pub struct S3PairRule {
    nodes: Vec<[f64; 4]>,
    exclusion_radius: f64,
}

/// Pair rule on `n_nodes` (even, ≥ 100) S³ nodes. With `exclusion_radius`
/// ε > 0, pairs with s < ε or s > π − ε are dropped and the exact ball
/// integral of the singular weight is added back at both ends.
pub fn s3_pair_rule(n_nodes: usize, exclusion_radius: f64) -> Result<S3PairRule> {
    if n_nodes < 100 || !n_nodes.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "pair rule needs an even node count ≥ 100, got {n_nodes}"
        )));
    }
    if !(0.0..0.5 * PI).contains(&exclusion_radius) {
        return Err(Error::domain(format!(
            "exclusion radius {exclusion_radius} outside [0, π/2)"
        )));
    }
    Ok(S3PairRule {
        nodes: s3_nodes(n_nodes),
        exclusion_radius,
    })
}

impl S3PairRule {
    pub fn nodes(&self) -> &[[f64; 4]] {
        &self.nodes
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }

    /// ∫∫ g(q, q') / sin^p s(q, q') dΩ₃ dΩ₃ for p ∈ {0, 1, 2}.
    ///
    /// Inside the excluded balls `g` is frozen at the centre (q, q) or (q, −q).
    pub fn integrate(&self, p: u32, g: impl Fn(&[f64; 4], &[f64; 4]) -> f64) -> Result<f64> {
        if p > 2 {
            return Err(Error::domain(format!("singular power {p} not supported")));
        }
        let eps = self.exclusion_radius;
        if p > 0 && eps == 0.0 {
            return Err(Error::Singular(
                "singular pair weight needs a positive exclusion radius".into(),
            ));
        }
        let n = self.nodes.len();
        let w = S3_VOLUME / n as f64;
        let add_back = if eps > 0.0 {
            s3_singular_ball(p, eps)
        } else {
            0.0
        };
        let mut total = 0.0;
        for q in &self.nodes {
            let mut row = 0.0;
            for qp in &self.nodes {
                let s = sphere_angle(q, qp);
                if eps > 0.0 && (s < eps || s > PI - eps) {
                    continue;
                }
                row += g(q, qp) / s.sin().powi(p as i32);
            }
            total += w * w * row;
            if eps > 0.0 {
                let anti = q.map(|c| -c);
                total += w * add_back * (g(q, q) + g(q, &anti));
            }
        }
        Ok(total)
    }

    /// ∫∫ sin^{−p} s dΩ₃ dΩ₃.
    pub fn integrate_power(&self, p: u32) -> Result<f64> {
        self.integrate(p, |_, _| 1.0)
    }
}
