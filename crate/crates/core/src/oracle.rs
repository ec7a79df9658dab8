//! Brute-force reference computations for tiny grids.
//!
//! The dense system is assembled entry by entry from the quadrature rules
//! and solved by Gaussian elimination; nothing here goes through the
//! solver's sparse two-pass application.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fields::{MultiTimeField, MultiTimeGrid};
use crate::geometry::SpacetimeKind;
use crate::quadrature::nodes::s3_exclusion_radius;
use crate::quadrature::{
    ball_rule_grid_3d, closed_rule, cone_sqrt_rule_2d, hyperbolic_rule_grid, volterra_rule_1d,
    ConeRule, Sample,
};
use crate::solver::{
    contraction_bound, kernel_entry, particle_factor, ModelSpec, Operator, ParticleFactor,
};

/// Largest number of unknowns the dense oracle accepts.
pub const MAX_DENSE_UNKNOWNS: usize = 4096;

fn rule(
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
        SpacetimeKind::ClosedFlrw3 => {
            closed_rule(grid, i, k, s3_exclusion_radius(grid.space().len()), f)
        }
    }
}

/// (I − M) x = χ_free with M the fully assembled discrete operator.
#[derive(Clone, Debug)]
pub struct DenseSystem {
    grid: Arc<MultiTimeGrid>,
    n: usize,
    /// Row-major entries of M.
    operator: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl DenseSystem {
    pub fn assemble(model: &ModelSpec, chi_free: &MultiTimeField) -> Result<Self> {
        model.validate()?;
        let grid = chi_free.grid().clone();
        let n = grid.len();
        if n > MAX_DENSE_UNKNOWNS {
            return Err(Error::domain(format!(
                "dense oracle takes at most {MAX_DENSE_UNKNOWNS} unknowns, got {n}"
            )));
        }
        if chi_free.scale_exponent() != 0.0 {
            return Err(Error::domain(
                "dense oracle solves for the reduced field (scale exponent 0)",
            ));
        }
        let p = grid.particle_len();
        let f1 = particle_factor(model, model.masses.0);
        let f2 = particle_factor(model, model.masses.1);
        let mut r1 = Vec::with_capacity(p);
        let mut r2 = Vec::with_capacity(p);
        for q in 0..p {
            r1.push(rule(model, &grid, q, &f1)?);
            r2.push(rule(model, &grid, q, &f2)?);
        }
        let mut kmat = vec![Complex64::new(0.0, 0.0); p * p];
        for q1 in 0..p {
            for q2 in 0..p {
                kmat[q1 * p + q2] = kernel_entry(model, &grid, q1, q2);
            }
        }
        let coeff = model.lambda * model.prefactor();
        let mut operator = vec![Complex64::new(0.0, 0.0); n * n];
        for p1 in 0..p {
            for p2 in 0..p {
                let row = &mut operator[(p1 * p + p2) * n..(p1 * p + p2 + 1) * n];
                for &(q1, a) in r1[p1].entries() {
                    for &(q2, b) in r2[p2].entries() {
                        let col = q1 * p + q2;
                        row[col] += coeff * (a * b) * kmat[col];
                    }
                }
            }
        }
        Ok(Self {
            grid,
            n,
            operator,
            rhs: chi_free.values().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Entry M[row, col].
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.operator[row * self.n + col]
    }

    /// Row `row` of M applied to χ.
    pub fn row_apply(&self, row: usize, chi: &MultiTimeField) -> Complex64 {
        self.operator[row * self.n..(row + 1) * self.n]
            .iter()
            .zip(chi.values())
            .map(|(m, v)| m * v)
            .sum()
    }

    /// True if M couples (i₁, i₂) only to time pairs (j₁, j₂) with j₁ ≤ i₁ and j₂ ≤ i₂.
    pub fn is_time_lower_triangular(&self) -> bool {
        let g = &self.grid;
        let p = g.particle_len();
        for row in 0..self.n {
            let (i1, _) = g.split(row / p);
            let (i2, _) = g.split(row % p);
            for col in 0..self.n {
                if self.operator[row * self.n + col] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let (j1, _) = g.split(col / p);
                let (j2, _) = g.split(col % p);
                if j1 > i1 || j2 > i2 {
                    return false;
                }
            }
        }
        true
    }

    /// Solves (I − M)x = rhs by LU with partial pivoting.
    pub fn solve(&self) -> Result<MultiTimeField> {
        let n = self.n;
        let mut a: Vec<Complex64> = self.operator.iter().map(|m| -m).collect();
        for i in 0..n {
            a[i * n + i] += 1.0;
        }
        let x = lu_solve(&mut a, self.rhs.clone(), n)?;
        MultiTimeField::new(self.grid.clone(), x)
    }
}

/// In-place LU with partial pivoting, then forward and back substitution.
pub fn lu_solve(a: &mut [Complex64], mut b: Vec<Complex64>, n: usize) -> Result<Vec<Complex64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for k in 0..n {
        let (piv, best) = (k..n)
            .map(|r| (r, a[r * n + k].norm()))
            .fold((k, -1.0), |m, x| if x.1 > m.1 { x } else { m });
        if best <= f64::EPSILON * scale * n as f64 || !best.is_finite() {
            return Err(Error::SingularMatrix { pivot: k });
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            b.swap(k, piv);
        }
        let d = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            a[r * n + k] = f;
            for c in k + 1..n {
                let u = a[k * n + c];
                a[r * n + c] -= f * u;
            }
            let bk = b[k];
            b[r] -= f * bk;
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= a[k * n + c] * b[c];
        }
        b[k] = s / a[k * n + k];
    }
    Ok(b)
}

pub fn dense_linear_solve(model: &ModelSpec, chi_free: &MultiTimeField) -> Result<MultiTimeField> {
    DenseSystem::assemble(model, chi_free)?.solve()
}

fn uniform_s3(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.map(|x| x / n);
        }
    }
}

/// |S³|² · mean g(q, q') over uniform pairs; returns (estimate, standard error).
pub fn mc_pair_mean(
    n_samples: usize,
    seed: u64,
    g: impl Fn(&[f64; 4], &[f64; 4]) -> f64,
) -> (f64, f64) {
    let vol2 = (2.0 * PI * PI).powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..n_samples {
        let q = uniform_s3(&mut rng);
        let qp = uniform_s3(&mut rng);
        let x = g(&q, &qp);
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = if n_samples > 1 {
        m2 / (n_samples - 1) as f64
    } else {
        0.0
    };
    (vol2 * mean, vol2 * (var / n_samples as f64).sqrt())
}

/// Monte Carlo estimate of ∫∫ dΩ₃ dΩ₃' 1/sin² s over S³ × S³.
pub fn mc_identity_sin2(n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_samples < 100_000 {
        return Err(Error::domain(format!(
            "need at least 1e5 samples, got {n_samples}"
        )));
    }
    Ok(mc_pair_mean(n_samples, seed, |q, qp| {
        // sin² s = (|q − q'|²/2)(|q + q'|²/2), accurate near both poles.
        let (mut dm, mut dp) = (0.0, 0.0);
        for i in 0..4 {
            dm += (q[i] - qp[i]).powi(2);
            dp += (q[i] + qp[i]).powi(2);
        }
        4.0 / (dm * dp)
    }))
}

/// π²/√2 · (⌊T/π⌋+1)² · ‖a‖²_∞ · ‖f‖_∞ · |λ|.
pub fn closed_norm_bound(model: &ModelSpec) -> Result<f64> {
    let b = contraction_bound(model)?;
    Ok(model.lambda.norm() / b)
}

/// Lower estimate of the discrete operator norm in the B-norm: the largest
/// ratio bnorm(Aχ)/bnorm(χ) over random probes, each refined by three power
/// steps. Probe `j` draws from its own stream of a generator seeded by `seed`.
pub fn operator_norm_probe(
    model: &ModelSpec,
    grid: Arc<MultiTimeGrid>,
    n_probes: usize,
    seed: u64,
) -> Result<f64> {
    let op = Operator::build(model, grid.clone())?;
    probe_operator(&op, n_probes, seed)
}

pub fn probe_operator(op: &Operator, n_probes: usize, seed: u64) -> Result<f64> {
    let grid = op.grid().clone();
    let mut best: f64 = 0.0;
    for j in 0..n_probes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut chi = MultiTimeField::new(grid.clone(), values)?;
        for _ in 0..4 {
            let n = chi.bnorm();
            if n == 0.0 {
                break;
            }
            let out = op.apply(&chi)?;
            let ratio = out.bnorm() / n;
            best = best.max(ratio);
            if ratio == 0.0 {
                break;
            }
            chi = out.scale(Complex64::new(1.0 / out.bnorm(), 0.0));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{esu_mode_closed, product_free};
    use crate::geometry::ScaleFactorModel;
    use crate::kernels::{natural_kernel_1d, singular_kernel_closed};
    use crate::solver::{neumann_solve, picard_solve, reduce_conformal, residual, GreensSupport};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn mink(lambda: f64) -> ModelSpec {
        ModelSpec {
            spacetime: SpacetimeKind::MinkowskiHalfSpace(1),
            scale: None,
            greens_support: GreensSupport::Retarded,
            kernel: natural_kernel_1d(),
            lambda: c(lambda),
            masses: (0.0, 0.0),
            horizon: 1.0,
        }
    }

    fn closed(lambda: f64, f: f64) -> ModelSpec {
        ModelSpec {
            spacetime: SpacetimeKind::ClosedFlrw3,
            scale: Some(ScaleFactorModel::closed_dust()),
            greens_support: GreensSupport::Symmetric,
            kernel: singular_kernel_closed(move |_, _| c(f), f.abs()).unwrap(),
            lambda: c(lambda),
            masses: (0.0, 0.0),
            horizon: 2.0 * PI,
        }
    }

    fn tiny_free(g: &Arc<MultiTimeGrid>) -> MultiTimeField {
        MultiTimeField::from_fn(g.clone(), |p1, p2| {
            Complex64::new(1.0 + 0.1 * p1 as f64, 0.05 * p2 as f64)
        })
        .unwrap()
    }

    #[test]
    fn lu_solves_small_system() {
        let mut a = vec![c(2.0), c(1.0), c(1.0), c(3.0)];
        let x = lu_solve(&mut a, vec![c(3.0), c(5.0)], 2).unwrap();
        assert!((x[0] - c(0.8)).norm() < 1e-15 && (x[1] - c(1.4)).norm() < 1e-15);
        let mut s = vec![c(1.0), c(2.0), c(2.0), c(4.0)];
        assert!(matches!(
            lu_solve(&mut s, vec![c(1.0), c(1.0)], 2),
            Err(Error::SingularMatrix { pivot: 1 })
        ));
    }

    #[test]
    fn zero_coupling_is_identity() {
        let g = Arc::new(MultiTimeGrid::flat(1, 1.0, 3, 0.0).unwrap());
        let free = tiny_free(&g);
        let x = dense_linear_solve(&mink(0.0), &free).unwrap();
        assert_eq!(x.values(), free.values());
    }

    #[test]
    fn retarded_system_is_triangular_and_matches_solver() {
        let g = Arc::new(MultiTimeGrid::flat(1, 1.0, 5, 0.0).unwrap());
        let free = tiny_free(&g);
        for lambda in [1.0, 50.0, -200.0] {
            let model = mink(lambda);
            let sys = DenseSystem::assemble(&model, &free).unwrap();
            assert!(sys.is_time_lower_triangular());
            let x = sys.solve().unwrap();
            assert!(residual(&model, &x, &free).unwrap() <= 1e-10 * free.bnorm());
        }
        let model = mink(1.0);
        let x = dense_linear_solve(&model, &free).unwrap();
        let rep = picard_solve(&model, &free, 1e-14, 200).unwrap();
        assert!(x.sub(&rep.chi).unwrap().bnorm() <= 1e-10);
    }

    #[test]
    fn rows_match_operator_application() {
        let g = Arc::new(MultiTimeGrid::sphere(2.0 * PI, 3, 8).unwrap());
        let model = closed(1e-3, 1.0);
        let free = tiny_free(&g);
        let sys = DenseSystem::assemble(&model, &free).unwrap();
        let out = Operator::build(&model, g.clone())
            .unwrap()
            .apply(&free)
            .unwrap();
        for row in (0..sys.len()).step_by(7) {
            let d = sys.row_apply(row, &free) - out.values()[row];
            assert!(
                d.norm() <= 1e-13 * (1.0 + out.values()[row].norm()),
                "row {row}: {d}"
            );
        }
    }

    #[test]
    fn neumann_sums_approach_dense_solution() {
        let g = Arc::new(MultiTimeGrid::sphere(2.0 * PI, 4, 10).unwrap());
        let bound = contraction_bound(&closed(1.0, 1.0)).unwrap();
        let model = closed(0.5 * bound, 1.0);
        let mode = esu_mode_closed(g.clone(), 1, "zonal").unwrap();
        let free = reduce_conformal(
            &product_free(&mode, &mode).unwrap(),
            &ScaleFactorModel::closed_dust(),
            3,
        )
        .unwrap();
        let x = dense_linear_solve(&model, &free).unwrap();
        let errs: Vec<f64> = (0..6)
            .map(|n| {
                neumann_solve(&model, &free, n)
                    .unwrap()
                    .sub(&x)
                    .unwrap()
                    .bnorm()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn mc_weight_one_is_exact() {
        let (e, se) = mc_pair_mean(1000, 3, |_, _| 1.0);
        assert_eq!(e, (2.0 * PI * PI).powi(2));
        assert_eq!(se, 0.0);
        assert!(mc_identity_sin2(10, 1).is_err());
    }

    #[test]
    fn mc_sin2_identity() {
        let target = 8.0 * PI.powi(4);
        for seed in [1, 2] {
            let (e, se) = mc_identity_sin2(400_000, seed).unwrap();
            assert!((e - target).abs() <= 3.0 * se, "seed {seed}: {e} ± {se}");
        }
    }

    #[test]
    fn probe_scales_with_coupling_and_respects_bound() {
        let g = Arc::new(MultiTimeGrid::sphere(2.0 * PI, 4, 12).unwrap());
        let a = operator_norm_probe(&closed(1.0, 1.0), g.clone(), 4, 9).unwrap();
        let b = operator_norm_probe(&closed(2.0, 1.0), g.clone(), 4, 9).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-12 * b);
        assert!(a <= closed_norm_bound(&closed(1.0, 1.0)).unwrap());
        assert!(a <= 36.0 * PI * PI / 2f64.sqrt());
        assert_eq!(
            operator_norm_probe(&closed(1.0, 0.0), g, 2, 9).unwrap(),
            0.0
        );
    }
}
