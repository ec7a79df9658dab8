//! Deterministic node sets on S² and S³.

use std::f64::consts::PI;

/// Plastic number; its powers give a well-spread two-dimensional Kronecker sequence.
const PLASTIC: f64 = 1.324_717_957_244_746;

/// |S³|.
pub const S3_VOLUME: f64 = 2.0 * PI * PI;

/// Fibonacci points on the unit sphere S².
pub fn fibonacci_s2(n: usize) -> Vec<[f64; 3]> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Normalised measure of the polar cap {angle ≤ α} on S³.
fn cap_fraction(alpha: f64) -> f64 {
    (alpha - alpha.sin() * alpha.cos()) / PI
}

/// Inverse of [`cap_fraction`] on `[0, π]`.
fn invert_cap_fraction(u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, PI);
    let mut alpha = PI * u;
    for _ in 0..200 {
        let f = cap_fraction(alpha) - u;
        if f == 0.0 {
            return alpha;
        }
        if f > 0.0 {
            hi = alpha;
        } else {
            lo = alpha;
        }
        if hi - lo < 1e-15 {
            break;
        }
        let slope = 2.0 * alpha.sin().powi(2) / PI;
        let next = alpha - f / slope;
        alpha = if slope > 1e-300 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    alpha
}

/// Quasi-uniform node set on S³ closed under q ↦ −q.
///
/// The first half lies in the hemisphere q⁰ > 0: the polar angle is
/// stratified by the cap measure and the direction on S² follows a Kronecker
/// sequence. Node `j + n/2` is the antipode of node `j`. `n` must be even.
pub fn s3_nodes(n: usize) -> Vec<[f64; 4]> {
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "S³ node count must be even and positive"
    );
    let half = n / 2;
    let (a1, a2) = (1.0 / PLASTIC, 1.0 / (PLASTIC * PLASTIC));
    let mut upper = Vec::with_capacity(half);
    for j in 0..half {
        let alpha = invert_cap_fraction((j as f64 + 0.5) / n as f64);
        let cos_theta = 1.0 - 2.0 * (0.5 + a1 * j as f64).fract();
        let phi = 2.0 * PI * (0.5 + a2 * j as f64).fract();
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let (sa, ca) = alpha.sin_cos();
        upper.push([
            ca,
            sa * sin_theta * phi.cos(),
            sa * sin_theta * phi.sin(),
            sa * cos_theta,
        ]);
    }
    let lower: Vec<[f64; 4]> = upper.iter().map(|q| q.map(|c| -c)).collect();
    upper.extend(lower);
    upper
}

/// Index of the antipode of node `k` in [`s3_nodes`].
pub fn s3_antipode(n: usize, k: usize) -> usize {
    (k + n / 2) % n
}

/// Geodesic radius ρ of a ball on S³ with volume |S³|/n.
pub fn s3_node_spacing(n: usize) -> f64 {
    let target = S3_VOLUME / n as f64;
    let ball = |r: f64| 4.0 * PI * (0.5 * r - 0.25 * (2.0 * r).sin());
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ball(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exclusion radius around the singular sets of 1/sin s: twice the node
/// spacing, at least 10⁻³.
pub fn s3_exclusion_radius(n: usize) -> f64 {
    (2.0 * s3_node_spacing(n)).max(1e-3)
}

/// ∫ over the geodesic ball of radius ε of sin^{-p} s dΩ₃, p ∈ {0, 1, 2}.
pub fn s3_singular_ball(p: u32, eps: f64) -> f64 {
    match p {
        0 => 4.0 * PI * (0.5 * eps - 0.25 * (2.0 * eps).sin()),
        1 => 4.0 * PI * (1.0 - eps.cos()),
        2 => 4.0 * PI * eps,
        _ => panic!("singular power {p} not supported"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s2_points_are_unit_and_balanced() {
        let pts = fibonacci_s2(500);
        let mut c = [0.0; 3];
        for p in &pts {
            assert!((p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
            for i in 0..3 {
                c[i] += p[i];
            }
        }
        assert!(c.iter().all(|x| x.abs() / 500.0 < 1e-2));
    }

    #[test]
    fn s3_nodes_are_unit_and_antipodal() {
        let n = 200;
        let q = s3_nodes(n);
        assert_eq!(q.len(), n);
        for k in 0..n {
            assert!((q[k].iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            let a = q[s3_antipode(n, k)];
            assert!((0..4).all(|i| a[i] == -q[k][i]));
        }
    }

    #[test]
    fn cap_inversion_round_trips() {
        for j in 0..=100 {
            let u = j as f64 / 100.0;
            assert!((cap_fraction(invert_cap_fraction(u)) - u).abs() < 1e-14);
        }
    }

    #[test]
    fn low_order_moments_vanish() {
        // ∫ q_i dΩ = 0 and ∫ q_i q_j dΩ = δ_ij |S³|/4.
        let n = 4000;
        let q = s3_nodes(n);
        let w = S3_VOLUME / n as f64;
        for i in 0..4 {
            for j in 0..4 {
                let m: f64 = q.iter().map(|p| p[i] * p[j]).sum::<f64>() * w;
                let exact = if i == j { S3_VOLUME / 4.0 } else { 0.0 };
                assert!((m - exact).abs() < 2e-2 * S3_VOLUME / 4.0, "({i},{j}) {m}");
            }
        }
    }

    #[test]
    fn spacing_matches_ball_volume() {
        let n = 1000;
        let rho = s3_node_spacing(n);
        assert!((s3_singular_ball(0, rho) - S3_VOLUME / n as f64).abs() < 1e-12);
        assert!((rho - (3.0 * PI / (2.0 * n as f64)).cbrt()).abs() < 1e-3);
        assert_eq!(s3_exclusion_radius(1_000_000_000_000), 1e-3);
    }
}
