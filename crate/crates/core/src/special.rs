//! Bessel functions of the first kind and a small adaptive integrator.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 1.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Bessel function J₀.
pub fn bessel_j0(x: f64) -> f64 {
    bessel_j01(x.abs()).0
}

/// Bessel function J₁.
pub fn bessel_j1(x: f64) -> f64 {
    let j1 = bessel_j01(x.abs()).1;
    if x < 0.0 {
        -j1
    } else {
        j1
    }
}

/// (J₀(x), J₁(x)) for x ≥ 0.
fn bessel_j01(x: f64) -> (f64, f64) {
    if x == 0.0 {
        (1.0, 0.0)
    } else if x < SERIES_LIMIT {
        (power_series(0, x), power_series(1, x))
    } else if x < ASYMPTOTIC_LIMIT {
        miller(x)
    } else {
        (hankel_asymptotic(0, x), hankel_asymptotic(1, x))
    }
}

fn power_series(order: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for k in 1..40 {
        let k = k as f64;
        term *= q / (k * (k + order as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Backward recurrence normalised by J₀ + 2ΣJ₂ₖ = 1.
fn miller(x: f64) -> (f64, f64) {
    let start = 2 * ((x as usize + 40) / 2);
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}, next holds J_k
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if k - 1 == 1 {
            j1 = cur;
        }
        if k - 1 == 0 {
            j0 = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

fn hankel_asymptotic(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let eight_x = 8.0 * x;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
        let odd = (2 * k + 1) as f64;
        term *= (mu - odd * odd) / ((k + 1) as f64 * eight_x);
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // A coarse absolute scale keeps the recursion from chasing zero integrals.
    let scale = whole
        .abs()
        .max((b - a).abs() * (fa.abs() + fm.abs() + fb.abs()) / 3.0);
    let tol = (rel_tol * scale).max(f64::MIN_POSITIVE);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// J_n(x) = (1/π)∫₀^π cos(nτ − x sin τ) dτ; the trapezoid rule on this
    /// periodic analytic integrand converges exponentially.
    fn bessel_by_integral(order: u32, x: f64) -> f64 {
        let n = 400;
        let h = PI / n as f64;
        let g = |t: f64| (order as f64 * t - x * t.sin()).cos();
        let mut sum = 0.5 * (g(0.0) + g(PI));
        for i in 1..n {
            sum += g(i as f64 * h);
        }
        sum * h / PI
    }

    #[test]
    fn bessel_matches_integral_representation() {
        let mut x = 0.0;
        while x < 60.0 {
            for order in 0..2 {
                let reference = bessel_by_integral(order, x);
                let value = if order == 0 {
                    bessel_j0(x)
                } else {
                    bessel_j1(x)
                };
                assert!(
                    (value - reference).abs() < 2e-15 * reference.abs().max(1.0),
                    "J{order}({x}) = {value}, reference {reference}"
                );
            }
            x += 0.173;
        }
    }

    #[test]
    fn bessel_at_split_points_is_continuous() {
        for &split in &[SERIES_LIMIT, ASYMPTOTIC_LIMIT] {
            for order in 0..2 {
                let reference = bessel_by_integral(order, split);
                let below = bessel_by_integral(order, split - 1e-9);
                let f = |x: f64| {
                    if order == 0 {
                        bessel_j0(x)
                    } else {
                        bessel_j1(x)
                    }
                };
                assert!((f(split) - reference).abs() < 2e-15);
                assert!((f(split - 1e-9) - below).abs() < 2e-15);
            }
        }
    }

    #[test]
    fn bessel_parity_and_origin() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert_eq!(bessel_j1(0.0), 0.0);
        assert_eq!(bessel_j0(-3.3), bessel_j0(3.3));
        assert_eq!(bessel_j1(-3.3), -bessel_j1(3.3));
    }

    #[test]
    fn simpson_integrates_smooth_and_kinked_functions() {
        let v = adaptive_simpson(&|t: f64| t.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
        let v = adaptive_simpson(&|t: f64| (t - 0.3).abs(), 0.0, 1.0, 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-10);
    }
}
