//! Heat-kernel series for the spaces in [`super::Manifold`].
//!
//! Convention throughout: the kernel solves `∂_s p = ½ Δ p`, i.e. it is the
//! transition density of Brownian motion with generator `½Δ`. Under the other
//! common convention (`∂_s p = Δ p`) every `s` in this crate would be halved.

use std::f64::consts::PI;

/// Below this time the circle kernel is evaluated with the image sum,
/// above it with the Fourier series.
pub const CIRCLE_SPECTRAL_MIN_S: f64 = 0.01;

const SERIES_EPS: f64 = 1e-16;
const SPHERE_TAIL_EPS: f64 = 1e-13;

/// Reduce a displacement on ℝ/ℤ to `[-1/2, 1/2)`.
#[inline]
pub fn centered(delta: f64) -> f64 {
    delta - (delta + 0.5).floor()
}

/// Heat kernel on the unit-length circle, as a function of the displacement.
pub fn circle(s: f64, delta: f64) -> f64 {
    circle_with_derivative(s, delta).0
}

/// Kernel value and its derivative with respect to the displacement.
pub fn circle_with_derivative(s: f64, delta: f64) -> (f64, f64) {
    if s >= CIRCLE_SPECTRAL_MIN_S {
        circle_spectral(s, delta)
    } else {
        circle_images(s, delta)
    }
}

/// `1 + 2 Σ_k e^{-2π²k²s} cos(2πkδ)`.
pub fn circle_spectral(s: f64, delta: f64) -> (f64, f64) {
    let q = (-2.0 * PI * PI * s).exp();
    let (sin1, cos1) = (2.0 * PI * delta).sin_cos();
    let (mut sin_k, mut cos_k) = (sin1, cos1);
    let mut value = 1.0;
    let mut deriv = 0.0;
    // q^{k²} via q^{(k+1)²} = q^{k²} q^{2k+1}
    let mut qk = q;
    let mut step = q * q * q;
    let mut k = 1.0;
    while qk >= SERIES_EPS {
        value += 2.0 * qk * cos_k;
        deriv -= 2.0 * qk * 2.0 * PI * k * sin_k;
        qk *= step;
        step *= q * q;
        let next_sin = sin_k * cos1 + cos_k * sin1;
        cos_k = cos_k * cos1 - sin_k * sin1;
        sin_k = next_sin;
        k += 1.0;
    }
    (value, deriv)
}

/// Wrapped Gaussian `Σ_n (2πs)^{-1/2} exp(-(δ+n)²/(2s))` over `|n| ≤ 6√s + 2`.
pub fn circle_images(s: f64, delta: f64) -> (f64, f64) {
    let d = centered(delta);
    let n_max = (6.0 * s.sqrt() + 2.0).ceil() as i64;
    let norm = 1.0 / (2.0 * PI * s).sqrt();
    let mut value = 0.0;
    let mut deriv = 0.0;
    for n in -n_max..=n_max {
        let x = d + n as f64;
        let g = norm * (-x * x / (2.0 * s)).exp();
        value += g;
        deriv -= g * x / s;
    }
    (value, deriv)
}

/// Legendre polynomials `P_0..=P_l_max` at `c`.
pub fn legendre(c: f64, l_max: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if l_max == 0 {
        return;
    }
    out.push(c);
    for l in 1..l_max {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * c * out[l] - lf * out[l - 1]) / (lf + 1.0);
        out.push(next);
    }
}

/// Eigenvalue of `-½Δ` on the volume-one sphere for degree `l`.
#[inline]
pub fn sphere_eigenvalue(l: usize, radius: f64) -> f64 {
    let lf = l as f64;
    lf * (lf + 1.0) / (2.0 * radius * radius)
}

/// Number of Legendre terms needed so that the neglected tail of
/// `Σ (2l+1) e^{-λ_l s} / (4πR²)` is below `1e-10`.
pub fn sphere_degree(s: f64, radius: f64) -> usize {
    let area = 4.0 * PI * radius * radius;
    let mut l = 1usize;
    loop {
        let term = (2.0 * l as f64 + 1.0) * (-sphere_eigenvalue(l, radius) * s).exp() / area;
        let next = (2.0 * l as f64 + 3.0) * (-sphere_eigenvalue(l + 1, radius) * s).exp() / area;
        // terms decay faster than geometrically once next/term < 1/2
        if term < SPHERE_TAIL_EPS && next < 0.5 * term {
            return l;
        }
        l += 1;
    }
}

/// Sphere kernel as a function of `c = cos γ` together with `dp/dc`.
pub fn sphere_series(s: f64, radius: f64, c: f64) -> (f64, f64) {
    let l_max = sphere_degree(s, radius);
    let area = 4.0 * PI * radius * radius;
    let (mut p_prev, mut p_cur) = (1.0, c);
    let (mut d_prev, mut d_cur) = (0.0, 1.0);
    let mut value = 1.0 / area;
    let mut deriv = 0.0;
    for l in 1..=l_max {
        let a = (2.0 * l as f64 + 1.0) * (-sphere_eigenvalue(l, radius) * s).exp() / area;
        value += a * p_cur;
        deriv += a * d_cur;
        let lf = l as f64;
        let p_next = ((2.0 * lf + 1.0) * c * p_cur - lf * p_prev) / (lf + 1.0);
        // P'_{l+1} = P'_{l-1} + (2l+1) P_l
        let d_next = d_prev + (2.0 * lf + 1.0) * p_cur;
        p_prev = p_cur;
        p_cur = p_next;
        d_prev = d_cur;
        d_cur = d_next;
    }
    (value, deriv)
}

/// Probability that a heat-kernel displacement on the sphere has polar
/// angle at most `acos(c)`.
pub fn sphere_polar_cdf(s: f64, radius: f64, c: f64) -> f64 {
    let l_max = sphere_degree(s, radius) + 1;
    let mut p = Vec::with_capacity(l_max + 2);
    legendre(c, l_max + 1, &mut p);
    let mut cdf = 0.5 * (1.0 - c);
    for l in 1..=l_max {
        let w = (-sphere_eigenvalue(l, radius) * s).exp();
        cdf += 0.5 * w * (p[l - 1] - p[l + 1]);
    }
    cdf.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_and_image_sums_agree() {
        for &s in &[0.01, 0.02, 0.005 * 3.0] {
            for i in 0..20 {
                let d = -0.5 + i as f64 / 20.0;
                let (a, da) = circle_spectral(s, d);
                let (b, db) = circle_images(s, d);
                assert!((a - b).abs() <= 1e-10 * a.max(1.0), "s={s} d={d}: {a} vs {b}");
                assert!((da - db).abs() <= 1e-8 * da.abs().max(1.0));
            }
        }
    }

    #[test]
    fn circle_diagonal_is_at_least_one() {
        for &s in &[0.01, 0.1, 1.0, 10.0] {
            assert!(circle(s, 0.0) >= 1.0);
        }
        assert!((circle(50.0, 0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centered_range() {
        assert_eq!(centered(0.5), -0.5);
        assert!((centered(0.9) + 0.1).abs() < 1e-15);
        assert!((centered(-0.7) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn legendre_values() {
        let mut p = Vec::new();
        legendre(0.5, 3, &mut p);
        assert!((p[2] - (-0.125)).abs() < 1e-15);
        assert!((p[3] - (-0.4375)).abs() < 1e-15);
    }

    #[test]
    fn polar_cdf_endpoints() {
        let r = 1.0 / (4.0 * PI).sqrt();
        assert!(sphere_polar_cdf(0.05, r, 1.0).abs() < 1e-12);
        assert!((sphere_polar_cdf(0.05, r, -1.0) - 1.0).abs() < 1e-12);
    }
}
