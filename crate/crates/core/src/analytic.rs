//! Closed-form solutions, drifts and norms of the explicit examples.
//!
//! Everything here is radial: functions take `r = |x|` and the ambient
//! dimension `n`, and radial derivatives are exact formulas, not differences.

use crate::grid::{unit_ball_volume, unit_sphere_area};

/// `ζ₀(r, t) = e^{(r−1)/t} − 1`.
pub fn zeta0(r: f64, t: f64) -> f64 {
    ((r - 1.0) / t).exp_m1()
}

/// `(∂_t ζ₀, ∂_r ζ₀, ∂_r² ζ₀)`.
pub fn zeta0_derivatives(r: f64, t: f64) -> (f64, f64, f64) {
    let e = ((r - 1.0) / t).exp();
    (-(r - 1.0) / (t * t) * e, e / t, e / (t * t))
}

/// `∂_t ζ₀ − ∂_r² ζ₀ + (r/t) ∂_r ζ₀`, which vanishes identically.
pub fn zeta0_identity_residual(r: f64, t: f64) -> f64 {
    let (zt, zr, zrr) = zeta0_derivatives(r, t);
    zt - zrr + r / t * zr
}

fn b0_parts(n: usize, r: f64, t: f64) -> (f64, f64, f64) {
    let z = zeta0(r, t);
    let d = 2.0 / r * (z + 1.0) - z;
    (n as f64 - 1.0 - z / d, z, d)
}

/// `b₀(r, t) = n − 1 − ζ₀ / ((2/r)(ζ₀ + 1) − ζ₀)`, always in `[n − 1, n]`.
pub fn b0(n: usize, r: f64, t: f64) -> f64 {
    b0_parts(n, r, t).0
}

/// `∂_r b₀(r, t)`.
pub fn b0_dr(n: usize, r: f64, t: f64) -> f64 {
    let (_, z, d) = b0_parts(n, r, t);
    let zr = (z + 1.0) / t;
    let dr = -2.0 / (r * r) * (z + 1.0) + (2.0 / r - 1.0) * zr;
    -(zr * d - z * dr) / (d * d)
}

/// Divergence of `g(r) x/|x|²` in `ℝⁿ`: `g′/r + g(n − 2)/r²`.
pub fn radial_field_divergence(n: usize, r: f64, g: f64, g_dr: f64) -> f64 {
    g_dr / r + g * (n as f64 - 2.0) / (r * r)
}

/// Radial profile `u(r, t) = ζ₀(r, t) e^{−r²/4t}` and its derivatives
/// `(u, ∂_t u, ∂_r u, ∂_r² u)`.
pub fn nonuniqueness_solution(r: f64, t: f64) -> [f64; 4] {
    let z = zeta0(r, t);
    let (zt, zr, zrr) = zeta0_derivatives(r, t);
    let g = (-r * r / (4.0 * t)).exp();
    let gt = r * r / (4.0 * t * t) * g;
    let gr = -r / (2.0 * t) * g;
    let grr = (-1.0 / (2.0 * t) + r * r / (4.0 * t * t)) * g;
    [z * g, zt * g + z * gt, zr * g + z * gr, zrr * g + 2.0 * zr * gr + z * grr]
}

/// `∂_r u` written as in the gradient formula
/// `∇u = (1/t) e^{−(|x|−2)²/4t} x/|x| − (x/2t) ζ₀ e^{−|x|²/4t}`.
pub fn nonuniqueness_gradient(r: f64, t: f64) -> f64 {
    (-(r - 2.0) * (r - 2.0) / (4.0 * t)).exp() / t - r / (2.0 * t) * zeta0(r, t) * (-r * r / (4.0 * t)).exp()
}

/// Radial residual `u_t − u_rr − (n−1)/r u_r + (b_r) u_r` and the sum of the
/// absolute values of its terms.
pub fn radial_residual(n: usize, r: f64, derivs: [f64; 4], drift_radial: f64) -> (f64, f64) {
    let [_, ut, ur, urr] = derivs;
    let terms = [ut, -urr, -(n as f64 - 1.0) / r * ur, drift_radial * ur];
    (terms.iter().sum(), terms.iter().map(|v| v.abs()).sum())
}

/// Residual of the non-uniqueness pair `(u, b₀ x/|x|²)` with its term scale.
pub fn nonuniqueness_residual(n: usize, r: f64, t: f64) -> (f64, f64) {
    radial_residual(n, r, nonuniqueness_solution(r, t), b0(n, r, t) / r)
}

/// Explicit constants in `‖∇u(·,t)‖² ≤ c₁ e^{−1/2t} t^{−2} + c₂ t^{n/2−1}`
/// on the unit ball: `c₁ = 2|Bⁿ|`, `c₂ = (n/2)(2π)^{n/2}`.
pub fn nonuniqueness_gradient_bound(n: usize, t: f64) -> f64 {
    let (c1, c2) = gradient_bound_constants(n);
    c1 * (-0.5 / t).exp() / (t * t) + c2 * t.powf(n as f64 / 2.0 - 1.0)
}

/// `∫₀^T` of [`nonuniqueness_gradient_bound`], finite for every `n ≥ 1`.
pub fn nonuniqueness_gradient_bound_integral(n: usize, horizon: f64) -> f64 {
    let (c1, c2) = gradient_bound_constants(n);
    let half = n as f64 / 2.0;
    2.0 * c1 * (-0.5 / horizon).exp() + c2 * horizon.powf(half) / half
}

fn gradient_bound_constants(n: usize) -> (f64, f64) {
    let half = n as f64 / 2.0;
    (2.0 * unit_ball_volume(n), half * (2.0 * std::f64::consts::PI).powf(half))
}

/// `∫_{ℝⁿ} e^{−|x|²/2t} dx = (2πt)^{n/2}`.
pub fn gaussian_mass(n: usize, t: f64) -> f64 {
    (2.0 * std::f64::consts::PI * t).powf(n as f64 / 2.0)
}

/// Heat-kernel family `u = t^{−α} e^{−r²/4t}`: `(u, ∂_t u, ∂_r u, ∂_r² u)`.
pub fn heat_kernel(alpha: f64, r: f64, t: f64) -> [f64; 4] {
    let u = t.powf(-alpha) * (-r * r / (4.0 * t)).exp();
    let q = r * r / (4.0 * t * t);
    [u, (-alpha / t + q) * u, -r / (2.0 * t) * u, (-1.0 / (2.0 * t) + q) * u]
}

/// `‖u(·,t)‖²_{L₂(ℝⁿ)} = t^{−2α}(2πt)^{n/2}`.
pub fn heat_kernel_l2_sq(n: usize, alpha: f64, t: f64) -> f64 {
    t.powf(-2.0 * alpha) * gaussian_mass(n, t)
}

/// `‖∇u(·,t)‖²_{L₂(ℝⁿ)} = (n/4)(2π)^{n/2} t^{n/2−1−2α}`.
pub fn heat_kernel_gradient_sq(n: usize, alpha: f64, t: f64) -> f64 {
    n as f64 / (4.0 * t) * heat_kernel_l2_sq(n, alpha, t)
}

/// Coefficient `n − 2α` of the drift `(n − 2α) x/|x|²` carried by the family.
pub fn heat_kernel_drift_coefficient(n: usize, alpha: f64) -> f64 {
    n as f64 - 2.0 * alpha
}

/// `u^δ(r, t) = e^{δt} ln r` and its derivatives `(u, ∂_t u, ∂_r u, ∂_r² u)`.
pub fn instability_solution(delta: f64, r: f64, t: f64) -> [f64; 4] {
    let e = (delta * t).exp();
    let l = r.ln();
    [e * l, delta * e * l, e / r, -e / (r * r)]
}

/// Radial component of `b^δ(x) = (n−2) x/|x|² − δ ln|x| x`.
pub fn instability_drift_radial(n: usize, delta: f64, r: f64) -> f64 {
    (n as f64 - 2.0) / r - delta * r.ln() * r
}

/// `div b^δ = (n−2)²/r² − δ(n ln r + 1)`.
pub fn instability_divergence(n: usize, delta: f64, r: f64) -> f64 {
    let m = n as f64 - 2.0;
    m * m / (r * r) - delta * (n as f64 * r.ln() + 1.0)
}

/// `‖ln|x|·x‖_{L₂(Bⁿ)} = (ωₙ₋₁ · 2/(n+2)³)^{1/2}`.
pub fn log_moment_l2(n: usize) -> f64 {
    let k = n as f64 + 2.0;
    (unit_sphere_area(n) * 2.0 / (k * k * k)).sqrt()
}

/// `‖ln|x|‖_{L₁(Bⁿ)} = ωₙ₋₁ / n²`.
pub fn log_l1(n: usize) -> f64 {
    unit_sphere_area(n) / (n * n) as f64
}

/// `‖b^δ − b‖_{L₂(Q_t)} = δ √t ‖ln|x|·x‖_{L₂}`.
pub fn instability_perturbation(n: usize, delta: f64, t: f64) -> f64 {
    delta * t.sqrt() * log_moment_l2(n)
}

/// `‖u^δ(·,t) − u₀‖_{L₁} = (e^{δt} − 1) ‖ln|x|‖_{L₁}`.
pub fn instability_growth(n: usize, delta: f64, t: f64) -> f64 {
    (delta * t).exp_m1() * log_l1(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_identity_vanishes() {
        assert!(zeta0_identity_residual(0.5, 0.3).abs() < 1e-12);
        assert_eq!(zeta0(1.0, 0.7), 0.0);
    }

    #[test]
    fn b0_stays_in_bracket() {
        for n in [2, 3, 5] {
            for i in 1..=50 {
                for j in 1..=50 {
                    let (r, t) = (i as f64 / 50.0, j as f64 / 50.0);
                    let b = b0(n, r, t);
                    assert!(b >= n as f64 - 1.0 - 1e-12 && b <= n as f64 + 1e-12, "{b}");
                }
            }
        }
    }

    #[test]
    fn b0_derivative_matches_difference_quotient() {
        let (n, r, t) = (3, 0.4, 0.2);
        let h = 1e-6;
        let fd = (b0(n, r + h, t) - b0(n, r - h, t)) / (2.0 * h);
        assert!((fd - b0_dr(n, r, t)).abs() < 1e-6);
    }

    #[test]
    fn gradient_formula_matches_derivative() {
        for (r, t) in [(0.3, 0.1), (0.9, 0.5), (0.05, 1.0)] {
            let d = nonuniqueness_solution(r, t)[2];
            assert!((d - nonuniqueness_gradient(r, t)).abs() < 1e-12 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn spot_values() {
        assert!((log_moment_l2(2).powi(2) - PI / 16.0).abs() < 1e-15);
        assert!((log_l1(2) - PI / 2.0).abs() < 1e-15);
        let t = 0.5f64.powf(-1.5);
        let pert = instability_perturbation(2, 0.5, t);
        assert!((pert - 0.5 * 2f64.powf(0.75) * PI.sqrt() / 4.0).abs() < 1e-15);
        assert!((pert - 0.3725).abs() < 5e-4);
        assert!((instability_growth(2, 0.5, t) - 4.89).abs() < 5e-3);
        assert!((heat_kernel_gradient_sq(2, 0.0, 0.3) - PI).abs() < 1e-12);
    }

    #[test]
    fn instability_pair_solves_the_equation() {
        for n in [2, 3] {
            for (r, t) in [(0.2, 0.5), (0.7, 3.0)] {
                let d = 0.3;
                let (res, scale) =
                    radial_residual(n, r, instability_solution(d, r, t), instability_drift_radial(n, d, r));
                assert!(res.abs() <= 1e-13 * scale);
            }
        }
    }
}
