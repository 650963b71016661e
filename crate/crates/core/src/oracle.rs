//! Test-only quadrature oracles, independent of the discretisation they check.

use std::f64::consts::PI;

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
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
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Area of S^{k-1} by the half-integer gamma recursion.
pub fn unit_sphere_area(k: usize) -> f64 {
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut g = if k.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    2.0 * PI.powf(k as f64 / 2.0) / g
}

/// `int_{R^d} w(|y|) |x - y|^{2-d} dy` at `|x| = r`, by explicit angular and
/// radial quadrature of the kernel (no shell theorem).
pub fn kernel_convolution(d: usize, w: &dyn Fn(f64) -> f64, support: f64, r: f64) -> f64 {
    // dy = s^{d-1} ds * area(S^{d-2}) sin^{d-2}(theta) dtheta
    let ring = unit_sphere_area(d - 1);
    let power = d as f64 - 2.0;
    let angular = |s: f64| -> f64 {
        let g = |theta: f64| {
            let half = (theta / 2.0).sin();
            let dist2 = (r - s) * (r - s) + 4.0 * r * s * half * half;
            theta.sin().powi(d as i32 - 2) / dist2.max(1e-300).powf(power / 2.0)
        };
        // peak near theta = 0 has width ~ |s - r| / r
        let split = if r > 0.0 {
            ((s - r).abs() / r).clamp(1e-6, 0.5)
        } else {
            0.5
        };
        adaptive_simpson(&g, 0.0, split, 1e-9) + adaptive_simpson(&g, split, PI, 1e-9)
    };
    let radial = |s: f64| ring * s.powi(d as i32 - 1) * w(s) * angular(s);
    if r > 0.0 && r < support {
        adaptive_simpson(&radial, 0.0, r, 1e-8) + adaptive_simpson(&radial, r, support, 1e-8)
    } else {
        adaptive_simpson(&radial, 0.0, support, 1e-8)
    }
}
