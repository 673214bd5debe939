//! Quadrature kernels: adaptive Simpson and fixed-order Gauss-Legendre.

/// Relative accuracy target used by the analytic layer.
pub const REL_TOL: f64 = 1e-9;
/// Absolute floor below which refinement stops.
pub const ABS_FLOOR: f64 = 1e-14;

const MAX_DEPTH: u32 = 60;

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth + 1)
            + adaptive_step(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth + 1)
    }
}

/// Adaptive Simpson integral of `f` over `[a, b]` with relative target
/// `rel_tol` and absolute floor [`ABS_FLOOR`].
pub fn integrate_tol(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    let tol = (whole.abs() * rel_tol).max(ABS_FLOOR);
    adaptive_step(&f, a, fa, b, fb, whole, m, fm, tol, 0)
}

/// Adaptive Simpson at the default tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate_tol(f, a, b, REL_TOL)
}

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; symmetric).
const GL16_X: [f64; 8] = [
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL16_W: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

/// 16-point Gauss-Legendre on `[a, b]`. Exact to machine precision for
/// smooth slowly varying integrands over short panels.
pub fn gauss16(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        let dx = h * GL16_X[i];
        acc += GL16_W[i] * (f(c + dx) + f(c - dx));
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_exponential() {
        let v = integrate(|x| (-x).exp(), 0.0, 5.0);
        let exact = 1.0 - (-5.0f64).exp();
        assert!((v - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|x| x.exp(), 1.5, 1.5), 0.0);
    }

    #[test]
    fn gauss16_matches_adaptive_on_smooth() {
        let f = |x: f64| (x.ln()).ln();
        let a = 20.0;
        let b = 21.0;
        let g = gauss16(f, a, b);
        let s = integrate(f, a, b);
        assert!((g - s).abs() < 1e-12, "{g} vs {s}");
    }
}
