//! Scale functions, hazards, hitting probabilities, the criterion function H,
//! and the closed-form constants and expectations of the constant-phase model.
//!
//! Everything here is evaluated in "shifted-base" form: only differences of
//! the exponent integral `int 2b/a` appear, with the base point chosen next
//! to the integration window, so transient drifts never push `exp` out of
//! range. Closed forms are used for constant drifts, adaptive quadrature
//! otherwise.

use crate::model::{DownCrossing, DriftFunction, ScaleData, ScaleProvenance, TwoPhaseModel};
use crate::quad;
use thiserror::Error;

/// Raw exponents beyond this magnitude are refused; callers must shift base.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("scale exponent magnitude {magnitude} exceeds the overflow guard at x = {at}; use shifted-base increments")]
    DomainTooLarge { at: f64, magnitude: f64 },
    #[error("down-crossing gamma({z}) = {gamma} is not positive")]
    DegenerateGamma { z: f64, gamma: f64 },
    #[error("exponent {0} out of range for the exit-time formula; use the large-N limit")]
    OverflowGuard(f64),
}

/// `(1 - exp(-k L)) / k`, stable for small `k`.
#[inline]
fn expm1_ratio(k: f64, len: f64) -> f64 {
    if k == 0.0 {
        len
    } else {
        -(-k * len).exp_m1() / k
    }
}

/// Exact integral of a piecewise-linear table (constant extrapolation).
fn tabulated_integral(grid: &[f64], values: &[f64], from: f64, to: f64) -> f64 {
    debug_assert!(from <= to);
    let n = grid.len();
    let mut acc = 0.0;
    // Left extrapolation region.
    if from < grid[0] {
        acc += values[0] * (to.min(grid[0]) - from);
    }
    // Right extrapolation region.
    if to > grid[n - 1] {
        acc += values[n - 1] * (to - from.max(grid[n - 1]));
    }
    // Interior segments: linear, so the trapezoid rule is exact.
    for i in 0..n - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let lo = from.max(a);
        let hi = to.min(b);
        if hi > lo {
            let t0 = (lo - a) / (b - a);
            let t1 = (hi - a) / (b - a);
            let v0 = values[i] * (1.0 - t0) + values[i + 1] * t0;
            let v1 = values[i] * (1.0 - t1) + values[i + 1] * t1;
            acc += 0.5 * (v0 + v1) * (hi - lo);
        }
    }
    acc
}

/// Integral of the iterated-log sum over `[lo, hi]` with `lo >= x_min`.
/// Composite 16-point Gauss-Legendre on panels whose width scales with x;
/// the integrand is analytic and slowly varying, so this is accurate to
/// near machine precision.
fn iterlog_integral(terms: &[(u32, f64)], lo: f64, hi: f64) -> f64 {
    let f = |x: f64| -> f64 {
        terms
            .iter()
            .map(|&(j, c)| c * crate::model::iterated_log(j, x))
            .sum()
    };
    let mut acc = 0.0;
    let mut a = lo;
    while a < hi {
        let w = (0.05 * a).max(0.5);
        let b = (a + w).min(hi);
        acc += quad::gauss16(f, a, b);
        a = b;
    }
    acc
}

/// The exponent integral `int_from^to (2/a) b(r) dr` (antisymmetric in its
/// endpoints). Closed form for constant and tabulated drifts and for drifts
/// backed by a scale function; Gauss-Legendre panels for iterated-log drifts.
pub fn exponent(d: &DriftFunction, a: f64, from: f64, to: f64) -> f64 {
    if from > to {
        return -exponent(d, a, to, from);
    }
    let two_over_a = 2.0 / a;
    match d {
        DriftFunction::Constant(v) => two_over_a * v * (to - from),
        DriftFunction::IteratedLog { x_min, terms, below } => {
            let mut acc = 0.0;
            if from < *x_min {
                acc += below * (to.min(*x_min) - from);
            }
            if to > *x_min {
                acc += iterlog_integral(terms, from.max(*x_min), to);
            }
            two_over_a * acc
        }
        DriftFunction::Tabulated { grid, values } => {
            two_over_a * tabulated_integral(grid, values, from, to)
        }
        // Stored convention: log u' = -int_{z0}^x 2 b, so differences of
        // log u' give the exponent exactly.
        DriftFunction::FromScale(s) => -(s.log_uprime(to) - s.log_uprime(from)) / a,
    }
}

/// `int_from^to exp(-int_base^y (2/a) b(r) dr) dy`, the shifted-base scale
/// increment. Equals `(u(to) - u(from)) * exp(int_{z0}^base 2b/a)` of the
/// un-shifted scale, computed without catastrophic overflow when `base` is
/// chosen near the window.
pub fn scale_increment(d: &DriftFunction, a: f64, base: f64, from: f64, to: f64) -> f64 {
    debug_assert!(from <= to);
    if from >= to {
        return 0.0;
    }
    match d {
        DriftFunction::Constant(v) => {
            let k = 2.0 * v / a;
            (-k * (from - base)).exp() * expm1_ratio(k, to - from)
        }
        DriftFunction::FromScale(s) if a == 1.0 => (s.u(to) - s.u(from)) / s.uprime(base),
        _ => quad::integrate(|y| (-exponent(d, a, base, y)).exp(), from, to),
    }
}

/// Scale function pair on a grid, anchored so that u(z0) = 0.
///
/// `u'(y) = exp(-int_{z0}^y 2b/a)`; accumulation uses per-panel shifted
/// bases so only the stored cumulative exponent can grow, and that growth is
/// guarded.
pub fn build_scale(
    d: &DriftFunction,
    a: f64,
    z0: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<ScaleData, AnalyticError> {
    assert!(lo <= z0 && z0 <= hi, "z0 must lie inside the domain");
    assert!(n >= 2);
    let mut grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    if !grid.iter().any(|&g| g == z0) {
        grid.push(z0);
        grid.sort_by(|p, q| p.partial_cmp(q).unwrap());
    }

    if let DriftFunction::Constant(v) = d {
        let k = 2.0 * v / a;
        let mut u = Vec::with_capacity(grid.len());
        let mut log_up = Vec::with_capacity(grid.len());
        for &x in &grid {
            let e = k * (x - z0);
            if e.abs() > EXPONENT_GUARD {
                return Err(AnalyticError::DomainTooLarge { at: x, magnitude: e.abs() });
            }
            log_up.push(-e);
            u.push(if x >= z0 {
                expm1_ratio(k, x - z0)
            } else {
                -(k * (z0 - x)).exp() * expm1_ratio(k, z0 - x)
            });
        }
        return Ok(ScaleData::from_grid(z0, grid, u, log_up, ScaleProvenance::ClosedForm));
    }

    // Cumulative exponent table, then u by shifted-base panel increments.
    let m = grid.len();
    let mut expn = vec![0.0f64; m];
    let i0 = grid.iter().position(|&g| g == z0).unwrap();
    for i in (0..i0).rev() {
        expn[i] = expn[i + 1] - exponent(d, a, grid[i], grid[i + 1]);
    }
    for i in i0 + 1..m {
        expn[i] = expn[i - 1] + exponent(d, a, grid[i - 1], grid[i]);
    }
    for (i, &e) in expn.iter().enumerate() {
        if e.abs() > EXPONENT_GUARD {
            return Err(AnalyticError::DomainTooLarge { at: grid[i], magnitude: e.abs() });
        }
    }
    let mut u = vec![0.0f64; m];
    for i in i0 + 1..m {
        u[i] = u[i - 1]
            + (-expn[i - 1]).exp() * scale_increment(d, a, grid[i - 1], grid[i - 1], grid[i]);
    }
    for i in (0..i0).rev() {
        u[i] = u[i + 1]
            - (-expn[i]).exp() * scale_increment(d, a, grid[i], grid[i], grid[i + 1]);
    }
    let log_up: Vec<f64> = expn.iter().map(|&e| -e).collect();
    Ok(ScaleData::from_grid(z0, grid, u, log_up, ScaleProvenance::Quadrature))
}

/// Onset-location hazard `lambda(z) = u_T'(z) / (u_T(z) - u_T(z - gamma(z)))`,
/// evaluated with base `z - gamma(z)`.
pub fn onset_hazard(m: &TwoPhaseModel, z: f64) -> Result<f64, AnalyticError> {
    let g = m.gamma.eval(z);
    if !(g > 0.0) {
        return Err(AnalyticError::DegenerateGamma { z, gamma: g });
    }
    if let DriftFunction::Constant(b) = m.bt {
        // lambda = k / (e^{k gamma} - 1), k = 2b/a; -> 1/gamma as b -> 0.
        let k = 2.0 * b / m.a;
        let denom = (k * g).exp_m1();
        return Ok(if denom == 0.0 { 1.0 / g } else { k / denom });
    }
    let w = z - g;
    let num = (-exponent(&m.bt, m.a, w, z)).exp();
    let den = scale_increment(&m.bt, m.a, w, w, z);
    Ok(num / den)
}

/// Cumulative onset hazard `int_x^{x+y} lambda(z) dz`.
pub fn cumulative_hazard(m: &TwoPhaseModel, x: f64, y: f64) -> Result<f64, AnalyticError> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    if let (DriftFunction::Constant(_), DownCrossing::Constant(_)) = (&m.bt, &m.gamma) {
        return Ok(onset_hazard(m, x)? * y);
    }
    // Probe for degenerate gamma up front, then integrate.
    onset_hazard(m, x)?;
    onset_hazard(m, x + y)?;
    Ok(quad::integrate(
        |z| onset_hazard(m, z).unwrap_or(f64::NAN),
        x,
        x + y,
    ))
}

/// Tail of the onset-location law:
/// `P_x(L > x + y) = exp(-int_x^{x+y} lambda(z) dz)`.
pub fn onset_tail(m: &TwoPhaseModel, x: f64, y: f64) -> Result<f64, AnalyticError> {
    Ok((-cumulative_hazard(m, x, y)?).exp())
}

/// `(u_R(w), u_R'(w))` for the recurrent phase, anchored at z0. For a
/// scale-backed recurrent drift the stored (positive) scale is used as-is;
/// an additive normalization does not change summability of H.
fn recurrent_scale_at(m: &TwoPhaseModel, w: f64) -> (f64, f64) {
    match &m.br {
        DriftFunction::Constant(v) if *v == 0.0 => (w - m.z0, 1.0),
        DriftFunction::Constant(v) => {
            let k = 2.0 * v / m.a;
            (expm1_ratio(k, w - m.z0), (-k * (w - m.z0)).exp())
        }
        DriftFunction::FromScale(s) if m.a == 1.0 => (s.u(w), s.uprime(w)),
        d => (
            scale_increment(d, m.a, m.z0, m.z0, w),
            (-exponent(d, m.a, m.z0, w)).exp(),
        ),
    }
}

/// Probability that the composite diffusion started at `z` hits z0 before
/// `z + c`.
pub fn hitting_prob(m: &TwoPhaseModel, z: f64, c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let b_factor = scale_increment(&m.bt, m.a, z, z, z + c);
    let (ur, urp) = recurrent_scale_at(m, z);
    let num = urp * b_factor;
    (num / (ur + num)).clamp(0.0, 1.0)
}

/// The recurrence criterion summand H(s), in (0, 1) for s - gamma(s) > z0.
pub fn criterion_h(m: &TwoPhaseModel, s: f64) -> f64 {
    let g = m.gamma.eval(s);
    let w = s - g;
    debug_assert!(w > m.z0, "criterion H needs s - gamma(s) > z0");
    let a_factor = scale_increment(&m.bt, m.a, w, w, s);
    let (ur, urp) = recurrent_scale_at(m, w);
    let num = urp * a_factor;
    num / (ur + num)
}

/// Recurrent-phase drift level for the constant-phase closed forms:
/// finite c, or the reflecting limit c = +infinity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RecurrentLevel {
    Finite(f64),
    Reflecting,
}

/// Every closed-form quantity of the constant-phase (ballistic) model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClosedFormBundle {
    /// `(a/2b)(1 - exp(-2 b gamma / a))`.
    pub c_b_gamma: f64,
    /// Mean onset increment `(a/2b)(exp(2 b gamma / a) - 1)`.
    pub d_b_gamma: f64,
    /// Damping coefficient d(b, c, gamma, a) in (0, 1].
    pub damping: f64,
    /// Mean first down-crossing time E sigma_gamma.
    pub expected_sigma: f64,
    /// Mean return time E tau-hat.
    pub expected_return: f64,
    /// Mean onset increment E L - x0 (equals d_b_gamma).
    pub expected_l_increment: f64,
    /// Asymptotic speed, damping * b.
    pub speed: f64,
}

/// Closed forms for transient level `b`, recurrent level `c`, constant
/// down-crossing `gamma` and diffusion coefficient `a`. The reflecting
/// sentinel is a distinguished case, not a large float.
pub fn closed_forms(b: f64, c: RecurrentLevel, gamma: f64, a: f64, _x0: f64) -> ClosedFormBundle {
    assert!(b > 0.0 && gamma > 0.0 && a > 0.0);
    let k = 2.0 * b * gamma / a;
    let e = k.exp();
    let em = (-k).exp();
    let c_b_gamma = a / (2.0 * b) * (1.0 - em);
    let d_b_gamma = a / (2.0 * b) * (e - 1.0);
    let (damping, expected_return) = match c {
        RecurrentLevel::Finite(c) => {
            assert!(c > 0.0);
            let damping = c * (e - 1.0) / (c * (e - 1.0) + (b - c) * (1.0 - em));
            let ret = gamma / b + a * (b - c) * (1.0 - em) / (2.0 * b * b * c);
            (damping, ret)
        }
        RecurrentLevel::Reflecting => {
            let damping = (e - 1.0) / (e + em - 2.0);
            let ret = gamma / b - a * (1.0 - em) / (2.0 * b * b);
            (damping, ret)
        }
    };
    let expected_sigma = (d_b_gamma - gamma) / b;
    ClosedFormBundle {
        c_b_gamma,
        d_b_gamma,
        damping,
        expected_sigma,
        expected_return,
        expected_l_increment: d_b_gamma,
        speed: damping * b,
    }
}

/// Expected exit time of `(-N, gamma)` for the two-level diffusion started
/// at `y`, from the explicit two-sided boundary-value solution.
pub fn exit_time_vn(
    a: f64,
    b: f64,
    c: f64,
    gamma: f64,
    n_cap: f64,
    y: f64,
) -> Result<f64, AnalyticError> {
    assert!(a > 0.0 && b > 0.0 && c > 0.0 && gamma > 0.0 && n_cap > 0.0);
    debug_assert!((-n_cap..=gamma).contains(&y));
    let kc = 2.0 * c / a;
    let kb = 2.0 * b / a;
    if kc * n_cap > EXPONENT_GUARD {
        return Err(AnalyticError::OverflowGuard(kc * n_cap));
    }
    let em_bg = (-kb * gamma).exp();
    let a_n = (gamma / b + n_cap / c + a * (b - c) * (1.0 - em_bg) / (2.0 * b * b * c))
        / (a / (2.0 * c) * ((kc * n_cap).exp() - 1.0) + a / (2.0 * b) * (1.0 - em_bg));
    let d_n = a_n + 1.0 / b - 1.0 / c;
    Ok(if y <= 0.0 {
        a * a_n / (2.0 * c) * ((kc * n_cap).exp() - (-kc * y).exp()) - (y + n_cap) / c
    } else {
        a * d_n / (2.0 * b) * (em_bg - (-kb * y).exp()) + (gamma - y) / b
    })
}

/// Large-N limit of `exit_time_vn(.., 0)`: the mean return time.
pub fn exit_time_limit(a: f64, b: f64, c: f64, gamma: f64) -> f64 {
    gamma / b + a * (b - c) * (1.0 - (-2.0 * b * gamma / a).exp()) / (2.0 * b * b * c)
}
