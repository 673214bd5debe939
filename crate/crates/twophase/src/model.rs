//! Domain types: drift phases, down-crossing functions, scale data and full
//! model instances, with admissibility validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `log^{(j)}`: the `j`-fold iterated natural logarithm.
pub fn iterated_log(depth: u32, x: f64) -> f64 {
    let mut v = x;
    for _ in 0..depth {
        v = v.ln();
    }
    v
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed drift: {0}")]
    MalformedDrift(String),
    #[error("down-crossing function inadmissible: {0}")]
    GammaInadmissible(String),
    #[error("anchor violation: z0 = {z0} must lie below x0 - gamma(x0) = {limit}")]
    AnchorViolation { z0: f64, limit: f64 },
}

/// One drift phase b(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DriftFunction {
    /// b(x) = value everywhere.
    Constant(f64),
    /// b(x) = sum of `coef * log^{(depth)}(x)` for `x >= x_min`, a constant
    /// `below` otherwise. Realizes the threshold drift families.
    IteratedLog {
        x_min: f64,
        /// `(depth, coefficient)` pairs, depth >= 1.
        terms: Vec<(u32, f64)>,
        below: f64,
    },
    /// Piecewise-linear interpolation on a strictly increasing grid,
    /// constant extrapolation outside it.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
    /// Drift recovered from an explicit scale function: b = -u''/(2u').
    FromScale(ScaleData),
}

impl DriftFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DriftFunction::Constant(v) => *v,
            DriftFunction::IteratedLog { x_min, terms, below } => {
                if x < *x_min {
                    *below
                } else {
                    terms
                        .iter()
                        .map(|&(j, c)| c * iterated_log(j, x))
                        .sum()
                }
            }
            DriftFunction::Tabulated { grid, values } => interp_linear(grid, values, x),
            DriftFunction::FromScale(s) => s.drift(x),
        }
    }

    pub(crate) fn check(&self) -> Result<(), ModelError> {
        match self {
            DriftFunction::Constant(v) => {
                if !v.is_finite() {
                    return Err(ModelError::MalformedDrift("non-finite constant".into()));
                }
            }
            DriftFunction::IteratedLog { x_min, terms, below } => {
                if !x_min.is_finite() || !below.is_finite() {
                    return Err(ModelError::MalformedDrift("non-finite parameter".into()));
                }
                for &(j, c) in terms {
                    if j == 0 || !c.is_finite() {
                        return Err(ModelError::MalformedDrift(format!(
                            "bad iterated-log term (depth {j}, coef {c})"
                        )));
                    }
                    if iterated_log(j, *x_min) <= 0.0 || !iterated_log(j, *x_min).is_finite() {
                        return Err(ModelError::MalformedDrift(format!(
                            "log^({j}) not positive at x_min = {x_min}"
                        )));
                    }
                }
            }
            DriftFunction::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(ModelError::MalformedDrift(
                        "tabulated drift needs >= 2 grid points with matching values".into(),
                    ));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ModelError::MalformedDrift(
                        "tabulated grid must be strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::MalformedDrift(
                        "tabulated values must be finite".into(),
                    ));
                }
            }
            DriftFunction::FromScale(s) => {
                if !(s.domain_lo() < s.domain_hi()) {
                    return Err(ModelError::MalformedDrift("empty scale domain".into()));
                }
            }
        }
        Ok(())
    }
}

fn interp_linear(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[grid.len() - 1] {
        return values[values.len() - 1];
    }
    let i = match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(i) => return values[i],
        Err(i) => i,
    };
    let (x0, x1) = (grid[i - 1], grid[i]);
    let t = (x - x0) / (x1 - x0);
    values[i - 1] * (1.0 - t) + values[i] * t
}

/// The down-crossing function gamma(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DownCrossing {
    Constant(f64),
    /// gamma(x) = coef2 log^{(2)} x + coef3 log^{(3)} x for x >= x_min,
    /// `below` otherwise (Theorem family on the down-crossing side).
    IteratedLog {
        x_min: f64,
        coef2: f64,
        coef3: f64,
        below: f64,
    },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl DownCrossing {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DownCrossing::Constant(g) => *g,
            DownCrossing::IteratedLog { x_min, coef2, coef3, below } => {
                if x < *x_min {
                    *below
                } else {
                    coef2 * iterated_log(2, x) + coef3 * iterated_log(3, x)
                }
            }
            DownCrossing::Tabulated { grid, values } => interp_linear(grid, values, x),
        }
    }

    /// Admissibility: gamma > 0, gamma' < 1, x - gamma(x) -> infinity.
    /// Analytic for the parametric variants; finite differences on a
    /// 10^4-point grid for tabulated data (that path is heuristic).
    pub(crate) fn check(&self) -> Result<(), ModelError> {
        match self {
            DownCrossing::Constant(g) => {
                if !(*g > 0.0) || !g.is_finite() {
                    return Err(ModelError::GammaInadmissible(format!(
                        "constant gamma must be positive and finite, got {g}"
                    )));
                }
            }
            DownCrossing::IteratedLog { x_min, coef2, coef3, below } => {
                if !(*below > 0.0) {
                    return Err(ModelError::GammaInadmissible(
                        "below-threshold gamma must be positive".into(),
                    ));
                }
                if *coef2 < 0.0 || *coef3 < 0.0 {
                    return Err(ModelError::GammaInadmissible(
                        "iterated-log gamma needs nonnegative coefficients".into(),
                    ));
                }
                let l3 = iterated_log(3, *x_min);
                if !(l3 > 0.0) || !l3.is_finite() {
                    return Err(ModelError::GammaInadmissible(format!(
                        "log^(3) not positive at x_min = {x_min}"
                    )));
                }
                if self.eval(*x_min) <= 0.0 {
                    return Err(ModelError::GammaInadmissible(
                        "gamma(x_min) must be positive".into(),
                    ));
                }
                // gamma'(x) = coef2/(x ln x) + coef3/(x ln x ln ln x), decreasing
                // in x on the admissible range, so the bound at x_min suffices.
                let l1 = x_min.ln();
                let l2 = iterated_log(2, *x_min);
                let dmax = coef2 / (x_min * l1) + coef3 / (x_min * l1 * l2);
                if dmax >= 1.0 {
                    return Err(ModelError::GammaInadmissible(format!(
                        "gamma' bound {dmax} >= 1 at x_min"
                    )));
                }
            }
            DownCrossing::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(ModelError::GammaInadmissible(
                        "tabulated gamma needs >= 2 grid points".into(),
                    ));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ModelError::GammaInadmissible(
                        "tabulated grid must be strictly increasing".into(),
                    ));
                }
                let (lo, hi) = (grid[0], grid[grid.len() - 1]);
                let n = 10_000;
                let h = (hi - lo) / n as f64;
                let tol = 1.0 - 1e-6;
                let mut x = lo;
                for _ in 0..=n {
                    let g = interp_linear(grid, values, x);
                    if !(g > 0.0) {
                        return Err(ModelError::GammaInadmissible(format!(
                            "gamma({x}) = {g} not positive"
                        )));
                    }
                    x += h;
                }
                // Centered differences for gamma' < 1.
                let mut x = lo + h;
                while x < hi - h {
                    let d = (interp_linear(grid, values, x + h)
                        - interp_linear(grid, values, x - h))
                        / (2.0 * h);
                    if d >= tol {
                        return Err(ModelError::GammaInadmissible(format!(
                            "gamma' = {d} >= 1 near x = {x}"
                        )));
                    }
                    x += h;
                }
            }
        }
        Ok(())
    }
}

/// Which drift phase is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    TransientPhase,
    RecurrentPhase,
}

/// How a scale function was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleProvenance {
    ClosedForm,
    Quadrature,
}

/// Precomputed scale function pair (u, u') anchored at z0, in the
/// convention u'(y) = exp(-int_{z0}^y 2 b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleData {
    z0: f64,
    lo: f64,
    /// Upper end of the domain; +infinity (serialized as null) when unbounded.
    #[serde(with = "json_infinity")]
    hi: f64,
    provenance: ScaleProvenance,
    repr: ScaleRepr,
}

/// JSON has no literal for infinity, so an unbounded endpoint round-trips
/// through null.
mod json_infinity {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ScaleRepr {
    Grid {
        grid: Vec<f64>,
        u: Vec<f64>,
        log_uprime: Vec<f64>,
    },
    SpikeTrain(SpikeTrainScale),
}

impl ScaleData {
    pub(crate) fn from_grid(
        z0: f64,
        grid: Vec<f64>,
        u: Vec<f64>,
        log_uprime: Vec<f64>,
        provenance: ScaleProvenance,
    ) -> Self {
        let lo = grid[0];
        let hi = grid[grid.len() - 1];
        ScaleData {
            z0,
            lo,
            hi,
            provenance,
            repr: ScaleRepr::Grid { grid, u, log_uprime },
        }
    }

    pub(crate) fn from_spike_train(s: SpikeTrainScale, lo: f64) -> Self {
        ScaleData {
            z0: s.origin,
            lo,
            hi: f64::INFINITY,
            provenance: ScaleProvenance::ClosedForm,
            repr: ScaleRepr::SpikeTrain(s),
        }
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn domain_lo(&self) -> f64 {
        self.lo
    }

    pub fn domain_hi(&self) -> f64 {
        self.hi
    }

    pub fn provenance(&self) -> ScaleProvenance {
        self.provenance
    }

    pub fn u(&self, x: f64) -> f64 {
        match &self.repr {
            ScaleRepr::Grid { grid, u, .. } => interp_linear(grid, u, x),
            ScaleRepr::SpikeTrain(s) => s.u(x),
        }
    }

    pub fn uprime(&self, x: f64) -> f64 {
        self.log_uprime(x).exp()
    }

    pub fn log_uprime(&self, x: f64) -> f64 {
        match &self.repr {
            ScaleRepr::Grid { grid, log_uprime, .. } => interp_linear(grid, log_uprime, x),
            ScaleRepr::SpikeTrain(s) => s.log_uprime(x),
        }
    }

    /// Drift b(x) = -u''(x) / (2 u'(x)) implied by the scale function.
    pub fn drift(&self, x: f64) -> f64 {
        match &self.repr {
            ScaleRepr::Grid { grid, log_uprime, .. } => {
                // b = -(log u')'/2 via centered differences on the grid step.
                let h = ((self.hi - self.lo) / (grid.len() as f64 - 1.0)).max(1e-8);
                let lo = interp_linear(grid, log_uprime, (x - h).max(self.lo));
                let hi = interp_linear(grid, log_uprime, (x + h).min(self.hi));
                -(hi - lo) / (2.0 * (2.0 * h).min(self.hi - self.lo))
            }
            ScaleRepr::SpikeTrain(s) => s.drift(x),
        }
    }

    pub fn as_spike_train(&self) -> Option<&SpikeTrainScale> {
        match &self.repr {
            ScaleRepr::SpikeTrain(s) => Some(s),
            ScaleRepr::Grid { .. } => None,
        }
    }

    pub fn grid_points(&self) -> Option<(&[f64], &[f64], &[f64])> {
        match &self.repr {
            ScaleRepr::Grid { grid, u, log_uprime } => Some((grid, u, log_uprime)),
            ScaleRepr::SpikeTrain(_) => None,
        }
    }
}

/// Closed-form scale function whose derivative is a small constant except for
/// narrow smooth spikes inside the intervals `I_j = [origin + j, origin + j + 1/j^2]`.
/// The spike areas are sized so that u(x) >= x^2 past the first spike while
/// u' stays bounded off the spikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrainScale {
    /// Left reference point, x0 - gamma.
    pub origin: f64,
    /// u' off the spike intervals.
    pub base_slope: f64,
    /// u(origin).
    pub u0: f64,
}

// C^1 bump on [0,1]: p(0) = p(1) = p'(0) = p'(1) = 0, max 1, integral 8/15.
fn bump(t: f64) -> f64 {
    16.0 * t * t * (1.0 - t) * (1.0 - t)
}

fn bump_deriv(t: f64) -> f64 {
    32.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

fn bump_integral(t: f64) -> f64 {
    16.0 * (t * t * t / 3.0 - t * t * t * t / 2.0 + t * t * t * t * t / 5.0)
}

const BUMP_MASS: f64 = 8.0 / 15.0;

impl SpikeTrainScale {
    pub fn new(origin: f64, base_slope: f64) -> Self {
        let u0 = (origin + 4.0) * (origin + 4.0) + 1.0;
        SpikeTrainScale { origin, base_slope, u0 }
    }

    // Cumulative spike area through spike j (j >= 2):
    // C_j = (origin + j + 3)^2 - (origin + 4)^2, so u(right edge of spike j)
    // >= u0 + C_j = (origin + j + 3)^2 + 1 dominates x^2 up to the next spike.
    fn cumulative_area(&self, j: i64) -> f64 {
        if j < 2 {
            return 0.0;
        }
        let t = self.origin + j as f64 + 3.0;
        let t1 = self.origin + 4.0;
        t * t - t1 * t1
    }

    fn spike_area(&self, j: i64) -> f64 {
        self.cumulative_area(j) - self.cumulative_area(j - 1)
    }

    /// Spike height inside I_j.
    fn spike_height(&self, j: i64) -> f64 {
        let jj = j as f64;
        self.spike_area(j) * jj * jj / BUMP_MASS
    }

    /// Index and local coordinate of the spike containing x, if any.
    pub fn spike_coord(&self, x: f64) -> Option<(i64, f64)> {
        let s = x - self.origin;
        let j = s.floor() as i64;
        if j < 2 {
            return None;
        }
        let t = (s - j as f64) * (j * j) as f64;
        if t < 1.0 {
            Some((j, t))
        } else {
            None
        }
    }

    /// True when x lies inside one of the spike intervals I_j.
    pub fn in_spike(&self, x: f64) -> bool {
        self.spike_coord(x).is_some()
    }

    /// Bound on u' off the spike intervals.
    pub fn off_spike_derivative_bound(&self) -> f64 {
        self.base_slope
    }

    pub fn u(&self, x: f64) -> f64 {
        let s = x - self.origin;
        let j = s.floor() as i64;
        let mut v = self.u0 + self.base_slope * s;
        if j >= 2 {
            v += self.cumulative_area(j - 1);
            let t = ((s - j as f64) * (j * j) as f64).min(1.0);
            v += self.spike_area(j) * bump_integral(t) / BUMP_MASS;
        }
        v
    }

    pub fn uprime(&self, x: f64) -> f64 {
        match self.spike_coord(x) {
            Some((j, t)) => self.base_slope + self.spike_height(j) * bump(t),
            None => self.base_slope,
        }
    }

    pub fn log_uprime(&self, x: f64) -> f64 {
        self.uprime(x).ln()
    }

    pub fn drift(&self, x: f64) -> f64 {
        match self.spike_coord(x) {
            Some((j, t)) => {
                let h = self.spike_height(j);
                let upp = h * bump_deriv(t) * (j * j) as f64;
                -upp / (2.0 * (self.base_slope + h * bump(t)))
            }
            None => 0.0,
        }
    }
}

/// Full problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseModel {
    pub bt: DriftFunction,
    pub br: DriftFunction,
    pub gamma: DownCrossing,
    /// Diffusion coefficient.
    pub a: f64,
    /// Start point.
    pub x0: f64,
    /// Scale anchor and recurrence test point; must satisfy z0 < x0 - gamma(x0).
    pub z0: f64,
}

impl TwoPhaseModel {
    /// Builds a model with the default anchor z0 = x0 - gamma(x0) - 1.
    pub fn new(bt: DriftFunction, br: DriftFunction, gamma: DownCrossing, a: f64, x0: f64) -> Self {
        let z0 = x0 - gamma.eval(x0) - 1.0;
        TwoPhaseModel { bt, br, gamma, a, x0, z0 }
    }

    pub fn with_z0(mut self, z0: f64) -> Self {
        self.z0 = z0;
        self
    }

    /// Drift phase active at position `x` with running maximum `xmax`.
    pub fn mode(&self, x: f64, xmax: f64) -> Mode {
        if x > xmax - self.gamma.eval(xmax) {
            Mode::TransientPhase
        } else {
            Mode::RecurrentPhase
        }
    }

    pub fn drift_at(&self, mode: Mode, x: f64) -> f64 {
        match mode {
            Mode::TransientPhase => self.bt.eval(x),
            Mode::RecurrentPhase => self.br.eval(x),
        }
    }
}

/// Three-valued answer for the improper-integral drift conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionVerdict {
    Pass,
    Fail,
    /// Divergence of an improper integral is undecidable from finite data.
    Undetermined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub bt_transient: ConditionVerdict,
    pub bt_detail: String,
    pub br_recurrent: ConditionVerdict,
    pub br_detail: String,
    pub anchor_ok: bool,
}

impl ValidationReport {
    /// True when the model is admissible to simulate. The drift condition
    /// verdicts are informational: a "failing" recurrent condition (for
    /// example a positive constant recurrent-phase drift) still defines a
    /// perfectly simulable model, it just changes which classification rules
    /// apply.
    pub fn is_valid(&self) -> bool {
        self.anchor_ok
    }
}

/// Verdicts for the transient/recurrent integral conditions on one drift.
/// Exact for the Constant and IteratedLog variants; Undetermined (with a
/// truncated estimate in the detail string) for data-backed variants.
pub fn drift_conditions(d: &DriftFunction) -> (ConditionVerdict, ConditionVerdict, String) {
    use ConditionVerdict::*;
    match d {
        DriftFunction::Constant(v) => {
            let transient = if *v > 0.0 { Pass } else { Fail };
            let recurrent = if *v == 0.0 { Pass } else { Fail };
            (transient, recurrent, format!("constant drift {v}"))
        }
        DriftFunction::IteratedLog { terms, below, .. } => {
            // Asymptotic sign at +infinity is set by the shallowest nonzero term;
            // behavior at -infinity by the constant `below`.
            let lead = terms
                .iter()
                .filter(|&&(_, c)| c != 0.0)
                .min_by_key(|&&(j, _)| j)
                .map(|&(_, c)| c)
                .unwrap_or(0.0);
            let detail = format!("leading iterated-log coefficient {lead}, below-threshold {below}");
            if lead > 0.0 {
                let transient = if *below >= 0.0 { Pass } else { Fail };
                (transient, Fail, detail)
            } else if lead < 0.0 {
                let recurrent = if *below >= 0.0 { Pass } else { Fail };
                (Fail, recurrent, detail)
            } else {
                // Degenerates to the constant `below`.
                let transient = if *below > 0.0 { Pass } else { Fail };
                let recurrent = if *below == 0.0 { Pass } else { Fail };
                (transient, recurrent, detail)
            }
        }
        DriftFunction::Tabulated { grid, .. } => {
            // Truncated trapezoid estimate of int exp(-2 int b) over the grid.
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            let n = 2000;
            let h = (hi - lo) / n as f64;
            let mut inner = 0.0;
            let mut right_tail = 0.0;
            let mut prev_b = d.eval(lo);
            let mut prev_f = 1.0f64;
            for i in 1..=n {
                let x = lo + i as f64 * h;
                let b = d.eval(x);
                inner += (prev_b + b) * h; // int 2b
                let f = (-inner).exp();
                right_tail += 0.5 * (prev_f + f) * h;
                prev_b = b;
                prev_f = f;
            }
            (
                Undetermined,
                Undetermined,
                format!(
                    "tabulated drift: truncated integral of exp(-int 2b) over [{lo}, {hi}] = {right_tail:.6e}; divergence undecidable from finite data"
                ),
            )
        }
        DriftFunction::FromScale(s) => (
            Undetermined,
            Undetermined,
            format!(
                "scale-backed drift on [{}, {}]: u({}) = {:.3e}; divergence undecidable from the table alone",
                s.domain_lo(),
                s.domain_hi(),
                s.domain_hi().min(s.domain_lo() + 1e6),
                s.u(s.domain_hi().min(s.domain_lo() + 1e6))
            ),
        ),
    }
}

/// Checks all type invariants and reports the drift integral conditions.
pub fn validate_model(m: &TwoPhaseModel) -> Result<ValidationReport, ModelError> {
    m.bt.check()?;
    m.br.check()?;
    m.gamma.check()?;
    if !(m.a > 0.0) || !m.a.is_finite() {
        return Err(ModelError::MalformedDrift(format!(
            "diffusion coefficient must be positive, got {}",
            m.a
        )));
    }
    let limit = m.x0 - m.gamma.eval(m.x0);
    if !(m.z0 < limit) {
        return Err(ModelError::AnchorViolation { z0: m.z0, limit });
    }
    let (bt_transient, _, bt_detail) = drift_conditions(&m.bt);
    let (_, br_recurrent, br_detail) = drift_conditions(&m.br);
    Ok(ValidationReport {
        bt_transient,
        bt_detail,
        br_recurrent,
        br_detail,
        anchor_ok: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_one_is_transient() {
        let (t, r, _) = drift_conditions(&DriftFunction::Constant(1.0));
        assert_eq!(t, ConditionVerdict::Pass);
        assert_eq!(r, ConditionVerdict::Fail);
    }

    #[test]
    fn constant_zero_is_recurrent() {
        let (t, r, _) = drift_conditions(&DriftFunction::Constant(0.0));
        assert_eq!(t, ConditionVerdict::Fail);
        assert_eq!(r, ConditionVerdict::Pass);
    }

    #[test]
    fn small_positive_constant_fails_recurrence() {
        let (_, r, _) = drift_conditions(&DriftFunction::Constant(0.1));
        assert_eq!(r, ConditionVerdict::Fail);
    }

    #[test]
    fn validate_passes_on_standard_instance() {
        let m = TwoPhaseModel::new(
            DriftFunction::Constant(1.0),
            DriftFunction::Constant(0.0),
            DownCrossing::Constant(1.0),
            1.0,
            0.0,
        );
        let rep = validate_model(&m).unwrap();
        assert!(rep.is_valid());
        assert_eq!(rep.bt_transient, ConditionVerdict::Pass);
        assert_eq!(rep.br_recurrent, ConditionVerdict::Pass);
    }

    #[test]
    fn anchor_violation_detected() {
        let m = TwoPhaseModel::new(
            DriftFunction::Constant(1.0),
            DriftFunction::Constant(0.0),
            DownCrossing::Constant(1.0),
            1.0,
            0.0,
        )
        .with_z0(0.0);
        assert!(matches!(
            validate_model(&m),
            Err(ModelError::AnchorViolation { .. })
        ));
    }

    #[test]
    fn steep_tabulated_gamma_rejected() {
        let gamma = DownCrossing::Tabulated {
            grid: vec![0.0, 1.0, 2.0],
            values: vec![0.5, 2.0, 2.1],
        };
        assert!(matches!(
            gamma.check(),
            Err(ModelError::GammaInadmissible(_))
        ));
    }

    #[test]
    fn iterated_log_eval_matches_terms() {
        let d = DriftFunction::IteratedLog {
            x_min: 20.0,
            terms: vec![(2, 0.5), (3, 0.25)],
            below: 0.3,
        };
        let x = 123.0f64;
        let expect = 0.5 * x.ln().ln() + 0.25 * x.ln().ln().ln();
        assert!((d.eval(x) - expect).abs() < 1e-14);
        assert_eq!(d.eval(10.0), 0.3);
    }

    #[test]
    fn x_minus_gamma_increasing_on_grid() {
        let gammas = [
            DownCrossing::Constant(1.5),
            DownCrossing::IteratedLog {
                x_min: 20.0,
                coef2: 0.5,
                coef3: 0.5,
                below: 1.0,
            },
            DownCrossing::Tabulated {
                grid: vec![0.0, 10.0, 20.0],
                values: vec![1.0, 3.0, 4.0],
            },
        ];
        for g in &gammas {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..2000 {
                let x = 20.0 + i as f64 * 0.05;
                let v = x - g.eval(x);
                assert!(v > prev, "x - gamma(x) not increasing for {g:?} at {x}");
                prev = v;
            }
        }
    }

    #[test]
    fn spike_train_shape() {
        let s = SpikeTrainScale::new(-0.5, 1.0);
        // Quadratic lower bound past the first spike.
        for i in 0..5000 {
            let x = 2.0 + i as f64 * 0.2;
            assert!(s.u(x) >= x * x, "u({x}) = {} < {}", s.u(x), x * x);
        }
        // Derivative bounded off spikes, large inside.
        assert_eq!(s.uprime(s.origin + 1.7), 1.0);
        let j = 10i64;
        let mid = s.origin + j as f64 + 0.5 / (j * j) as f64;
        assert!(s.uprime(mid) > 100.0);
        // u is increasing and continuous across a spike boundary.
        let l = s.origin + 5.0;
        assert!((s.u(l + 1e-9) - s.u(l - 1e-9)).abs() < 1e-6);
    }
}
