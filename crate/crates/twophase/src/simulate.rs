//! Discretized pathwise simulation of the two-phase diffusion: Euler steps
//! with running-maximum tracking, down-crossing detection, regeneration-cycle
//! statistics, speed estimators and a hitting-probability Monte Carlo.

use crate::model::{Mode, TwoPhaseModel};
use crate::par;
use crate::rng::{CounterRng, SeedRecord};
use crate::stats::MeanVar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("step cap {max_steps} reached before the horizon ({needed} steps needed)")]
    StepCapExceeded { max_steps: usize, needed: usize },
}

/// Discretization settings for one simulated path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub max_steps: usize,
    /// Sample the within-step maximum from the Brownian bridge law instead of
    /// tracking the maximum at grid points only.
    pub bridge_correction: bool,
}

impl PathConfig {
    pub fn new(dt: f64, horizon: f64, seed: u64) -> Self {
        assert!(dt > 0.0 && horizon > dt);
        PathConfig {
            dt,
            horizon,
            seed,
            max_steps: (horizon / dt).ceil() as usize + 1,
            bridge_correction: false,
        }
    }

    pub fn with_bridge(mut self, on: bool) -> Self {
        self.bridge_correction = on;
        self
    }

    pub fn with_max_steps(mut self, cap: usize) -> Self {
        self.max_steps = cap;
        self
    }

    fn grid_steps(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize
    }
}

/// Instantaneous simulation state at a grid point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathState {
    pub t: f64,
    pub x: f64,
    pub xmax: f64,
    pub mode: Mode,
}

/// A full recorded path on the time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xmax: Vec<f64>,
    pub mode: Vec<Mode>,
    pub seed: SeedRecord,
}

/// Streaming Euler stepper; the running maximum and phase rule are applied
/// at every grid point.
pub(crate) struct Stepper<'a> {
    m: &'a TwoPhaseModel,
    dt: f64,
    sig: f64,
    bridge: bool,
    rng: CounterRng,
    pub t: f64,
    pub x: f64,
    pub xmax: f64,
    /// Within-step extremes of the last step (bridge-sampled when enabled,
    /// endpoint values otherwise). Start equal to x0 before any step.
    pub peak: f64,
    pub trough: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(m: &'a TwoPhaseModel, cfg: &PathConfig, stream: u64) -> Self {
        Stepper {
            m,
            dt: cfg.dt,
            sig: (m.a * cfg.dt).sqrt(),
            bridge: cfg.bridge_correction,
            rng: CounterRng::new(cfg.seed, stream),
            t: 0.0,
            x: m.x0,
            xmax: m.x0,
            peak: m.x0,
            trough: m.x0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.m.mode(self.x, self.xmax)
    }

    pub fn state(&self) -> PathState {
        PathState {
            t: self.t,
            x: self.x,
            xmax: self.xmax,
            mode: self.mode(),
        }
    }

    /// Advances one grid step and returns the mode that governed the step.
    pub fn step(&mut self) -> Mode {
        let mode = self.mode();
        let b = self.m.drift_at(mode, self.x);
        let x_new = self.x + b * self.dt + self.sig * self.rng.standard_normal();
        if self.bridge {
            // Extremes of the bridge between the endpoints over one step
            // (marginally exact; max and min are drawn independently).
            let d = x_new - self.x;
            let u = self.rng.uniform();
            self.peak = 0.5 * (self.x + x_new + (d * d - 2.0 * self.m.a * self.dt * u.ln()).sqrt());
            let v = self.rng.uniform();
            self.trough =
                0.5 * (self.x + x_new - (d * d - 2.0 * self.m.a * self.dt * v.ln()).sqrt());
        } else {
            self.peak = self.x.max(x_new);
            self.trough = self.x.min(x_new);
        }
        if self.peak > self.xmax {
            self.xmax = self.peak;
        }
        self.x = x_new;
        self.t += self.dt;
        mode
    }
}

/// Simulates one path on the time grid; deterministic given (seed, stream).
pub fn simulate_path(
    m: &TwoPhaseModel,
    cfg: &PathConfig,
    stream: u64,
) -> Result<Trajectory, SimError> {
    let n = cfg.grid_steps();
    if n > cfg.max_steps {
        return Err(SimError::StepCapExceeded { max_steps: cfg.max_steps, needed: n });
    }
    let mut s = Stepper::new(m, cfg, stream);
    let mut t = Vec::with_capacity(n + 1);
    let mut x = Vec::with_capacity(n + 1);
    let mut xmax = Vec::with_capacity(n + 1);
    let mut mode = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        let st = s.state();
        t.push(st.t);
        x.push(st.x);
        xmax.push(st.xmax);
        mode.push(st.mode);
        s.step();
    }
    Ok(Trajectory {
        t,
        x,
        xmax,
        mode,
        seed: SeedRecord { seed: cfg.seed, stream },
    })
}

/// One regeneration cycle: time to the first down-crossing, the onset
/// location, and the return time to it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CycleStats {
    /// First grid time with x <= xmax - gamma(xmax).
    pub sigma: f64,
    /// Time from the down-crossing back up to the onset location.
    pub tau_hat: f64,
    /// Running maximum at the down-crossing.
    pub l: f64,
    /// True when the step cap cut the cycle short.
    pub censored: bool,
}

/// First down-crossing of a recorded trajectory: the first grid index with
/// x <= xmax - gamma(xmax). `tau_hat` is NaN here (the scan stops at sigma).
pub fn first_down_crossing(traj: &Trajectory, m: &TwoPhaseModel) -> CycleStats {
    for i in 0..traj.x.len() {
        if traj.x[i] <= traj.xmax[i] - m.gamma.eval(traj.xmax[i]) {
            return CycleStats {
                sigma: traj.t[i],
                tau_hat: f64::NAN,
                l: traj.xmax[i],
                censored: false,
            };
        }
    }
    CycleStats {
        sigma: *traj.t.last().unwrap(),
        tau_hat: f64::NAN,
        l: *traj.xmax.last().unwrap(),
        censored: true,
    }
}

/// Simulates one full regeneration cycle from x0: the transient segment up to
/// the down-crossing, then the composite segment until return to the onset
/// maximum. While below the onset maximum the running maximum is frozen, so
/// the generic phase rule reproduces the composite drift (recurrent at or
/// below L - gamma(L), transient above) without special casing.
pub fn sample_cycle(m: &TwoPhaseModel, cfg: &PathConfig, stream: u64) -> CycleStats {
    let mut s = Stepper::new(m, cfg, stream);
    let mut steps = 0usize;
    loop {
        if steps >= cfg.max_steps {
            return CycleStats {
                sigma: s.t,
                tau_hat: f64::NAN,
                l: s.xmax,
                censored: true,
            };
        }
        // Crossing detection uses the within-step trough so sub-step dips
        // below the moving threshold are not missed (exact when bridge
        // sampling is on, endpoint-only otherwise).
        if s.trough <= s.xmax - m.gamma.eval(s.xmax) {
            break;
        }
        s.step();
        steps += 1;
    }
    let sigma = s.t;
    let l = s.xmax;
    loop {
        if steps >= cfg.max_steps {
            return CycleStats {
                sigma,
                tau_hat: s.t - sigma,
                l,
                censored: true,
            };
        }
        if s.peak >= l {
            break;
        }
        s.step();
        steps += 1;
    }
    CycleStats {
        sigma,
        tau_hat: s.t - sigma,
        l,
        censored: false,
    }
}

/// Independent cycles on streams `0..n` (parallel when enabled; identical
/// output either way).
pub fn sample_cycles(m: &TwoPhaseModel, cfg: &PathConfig, n: usize) -> Vec<CycleStats> {
    par::map_indexed(n, |i| sample_cycle(m, cfg, i as u64))
}

/// Serial twin of [`sample_cycles`], kept for determinism checks and benches.
pub fn sample_cycles_serial(m: &TwoPhaseModel, cfg: &PathConfig, n: usize) -> Vec<CycleStats> {
    par::map_indexed_serial(n, |i| sample_cycle(m, cfg, i as u64))
}

/// Two speed estimators with 95% normal-approximation half-widths.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Mean of (X(T) - x0)/T over replicates.
    pub terminal_speed: f64,
    pub terminal_half_width: f64,
    /// Ratio estimator mean(dL)/mean(cycle time) over completed cycles.
    pub regen_speed: f64,
    pub regen_half_width: f64,
    pub completed_cycles: usize,
    /// Fraction of replicates whose last cycle was cut by the horizon.
    pub censored_fraction: f64,
}

/// Runs `replicates` paths to the horizon, returning the terminal-value
/// estimator and the regenerative ratio estimator (cycles pooled across
/// replicates, trailing incomplete cycles censored).
pub fn estimate_speed(m: &TwoPhaseModel, cfg: &PathConfig, replicates: usize) -> SpeedEstimate {
    struct RepOut {
        terminal: f64,
        cycles: Vec<(f64, f64)>,
        censored: bool,
    }
    let reps: Vec<RepOut> = par::map_indexed(replicates, |r| {
        let mut s = Stepper::new(m, cfg, r as u64);
        let n = cfg.grid_steps().min(cfg.max_steps);
        let mut cycles = Vec::new();
        let mut baseline = m.x0;
        let mut cycle_t0 = 0.0;
        let mut onset: Option<f64> = None;
        for _ in 0..n {
            s.step();
            match onset {
                None => {
                    if s.trough <= s.xmax - m.gamma.eval(s.xmax) {
                        onset = Some(s.xmax);
                    }
                }
                Some(l) => {
                    if s.peak >= l {
                        cycles.push((l - baseline, s.t - cycle_t0));
                        baseline = l;
                        cycle_t0 = s.t;
                        onset = None;
                    }
                }
            }
        }
        RepOut {
            terminal: (s.x - m.x0) / s.t,
            cycles,
            censored: onset.is_some() || cycle_t0 < s.t,
        }
    });

    let mut term = MeanVar::default();
    let mut dl = MeanVar::default();
    let mut tau = MeanVar::default();
    let mut cov = 0.0;
    let mut censored = 0usize;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    for r in &reps {
        term.push(r.terminal);
        if r.censored {
            censored += 1;
        }
        pooled.extend_from_slice(&r.cycles);
    }
    for &(d, t) in &pooled {
        dl.push(d);
        tau.push(t);
    }
    let (md, mt) = (dl.mean(), tau.mean());
    for &(d, t) in &pooled {
        cov += (d - md) * (t - mt);
    }
    let n_cyc = pooled.len();
    let regen = if n_cyc > 0 { md / mt } else { f64::NAN };
    let regen_half = if n_cyc > 1 {
        let cov = cov / (n_cyc as f64 - 1.0);
        let var_r = (dl.var() - 2.0 * regen * cov + regen * regen * tau.var())
            / (n_cyc as f64 * mt * mt);
        1.96 * var_r.max(0.0).sqrt()
    } else {
        f64::NAN
    };
    SpeedEstimate {
        terminal_speed: term.mean(),
        terminal_half_width: 1.96 * term.sem(),
        regen_speed: regen,
        regen_half_width: regen_half,
        completed_cycles: n_cyc,
        censored_fraction: censored as f64 / replicates.max(1) as f64,
    }
}

/// Monte Carlo estimate (p, standard error) of the probability that the
/// composite diffusion (recurrent drift at or below `z`, transient above)
/// started at `z` hits z0 before `z + c`. With `bridge` on, within-step
/// barrier crossings are resolved by the Brownian-bridge crossing law, which
/// removes most of the O(sqrt(dt)) boundary bias.
pub fn hitting_mc(
    m: &TwoPhaseModel,
    z: f64,
    c: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    bridge: bool,
) -> (f64, f64) {
    let lower = m.z0;
    let upper = z + c;
    let sig = (m.a * dt).sqrt();
    let hits: Vec<bool> = par::map_indexed(n_paths, |i| {
        let mut rng = CounterRng::new(seed, i as u64);
        let mut x = z;
        loop {
            let b = if x <= z { m.br.eval(x) } else { m.bt.eval(x) };
            let x_new = x + b * dt + sig * rng.standard_normal();
            if x_new <= lower {
                return true;
            }
            if x_new >= upper {
                return false;
            }
            if bridge {
                let p_lo = (-2.0 * (x - lower) * (x_new - lower) / (m.a * dt)).exp();
                if rng.uniform() < p_lo {
                    return true;
                }
                let p_hi = (-2.0 * (upper - x) * (upper - x_new) / (m.a * dt)).exp();
                if rng.uniform() < p_hi {
                    return false;
                }
            }
            x = x_new;
        }
    });
    let k = hits.iter().filter(|&&h| h).count() as f64;
    let n = n_paths as f64;
    let p = k / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DownCrossing, DriftFunction};
    use crate::stats;

    fn constant_model(b: f64, c: f64) -> TwoPhaseModel {
        TwoPhaseModel::new(
            DriftFunction::Constant(b),
            DriftFunction::Constant(c),
            DownCrossing::Constant(1.0),
            1.0,
            0.0,
        )
    }

    #[test]
    fn identical_phases_are_drifted_brownian_motion() {
        let m = constant_model(1.0, 1.0);
        let cfg = PathConfig::new(1e-3, 1.0, 8);
        let n = 1000;
        let terminals: Vec<f64> = par::map_indexed(n, |i| {
            simulate_path(&m, &cfg, i as u64).unwrap().x.last().copied().unwrap()
        });
        let mean = stats::mean(&terminals);
        let se = 1.0 / (n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn starts_in_transient_mode() {
        let m = constant_model(1.0, 0.0);
        let cfg = PathConfig::new(1e-2, 0.1, 1);
        let traj = simulate_path(&m, &cfg, 0).unwrap();
        assert_eq!(traj.mode[0], Mode::TransientPhase);
    }

    #[test]
    fn path_invariants_hold() {
        let m = constant_model(1.0, 0.5);
        let cfg = PathConfig::new(1e-3, 5.0, 3);
        let traj = simulate_path(&m, &cfg, 2).unwrap();
        for i in 0..traj.x.len() {
            assert!(traj.xmax[i] >= traj.x[i] - 1e-12);
            if i > 0 {
                assert!(traj.xmax[i] >= traj.xmax[i - 1]);
            }
            let want = m.mode(traj.x[i], traj.xmax[i]);
            assert_eq!(traj.mode[i], want, "index {i}");
        }
    }

    #[test]
    fn same_seed_reproduces_path() {
        let m = constant_model(1.0, 0.5);
        let cfg = PathConfig::new(1e-3, 2.0, 77);
        let a = simulate_path(&m, &cfg, 5).unwrap();
        let b = simulate_path(&m, &cfg, 5).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.xmax, b.xmax);
    }

    #[test]
    fn step_cap_enforced() {
        let m = constant_model(1.0, 0.0);
        let cfg = PathConfig::new(1e-3, 2.0, 1).with_max_steps(10);
        assert!(matches!(
            simulate_path(&m, &cfg, 0),
            Err(SimError::StepCapExceeded { .. })
        ));
    }

    #[test]
    fn synthetic_down_crossing_detection() {
        let m = constant_model(1.0, 0.0);
        // Rise to 2, fall below 1 with gamma = 1.
        let x = vec![0.0, 1.0, 2.0, 1.5, 0.999, 0.5];
        let xmax = vec![0.0, 1.0, 2.0, 2.0, 2.0, 2.0];
        let t: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let mode: Vec<Mode> = x
            .iter()
            .zip(&xmax)
            .map(|(&xi, &mi)| m.mode(xi, mi))
            .collect();
        let traj = Trajectory {
            t,
            x,
            xmax,
            mode,
            seed: SeedRecord { seed: 0, stream: 0 },
        };
        let cs = first_down_crossing(&traj, &m);
        assert!(!cs.censored);
        assert_eq!(cs.sigma, 4.0);
        assert_eq!(cs.l, 2.0);

        let rising = Trajectory {
            t: vec![0.0, 1.0, 2.0],
            x: vec![0.0, 1.0, 2.0],
            xmax: vec![0.0, 1.0, 2.0],
            mode: vec![Mode::TransientPhase; 3],
            seed: SeedRecord { seed: 0, stream: 0 },
        };
        assert!(first_down_crossing(&rising, &m).censored);
    }

    #[test]
    fn dominated_by_pure_drift_under_coupled_noise() {
        // Same Gaussian increments: the two-phase path never exceeds the
        // path with the transient drift applied everywhere.
        let m = constant_model(1.0, 0.0);
        let dt = 1e-3f64;
        let sig = dt.sqrt();
        let mut rng = CounterRng::new(4, 0);
        let (mut x2, mut xmax) = (0.0f64, 0.0f64);
        let mut xb = 0.0f64;
        for _ in 0..20_000 {
            let g = rng.standard_normal();
            let mode = m.mode(x2, xmax);
            x2 += m.drift_at(mode, x2) * dt + sig * g;
            xmax = xmax.max(x2);
            xb += 1.0 * dt + sig * g;
            assert!(x2 <= xb + 1e-12);
        }
    }

    #[test]
    fn cycle_statistics_near_closed_forms() {
        let m = constant_model(1.0, 0.5);
        let cfg = PathConfig::new(1e-3, 400.0, 12).with_bridge(true);
        let cycles = sample_cycles(&m, &cfg, 400);
        let mut sig = MeanVar::default();
        let mut tau = MeanVar::default();
        for c in &cycles {
            assert!(!c.censored);
            sig.push(c.sigma);
            tau.push(c.tau_hat);
        }
        // Loose 10% bands for a small-sample unit test; acceptance tightens.
        assert!((sig.mean() - 2.19453).abs() / 2.19453 < 0.10, "{}", sig.mean());
        assert!((tau.mean() - 1.43233).abs() / 1.43233 < 0.10, "{}", tau.mean());
    }

    #[test]
    fn parallel_and_serial_cycles_agree() {
        let m = constant_model(1.0, 0.5);
        let cfg = PathConfig::new(1e-2, 100.0, 9);
        let a = sample_cycles(&m, &cfg, 32);
        let b = sample_cycles_serial(&m, &cfg, 32);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sigma, y.sigma);
            assert_eq!(x.tau_hat, y.tau_hat);
            assert_eq!(x.l, y.l);
        }
    }

    #[test]
    fn speed_estimator_on_plain_drift() {
        let m = constant_model(1.0, 1.0);
        let cfg = PathConfig::new(1e-2, 50.0, 21);
        let est = estimate_speed(&m, &cfg, 20);
        assert!(
            (est.terminal_speed - 1.0).abs() < 3.0 * est.terminal_half_width + 0.05,
            "{est:?}"
        );
        assert!(est.completed_cycles > 0);
        assert!(
            (est.regen_speed - 1.0).abs() < 3.0 * est.regen_half_width + 0.1,
            "{est:?}"
        );
    }

    #[test]
    fn hitting_mc_driftless_matches_ruin() {
        let m = TwoPhaseModel::new(
            DriftFunction::Constant(0.0),
            DriftFunction::Constant(0.0),
            DownCrossing::Constant(1.0),
            1.0,
            2.0,
        )
        .with_z0(0.0);
        let (p, se) = hitting_mc(&m, 2.0, 2.0, 1e-3, 20_000, 31, true);
        assert!((p - 0.5).abs() < 3.0 * se + 0.01, "p {p} se {se}");
    }
}
