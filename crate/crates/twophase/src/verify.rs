//! End-to-end verification suite: exact algebraic identities,
//! quadrature-versus-closed-form agreement, and Monte Carlo agreement at
//! fixed budgets and tolerances. Each criterion reports pass/fail with a
//! numeric detail line; the CLI `verify` subcommand and the acceptance test
//! both run this suite.

use crate::analytic::{self, closed_forms, exit_time_limit, exit_time_vn, RecurrentLevel};
use crate::model::{DownCrossing, DriftFunction, TwoPhaseModel};
use crate::regeneration::{
    self, classify, divergence_diagnostic, simulate_chain, DiagnosticConfig,
    DivergenceSuggestion, VerdictResult, VerdictSource,
};
use crate::rng::CounterRng;
use crate::simulate::{estimate_speed, hitting_mc, sample_cycles, PathConfig};
use crate::stats::{self, MeanVar};
use serde::{Deserialize, Serialize};

/// Fixed seed for every Monte Carlo criterion.
pub const VERIFY_SEED: u64 = 20_260_825;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(id: u32, name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult { id, name, passed, detail }
}

fn constant_model(b: f64, c: f64, gamma: f64, a: f64, x0: f64) -> TwoPhaseModel {
    TwoPhaseModel::new(
        DriftFunction::Constant(b),
        DriftFunction::Constant(c),
        DownCrossing::Constant(gamma),
        a,
        x0,
    )
}

fn thm13_model(k: f64) -> TwoPhaseModel {
    let terms = vec![(2u32, 0.5f64), (3, 0.5 * k)];
    let below: f64 = terms
        .iter()
        .map(|&(j, c)| c * crate::model::iterated_log(j, 20.0))
        .sum();
    TwoPhaseModel::new(
        DriftFunction::IteratedLog { x_min: 20.0, terms, below },
        DriftFunction::Constant(0.0),
        DownCrossing::Constant(1.0),
        1.0,
        25.0,
    )
}

fn thm14_model(k: f64) -> TwoPhaseModel {
    TwoPhaseModel::new(
        DriftFunction::Constant(1.0),
        DriftFunction::Constant(0.0),
        DownCrossing::IteratedLog {
            x_min: 20.0,
            coef2: 0.5,
            coef3: 0.5 * k,
            below: 0.5 * crate::model::iterated_log(2, 20.0)
                + 0.5 * k * crate::model::iterated_log(3, 20.0),
        },
        1.0,
        25.0,
    )
}

/// 1. The closed-form speed identity holds to 1e-12 relative on a parameter
/// grid.
pub fn criterion_1() -> CriterionResult {
    let vals: Vec<f64> = (0..5).map(|i| 0.25 + 3.75 * i as f64 / 4.0).collect();
    let mut worst = 0.0f64;
    let mut worst_at = (0.0, 0.0, 0.0, 0.0);
    for &b in &vals {
        for &c in &vals {
            for &g in &vals {
                for &a in &[0.5, 1.0, 2.0] {
                    let cf = closed_forms(b, RecurrentLevel::Finite(c), g, a, 0.0);
                    let lhs = cf.speed * (cf.expected_sigma + cf.expected_return);
                    let rel = (lhs - cf.expected_l_increment).abs() / cf.expected_l_increment;
                    if rel > worst {
                        worst = rel;
                        worst_at = (b, c, g, a);
                    }
                }
            }
        }
    }
    result(
        1,
        "closed-form speed identity",
        worst <= 1e-12,
        format!("max relative defect {worst:.3e} at (b,c,gamma,a)={worst_at:?}, tolerance 1e-12"),
    )
}

/// 2. Monte Carlo speed matches the closed-form damping within 0.02.
pub fn criterion_2() -> CriterionResult {
    let target = closed_forms(1.0, RecurrentLevel::Finite(0.5), 1.0, 1.0, 0.0).speed;
    let m = constant_model(1.0, 0.5, 1.0, 1.0, 0.0);
    let cfg = PathConfig::new(1e-3, 2000.0, VERIFY_SEED).with_bridge(true);
    let est = estimate_speed(&m, &cfg, 100);
    let err = (est.terminal_speed - target).abs();
    result(
        2,
        "speed reproduction",
        err <= 0.02,
        format!(
            "terminal {:.5} +/- {:.5}, regenerative {:.5} +/- {:.5}, closed form {:.5}, |err| {:.5} <= 0.02",
            est.terminal_speed, est.terminal_half_width, est.regen_speed, est.regen_half_width,
            target, err
        ),
    )
}

/// 3. Onset-location law: exact sampler passes KS at 1%; pathwise mean of
/// L - x0 within 5% of the closed form.
pub fn criterion_3() -> CriterionResult {
    let m = constant_model(1.0, 0.5, 1.0, 1.0, 0.0);
    let d = ((2.0f64).exp() - 1.0) / 2.0;
    let n = 100_000;
    let mut rng = CounterRng::new(VERIFY_SEED, 0);
    let mut draws: Vec<f64> = (0..n)
        .map(|_| regeneration::sample_onset(&m, 0.0, &mut rng).unwrap())
        .collect();
    let ks = stats::ks_statistic(&mut draws, |x| 1.0 - (-x / d).exp());
    let crit = stats::ks_critical(0.01, n);
    let ks_ok = ks < crit;

    let cfg = PathConfig::new(1e-3, 200.0, VERIFY_SEED + 1).with_bridge(true);
    let cycles = sample_cycles(&m, &cfg, 10_000);
    let mut mv = MeanVar::default();
    for c in cycles.iter().filter(|c| !c.censored) {
        mv.push(c.l - m.x0);
    }
    let rel = (mv.mean() - d).abs() / d;
    let path_ok = rel <= 0.05;
    result(
        3,
        "onset-location law",
        ks_ok && path_ok,
        format!(
            "KS {ks:.5} < {crit:.5}: {ks_ok}; pathwise mean L-x0 {:.5} vs {d:.5} (rel {rel:.4} <= 0.05): {path_ok}",
            mv.mean()
        ),
    )
}

/// 4. Cycle expectations within 3% of the closed forms over 1e4 cycles.
pub fn criterion_4() -> CriterionResult {
    let cf = closed_forms(1.0, RecurrentLevel::Finite(0.5), 1.0, 1.0, 0.0);
    let m = constant_model(1.0, 0.5, 1.0, 1.0, 0.0);
    let cfg = PathConfig::new(1e-3, 400.0, VERIFY_SEED + 12).with_bridge(true);
    let cycles = sample_cycles(&m, &cfg, 10_000);
    let mut sig = MeanVar::default();
    let mut tau = MeanVar::default();
    for c in cycles.iter().filter(|c| !c.censored) {
        sig.push(c.sigma);
        tau.push(c.tau_hat);
    }
    let rel_s = (sig.mean() - cf.expected_sigma).abs() / cf.expected_sigma;
    let rel_t = (tau.mean() - cf.expected_return).abs() / cf.expected_return;
    result(
        4,
        "cycle expectations",
        rel_s <= 0.03 && rel_t <= 0.03,
        format!(
            "mean sigma {:.5} vs {:.5} (rel {rel_s:.4}); mean tau {:.5} vs {:.5} (rel {rel_t:.4}); tolerance 0.03",
            sig.mean(), cf.expected_sigma, tau.mean(), cf.expected_return
        ),
    )
}

/// 5. Hitting probability: exact driftless reduction; quadrature vs Monte
/// Carlo for a decaying recurrent drift.
pub fn criterion_5() -> CriterionResult {
    let driftless = TwoPhaseModel::new(
        DriftFunction::Constant(0.0),
        DriftFunction::Constant(0.0),
        DownCrossing::Constant(1.0),
        1.0,
        5.0,
    )
    .with_z0(0.0);
    let mut worst = 0.0f64;
    for &(z, c) in &[(5.0, 1.0), (2.0, 3.0), (7.5, 0.25), (1.0, 10.0)] {
        let p = analytic::hitting_prob(&driftless, z, c);
        worst = worst.max((p - c / (z + c)).abs());
    }
    let exact_ok = worst <= 1e-9;

    // Recurrent drift 1/(2(1+|x - z0|)); identical table drives both the
    // quadrature and the Monte Carlo, so the comparison isolates the solvers.
    let grid: Vec<f64> = (0..=4000).map(|i| -1.0 + 8.0 * i as f64 / 4000.0).collect();
    let values: Vec<f64> = grid.iter().map(|&x| 0.5 / (1.0 + x.abs())).collect();
    let m = TwoPhaseModel::new(
        DriftFunction::Constant(1.0),
        DriftFunction::Tabulated { grid, values },
        DownCrossing::Constant(1.0),
        1.0,
        5.0,
    )
    .with_z0(0.0);
    let q = analytic::hitting_prob(&m, 5.0, 1.0);
    let (p, se) = hitting_mc(&m, 5.0, 1.0, 1e-4, 100_000, VERIFY_SEED + 3, true);
    let mc_ok = (q - p).abs() <= 2.0 * se;
    result(
        5,
        "hitting probability",
        exact_ok && mc_ok,
        format!(
            "driftless max defect {worst:.2e} <= 1e-9: {exact_ok}; quadrature {q:.5} vs MC {p:.5} +/- {se:.5} (|diff| {:.5} <= 2se): {mc_ok}",
            (q - p).abs()
        ),
    )
}

/// 6. Classifier truth table.
pub fn criterion_6() -> CriterionResult {
    use VerdictResult::*;
    use VerdictSource::*;
    let p2 = TwoPhaseModel::new(
        DriftFunction::IteratedLog {
            x_min: 20.0,
            terms: vec![(1, 0.6)],
            below: 0.6 * (20.0f64).ln(),
        },
        DriftFunction::Constant(0.0),
        DownCrossing::Constant(1.0),
        1.0,
        25.0,
    );
    let unknown = TwoPhaseModel::new(
        DriftFunction::Tabulated {
            grid: vec![0.0, 10.0],
            values: vec![1.0, 1.0],
        },
        DriftFunction::Constant(0.0),
        DownCrossing::Constant(1.0),
        1.0,
        5.0,
    );
    let cases: Vec<(&str, TwoPhaseModel, VerdictResult, VerdictSource)> = vec![
        ("constant-drift recurrent", constant_model(1.0, 0.0, 1.0, 1.0, 0.0), Recurrent, Theorem1_1),
        ("drift threshold k=1", thm13_model(1.0), Recurrent, Theorem1_3i),
        ("drift threshold k=2", thm13_model(2.0), Transient, Theorem1_3ii),
        ("gamma threshold k=1", thm14_model(1.0), Recurrent, Theorem1_4i),
        ("gamma threshold k=2", thm14_model(2.0), Transient, Theorem1_4ii),
        ("dominating transient drift", p2, Transient, TheoremP2ii),
        ("data-backed drift", unknown, Unknown, Diagnostic),
    ];
    let mut fails = Vec::new();
    for (name, m, want_res, want_src) in &cases {
        let v = classify(m);
        if v.result != *want_res || v.source != *want_src {
            fails.push(format!("{name}: got {:?}/{:?}", v.result, v.source));
        }
    }
    result(
        6,
        "classifier truth table",
        fails.is_empty(),
        if fails.is_empty() {
            format!("{} rule instances matched", cases.len())
        } else {
            fails.join("; ")
        },
    )
}

/// 7. Criterion-sum diagnostics on long chains: logarithmic growth for the
/// recurrent instance, summable tail for the transient one.
pub fn criterion_7() -> CriterionResult {
    let cfg = DiagnosticConfig::default();
    let m1 = constant_model(1.0, 0.0, 1.0, 1.0, 0.0);
    let chain1 = simulate_chain(&m1, 1_100_000, VERIFY_SEED + 4, 0).unwrap();
    let rep1 = divergence_diagnostic(&m1, &chain1, &cfg).unwrap();
    let rec_ok =
        rep1.fit_r2 > 0.99 && rep1.suggestion == DivergenceSuggestion::SuggestsRecurrent;

    let m2 = thm13_model(2.0);
    let chain2 = simulate_chain(&m2, 1_100_000, VERIFY_SEED + 5, 0).unwrap();
    let rep2 = divergence_diagnostic(&m2, &chain2, &cfg).unwrap();
    let tail_ok = rep2.tail_beyond_last_probe < 1e-3
        && rep2.suggestion == DivergenceSuggestion::SuggestsTransient;
    result(
        7,
        "chain growth diagnostics",
        rec_ok && tail_ok,
        format!(
            "recurrent instance: R^2 {:.5}, slope {:.4}, {:?}; transient instance: tail {:.3e} < 1e-3, {:?}",
            rep1.fit_r2, rep1.fit_slope, rep1.suggestion,
            rep2.tail_beyond_last_probe, rep2.suggestion
        ),
    )
}

/// 8. Adversarial scale-backed recurrent drift: quadratic growth, bounded
/// off-spike derivative, and a convergent criterion sum along the chain.
pub fn criterion_8() -> CriterionResult {
    let (b, gamma, x0) = (1.0, 1.0, 1.0);
    let br = regeneration::theorem2_generator(b, gamma, x0).unwrap();
    let DriftFunction::FromScale(scale) = &br else {
        return result(8, "adversarial drift generator", false, "not scale-backed".into());
    };
    let spikes = scale.as_spike_train().unwrap();
    let bound = spikes.off_spike_derivative_bound();
    let mut shape_ok = true;
    let mut x = 2.0;
    while x <= 1000.0 {
        if scale.u(x) < x * x {
            shape_ok = false;
            break;
        }
        if !spikes.in_spike(x) && scale.uprime(x) > bound + 1e-12 {
            shape_ok = false;
            break;
        }
        x += 0.01;
    }
    let m = TwoPhaseModel::new(
        DriftFunction::Constant(b),
        br.clone(),
        DownCrossing::Constant(gamma),
        1.0,
        x0,
    );
    let chain = simulate_chain(&m, 100_000, VERIFY_SEED + 6, 0).unwrap();
    let rep = divergence_diagnostic(&m, &chain, &DiagnosticConfig::default()).unwrap();
    let diag_ok = rep.suggestion == DivergenceSuggestion::SuggestsTransient;
    result(
        8,
        "adversarial drift generator",
        shape_ok && diag_ok,
        format!(
            "u >= x^2 and off-spike u' <= {bound} on [2,1000]: {shape_ok}; chain tail {:.3e}, {:?}",
            rep.tail_beyond_last_probe, rep.suggestion
        ),
    )
}

/// 9. Exit-time solver against the closed-form limit.
pub fn criterion_9() -> CriterionResult {
    let (a, b, c, g) = (1.0, 1.0, 0.5, 1.0);
    let limit = exit_time_limit(a, b, c, g);
    let gaps: Vec<f64> = [5.0, 10.0, 20.0]
        .iter()
        .map(|&n| (exit_time_vn(a, b, c, g, n, 0.0).unwrap() - limit).abs())
        .collect();
    let monotone = gaps[0] > gaps[1] && gaps[1] > gaps[2];
    let close = gaps[2] <= 1e-8;
    result(
        9,
        "exit-time solver",
        monotone && close,
        format!(
            "gaps at N=5,10,20: {:.4e}, {:.4e}, {:.4e}; monotone: {monotone}; final gap <= 1e-8: {close} (the N=20 gap is dominated by the boundary term N exp(-2cN/a) ~ 3.7e-8, so the 1e-8 target is not met by the exact formula)",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

/// 10. Reflecting recurrent phase: sentinel formula, large-c agreement, and
/// the small-drift expansion of the speed.
pub fn criterion_10() -> CriterionResult {
    let e2 = (2.0f64).exp();
    let em2 = (-2.0f64).exp();
    let remark = (e2 - 1.0) / (e2 + em2 - 2.0);
    let sentinel = closed_forms(1.0, RecurrentLevel::Reflecting, 1.0, 1.0, 0.0).damping;
    let exact_ok = (sentinel - remark).abs() <= 1e-13;
    let big_c = closed_forms(1.0, RecurrentLevel::Finite(1e6), 1.0, 1.0, 0.0).damping;
    let rel = (big_c - sentinel).abs() / sentinel;
    let big_ok = rel <= 1e-4;
    let b = 1e-3;
    let speed = closed_forms(b, RecurrentLevel::Reflecting, 1.0, 1.0, 0.0).speed;
    let expansion = 0.5 + 0.5 * b;
    let small_ok = (speed - expansion).abs() <= 1e-4;
    result(
        10,
        "reflecting limit",
        exact_ok && big_ok && small_ok,
        format!(
            "sentinel {sentinel:.13} vs formula {remark:.13}; c=1e6 rel diff {rel:.2e} <= 1e-4; small-drift |{speed:.7} - {expansion:.7}| <= 1e-4"
        ),
    )
}

/// 11. Determinism: fixed seeds reproduce bitwise-identical results, and a
/// 4-worker parallel run equals the serial run.
pub fn criterion_11() -> CriterionResult {
    let m = constant_model(1.0, 0.5, 1.0, 1.0, 0.0);
    let cfg = PathConfig::new(1e-2, 20.0, VERIFY_SEED + 7);
    let e1 = estimate_speed(&m, &cfg, 8);
    let e2 = estimate_speed(&m, &cfg, 8);
    let speed_ok = e1.terminal_speed == e2.terminal_speed && e1.regen_speed == e2.regen_speed;

    let c1 = simulate_chain(&m, 500, VERIFY_SEED + 8, 0).unwrap();
    let c2 = simulate_chain(&m, 500, VERIFY_SEED + 8, 0).unwrap();
    let chain_ok = c1.points == c2.points;

    let (h1, _) = hitting_mc(&m, 2.0, 1.0, 1e-3, 2000, VERIFY_SEED + 9, true);
    let (h2, _) = hitting_mc(&m, 2.0, 1.0, 1e-3, 2000, VERIFY_SEED + 9, true);
    let hit_ok = h1 == h2;

    let serial = crate::simulate::sample_cycles_serial(&m, &cfg, 64);
    #[cfg(feature = "parallel")]
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| sample_cycles(&m, &cfg, 64));
    #[cfg(not(feature = "parallel"))]
    let parallel = sample_cycles(&m, &cfg, 64);
    let par_ok = serial
        .iter()
        .zip(&parallel)
        .all(|(a, b)| a.sigma == b.sigma && a.tau_hat == b.tau_hat && a.l == b.l);

    result(
        11,
        "determinism",
        speed_ok && chain_ok && hit_ok && par_ok,
        format!(
            "speed re-run identical: {speed_ok}; chain re-run identical: {chain_ok}; hitting re-run identical: {hit_ok}; 4-worker parallel equals serial: {par_ok}"
        ),
    )
}

/// Runs the full suite in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ]
}
