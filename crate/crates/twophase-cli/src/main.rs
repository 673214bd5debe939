//! Command-line front end: model configs in, experiment tables out, with the
//! config hash and seed stamped into every output file.

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use twophase::analytic::{self, closed_forms, RecurrentLevel};
use twophase::config::ExperimentConfig;
use twophase::model::{validate_model, DriftFunction};
use twophase::regeneration::{
    classify, divergence_diagnostic, sample_onset, simulate_chain, theorem2_generator,
    DiagnosticConfig,
};
use twophase::rng::CounterRng;
use twophase::simulate::{estimate_speed, hitting_mc, PathConfig};
use twophase::verify;

#[derive(Parser)]
#[command(
    name = "twophase",
    about = "Simulation and analytic verification for diffusions with a two-phase, running-maximum-dependent drift"
)]
struct Cli {
    /// Model/experiment config (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed (the TWOPHASE_SEED environment variable
    /// overrides both).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[arg(long, global = true)]
    chain_length: Option<usize>,
    /// Worker thread count (0 = library default).
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check model admissibility and the drift integral conditions.
    Validate,
    /// Rule-based transience/recurrence verdict.
    Classify,
    /// Speed estimators with a closed-form comparison when available.
    Speed,
    /// Sample the onset-location chain and run the divergence diagnostic.
    Chain,
    /// Empirical versus analytic onset-location tail.
    OnsetDist,
    /// Hitting probability: quadrature versus Monte Carlo.
    Hitting {
        #[arg(long)]
        z: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        mc_dt: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
    /// Closed-form constants of the constant-phase model.
    ClosedForms {
        #[arg(long)]
        b: f64,
        /// Recurrent drift level; "inf" selects the reflecting limit.
        #[arg(long)]
        c: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
    },
    /// Generate the adversarial scale-backed recurrent drift.
    GenerateThm2 {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        x0: f64,
    },
    /// Run the full verification suite.
    Verify,
}

#[derive(Debug)]
enum CliError {
    /// Config or model problems: exit code 1.
    Validation(String),
    /// Everything else: exit code 2.
    Runtime(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

struct Ctx {
    cfg: Option<ExperimentConfig>,
    base_dir: PathBuf,
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn config(&self) -> Result<&ExperimentConfig, CliError> {
        self.cfg
            .as_ref()
            .ok_or_else(|| CliError::Validation("this subcommand requires --config".into()))
    }

    fn model(&self) -> Result<twophase::TwoPhaseModel, CliError> {
        let cfg = self.config()?;
        let m = cfg
            .to_model(&self.base_dir)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let report = validate_model(&m).map_err(|e| CliError::Validation(e.to_string()))?;
        if !report.is_valid() {
            return Err(CliError::Validation(format!(
                "model fails admissibility: {}",
                serde_json::to_string(&report).unwrap()
            )));
        }
        Ok(m)
    }

    fn hash(&self) -> String {
        self.cfg.as_ref().map_or_else(|| "none".into(), |c| c.hash())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        let body = serde_json::json!({
            "config_hash": self.hash(),
            "seed": self.seed,
            "data": value,
        });
        fs::write(&path, serde_json::to_string_pretty(&body).unwrap())?;
        Ok(path)
    }

    fn csv_writer(&self, name: &str) -> Result<(csv::Writer<fs::File>, PathBuf), CliError> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        let mut file = fs::File::create(&path)?;
        writeln!(file, "# config_hash={} seed={}", self.hash(), self.seed)?;
        Ok((csv::Writer::from_writer(file), path))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            println!(
                "{}",
                serde_json::json!({"error": "validation", "message": msg})
            );
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            println!(
                "{}",
                serde_json::json!({"error": "runtime", "message": msg})
            );
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.parallel {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }

    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            Some(
                ExperimentConfig::parse_str(&text)
                    .map_err(|e| CliError::Validation(e.to_string()))?,
            )
        }
        None => None,
    };
    if let Some(c) = cfg.as_mut() {
        if let Some(dt) = cli.dt {
            c.run.dt = dt;
        }
        if let Some(h) = cli.horizon {
            c.run.horizon = h;
        }
        if let Some(r) = cli.replicates {
            c.run.replicates = r;
        }
        if let Some(n) = cli.chain_length {
            c.run.chain_length = n;
        }
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        if let Ok(env_seed) = std::env::var("TWOPHASE_SEED") {
            c.seed = env_seed
                .parse()
                .map_err(|_| CliError::Validation("TWOPHASE_SEED must be an integer".into()))?;
        }
    }
    let seed = std::env::var("TWOPHASE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .or(cli.seed)
        .or(cfg.as_ref().map(|c| c.seed))
        .unwrap_or(0);
    let base_dir = cli
        .config
        .as_ref()
        .and_then(|p| p.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        cfg,
        base_dir,
        out: cli.out.clone(),
        seed,
    };

    match cli.cmd {
        Cmd::Validate => cmd_validate(&ctx),
        Cmd::Classify => cmd_classify(&ctx),
        Cmd::Speed => cmd_speed(&ctx),
        Cmd::Chain => cmd_chain(&ctx),
        Cmd::OnsetDist => cmd_onset_dist(&ctx),
        Cmd::Hitting { z, c, mc_dt, paths } => cmd_hitting(&ctx, z, c, mc_dt, paths),
        Cmd::ClosedForms { b, c, gamma, a, x0 } => cmd_closed_forms(&ctx, b, &c, gamma, a, x0),
        Cmd::GenerateThm2 { b, gamma, x0 } => cmd_generate(&ctx, b, gamma, x0),
        Cmd::Verify => cmd_verify(&ctx),
    }
}

fn cmd_validate(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let m = cfg
        .to_model(&ctx.base_dir)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let report = validate_model(&m).map_err(|e| CliError::Validation(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    ctx.write_json("validation.json", &report)?;
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::Validation("model fails admissibility".into()))
    }
}

fn cmd_classify(ctx: &Ctx) -> Result<(), CliError> {
    let m = ctx.model()?;
    let v = classify(&m);
    println!("{}", serde_json::to_string(&v).unwrap());
    ctx.write_json("verdict.json", &v)?;
    Ok(())
}

fn cmd_speed(ctx: &Ctx) -> Result<(), CliError> {
    let m = ctx.model()?;
    let run = &ctx.config()?.run;
    let cfg = PathConfig::new(run.dt, run.horizon, ctx.seed).with_bridge(run.bridge_correction);
    let est = estimate_speed(&m, &cfg, run.replicates);
    let closed: Option<f64> = match (&m.bt, &m.br, &m.gamma) {
        (
            DriftFunction::Constant(b),
            DriftFunction::Constant(c),
            twophase::DownCrossing::Constant(g),
        ) if *b > 0.0 && *c > 0.0 => {
            Some(closed_forms(*b, RecurrentLevel::Finite(*c), *g, m.a, m.x0).speed)
        }
        _ => None,
    };
    let (mut w, path) = ctx.csv_writer("speed.csv")?;
    w.write_record(["estimator", "value", "half_width", "closed_form"])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let closed_str = closed.map_or(String::new(), |v| format!("{v}"));
    for (name, v, hw) in [
        ("terminal", est.terminal_speed, est.terminal_half_width),
        ("regenerative", est.regen_speed, est.regen_half_width),
    ] {
        w.write_record([name, &v.to_string(), &hw.to_string(), &closed_str])
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush()?;
    println!(
        "{}",
        serde_json::json!({
            "estimate": est,
            "closed_form": closed,
            "output": path.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_chain(ctx: &Ctx) -> Result<(), CliError> {
    let m = ctx.model()?;
    let run = &ctx.config()?.run;
    let chain = simulate_chain(&m, run.chain_length, ctx.seed, 0)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = divergence_diagnostic(&m, &chain, &DiagnosticConfig::default())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let (mut w, csv_path) = ctx.csv_writer("chain.csv")?;
    w.write_record(["n", "L_n", "K_n", "H", "S_n"])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut s = 0.0;
    for (n, &l) in chain.points.iter().enumerate() {
        let h = analytic::criterion_h(&m, l);
        s += h;
        let k = l - m.gamma.eval(l);
        w.write_record([
            n.to_string(),
            l.to_string(),
            k.to_string(),
            h.to_string(),
            s.to_string(),
        ])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush()?;
    let json_path = ctx.write_json("divergence.json", &report)?;
    println!(
        "{}",
        serde_json::json!({
            "suggestion": report.suggestion,
            "total": report.total,
            "tail_beyond_last_probe": report.tail_beyond_last_probe,
            "chain_csv": csv_path.display().to_string(),
            "report_json": json_path.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_onset_dist(ctx: &Ctx) -> Result<(), CliError> {
    let m = ctx.model()?;
    let run = &ctx.config()?.run;
    let probes = if run.probes.is_empty() {
        vec![1.0, 2.0, 4.0, 8.0, 16.0]
    } else {
        run.probes.clone()
    };
    let n = run.replicates.max(1000);
    let mut rng = CounterRng::new(ctx.seed, 0);
    let draws: Vec<f64> = (0..n)
        .map(|_| sample_onset(&m, m.x0, &mut rng).map_err(|e| CliError::Runtime(e.to_string())))
        .collect::<Result<_, _>>()?;
    let (mut w, path) = ctx.csv_writer("onset_dist.csv")?;
    w.write_record(["y", "analytic_tail", "empirical_tail", "std_error"])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    for &y in &probes {
        let analytic_tail =
            analytic::onset_tail(&m, m.x0, y).map_err(|e| CliError::Runtime(e.to_string()))?;
        let emp = draws.iter().filter(|&&l| l > m.x0 + y).count() as f64 / n as f64;
        let se = (emp * (1.0 - emp) / n as f64).sqrt();
        w.write_record([
            y.to_string(),
            analytic_tail.to_string(),
            emp.to_string(),
            se.to_string(),
        ])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush()?;
    println!(
        "{}",
        serde_json::json!({"draws": n, "output": path.display().to_string()})
    );
    Ok(())
}

fn cmd_hitting(
    ctx: &Ctx,
    z: Option<f64>,
    c: Option<f64>,
    mc_dt: f64,
    paths: usize,
) -> Result<(), CliError> {
    let m = ctx.model()?;
    let run = &ctx.config()?.run;
    let z = z
        .or(run.hitting_z)
        .ok_or_else(|| CliError::Validation("hitting needs --z (or run.hitting_z)".into()))?;
    let c = c
        .or(run.hitting_c)
        .ok_or_else(|| CliError::Validation("hitting needs --c (or run.hitting_c)".into()))?;
    let q = analytic::hitting_prob(&m, z, c);
    let (p, se) = hitting_mc(&m, z, c, mc_dt, paths, ctx.seed, true);
    let (mut w, path) = ctx.csv_writer("hitting.csv")?;
    w.write_record(["z", "c", "quadrature", "monte_carlo", "std_error"])
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_record([
        z.to_string(),
        c.to_string(),
        q.to_string(),
        p.to_string(),
        se.to_string(),
    ])
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    w.flush()?;
    println!(
        "{}",
        serde_json::json!({"quadrature": q, "monte_carlo": p, "std_error": se, "output": path.display().to_string()})
    );
    Ok(())
}

fn cmd_closed_forms(
    ctx: &Ctx,
    b: f64,
    c: &str,
    gamma: f64,
    a: f64,
    x0: f64,
) -> Result<(), CliError> {
    let level = if c.eq_ignore_ascii_case("inf") || c == "+inf" {
        RecurrentLevel::Reflecting
    } else {
        let v: f64 = c
            .parse()
            .map_err(|_| CliError::Validation(format!("bad recurrent level {c:?}")))?;
        if !(v > 0.0) {
            return Err(CliError::Validation("recurrent level must be positive".into()));
        }
        RecurrentLevel::Finite(v)
    };
    if !(b > 0.0 && gamma > 0.0 && a > 0.0) {
        return Err(CliError::Validation(
            "b, gamma and a must be positive".into(),
        ));
    }
    let bundle = closed_forms(b, level, gamma, a, x0);
    println!("{}", serde_json::to_string_pretty(&bundle).unwrap());
    ctx.write_json("closed_forms.json", &bundle)?;
    Ok(())
}

fn cmd_generate(ctx: &Ctx, b: f64, gamma: f64, x0: f64) -> Result<(), CliError> {
    let drift = theorem2_generator(b, gamma, x0).map_err(|e| CliError::Validation(e.to_string()))?;
    let DriftFunction::FromScale(scale) = &drift else {
        return Err(CliError::Runtime("generator did not return scale data".into()));
    };
    fs::create_dir_all(&ctx.out)?;
    let path = ctx.out.join("thm2_scale.json");
    fs::write(&path, serde_json::to_string(&scale).unwrap())?;
    println!(
        "{}",
        serde_json::json!({
            "scale_file": path.display().to_string(),
            "usage": "reference it from a config as br = { kind = \"from-scale-file\", path = \"thm2_scale.json\" }",
        })
    );
    Ok(())
}

fn cmd_verify(ctx: &Ctx) -> Result<(), CliError> {
    let results = verify::run_all();
    for r in &results {
        println!(
            "criterion {:>2} {:<28} {}  {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    ctx.write_json("verify.json", &results)?;
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "{}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    Ok(())
}
