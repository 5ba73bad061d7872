//! Command-line entry points: simulate, train, evaluate, calibrate, render.

mod render;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use crowdnav_core::conformal::CoverageAccumulator;
use crowdnav_core::crowd::scenario::{make_ood_variant, OodVariant, ScenarioConfig};
use crowdnav_core::metrics::{campaign_csv, run_campaign, EvalProtocol};
use crowdnav_core::policy::load_checkpoint;
use crowdnav_core::runner::{replay_coverage, run_episode, RobotPolicy, RunnerConfig};
use crowdnav_core::trace::EpisodeTrace;
use crowdnav_core::trainer::{curves_csv, train_crowd, TrainerConfig};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "crowdnav", version, about = "Crowd-navigation simulation and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll a policy through one scenario episode and write its trace.
    Simulate(SimulateArgs),
    /// Train a constrained policy and emit checkpoint, curves, and manifest.
    Train(TrainArgs),
    /// Run an evaluation campaign and emit the metrics CSV.
    Evaluate(EvaluateArgs),
    /// Replay traces through the conformal layer and emit per-horizon coverage.
    Calibrate(CalibrateArgs),
    /// Render a trace to per-frame SVG files.
    Render(RenderArgs),
}

#[derive(Args)]
struct ScenarioOpt {
    /// Scenario JSON path, or one of the presets `default` / `desk`.
    #[arg(long, default_value = "default")]
    scenario: String,
    /// Apply an out-of-distribution variant: rushing | sf | groups.
    #[arg(long)]
    ood: Option<String>,
}

impl ScenarioOpt {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let base = match self.scenario.as_str() {
            "default" => ScenarioConfig::default(),
            "desk" => ScenarioConfig::desk(),
            path => {
                let raw = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read scenario file '{path}'"))?;
                serde_json::from_str(&raw)
                    .with_context(|| format!("malformed scenario config '{path}'"))?
            }
        };
        let cfg = match &self.ood {
            None => base,
            Some(v) => {
                let variant: OodVariant = v.parse().map_err(|e: String| anyhow!(e))?;
                make_ood_variant(&base, variant)
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioOpt,
    /// orca | sf | mpc | checkpoint:<path>
    #[arg(long, default_value = "orca")]
    policy: String,
    #[arg(long, default_value_t = 0, env = "CROWDNAV_SEED")]
    seed: u64,
    /// Output trace path (JSONL).
    #[arg(long, default_value = "trace.jsonl", env = "CROWDNAV_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    scenario: ScenarioOpt,
    /// Trainer preset: desk | paper.
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long)]
    cost_limit: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    envs: Option<usize>,
    #[arg(long, default_value_t = 0, env = "CROWDNAV_SEED")]
    seed: u64,
    /// Freeze the Lagrange multiplier at zero (unconstrained ablation).
    #[arg(long)]
    freeze_lambda: bool,
    /// Zero the uncertainty slots in the observation (ablation).
    #[arg(long)]
    no_uncertainty_obs: bool,
    /// Output directory.
    #[arg(long, default_value = "run", env = "CROWDNAV_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    scenario: ScenarioOpt,
    /// orca | sf | mpc | checkpoint:<path>; repeat for multiple train seeds.
    #[arg(long, required = true)]
    policy: Vec<String>,
    /// Episodes per test seed.
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    /// Number of test seeds (0..n).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Output directory for metrics.csv and the manifest.
    #[arg(long, default_value = "eval", env = "CROWDNAV_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Trace file(s) to replay.
    #[arg(long, required = true)]
    trace: Vec<PathBuf>,
    /// Coverage level parameter.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Output CSV path.
    #[arg(long, default_value = "coverage.csv", env = "CROWDNAV_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Output directory for per-frame SVGs.
    #[arg(long, default_value = "frames", env = "CROWDNAV_OUT")]
    out: PathBuf,
    /// Pixels per meter.
    #[arg(long, default_value_t = 50.0)]
    scale: f64,
}

fn parse_policy(spec: &str) -> Result<RobotPolicy> {
    match spec {
        "orca" => Ok(RobotPolicy::Orca),
        "sf" => Ok(RobotPolicy::SocialForce),
        "mpc" => Ok(RobotPolicy::mpc(Default::default(), 0)),
        other => match other.strip_prefix("checkpoint:") {
            Some(path) => {
                let params = load_checkpoint(Path::new(path))
                    .with_context(|| format!("cannot load checkpoint '{path}'"))?;
                Ok(RobotPolicy::Network(Box::new(params)))
            }
            None => Err(anyhow!(
                "unknown policy '{other}' (expected orca|sf|mpc|checkpoint:<path>)"
            )),
        },
    }
}

fn timestamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{now}")
}

fn write_manifest(
    dir: &Path,
    config: serde_json::Value,
    seeds: &[u64],
    outputs: &[&str],
) -> Result<()> {
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "seeds": seeds,
        "outputs": outputs,
        "unix_time": timestamp(),
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let scenario = args.scenario.resolve()?;
    let runner = RunnerConfig::default();
    let mut policy = parse_policy(&args.policy)?;
    let trace = run_episode(&scenario, &runner, &mut policy, args.seed)?;
    trace.save(&args.out)?;
    println!(
        "episode {:?} in {} steps -> {}",
        trace.outcome(),
        trace.steps.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let scenario = args.scenario.resolve()?;
    let mut tcfg = match args.preset.as_str() {
        "desk" => TrainerConfig::desk(),
        "paper" => TrainerConfig::paper(),
        other => return Err(anyhow!("unknown preset '{other}' (expected desk|paper)")),
    };
    if let Some(v) = args.cost_limit {
        tcfg.cost_limit = v;
    }
    if let Some(v) = args.steps {
        tcfg.total_steps = v;
    }
    if let Some(v) = args.envs {
        tcfg.envs = v;
    }
    tcfg.freeze_lambda = args.freeze_lambda;
    let mut runner = RunnerConfig::default();
    runner.zero_uncertainty_obs = args.no_uncertainty_obs;

    std::fs::create_dir_all(&args.out)?;
    let out = train_crowd(&scenario, &runner, &tcfg, args.seed)?;
    let ckpt = args.out.join("checkpoint.json");
    crowdnav_core::policy::save_checkpoint(&out.params, &ckpt)?;
    std::fs::write(args.out.join("curves.csv"), curves_csv(&out.curves))?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "scenario": scenario,
            "trainer": tcfg,
            "runner": runner,
        }),
        &[args.seed],
        &["checkpoint.json", "curves.csv"],
    )?;
    println!(
        "trained {} iterations, final lambda {:.4} -> {}",
        out.curves.len(),
        out.final_lambda,
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let scenario = args.scenario.resolve()?;
    let runner = RunnerConfig::default();
    let policies: Vec<RobotPolicy> = args
        .policy
        .iter()
        .map(|s| parse_policy(s))
        .collect::<Result<_>>()?;
    let protocol = EvalProtocol {
        episodes_per_seed: args.episodes,
        test_seeds: (0..args.seeds).collect(),
    };
    let label = args
        .scenario
        .ood
        .clone()
        .unwrap_or_else(|| "in-distribution".to_string());
    let rows = run_campaign(
        &policies,
        &[(label, scenario.clone())],
        &runner,
        &protocol,
    )?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("metrics.csv"), campaign_csv(&rows))?;
    write_manifest(
        &args.out,
        serde_json::json!({
            "scenario": scenario,
            "policies": args.policy,
            "episodes_per_seed": args.episodes,
            "test_seeds": args.seeds,
        }),
        &protocol.test_seeds,
        &["metrics.csv"],
    )?;
    for row in &rows {
        println!(
            "{}: SR {:.3} CR {:.3} TR {:.3} ITR {:.3} over {} episodes",
            row.variant, row.mean.sr, row.mean.cr, row.mean.tr, row.mean.itr, row.mean.episodes
        );
    }
    println!("metrics -> {}", args.out.join("metrics.csv").display());
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let mut runner = RunnerConfig::default();
    runner.dtaci.alpha = args.alpha;
    let mut total: Option<CoverageAccumulator> = None;
    for path in &args.trace {
        let trace = EpisodeTrace::load(path)
            .with_context(|| format!("cannot read trace '{}'", path.display()))?;
        let cov = replay_coverage(&trace, &runner, trace.header.seed);
        match &mut total {
            None => total = Some(cov),
            Some(t) => t.merge(&cov),
        }
    }
    let total = total.ok_or_else(|| anyhow!("no traces given"))?;
    let mut csv = String::from("k,coverage,samples\n");
    for (k, rate) in total.rates().iter().enumerate() {
        csv.push_str(&format!("{},{:.6},{}\n", k + 1, rate, total.total[k]));
        println!("k={} coverage {:.4} ({} samples)", k + 1, rate, total.total[k]);
    }
    std::fs::write(&args.out, csv)?;
    println!("coverage -> {}", args.out.display());
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let trace = EpisodeTrace::load(&args.trace)
        .with_context(|| format!("cannot read trace '{}'", args.trace.display()))?;
    std::fs::create_dir_all(&args.out)?;
    let frames = render::render_frames(&trace, &args.out, args.scale)?;
    println!("{frames} frames -> {}", args.out.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Render(args) => cmd_render(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        // Input problems (missing or malformed files, bad flags) are usage
        // errors; anything else is an internal failure.
        let usage = err.chain().any(|c| {
            c.downcast_ref::<std::io::Error>().is_some()
                || c.is::<serde_json::Error>()
        }) || err.to_string().contains("unknown")
            || err.to_string().contains("cannot")
            || err.to_string().contains("malformed")
            || err.to_string().contains("invalid");
        std::process::exit(if usage { 2 } else { 1 });
    }
}
