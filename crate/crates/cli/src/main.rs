use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use dsu_core::agents::{Agent, AgentVariant, Controller, GreedyPolicy, RandomPolicy};
use dsu_core::config::KeyValues;
use dsu_core::harness::{
    evaluate_controller, export_metrics, EvalReport, ExperimentConfig, Preset, RunSummary, Trainer,
    SUMMARY_WINDOW,
};
use dsu_core::oracle;
use dsu_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dsu", version, about = "Dynamic status update for caching-enabled IoT networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent on every configured seed.
    Train(TrainArgs),
    /// Evaluate a baseline or a trained agent.
    Eval(EvalArgs),
    /// Solve a small instance exactly.
    Oracle(OracleArgs),
    /// Train several variants on the same seeds.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Starting point: paper, desk or tiny.
    #[arg(long)]
    preset: Option<Preset>,
    /// Key-value config file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` entry (any config key, including environment keys).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// ddr-dsu, dr-dsu, ddq-dsu or dq-dsu; Q variants accept `name:gamma`.
    #[arg(long)]
    variant: Option<String>,
    /// Discount factor for the Q variants.
    #[arg(long)]
    gamma: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Step size of the average-reward estimate.
    #[arg(long)]
    avg_lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Training iterations between target-network syncs.
    #[arg(long)]
    sync_every: Option<u64>,
    /// Global gradient-norm clip per network.
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Comma-separated hidden widths.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    replay_capacity: Option<usize>,
    /// Environment steps collected before training starts.
    #[arg(long)]
    replay_start: Option<u64>,
    /// Total environment steps, warm-up included.
    #[arg(long)]
    total_steps: Option<u64>,
    /// Steps over which exploration falls to its floor (default: replay capacity).
    #[arg(long)]
    anneal_steps: Option<u64>,
    /// Training iterations between evaluations.
    #[arg(long)]
    eval_every: Option<u64>,
    /// Decisions per evaluation.
    #[arg(long)]
    eval_decisions: Option<usize>,
    /// Exploration rate during evaluation.
    #[arg(long)]
    eval_epsilon: Option<f64>,
    /// Starting average-reward estimate (default: worst per-step reward).
    #[arg(long, allow_hyphen_values = true)]
    initial_avg_reward: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
}

impl ConfigArgs {
    fn build(&self, default: Preset) -> Result<ExperimentConfig> {
        let mut kv = match &self.config {
            Some(p) => KeyValues::load(p)?,
            None => KeyValues::default(),
        };
        for entry in &self.set {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{entry}`")))?;
            kv.set(k.trim(), v.trim());
        }
        let flags: [(&str, Option<String>); 17] = [
            ("variant", self.variant.clone()),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("avg_lr", self.avg_lr.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("sync_every", self.sync_every.map(|v| v.to_string())),
            ("clip_norm", self.clip_norm.map(|v| v.to_string())),
            ("hidden", self.hidden.clone()),
            ("replay_capacity", self.replay_capacity.map(|v| v.to_string())),
            ("replay_start", self.replay_start.map(|v| v.to_string())),
            ("total_steps", self.total_steps.map(|v| v.to_string())),
            ("anneal_steps", self.anneal_steps.map(|v| v.to_string())),
            ("eval_every", self.eval_every.map(|v| v.to_string())),
            ("eval_decisions", self.eval_decisions.map(|v| v.to_string())),
            ("eval_epsilon", self.eval_epsilon.map(|v| v.to_string())),
            ("initial_avg_reward", self.initial_avg_reward.map(|v| v.to_string())),
            ("seeds", self.seeds.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                kv.set(k, v);
            }
        }
        ExperimentConfig::from_key_values(&kv, self.preset.unwrap_or(default))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for metrics, summaries and trained agents.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Write a resumable checkpoint every this many environment steps.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue a run from a checkpoint; its stored config is used.
    #[arg(long, conflicts_with = "checkpoint_every")]
    resume: Option<PathBuf>,
    /// Suppress per-evaluation progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// `random`, `greedy`, or the path of an agent file written by `train`.
    #[arg(long)]
    policy: String,
    /// Evaluation stream index; equal indices give paired evaluations.
    #[arg(long, default_value_t = 0)]
    index: u32,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    /// Write the full solution (bias, policy per state) as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated variants, e.g. `ddr-dsu,ddq-dsu:0.9`.
    #[arg(long, value_delimiter = ',', required = true)]
    variants: Vec<String>,
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 3,
        "argument" => 4,
        "replay" => 5,
        "oracle" => 6,
        "format" => 7,
        "io" => 8,
        _ => 1,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_summary(report: &EvalReport) {
    let s = RunSummary::of(report, SUMMARY_WINDOW);
    println!(
        "{} seed {}: last {} evaluations mean {:.4} std {:.4} (AA {:.4}, AE {:.4})",
        report.variant, s.seed, s.window, s.mean_reward, s.std_reward, s.mean_aa, s.mean_ae
    );
}

fn drive(trainer: &mut Trainer, checkpoint: Option<(&Path, u64)>, quiet: bool) -> Result<()> {
    while !trainer.is_done() {
        if let Some(row) = trainer.step()? {
            if !quiet {
                eprintln!(
                    "seed {} iteration {}: reward {:.4} AA {:.4} AE {:.4}",
                    trainer.report().seed,
                    row.step,
                    row.avg_reward,
                    row.aa,
                    row.ae
                );
            }
        }
        if let Some((path, every)) = checkpoint {
            if trainer.env_steps().is_multiple_of(every) || trainer.is_done() {
                trainer.save(path)?;
            }
        }
    }
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    create_dir(&args.out)?;
    let mut reports = Vec::new();
    let finish = |trainer: Trainer, reports: &mut Vec<EvalReport>| -> Result<()> {
        let (agent, report) = trainer.into_parts();
        let path = args.out.join(format!("agent-seed{}.txt", report.seed));
        write_file(&path, &agent.to_text())?;
        print_summary(&report);
        reports.push(report);
        Ok(())
    };
    if let Some(resume) = &args.resume {
        let mut trainer = Trainer::load(resume)?;
        drive(&mut trainer, Some((resume, u64::MAX)), args.quiet)?;
        finish(trainer, &mut reports)?;
    } else {
        if args.checkpoint_every == Some(0) {
            return Err(Error::Config("--checkpoint-every must be positive".into()));
        }
        let config = Arc::new(args.config.build(Preset::Paper)?);
        write_file(&args.out.join("config.txt"), &config.to_key_values())?;
        for &seed in &config.seeds {
            let mut trainer = Trainer::new(config.clone(), seed)?;
            let ckpt = args.out.join(format!("checkpoint-seed{seed}.bin"));
            let every = args.checkpoint_every.map(|n| (ckpt.as_path(), n));
            drive(&mut trainer, every, args.quiet)?;
            finish(trainer, &mut reports)?;
        }
    }
    export_metrics(&reports, &args.out.join("metrics.csv"), &args.out.join("summary.json"))
}

fn eval(args: &EvalArgs) -> Result<()> {
    let config = args.config.build(Preset::Paper)?;
    let policy: Box<dyn Controller> = match args.policy.as_str() {
        "random" => Box::new(RandomPolicy),
        "greedy" => Box::new(GreedyPolicy),
        path => {
            let p = Path::new(path);
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let agent = Agent::from_text(&text, config.hyper())?;
            if agent.online.input_dim() != config.env.state_dim() {
                return Err(Error::Config(format!(
                    "agent expects {} inputs, the configured network has {}",
                    agent.online.input_dim(),
                    config.env.state_dim()
                )));
            }
            Box::new(agent.policy(config.eval_epsilon, config.env.aoi_max))
        }
    };
    for &seed in &config.seeds {
        let m = evaluate_controller(policy.as_ref(), &config.env, config.eval_decisions, seed, args.index)?;
        let line = serde_json::json!({
            "policy": args.policy,
            "seed": seed,
            "index": args.index,
            "decisions": config.eval_decisions,
            "avg_reward": m.avg_reward,
            "aa": m.aa,
            "ae": m.ae,
        });
        println!("{line}");
    }
    Ok(())
}

fn solve(args: &OracleArgs) -> Result<()> {
    let config = args.config.build(Preset::Tiny)?;
    let report = oracle::solve(&config.env, args.tol, args.max_iter)?;
    println!(
        "states {} optimal average reward {:.10} (residual {:.3e}, {} sweeps, {} recurrent class{})",
        report.states.len(),
        report.gain,
        report.residual,
        report.iterations,
        report.recurrent_classes,
        if report.recurrent_classes == 1 { "" } else { "es" }
    );
    if report.recurrent_classes != 1 {
        eprintln!("warning: the optimal policy's chain is not unichain");
    }
    if let Some(out) = &args.out {
        report.write(out)?;
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<bool> {
    let config = args.config.build(Preset::Paper)?;
    let gamma = config.variant.gamma();
    let variants = args
        .variants
        .iter()
        .map(|v| AgentVariant::parse(v, gamma))
        .collect::<Result<Vec<_>>>()?;
    create_dir(&args.out)?;
    write_file(&args.out.join("config.txt"), &config.to_key_values())?;
    let result = dsu_core::harness::run_sweep(&config, &variants);
    let mut ok = true;
    for run in &result.runs {
        if let Err(e) = &run.result {
            ok = false;
            eprintln!("run {} seed {} failed: {e}", run.variant, run.seed);
        }
    }
    for a in &result.aggregates {
        let name = match a.gamma {
            Some(g) => format!("{}:{g}", a.variant),
            None => a.variant.clone(),
        };
        println!(
            "{name}: {} runs, mean {:.4}, std {:.4}",
            a.runs, a.mean_reward, a.std_reward
        );
    }
    export_metrics(
        &result.reports(),
        &args.out.join("metrics.csv"),
        &args.out.join("summary.json"),
    )?;
    let agg = serde_json::to_string_pretty(&result.aggregates).expect("aggregates serialize");
    write_file(&args.out.join("aggregates.json"), &agg)?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(a) => train(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Oracle(a) => solve(a).map(|_| true),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(9),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
