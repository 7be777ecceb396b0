use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use byzsw::fr::{demonstrate_converse, FixedDecoder};
use byzsw::harness::{
    preset, rate_bound, region_text, run_fr, run_vr, write_csv, write_transcripts, Experiment, ScenarioFile,
    StrategySpec, Summary, PRESETS,
};
use byzsw::par::{with_workers, Execution};
use byzsw::region::FixedKind;
use clap::{Args, Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "byzsw", version, about = "Distributed source coding under Byzantine attack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the achievable sum rate and the fixed-rate facets.
    Region(Common),
    /// Run variable-rate sessions.
    SimulateVr(Common),
    /// Run one-shot fixed-rate trials.
    SimulateFr(Common),
    /// Run the scenario's attack and report what the decoder could tell apart.
    AttackDemo(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core, 1 = sequential).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Directory for CSV and JSONL output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ScenarioFile> {
        match (&self.scenario, &self.preset) {
            (Some(path), None) => {
                ScenarioFile::load(path).with_context(|| format!("reading scenario {}", path.display()))
            }
            (None, Some(name)) => Ok(preset(name)?),
            _ => bail!("give --scenario PATH or --preset NAME (presets: {})", PRESETS.join(", ")),
        }
    }

    fn exec(&self) -> Execution {
        if self.workers == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn out_dir(&self) -> Result<Option<PathBuf>> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(self.out.clone())
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Region(c) => region(c),
        Command::SimulateVr(c) => with_workers(c.workers, || simulate_vr(c)),
        Command::SimulateFr(c) => with_workers(c.workers, || simulate_fr(c)),
        Command::AttackDemo(c) => with_workers(c.workers, || attack_demo(c)),
    }
}

fn setup(c: &Common) -> Result<(Experiment, usize, u64)> {
    let file = c.load()?;
    let exp = file.build().context("invalid scenario")?;
    Ok((exp, c.trials.unwrap_or(file.trials), c.seed.unwrap_or(file.seed)))
}

fn region(c: &Common) -> Result<()> {
    let (exp, _, _) = setup(c)?;
    let text = region_text(&exp)?;
    print!("{text}");
    if let Some(dir) = c.out_dir()? {
        std::fs::write(dir.join("region.txt"), &text)?;
    }
    Ok(())
}

fn finish(c: &Common, mode: &str, summary: &Summary, wall: f64) -> Result<()> {
    println!("{summary}");
    println!("wall time         {wall:.2} s");
    if let Some(dir) = c.out_dir()? {
        std::fs::write(dir.join(format!("{mode}_summary.json")), serde_json::to_string_pretty(summary)?)?;
        std::fs::write(dir.join(format!("{mode}_timing.txt")), format!("{wall:.3}\n"))?;
    }
    Ok(())
}

fn simulate_vr(c: &Common) -> Result<()> {
    let (exp, trials, seed) = setup(c)?;
    let start = Instant::now();
    let run = run_vr(&exp, trials, seed, c.exec())?;
    let summary = Summary::from_rows("vr", &run.rows, rate_bound(&exp)?);
    if let Some(dir) = c.out_dir()? {
        write_csv(&run.rows, &dir.join("vr_trials.csv"))?;
        write_transcripts(&run.sessions, &dir.join("vr_transcripts.jsonl"))?;
        info!("wrote results to {}", dir.display());
    }
    finish(c, "vr", &summary, start.elapsed().as_secs_f64())
}

fn simulate_fr(c: &Common) -> Result<()> {
    let (exp, trials, seed) = setup(c)?;
    let start = Instant::now();
    let rows = run_fr(&exp, trials, seed, c.exec())?;
    let summary = Summary::from_rows("fr", &rows, rate_bound(&exp)?);
    if let Some(dir) = c.out_dir()? {
        write_csv(&rows, &dir.join("fr_trials.csv"))?;
    }
    finish(c, "fr", &summary, start.elapsed().as_secs_f64())
}

fn attack_demo(c: &Common) -> Result<()> {
    let (exp, trials, seed) = setup(c)?;
    match &exp.fixed {
        Some(code) if code.kind == FixedKind::Deterministic && matches!(exp.file.strategy, StrategySpec::FixedRateAmbiguity { .. }) => {
            let dec = FixedDecoder::new(code, &exp.scenario.p, &exp.scenario.h)?;
            let rep = demonstrate_converse(&dec, &exp.scenario, seed, trials)?;
            println!("strategy          {}", exp.scenario.strategy.name());
            println!("trials            {}", rep.trials);
            println!("attacks found     {}", rep.attacks_found);
            println!("honest errors     {} ({:.4})", rep.honest_errors, rep.error_rate());
            if let Some(dir) = c.out_dir()? {
                std::fs::write(dir.join("attack.json"), serde_json::to_string_pretty(&rep)?)?;
            }
            Ok(())
        }
        _ => {
            let start = Instant::now();
            let run = run_vr(&exp, trials, seed, c.exec())?;
            let summary = Summary::from_rows("vr", &run.rows, rate_bound(&exp)?);
            println!("strategy          {}", exp.scenario.strategy.name());
            println!("indistinguishable {:.3} of trials end with |V| >= 2", summary.v_ge2_fraction);
            if let Some(dir) = c.out_dir()? {
                write_csv(&run.rows, &dir.join("attack_trials.csv"))?;
            }
            finish(c, "attack", &summary, start.elapsed().as_secs_f64())
        }
    }
}
