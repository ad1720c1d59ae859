use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use halflink::engine;
use halflink::oracle;
use halflink::output;
use halflink::scenario::{self, Scenario, SweepOptions};
use halflink::schedule::build_schedule;
use halflink::stats::LinkReport;
use halflink::{LinkConfig, ReadoutPolicy, Result};

#[derive(Parser)]
#[command(
    name = "halflink",
    version,
    about = "Multiplexed quantum-repeater half-link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one operating point; writes a report row and the counts ledger.
    Run(RunArgs),
    /// Simulate every point of a preset sweep.
    Sweep(SweepArgs),
    /// Print analytic probabilities over a chi x storage-time grid.
    Oracle(SourceArgs),
    /// Time-bin schedule commands.
    Schedule {
        #[command(subcommand)]
        command: ScheduleCommand,
    },
    /// Fit retrieval and noise parameters to the calibration anchors.
    Calibrate {
        /// Write the fit as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScheduleCommand {
    /// One CSV row per used mode.
    Dump(SourceArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// JSON config; missing keys take their defaults.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Preset name (fig3b, fig3c, fig4b, fig4c, local400, onekm, custom).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<ReadoutPolicy>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
    /// Where to write the ledger; defaults to the report path with a
    /// `.ledger.json` extension.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: String,
    /// Rounds per sweep point.
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<ReadoutPolicy>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_policy(s: &str) -> std::result::Result<ReadoutPolicy, String> {
    s.parse()
}

impl SourceArgs {
    fn config(&self) -> Result<LinkConfig> {
        let mut config = match (&self.config, &self.scenario) {
            (Some(path), _) => LinkConfig::load(path)?,
            (None, Some(name)) => scenario::scenario(name)?.base_config,
            (None, None) => LinkConfig::default(),
        };
        if let Some(policy) = self.policy {
            config.readout_policy = policy;
        }
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        config.validate().into_result()?;
        Ok(config)
    }

    /// Chi values of the preset's sweep, or the config's own chi.
    fn chis(&self, config: &LinkConfig) -> Result<Vec<f64>> {
        match &self.scenario {
            Some(name) if self.config.is_none() => {
                let s: Scenario = scenario::scenario(name)?;
                let mut chis: Vec<f64> = s.point_configs().iter().map(|(_, c)| c.chi).collect();
                chis.dedup();
                Ok(chis)
            }
            _ => Ok(vec![config.chi]),
        }
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: RunArgs) -> Result<()> {
    let config = args.source.config()?;
    let ledger = engine::run_batch(&config, args.rounds)?;
    let detail = LinkReport::from_ledger(&ledger, &config)?;
    output::write_reports(sink(args.source.out.as_deref())?, &[detail.row])?;
    let ledger_path = args
        .ledger
        .or_else(|| args.source.out.as_deref().map(output::ledger_path_for));
    if let Some(path) = ledger_path {
        output::write_ledger(&path, &ledger)?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let preset = scenario::scenario(&args.scenario)?;
    let options = SweepOptions {
        seed: args.seed,
        policy: args.policy,
        ..SweepOptions::new(args.rounds)
    };
    let result = scenario::run_sweep(&preset, &options)?;
    output::write_sweep(sink(args.out.as_deref())?, &result)
}

fn oracle_table(args: SourceArgs) -> Result<()> {
    let config = args.config()?;
    let chis = args.chis(&config)?;
    let storage: Vec<f64> = [0.0, 50e-6, 130e-6, 190e-6, 250e-6].to_vec();
    output::write_oracle_table(sink(args.out.as_deref())?, &config, &chis, &storage)
}

fn schedule_dump(args: SourceArgs) -> Result<()> {
    let config = args.config()?;
    let schedule = build_schedule(&config, config.used_modes())?;
    output::write_schedule(sink(args.out.as_deref())?, &schedule)
}

fn calibrate(out: Option<PathBuf>) -> Result<()> {
    let cal = oracle::calibrate(
        &scenario::anchor_targets(),
        &scenario::retrieval_anchors(),
        scenario::calibration_start(),
    )?;
    let mut w = io::stdout().lock();
    writeln!(
        w,
        "retrieval_efficiency_0,{:e}",
        cal.params.retrieval_efficiency_0
    )?;
    writeln!(w, "noise_click_prob,{:e}", cal.params.noise_click_prob)?;
    writeln!(w, "idler_noise_prob,{:e}", cal.params.idler_noise_prob)?;
    writeln!(w, "anchor,p_bar,chi,g_model,g_target,g_sigma,pull")?;
    for t in &cal.targets {
        writeln!(
            w,
            "{},{:e},{:e},{:.6},{},{},{:.4}",
            t.name, t.p_bar_model, t.chi, t.g_model, t.g_target, t.g_sigma, t.pull
        )?;
    }
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&cal)? + "\n")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Oracle(args) => oracle_table(args),
        Command::Schedule {
            command: ScheduleCommand::Dump(args),
        } => schedule_dump(args),
        Command::Calibrate { out } => calibrate(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
