use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lyapcharge::io::{write_fleet, write_prices};
use lyapcharge::Policy;
use lyapcharge_harness::experiment::{audits_clean, write_outputs};
use lyapcharge_harness::scenario::generate_scenario;
use lyapcharge_harness::{run_experiment, verify, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lyapcharge", version, about = "Lookahead scheduling for EV charging fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy on every trial.
    Simulate(Overrides),
    /// Run the full policy grid of a config.
    Sweep(Overrides),
    /// Run the queue, aggregation and disaggregation audit suites.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a generated fleet and price series as CSV.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "scenario")]
        out: PathBuf,
    },
    /// Price series utilities.
    Prices {
        #[command(subcommand)]
        command: PricesCommand,
    },
}

#[derive(Subcommand)]
enum PricesCommand {
    /// Convert a market price export into the slot price CSV.
    Import {
        input: PathBuf,
        /// Column holding the price.
        #[arg(long, default_value = "price")]
        column: String,
        /// Multiplier applied to every price; the default converts per-MWh to per-kWh.
        #[arg(long, default_value_t = 1.0e-3)]
        scale: f64,
        /// Emit each source row this many times, e.g. 3 to turn 15-minute into 5-minute slots.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long, default_value = "prices.csv")]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Vec<Policy>,
    #[arg(long)]
    w: Vec<usize>,
    #[arg(long = "V")]
    v: Vec<f64>,
    /// Per-group weight, GROUP=FLOAT.
    #[arg(long = "Vg", value_parser = parse_group_weight)]
    vg: Vec<(String, f64)>,
    /// Search for the largest V that serves every EV.
    #[arg(long)]
    tune_v: bool,
    /// Delay weight in MW.
    #[arg(long)]
    alpha: Vec<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_group_weight(s: &str) -> Result<(String, f64), String> {
    let (g, v) = s.split_once('=').ok_or("expected GROUP=FLOAT")?;
    let g = g.trim();
    g.parse::<u32>().map_err(|e| format!("group '{g}': {e}"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("weight '{v}': {e}"))?;
    Ok((g.to_string(), v))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

impl Overrides {
    fn apply(self, single: bool) -> Result<ExperimentConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        let explicit = !self.policy.is_empty();
        if explicit {
            cfg.policies = self.policy;
        }
        if !self.w.is_empty() {
            cfg.w = self.w;
        }
        if !self.v.is_empty() {
            cfg.v = self.v;
        }
        if !self.vg.is_empty() {
            cfg.vg = self.vg.into_iter().collect::<BTreeMap<_, _>>();
        }
        if !self.alpha.is_empty() {
            cfg.alpha = self.alpha;
        }
        cfg.tune_v |= self.tune_v;
        cfg.sigma = self.sigma.unwrap_or(cfg.sigma);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.out = self.out.unwrap_or(cfg.out);
        if single {
            if explicit && cfg.policies.len() > 1 {
                bail!("simulate takes one --policy; use sweep for several");
            }
            if cfg.policies.len() > 1 {
                cfg.policies = vec![Policy::Dpp];
            }
            cfg.w.truncate(1);
            cfg.v.truncate(1);
            cfg.alpha.truncate(1);
        }
        Ok(cfg)
    }
}

fn experiment(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let records = run_experiment(cfg)?;
    write_outputs(&cfg.out, &records)?;
    let mut stdout = std::io::stdout().lock();
    std::io::Write::write_all(
        &mut stdout,
        lyapcharge_harness::experiment::summary_csv(&records).as_bytes(),
    )?;
    if audits_clean(&records) {
        Ok(ExitCode::SUCCESS)
    } else {
        let n: usize = records.iter().map(|r| r.report.audits.violation_count()).sum();
        eprintln!("{n} audit violations; see {}", cfg.out.join("runs").display());
        Ok(ExitCode::from(2))
    }
}

fn gen(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let s = generate_scenario(&cfg.scenario, seed, cfg.w[0], cfg.alpha[0])?;
    fs::create_dir_all(out)?;
    write_fleet(&s.fleet, BufWriter::new(File::create(out.join("fleet.csv"))?))?;
    write_prices(s.prices.prices(), BufWriter::new(File::create(out.join("prices.csv"))?))?;
    println!(
        "{} EVs in {} groups over {} slots",
        s.fleet.len(),
        s.groups.len(),
        s.num_slots()
    );
    Ok(())
}

fn import_prices(input: &Path, column: &str, scale: f64, repeat: usize, out: &Path) -> Result<()> {
    if repeat == 0 {
        bail!("repeat must be at least 1");
    }
    let mut reader = csv::Reader::from_path(input).with_context(|| format!("opening {}", input.display()))?;
    let idx = reader
        .headers()?
        .iter()
        .position(|h| h.trim() == column)
        .with_context(|| format!("no column '{column}' in {}", input.display()))?;
    let mut prices = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let raw = row.get(idx).unwrap_or("").trim();
        let p: f64 = raw
            .parse()
            .with_context(|| format!("row {}: '{raw}' is not a number", line + 2))?;
        prices.extend(std::iter::repeat_n(p * scale, repeat));
    }
    write_prices(&prices, BufWriter::new(File::create(out)?))?;
    println!("{} slots written to {}", prices.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(o) => experiment(&o.apply(true)?),
        Command::Sweep(o) => experiment(&o.apply(false)?),
        Command::Verify { seed } => {
            let results = verify::run_all(seed);
            for r in &results {
                println!("{}", r.line());
            }
            Ok(if results.iter().all(|r| r.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Gen { config, seed, out } => {
            gen(config.as_deref(), seed, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Prices {
            command:
                PricesCommand::Import {
                    input,
                    column,
                    scale,
                    repeat,
                    out,
                },
        } => {
            import_prices(&input, &column, scale, repeat, &out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
