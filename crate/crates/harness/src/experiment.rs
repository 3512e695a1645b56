//! Experiment configuration, the policy grid and report files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lyapcharge::demand::{attach_demand, DemandProfile};
use lyapcharge::io::{read_fleet, read_prices};
use lyapcharge::policies::{RunReport, SUMMARY_HEADER};
use lyapcharge::{Policy, Scenario, TimeGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::noise::apply_price_noise;
use crate::run::{run_policy, PenaltySetting, ALPHA_SCALE};
use crate::scenario::{generate_scenario, GeneratorParams};
use crate::tune::{find_optimal_v, find_optimal_v_per_group, Search};

/// Fleet and price CSVs used instead of the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub fleet: PathBuf,
    pub prices: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub policies: Vec<Policy>,
    pub w: Vec<usize>,
    pub v: Vec<f64>,
    /// Per-group weights for `dpp_hetero`, keyed by group id. Groups not
    /// listed use the first entry of `v`.
    pub vg: BTreeMap<String, f64>,
    /// Delay weights, MW per period.
    pub alpha: Vec<f64>,
    /// Forecast noise level; 0 means perfect price forecasts.
    pub sigma: f64,
    /// Replace `v` and `vg` by the largest weights that still serve every EV.
    pub tune_v: bool,
    pub v_upper: f64,
    pub v_resolution: f64,
    pub scenario: GeneratorParams,
    pub files: Option<FileSource>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 1,
            out: PathBuf::from("out"),
            policies: Policy::ALL.to_vec(),
            w: vec![5],
            v: vec![10.0],
            vg: BTreeMap::new(),
            alpha: vec![3000.0],
            sigma: 0.0,
            tune_v: false,
            v_upper: 100.0,
            v_resolution: 0.1,
            scenario: GeneratorParams::default(),
            files: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.policies.is_empty() || self.w.is_empty() || self.alpha.is_empty() {
            bail!("policies, w and alpha must be non-empty");
        }
        if self.w.contains(&0) {
            bail!("w must be at least 1");
        }
        if self.v.is_empty() && !self.tune_v {
            bail!("v must be non-empty unless tune_v is set");
        }
        if self.v.iter().chain(self.vg.values()).any(|&v| v.is_nan() || v < 0.0) {
            bail!("penalty weights must be non-negative");
        }
        if self.alpha.iter().any(|&a| a.is_nan() || a <= 0.0) {
            bail!("alpha must be positive");
        }
        if self.sigma.is_nan() || self.sigma < 0.0 {
            bail!("sigma must be non-negative");
        }
        for key in self.vg.keys() {
            key.parse::<u32>()
                .with_context(|| format!("vg key '{key}' is not a group id"))?;
        }
        if self.files.is_none() {
            self.scenario.validate()?;
        }
        Ok(())
    }

    fn search(&self) -> Search {
        Search {
            upper: self.v_upper,
            resolution: self.v_resolution,
        }
    }
}

/// Loads the scenario of one trial. Generated scenarios draw from
/// `seed + trial`; file scenarios are the same for every trial.
pub fn build_scenario(cfg: &ExperimentConfig, trial: usize) -> Result<Scenario<f64>> {
    let w = cfg.w[0];
    let alpha = cfg.alpha[0];
    match &cfg.files {
        None => Ok(generate_scenario(&cfg.scenario, cfg.seed + trial as u64, w, alpha)?),
        Some(files) => {
            let open = |p: &Path| File::open(p).with_context(|| format!("opening {}", p.display()));
            let fleet = read_fleet(open(&files.fleet)?)?;
            let prices = read_prices(open(&files.prices)?)?;
            let grid = TimeGrid::new(prices.len(), cfg.scenario.slot_hours());
            Ok(Scenario::new(
                grid,
                fleet,
                prices,
                cfg.scenario.eta,
                w,
                alpha * ALPHA_SCALE,
            ))
        }
    }
}

fn noise_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64 + 1)
}

#[derive(Clone, Debug, PartialEq)]
enum Weights {
    Unused,
    Fixed(PenaltySetting),
    Tuned,
}

#[derive(Clone, Debug, PartialEq)]
struct Job {
    trial: usize,
    policy: Policy,
    w: usize,
    alpha: f64,
    weights: Weights,
}

fn per_group_weights(cfg: &ExperimentConfig, s: &Scenario<f64>) -> Vec<f64> {
    let fallback = cfg.v.first().copied().unwrap_or(0.0);
    s.groups
        .iter()
        .map(|g| cfg.vg.get(&g.id.0.to_string()).copied().unwrap_or(fallback))
        .collect()
}

/// Expands the policy grid in a fixed order. Baselines that ignore a
/// parameter run once per trial at the first value.
fn jobs(cfg: &ExperimentConfig, scenarios: &[Scenario<f64>]) -> Vec<Job> {
    let mut out = Vec::new();
    for (trial, scenario) in scenarios.iter().enumerate() {
        for (ai, &alpha) in cfg.alpha.iter().enumerate() {
            for (wi, &w) in cfg.w.iter().enumerate() {
                for &policy in &cfg.policies {
                    let job = |weights| Job {
                        trial,
                        policy,
                        w,
                        alpha,
                        weights,
                    };
                    match policy {
                        Policy::Offline | Policy::Greedy => {
                            if ai == 0 && wi == 0 {
                                out.push(job(Weights::Unused));
                            }
                        }
                        Policy::Mpc => {
                            if ai == 0 {
                                out.push(job(Weights::Unused));
                            }
                        }
                        Policy::Dpp if cfg.tune_v => out.push(job(Weights::Tuned)),
                        Policy::Dpp => {
                            for &v in &cfg.v {
                                out.push(job(Weights::Fixed(PenaltySetting::Homogeneous(v))));
                            }
                        }
                        Policy::DppHetero if cfg.tune_v => out.push(job(Weights::Tuned)),
                        Policy::DppHetero if !cfg.vg.is_empty() => {
                            let vs = per_group_weights(cfg, scenario);
                            out.push(job(Weights::Fixed(PenaltySetting::PerGroup(vs))));
                        }
                        Policy::DppHetero => {
                            let n = scenario.groups.len();
                            for &v in &cfg.v {
                                out.push(job(Weights::Fixed(PenaltySetting::PerGroup(vec![v; n]))));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub trial: usize,
    pub seed: u64,
    pub sigma: f64,
    /// Forecast MAPE in percent; zero for perfect forecasts.
    pub mape: f64,
    pub report: RunReport,
}

struct Trial {
    scenario: Scenario<f64>,
    demand: DemandProfile<f64>,
    forecast: Option<Vec<f64>>,
    mape: f64,
}

/// Runs the whole grid on a worker pool. Results come back in grid order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let trials: Vec<Trial> = (0..cfg.trials)
        .map(|trial| {
            let (scenario, demand) = attach_demand(build_scenario(cfg, trial)?)?;
            let (forecast, mape) = if cfg.sigma > 0.0 {
                let f = apply_price_noise(scenario.prices.prices(), cfg.sigma, noise_seed(cfg.seed, trial));
                (Some(f.prices), f.mape)
            } else {
                (None, 0.0)
            };
            Ok(Trial {
                scenario,
                demand,
                forecast,
                mape,
            })
        })
        .collect::<Result<_>>()?;
    let scenarios: Vec<Scenario<f64>> = trials.iter().map(|t| t.scenario.clone()).collect();
    let grid = jobs(cfg, &scenarios);
    grid.par_iter()
        .map(|job| {
            let t = &trials[job.trial];
            let s = t.scenario.clone().with_alpha(job.alpha * ALPHA_SCALE);
            let forecast = t.forecast.as_deref();
            let penalty = match &job.weights {
                Weights::Unused => PenaltySetting::Homogeneous(0.0),
                Weights::Fixed(p) => p.clone(),
                Weights::Tuned if job.policy == Policy::DppHetero => {
                    PenaltySetting::PerGroup(find_optimal_v_per_group(&s, &t.demand, job.w, forecast, cfg.search())?)
                }
                Weights::Tuned => {
                    PenaltySetting::Homogeneous(find_optimal_v(&s, &t.demand, job.w, forecast, cfg.search())?)
                }
            };
            let report = run_policy(&s, &t.demand, job.policy, job.w, &penalty, forecast)?;
            Ok(RunRecord {
                trial: job.trial,
                seed: cfg.seed + job.trial as u64,
                sigma: cfg.sigma,
                mape: t.mape,
                report,
            })
        })
        .collect()
}

pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.report.summary_row());
        out.push('\n');
    }
    out
}

fn stem(index: usize, r: &RunRecord) -> String {
    format!("t{:02}_{:03}_{}_w{}", r.trial, index, r.report.policy, r.report.w)
}

/// Writes `summary.csv`, one JSON report per run under `runs/` and the
/// queue traces under `queues/`.
pub fn write_outputs(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let runs = dir.join("runs");
    let queues = dir.join("queues");
    fs::create_dir_all(&runs).with_context(|| format!("creating {}", runs.display()))?;
    fs::create_dir_all(&queues)?;
    fs::write(dir.join("summary.csv"), summary_csv(records))?;
    for (i, r) in records.iter().enumerate() {
        let name = stem(i, r);
        let json = BufWriter::new(File::create(runs.join(format!("{name}.json")))?);
        serde_json::to_writer_pretty(json, r)?;
        r.report
            .trace
            .write_csv(BufWriter::new(File::create(queues.join(format!("{name}.csv")))?))?;
    }
    Ok(())
}

pub fn audits_clean(records: &[RunRecord]) -> bool {
    records.iter().all(|r| r.report.audits.is_clean())
}
