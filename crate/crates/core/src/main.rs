use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use investesg::engine::{
    run_batch_records, run_episode, scenario_preset, write_json, write_outputs, BatchResult,
    ScenarioConfig, ScriptedAssignment, SeedPair, PRESET_NAMES,
};
use investesg::learner::{evaluate, train_independent};
use investesg::policies::{ScriptedCompanyPolicy, ScriptedInvestorPolicy};
use investesg::schelling::{
    is_social_dilemma, schelling_curve, write_schelling_outputs, SchellingSpec,
};
use investesg::{Error, Result};

#[derive(Parser)]
#[command(
    name = "investesg",
    version,
    about = "Climate-investment market simulator with ESG disclosure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode with the configured scripted policies.
    Run(Common),
    /// Run several seeded episodes in parallel.
    Batch {
        #[command(flatten)]
        common: Common,
        /// Number of episodes; defaults to seeds.batch_size.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Build a Schelling diagram for a focal company.
    Schelling {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cooperator")]
        cooperator: ScriptedCompanyPolicy,
        #[arg(long, default_value = "defector")]
        defector: ScriptedCompanyPolicy,
        #[arg(long, default_value = "profit_driven")]
        investor: ScriptedInvestorPolicy,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
        seeds: Vec<u64>,
    },
    /// Train independent learners, then evaluate them greedily.
    Train(Common),
    /// List scenario presets.
    Presets,
    /// Print the full configuration, with every default filled in.
    PrintDefaultConfig {
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named preset instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Override a config value, e.g. --set features.disclosure=false
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, env = "INVESTESG_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    climate_seed: Option<u64>,
    #[arg(long)]
    policy_seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => ScenarioConfig::from_path(path)?,
            (None, Some(name)) => scenario_preset(name)?,
            (None, None) => ScenarioConfig::default(),
        };
        for o in &self.overrides {
            config.apply_override(o)?;
        }
        if let Some(s) = self.climate_seed {
            config.seeds.climate_seed = s;
        }
        if let Some(s) = self.policy_seed {
            config.seeds.policy_seed = s;
        }
        config.validate()?;
        Ok(config)
    }

    fn seeds(config: &ScenarioConfig) -> SeedPair {
        SeedPair::new(config.seeds.climate_seed, config.seeds.policy_seed)
    }
}

fn save_config(config: &ScenarioConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml_string()).map_err(|e| Error::io(&path, e))
}

fn print_batch(batch: &BatchResult) {
    println!(
        "episodes={} P100={:.4}±{:.4} W100={:.2}±{:.2} events={:.1} bankruptcies={:.2}",
        batch.episodes.len(),
        batch.mean.final_risk,
        batch.stderr.final_risk,
        batch.mean.final_wealth,
        batch.stderr.final_wealth,
        batch.mean.events_total,
        batch.mean.bankruptcies,
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = common.load()?;
            let record = run_episode(
                &config,
                &ScriptedAssignment::from_config(&config),
                Common::seeds(&config),
            )?;
            save_config(&config, &common.out_dir)?;
            write_outputs(&record, &common.out_dir)?;
            let s = &record.summary;
            println!(
                "P100={:.4} W100={:.2} events={} bankruptcies={} -> {}",
                s.final_risk,
                s.final_wealth,
                s.events_total,
                s.bankruptcies,
                common.out_dir.display()
            );
        }
        Command::Batch { common, episodes } => {
            let config = common.load()?;
            let seeds = SeedPair::sequence(&config, episodes.unwrap_or(config.seeds.batch_size));
            let records =
                run_batch_records(&config, &ScriptedAssignment::from_config(&config), &seeds)?;
            save_config(&config, &common.out_dir)?;
            for (k, r) in records.iter().enumerate() {
                write_outputs(r, &common.out_dir.join(format!("episode_{k:03}")))?;
            }
            let batch =
                BatchResult::from_summaries(records.into_iter().map(|r| r.summary).collect());
            write_json(&batch, &common.out_dir.join("batch.json"))?;
            print_batch(&batch);
        }
        Command::Schelling {
            common,
            cooperator,
            defector,
            investor,
            seeds,
        } => {
            let config = common.load()?;
            let spec = SchellingSpec {
                cooperator,
                defector,
                investors: vec![investor],
                seeds,
            };
            let curve = schelling_curve(&config, &spec)?;
            save_config(&config, &common.out_dir)?;
            write_schelling_outputs(&curve, &common.out_dir)?;
            for i in 0..curve.k.len() {
                println!(
                    "k={} coop={:.3} defect={:.3} avg_defect={:.3}",
                    curve.k[i],
                    curve.cooperate_mean[i],
                    curve.defect_mean[i],
                    curve.average_when_defect[i]
                );
            }
            let report = is_social_dilemma(&curve);
            println!(
                "social_dilemma={} defect_dominates={} average_increasing={}",
                report.is_dilemma, report.defect_dominates, report.average_increasing
            );
        }
        Command::Train(common) => {
            let config = common.load()?;
            let (params, report) = train_independent(&config)?;
            save_config(&config, &common.out_dir)?;
            write_json(&report, &common.out_dir.join("train_report.json"))?;
            write_json(&params, &common.out_dir.join("policy_params.json"))?;
            let batch = evaluate(
                &params,
                &config,
                &SeedPair::sequence(&config, config.seeds.batch_size),
            )?;
            write_json(&batch, &common.out_dir.join("evaluation.json"))?;
            println!(
                "trailing {} iterations: mitigation={:.4} P_end={:.4} W_end={:.2}",
                report.window,
                report.window_mitigation,
                report.window_final_risk,
                report.window_final_wealth
            );
            print_batch(&batch);
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
        Command::PrintDefaultConfig { preset } => {
            let config = match preset {
                Some(name) => scenario_preset(&name)?,
                None => ScenarioConfig::default(),
            };
            print!("{}", config.to_toml_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
