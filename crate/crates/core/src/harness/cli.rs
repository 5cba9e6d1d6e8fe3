use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{CsrlError, Result};
use crate::harness::{
    metrics, order_report, read_records, read_summary, rows_by_seed, summarize, sweep, Experiment,
    ExperimentConfig, Seeds, SweepParam,
};

#[derive(Debug, Parser)]
#[command(name = "csrl", version, about = "Constraint-sampling RL experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write records.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the seed count (seeds 0..N).
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run once per value of a meta parameter, each into its own directory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["c", "t_l"])]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics from a run directory's records.csv.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.97")]
        fractions: Vec<f64>,
        #[arg(long)]
        window: Option<usize>,
        /// Another run directory to compare against (speedup with bootstrap CI).
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Check the declared order of a config's restriction set by brute force.
    VerifyOrder {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Usage errors (bad flags, missing inputs) exit 2; failures while running exit 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    for path in cli.command.required_paths() {
        if !path.exists() {
            eprintln!("error: {} does not exist", path.display());
            return 2;
        }
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

impl Command {
    fn required_paths(&self) -> Vec<&Path> {
        match self {
            Command::Run { config, .. } | Command::Sweep { config, .. } | Command::VerifyOrder { config } => {
                vec![config.as_path()]
            }
            Command::Metrics { input, baseline, .. } => {
                let mut v = vec![input.as_path()];
                v.extend(baseline.as_deref());
                v
            }
        }
    }
}

fn load_with_overrides(path: &Path, seeds: Option<u64>, episodes: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(n) = seeds {
        cfg.seeds = Seeds::Count(n);
    }
    if let Some(n) = episodes {
        cfg.episodes = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, seeds, episodes, out } => {
            let mut cfg = load_with_overrides(&config, seeds, episodes)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            let out = cfg.out.clone();
            let summary = Experiment::new(cfg)?.run_and_write(&out)?;
            println!("wrote {}", out.display());
            println!("final_mean {}", summary.final_mean);
            for (f, e) in &summary.sample_complexity {
                println!("episodes_to_{f} {}", e.map_or("not reached".to_string(), |e| e.to_string()));
            }
            Ok(())
        }
        Command::Sweep { config, param, values, seeds, episodes, out } => {
            let cfg = load_with_overrides(&config, seeds, episodes)?;
            let param: SweepParam = param.parse()?;
            let out = out.unwrap_or_else(|| cfg.out.clone());
            for (v, dir) in sweep(&cfg, param, &values, &out)? {
                println!("{}={v} -> {}", param.name(), dir.display());
            }
            Ok(())
        }
        Command::Metrics { input, fractions, window, baseline } => {
            let (rows, mut manifest) = load_run(&input)?;
            manifest.fractions = fractions.clone();
            if let Some(w) = window {
                manifest.window = w;
            }
            if manifest.window == 0 {
                return Err(CsrlError::Config("window must be at least 1".into()));
            }
            let summary = summarize(&rows, manifest)?;
            let mut report = serde_json::json!({
                "sample_complexity": summary.sample_complexity,
                "final_mean": summary.final_mean,
                "window": summary.manifest.window,
                "elimination_episodes": summary.elimination_episodes,
            });
            if let Some(base) = baseline {
                let (base_rows, _) = load_run(&base)?;
                let curves = |rows: &[crate::harness::RecordRow]| -> Vec<Vec<f64>> {
                    rows_by_seed(rows).values().map(|v| v.iter().map(|r| r.raw_return).collect()).collect()
                };
                let (a, b) = (curves(&rows), curves(&base_rows));
                let speedups: serde_json::Map<String, serde_json::Value> = fractions
                    .iter()
                    .map(|&f| {
                        let est = metrics::bootstrap_speedup(&a, &b, f, summary.manifest.window, 1000, 0);
                        (f.to_string(), serde_json::to_value(est).expect("estimate serializes"))
                    })
                    .collect();
                report["speedup_vs_baseline"] = serde_json::Value::Object(speedups);
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::VerifyOrder { config } => {
            let exp = Experiment::new(ExperimentConfig::load(&config)?)?;
            print!("{}", order_report(exp.restriction_set()));
            Ok(())
        }
    }
}

fn load_run(dir: &Path) -> Result<(Vec<crate::harness::RecordRow>, crate::harness::Manifest)> {
    let rows = read_records(&dir.join("records.csv"))?;
    let summary = read_summary(&dir.join("summary.json"))?;
    Ok((rows, summary.manifest))
}
