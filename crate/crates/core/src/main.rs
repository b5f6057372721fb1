use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deepsith::experiment::{self, aggregate, export_csv, presets, ExperimentConfig, RunRecord};
use deepsith::filterbank::{geometric_taus, select_k, DEFAULT_K_MAX};
use deepsith::nn::load_checkpoint;
use deepsith::tasks::export::{write_dataset, ExportedSample};
use deepsith::tasks::mnist::{data_dir, fetch_mnist};
use deepsith::tasks::{adding, hateful8_dataset, mg_dataset, MackeyGlassParams};
use deepsith::Result;

/// Train and evaluate DeepSITH networks on the benchmark tasks.
#[derive(Parser)]
#[command(name = "deepsith", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download and checksum the MNIST files.
    FetchData {
        /// Defaults to $DEEPSITH_DATA_DIR, then data/mnist.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Write a generated dataset as CSV.
    Gen(GenArgs),
    /// Train every configured seed and write results.
    Train {
        #[command(flatten)]
        source: ConfigArgs,
        /// Also save the full run records as JSON.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Score a saved checkpoint on the held-out data of a seed.
    Eval {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one experiment per value of a config field.
    Sweep {
        #[command(flatten)]
        source: ConfigArgs,
        /// Dotted config key, e.g. task.length or task.tau.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// One CSV per value is written here.
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Scan k for one filter bank and report the objective.
    SelectK {
        #[arg(long, default_value_t = 1.0)]
        tau_min: f64,
        #[arg(long)]
        tau_max: f64,
        #[arg(long)]
        n_taus: usize,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: u32,
        /// Write the full scan as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn saved run records (JSON) into a results CSV with intervals.
    Export {
        #[arg(long, required = true, num_args = 1..)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: adding, mackey-glass, hateful8, smnist, psmnist.
    #[arg(long)]
    preset: Option<String>,
    /// Override any field, e.g. --set training.horizon=100 --set layers.0.k=\"auto\".
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Five consecutive seeds starting here.
    #[arg(long, conflicts_with = "seeds")]
    master_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let base = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => presets::by_name(name)?,
            (None, None) => {
                return Err(deepsith::Error::Config("pass --config FILE or --preset NAME".into()));
            }
        };
        let mut config = base.with_overrides(&self.overrides)?;
        if let Some(m) = self.master_seed {
            config.seeds = experiment::seeds_from(m);
        }
        if let Some(s) = &self.seeds {
            config.seeds = s.clone();
        }
        if let Some(o) = &self.output {
            config.output = Some(o.clone());
        }
        if let Some(d) = &self.checkpoint_dir {
            config.checkpoint_dir = Some(d.clone());
        }
        if let (Some(d), experiment::TaskConfig::Mnist { data_dir, .. }) = (&self.data_dir, &mut config.task) {
            *data_dir = Some(d.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    task: GenTask,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "dataset.csv")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GenTask {
    Adding {
        #[arg(long, default_value_t = 100)]
        length: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    MackeyGlass {
        #[arg(long, default_value_t = 17)]
        tau: usize,
        #[arg(long, default_value_t = 15)]
        distance: usize,
        #[arg(long, default_value_t = 128)]
        signals: usize,
        #[arg(long, default_value_t = 300)]
        steps: usize,
    },
    Hateful8 {
        #[arg(long, default_value_t = 100)]
        noise_len: usize,
        #[arg(long, default_value_t = 32)]
        per_class: usize,
    },
}

fn gen(args: &GenArgs) -> Result<()> {
    let file = std::fs::File::create(&args.out)?;
    match &args.task {
        GenTask::Adding { length, count } => {
            let mut rng = deepsith::tasks::sample_rng(args.seed, 0);
            let samples: Vec<_> = (0..*count)
                .map(|_| adding::gen_adding_with(*length, &mut rng))
                .collect::<Result<_>>()?;
            let targets: Vec<[f64; 1]> = samples.iter().map(|s| [s.target]).collect();
            let rows: Vec<_> = samples
                .iter()
                .zip(&targets)
                .map(|(s, t)| ExportedSample {
                    input: s.input.view(),
                    target: t,
                })
                .collect();
            write_dataset(file, &rows)
        }
        GenTask::MackeyGlass {
            tau,
            distance,
            signals,
            steps,
        } => {
            let (x, y) = mg_dataset(
                *tau,
                *distance,
                *signals,
                *steps,
                args.seed,
                &MackeyGlassParams::default(),
            )?;
            let targets: Vec<Vec<f64>> = y.outer_iter().map(|m| m.iter().copied().collect()).collect();
            let rows: Vec<_> = x
                .outer_iter()
                .zip(&targets)
                .map(|(input, target)| ExportedSample { input, target })
                .collect();
            write_dataset(file, &rows)
        }
        GenTask::Hateful8 { noise_len, per_class } => {
            let samples = hateful8_dataset(*noise_len, *per_class, args.seed)?;
            let inputs: Vec<ndarray::Array2<f64>> = samples
                .iter()
                .map(|s| ndarray::Array2::from_shape_vec((s.input.len(), 1), s.input.clone()).expect("column"))
                .collect();
            let labels: Vec<[f64; 1]> = samples.iter().map(|s| [s.label as f64]).collect();
            let rows: Vec<_> = inputs
                .iter()
                .zip(&labels)
                .map(|(x, l)| ExportedSample {
                    input: x.view(),
                    target: l,
                })
                .collect();
            write_dataset(file, &rows)
        }
    }
}

fn print_records(records: &[RunRecord]) {
    for r in records {
        let finals: Vec<String> = ["running_mse", "test_accuracy", "test_nrmse", "test_loss"]
            .iter()
            .filter_map(|m| r.last(m).map(|v| format!("{m}={v:.6}")))
            .collect();
        println!(
            "{} seed={} params={} k={:?} status={:?} {} ({:.1}s)",
            r.task,
            r.seed,
            r.parameter_count,
            r.resolved_k,
            r.status,
            finals.join(" "),
            r.wall_clock_secs
        );
    }
}

fn write_outputs(records: &[RunRecord], out: &Path) -> Result<()> {
    let summary = if records.len() >= 2 {
        Some(aggregate(records)?)
    } else {
        None
    };
    export_csv(out, records, summary.as_deref())?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn train(config: &ExperimentConfig, records_path: Option<&Path>) -> Result<bool> {
    let records = experiment::run_experiment(config)?;
    print_records(&records);
    let out = config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("results/{}.csv", config.name)));
    write_outputs(&records, &out)?;
    if let Some(p) = records_path {
        std::fs::write(p, serde_json::to_string_pretty(&records)?)?;
    }
    Ok(records.iter().all(|r| !r.diverged()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::FetchData { data_dir: dir } => {
            let dir = data_dir(dir.as_deref());
            for p in fetch_mnist(&dir)? {
                println!("ok {}", p.display());
            }
            Ok(true)
        }
        Command::Gen(args) => gen(&args).map(|_| true),
        Command::Train {
            source,
            records,
            print_config,
        } => {
            let config = source.load()?;
            if print_config {
                print!("{}", config.resolved()?.to_toml()?);
                return Ok(true);
            }
            train(&config, records.as_deref())
        }
        Command::Eval {
            source,
            checkpoint,
            seed,
        } => {
            let config = source.load()?;
            let net = load_checkpoint(&checkpoint)?;
            for (name, value) in experiment::evaluate(&config, seed, &net)? {
                println!("{name}={value}");
            }
            Ok(true)
        }
        Command::Sweep {
            source,
            param,
            values,
            out_dir,
        } => {
            let base = source.load()?;
            let mut all_ok = true;
            for v in &values {
                let mut config = base.with_overrides(&[format!("{param}={v}")])?;
                config.name = format!("{}-{}-{}", base.name, param.replace('.', "_"), v);
                config.output = Some(out_dir.join(format!("{}.csv", config.name)));
                all_ok &= train(&config, None)?;
            }
            Ok(all_ok)
        }
        Command::SelectK {
            tau_min,
            tau_max,
            n_taus,
            k_max,
            out,
        } => {
            let grid = geometric_taus(tau_min, tau_max, n_taus)?;
            let report = select_k(&grid, k_max)?;
            println!("k={}", report.chosen_k);
            if let Some(path) = out {
                report.write_csv(std::fs::File::create(path)?)?;
            }
            Ok(true)
        }
        Command::Export { records, out } => {
            let mut all = Vec::new();
            for p in &records {
                let mut r: Vec<RunRecord> = serde_json::from_str(&std::fs::read_to_string(p)?)?;
                all.append(&mut r);
            }
            write_outputs(&all, &out)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("at least one seed diverged");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
