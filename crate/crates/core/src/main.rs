use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mdcs::error::{Error, Result};
use mdcs::metrics::PredictionDump;
use mdcs::net::Checkpoint;
use mdcs::runner::{
    alpha_sweep, evaluate, expert_count_sweep, lambda_sweep, prepare_data, report_from_dump, train,
    variance_protocol, Format, TrainConfig, ALPHA_SWEEP, SINGLE_SWEEP, TRIPLE_SWEEP,
};

#[derive(Parser)]
#[command(name = "mdcs", version, about = "Multi-expert long-tailed training with diversity and consistency losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured train and test sets as CSV.
    GenData(Common),
    /// Train, then evaluate on the test set.
    Train(Common),
    /// Evaluate a checkpoint on the configured test set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Model variance over bootstrap-resampled training sets.
    Variance {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        m: usize,
        /// Run with CS off and on and report both.
        #[arg(long)]
        paired: bool,
    },
    /// Lambda sweep; points separated by `;`, values within a point by `,`.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        values: Option<String>,
        /// Use the built-in three-expert lambda combinations.
        #[arg(long, conflicts_with = "values")]
        triples: bool,
    },
    /// Alpha sweep; comma-separated values.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        values: Option<String>,
    },
    /// Expert-count sweep with automatic lambdas; comma-separated counts.
    SweepExperts {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        values: Option<String>,
    },
    /// Rebuild a report from a prediction dump.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dump: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(p) => TrainConfig::from_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<Option<&Path>> {
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
    }
    Ok(common.out.as_deref())
}

/// Prints `text` and, with `--out`, also writes it to `name` in that directory.
fn emit(common: &Common, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = out_dir(common)? {
        fs::write(dir.join(name), text)?;
    }
    print!("{text}");
    Ok(())
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse `{v}` as a number")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(common) => {
            let cfg = load_config(&common)?;
            let data = prepare_data(&cfg)?;
            let dir = out_dir(&common)?.ok_or_else(|| Error::Config("gen-data needs --out".into()))?;
            data.train.save(dir.join("train.csv"))?;
            data.test.save(dir.join("test.csv"))?;
            println!(
                "train: {} instances, counts {:?}\ntest: {} instances",
                data.train.len(),
                data.train.counts(),
                data.test.len()
            );
        }
        Command::Train(common) => {
            let format: Format = common.format.parse()?;
            let cfg = load_config(&common)?;
            let data = prepare_data(&cfg)?;
            let start = Instant::now();
            let outcome = train(&cfg, &data.train)?;
            let (report, dump) = evaluate(outcome.model(), &data.test, &data.split, &cfg)?;
            if let Some(dir) = out_dir(&common)? {
                outcome.checkpoint.save(dir.join("model.ckpt"))?;
                outcome.write_log(fs::File::create(dir.join("train_log.csv"))?)?;
                dump.save(dir.join("dump.csv"))?;
            }
            emit(&common, &format!("report.{}", format.extension()), &report.render(format))?;
            eprintln!("wall clock: {:.2}s", start.elapsed().as_secs_f64());
        }
        Command::Eval { common, checkpoint } => {
            let format: Format = common.format.parse()?;
            let cfg = load_config(&common)?;
            let data = prepare_data(&cfg)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let (report, dump) = evaluate(&ckpt.model, &data.test, &data.split, &cfg)?;
            if let Some(dir) = out_dir(&common)? {
                dump.save(dir.join("dump.csv"))?;
            }
            emit(&common, &format!("report.{}", format.extension()), &report.render(format))?;
        }
        Command::Variance { common, m, paired } => {
            let format: Format = common.format.parse()?;
            let cfg = load_config(&common)?;
            let data = prepare_data(&cfg)?;
            let start = Instant::now();
            let report = variance_protocol(&cfg, &data, m, paired)?;
            emit(&common, &format!("variance.{}", format.extension()), &report.render(format))?;
            eprintln!("wall clock: {:.2}s", start.elapsed().as_secs_f64());
        }
        Command::SweepLambda {
            common,
            values,
            triples,
        } => {
            let format: Format = common.format.parse()?;
            let cfg = load_config(&common)?;
            let points: Vec<Vec<f64>> = match values {
                Some(v) => v.split(';').map(parse_floats).collect::<Result<_>>()?,
                None if triples => TRIPLE_SWEEP.iter().map(|t| t.to_vec()).collect(),
                None => SINGLE_SWEEP.iter().map(|&l| vec![l]).collect(),
            };
            let table = lambda_sweep(&cfg, &points)?;
            emit(&common, &format!("sweep_lambda.{}", format.extension()), &table.render(format))?;
        }
        Command::SweepAlpha { common, values } => {
            let format: Format = common.format.parse()?;
            let cfg = load_config(&common)?;
            let alphas = match values {
                Some(v) => parse_floats(&v)?,
                None => ALPHA_SWEEP.to_vec(),
            };
            let table = alpha_sweep(&cfg, &alphas)?;
            emit(&common, &format!("sweep_alpha.{}", format.extension()), &table.render(format))?;
        }
        Command::SweepExperts { common, values } => {
            let format: Format = common.format.parse()?;
            let cfg = load_config(&common)?;
            let counts: Vec<usize> = match values {
                Some(v) => v
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("cannot parse `{s}` as a count")))
                    })
                    .collect::<Result<_>>()?,
                None => (1..=7).collect(),
            };
            let table = expert_count_sweep(&cfg, &counts)?;
            emit(&common, &format!("sweep_experts.{}", format.extension()), &table.render(format))?;
        }
        Command::Report { common, dump } => {
            let format: Format = common.format.parse()?;
            let cfg = load_config(&common)?;
            let data = prepare_data(&cfg)?;
            let dump = PredictionDump::load(&dump)?;
            let report = report_from_dump(&dump, &data.split, &cfg)?;
            emit(&common, &format!("report.{}", format.extension()), &report.render(format))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
