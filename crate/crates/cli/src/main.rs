use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use netcp::engine::{log_evidence, run_mcmc, EvidenceConfig, ModelKind, RunConfig};
use netcp::experiments::{run_study, LikelihoodKind, ScenarioId, ScenarioSpec, StudyBudget};
use netcp::files::{load_csv, write_outputs};
use netcp::preprocess::{preprocess, BandSpec, PreprocessConfig};
use netcp::ObservationMatrix;

#[derive(Parser)]
#[command(name = "netcp", version, about = "Change-point detection with latent lead-lag graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler and write posterior summaries.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Estimate the log marginal likelihood of the data.
    Evidence {
        #[command(flatten)]
        input: InputArgs,
        /// Write the estimate as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulation study on a synthetic scenario.
    Study(StudyArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV with a header of labels and one column per series.
    #[arg(long)]
    input: PathBuf,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    sample_rate: f64,
    /// Butterworth bandpass as LO:HI[:ORDER].
    #[arg(long)]
    bandpass: Option<BandSpec>,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long)]
    difference: bool,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    scenario: ScenarioId,
    #[arg(long, default_value = "gauss_mean")]
    likelihood: LikelihoodKind,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long = "len", default_value_t = 500)]
    len: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    #[arg(long, default_value_t = 150)]
    particles: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also estimate log Bayes factors of yao against netcp.
    #[arg(long)]
    bayes_factors: bool,
    #[arg(long, default_value_t = 500)]
    evidence_iters: usize,
    #[arg(long, default_value_t = 100)]
    evidence_burn_in: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Netcp,
    Yao,
}

/// Contents of `--config`: run settings plus optional preprocessing and
/// evidence schedules.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    #[serde(flatten)]
    run: RunConfig,
    preprocess: PreprocessConfig,
    evidence: EvidenceConfig,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn prepare(args: &InputArgs) -> Result<(FileConfig, Vec<String>, ObservationMatrix)> {
    let mut cfg = load_config(args.config.as_deref())?;
    let pre = &mut cfg.preprocess;
    if args.bandpass.is_some() {
        pre.bandpass = args.bandpass;
    }
    if args.downsample.is_some() {
        pre.downsample = args.downsample;
    }
    pre.difference |= args.difference;
    pre.standardize |= args.standardize;
    let run = &mut cfg.run;
    if let Some(n) = args.particles {
        run.particles = n;
    }
    if let Some(s) = args.seed {
        run.seed = s;
    }
    if let Some(n) = args.iters {
        run.n_iters = n;
    }
    if let Some(n) = args.burn_in {
        run.burn_in = n;
    }
    if let Some(n) = args.chains {
        run.n_chains = n;
    }
    if let Some(m) = args.model {
        run.model = match m {
            ModelArg::Netcp => ModelKind::Netcp,
            ModelArg::Yao => ModelKind::Yao,
        };
    }
    run.validate()?;

    let raw = load_csv(&args.input, args.sample_rate)?;
    let obs = preprocess(&raw, &cfg.preprocess)?;
    // AR segments read lagged values before time 1 from a zero context
    let lags = cfg
        .run
        .segment
        .specs()
        .iter()
        .filter_map(|s| s.ar_hyper().ok().flatten().map(|h| h.lags()))
        .max()
        .unwrap_or(0);
    let obs = ObservationMatrix::new(obs.rows().to_vec(), lags)?;
    info!("{} series of length {}", obs.dim(), obs.len());
    Ok((cfg, raw.series_labels, obs))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { input, output_dir } => {
            let (cfg, labels, y) = prepare(&input)?;
            let summary = run_mcmc(&y, &cfg.run)?;
            write_outputs(&summary, &labels, cfg.run.seed, &cfg, &output_dir)?;
            println!("wrote {}", output_dir.display());
        }
        Command::Evidence { input, out } => {
            let (cfg, _, y) = prepare(&input)?;
            let est = log_evidence(&y, &cfg.run, &cfg.evidence)?;
            let json = serde_json::to_string_pretty(&est)?;
            match out {
                Some(p) => fs::write(&p, json)?,
                None => println!("{json}"),
            }
        }
        Command::Study(a) => {
            if a.replicates == 0 {
                bail!("--replicates must be at least 1");
            }
            let spec = ScenarioSpec::new(a.scenario, a.len, a.likelihood, a.replicates, a.seed);
            let budget = StudyBudget {
                n_iters: a.iters,
                burn_in: a.burn_in,
                particles: a.particles,
                evidence: a.bayes_factors.then_some(EvidenceConfig {
                    n_iters: a.evidence_iters,
                    burn_in: a.evidence_burn_in,
                    ..Default::default()
                }),
            };
            let models = if a.bayes_factors {
                vec![ModelKind::Netcp, ModelKind::Yao]
            } else {
                vec![ModelKind::Netcp]
            };
            let report = run_study(&[spec], &models, &budget)?;
            fs::write(&a.out, serde_json::to_string_pretty(&report)?)?;
            println!("wrote {}", a.out.display());
        }
    }
    Ok(())
}
