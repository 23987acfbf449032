//! Subcommands and their argument parsing.

pub mod bench;
pub mod clt_check;
pub mod secagg_check;
pub mod simulate;
pub mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fedfence_core::secagg::MaskFault;
use fedfence_core::sim::CltSpec;

use crate::config::{EstimatorName, ExperimentConfig, SweepParam};
use crate::{emit, presets, resolve_seed, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "fedfence",
    version,
    about = "Sharded secure aggregation with robust estimation: experiments and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed; overrides the config file. Falls back to FEDFENCE_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path ("-" for stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress the summary on stderr.
    #[arg(long)]
    pub quiet: bool,
    /// Record measured wall time in the `wall_ms` column instead of 0.
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ConfigSource {
    /// TOML experiment config.
    pub config: Option<PathBuf>,
    /// Shipped preset name (iid-noattack, iid-mra, iid-mpa, iid-dd, iid-dba,
    /// noniid-noattack, noniid-mra, noniid-mpa, noniid-dd).
    #[arg(long)]
    pub preset: Option<String>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        match (&self.config, &self.preset) {
            (Some(p), _) => ExperimentConfig::load(p),
            (None, Some(name)) => presets::preset(name),
            (None, None) => Err(CliError::Schema("need a config path or --preset".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    None,
    /// Both orientations of a pair get the same mask, so shards stop cancelling.
    SignBug,
    /// Masks with their top bit cleared, so transcripts are biased.
    ClearTopBit,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the protocol; one CSV row per round:
    /// round,accuracy,asr,est_error,lambda_max,wall_ms,robust_bound_ok
    Simulate {
        #[command(flatten)]
        source: ConfigSource,
        #[command(flatten)]
        common: Common,
    },
    /// Grid over one parameter and the seed list; one CSV row per
    /// (value, seed):
    /// param,value,seed,regime,n,p,malicious,robust_bound_ok,final_accuracy,final_asr,mean_est_error,final_est_error,wall_ms
    Sweep {
        #[command(flatten)]
        source: ConfigSource,
        /// Parameter to vary; overrides `[sweep] param`.
        #[arg(long, value_enum)]
        param: Option<SweepParam>,
        /// Comma-separated values; overrides `[sweep] values`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Comma-separated seeds; overrides `[run] seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact mask cancellation and transcript indistinguishability.
    SecaggCheck {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 25)]
        p: usize,
        #[arg(long, default_value_t = 64)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = FaultArg::None)]
        fault: FaultArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Shard-mean moments per shard size; CSV columns:
    /// shard_size,trials,mean,variance,predicted_variance,variance_ratio,skewness,excess_kurtosis
    CltCheck {
        /// Component means.
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            default_value = "-0.5,-0.25,0,0.25,0.5"
        )]
        means: Vec<f64>,
        /// Component standard deviations.
        #[arg(long, value_delimiter = ',', default_value = "1,1.25,1.5,1.25,1")]
        stddevs: Vec<f64>,
        /// Client population size.
        #[arg(long, default_value_t = 250)]
        population: usize,
        /// Shard sizes |H|.
        #[arg(long, value_delimiter = ',', default_value = "1,5,25,50")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Estimation error on contaminated Gaussians; CSV columns:
    /// d,estimator,sections,m,epsilon,error,wall_ms
    EstimatorBench {
        #[arg(long, value_delimiter = ',', default_value = "16,256,1024")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        m: usize,
        /// Position of the contaminating cluster along the all-ones direction.
        #[arg(long, default_value_t = 0.5)]
        shift: f64,
        #[arg(
            long,
            value_delimiter = ',',
            value_enum,
            default_value = "filter-l2,average"
        )]
        estimators: Vec<EstimatorArg>,
        /// FilterL2 section counts.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        sections: Vec<usize>,
        /// FilterL2 sigma.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        /// Byzantine rows assumed by Krum and Bulyan (default round(epsilon * m)).
        #[arg(long)]
        f: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Average,
    Median,
    TrimmedMean,
    Krum,
    BulyanKrum,
    BulyanTrimmedMean,
    FilterL2,
}

impl From<EstimatorArg> for EstimatorName {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Average => EstimatorName::Average,
            EstimatorArg::Median => EstimatorName::Median,
            EstimatorArg::TrimmedMean => EstimatorName::TrimmedMean,
            EstimatorArg::Krum => EstimatorName::Krum,
            EstimatorArg::BulyanKrum => EstimatorName::BulyanKrum,
            EstimatorArg::BulyanTrimmedMean => EstimatorName::BulyanTrimmedMean,
            EstimatorArg::FilterL2 => EstimatorName::FilterL2,
        }
    }
}

fn note(quiet: bool, msg: &str) {
    if !quiet {
        eprintln!("{msg}");
    }
}

impl Cli {
    pub fn run(self) -> Result<(), CliError> {
        match self.command {
            Command::Simulate { source, common } => {
                let cfg = source.load()?;
                let seed = resolve_seed(common.seed, cfg.run.seed)?;
                let res = simulate::simulate(&cfg, seed, common.wall_clock)?;
                let out = common.out.as_deref().or(cfg.run.out.as_deref());
                emit(out, &res.csv)?;
                let last = res.run.metrics.last().expect("rounds >= 1");
                note(common.quiet, &simulate::summary_line(last));
                Ok(())
            }
            Command::Sweep {
                source,
                param,
                values,
                seeds,
                common,
            } => {
                let cfg = source.load()?;
                let param = param
                    .or(cfg.sweep.as_ref().map(|s| s.param))
                    .ok_or_else(|| {
                        CliError::Schema("sweep.param: missing (use --param or [sweep])".into())
                    })?;
                let values = values
                    .or(cfg.sweep.as_ref().map(|s| s.values.clone()))
                    .ok_or_else(|| {
                        CliError::Schema("sweep.values: missing (use --values or [sweep])".into())
                    })?;
                let seeds = match seeds {
                    Some(s) => s,
                    None if !cfg.run.seeds.is_empty() => cfg.run.seeds.clone(),
                    None => vec![resolve_seed(common.seed, cfg.run.seed)?],
                };
                let csv = sweep::sweep(&cfg, param, &values, &seeds, common.wall_clock)?;
                emit(common.out.as_deref().or(cfg.run.out.as_deref()), &csv)?;
                note(
                    common.quiet,
                    &format!("sweep: {} rows", csv.lines().count() - 1),
                );
                Ok(())
            }
            Command::SecaggCheck {
                n,
                p,
                d,
                trials,
                fault,
                seed,
            } => {
                let fault = match fault {
                    FaultArg::None => MaskFault::None,
                    FaultArg::SignBug => MaskFault::SignBug,
                    FaultArg::ClearTopBit => MaskFault::ClearTopBit,
                };
                let report =
                    secagg_check::secagg_check(n, p, d, trials, resolve_seed(seed, None)?, fault)?;
                print!("{}", report.render());
                if report.pass() {
                    Ok(())
                } else {
                    Err(CliError::Check("secure aggregation check failed".into()))
                }
            }
            Command::CltCheck {
                means,
                stddevs,
                population,
                sizes,
                trials,
                common,
            } => {
                let spec = CltSpec {
                    means,
                    stddevs,
                    population,
                };
                let table =
                    clt_check::run_clt(&spec, &sizes, trials, resolve_seed(common.seed, None)?)?;
                emit(common.out.as_deref(), &table.csv())?;
                note(common.quiet, table.notes().trim_end());
                let breaches = table.breaches();
                if breaches.is_empty() {
                    note(common.quiet, "result: PASS");
                    Ok(())
                } else {
                    Err(CliError::Check(breaches.join("; ")))
                }
            }
            Command::EstimatorBench {
                dims,
                epsilon,
                m,
                shift,
                estimators,
                sections,
                sigma,
                f,
                common,
            } => {
                let spec = bench::BenchSpec {
                    dims,
                    m,
                    epsilon,
                    shift,
                    estimators: estimators.into_iter().map(Into::into).collect(),
                    sections,
                    sigma,
                    f,
                    seed: resolve_seed(common.seed, None)?,
                };
                let rows = bench::estimator_bench(&spec)?;
                emit(
                    common.out.as_deref(),
                    &bench::bench_csv(&spec, &rows, common.wall_clock),
                )
            }
        }
    }
}
