use std::path::PathBuf;
use std::process::ExitCode;

use annak_core::graphnet::SplitMode;
use annak_core::isc::{PartialRunPolicy, Scope, Stage};
use annak_core::synth::GeneratorKind;
use annak_pipeline::config::FdrAlpha;
use annak_pipeline::{
    commands, validate, AnalysisConfig, CovariateSet, PipelineError, Result, SynthOptions, Synthetic,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "annak", version, about = "Network centrality and neural response similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// In-degree, median split and dyad categories.
    Network(Common),
    /// Raw inter-subject correlations from a time series manifest.
    Isc(Common),
    /// Mean ISC per subject against group and in-degree.
    SubjectLevel(Common),
    /// Crossed mixed models on dyadic ISC.
    DyadLevel(Common),
    /// Rating similarity against group and dyad category.
    Behav(Common),
    /// Write a synthetic study with planted structure.
    Synth(SynthArgs),
    /// Run the built-in oracle and recovery checks.
    Validate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    IntraCommunityOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    MedianSplit,
    EqualGroups,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Exclude,
    Intersect,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    RawR,
    FisherZ,
    FisherZStandardized,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    SharedSignal,
    NearestNeighbor,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    #[arg(long, value_enum)]
    partial_run_policy: Option<PolicyArg>,
    /// Comma-separated: none, demographics, demographics+social-distance,
    /// friendship, preferences.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// FDR level for this command's family.
    #[arg(long)]
    alpha: Option<f64>,
    /// ISC stage entering this command's models.
    #[arg(long, value_enum)]
    stage: Option<StageArg>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    exclusions: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    communities: Option<PathBuf>,
    #[arg(long)]
    timeseries: Option<PathBuf>,
    #[arg(long)]
    isc: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long, default_value = "synth")]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    subjects: usize,
    #[arg(long, default_value_t = 20)]
    regions: usize,
    #[arg(long, default_value_t = 5)]
    planted: usize,
    #[arg(long, default_value_t = 1)]
    runs: u32,
    #[arg(long, default_value_t = 5000)]
    timepoints: usize,
    #[arg(long, default_value_t = 0.3)]
    alpha_min: f64,
    #[arg(long, default_value_t = 0.8)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.3)]
    null_alpha: f64,
    /// Same α for every subject and region.
    #[arg(long)]
    constant_alpha: Option<f64>,
    #[arg(long, default_value_t = 2)]
    communities: usize,
    #[arg(long, value_enum, default_value = "shared-signal")]
    generator: GeneratorArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq)]
enum Family {
    Network,
    Subject,
    Dyad,
    Behavior,
}

impl Common {
    fn into_config(self, family: Family) -> Result<AnalysisConfig> {
        let mut c = match &self.config {
            Some(p) => AnalysisConfig::load(p)?,
            None => AnalysisConfig::default(),
        };
        let inputs = &mut c.inputs;
        for (slot, value) in [
            (&mut inputs.edges, self.edges),
            (&mut inputs.communities, self.communities),
            (&mut inputs.timeseries, self.timeseries),
            (&mut inputs.isc, self.isc),
            (&mut inputs.ratings, self.ratings),
            (&mut inputs.attributes, self.attributes),
            (&mut inputs.exclusions, self.exclusions),
        ] {
            if value.is_some() {
                *slot = value;
            }
        }
        if let Some(s) = self.scope {
            c.scope = Some(match s {
                ScopeArg::All => Scope::All,
                ScopeArg::IntraCommunityOnly => Scope::IntraCommunityOnly,
            });
        }
        if let Some(s) = self.split {
            c.split = match s {
                SplitArg::MedianSplit => SplitMode::MedianSplit,
                SplitArg::EqualGroups => SplitMode::EqualGroups,
            };
        }
        if let Some(p) = self.partial_run_policy {
            c.partial_run_policy = match p {
                PolicyArg::Exclude => PartialRunPolicy::Exclude,
                PolicyArg::Intersect => PartialRunPolicy::Intersect,
            };
        }
        if let Some(list) = self.covariates {
            c.covariates = list
                .iter()
                .map(|s| {
                    CovariateSet::parse(s.trim())
                        .ok_or_else(|| PipelineError::Config(format!("unknown covariate set {s}")))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(a) = self.alpha {
            let FdrAlpha {
                subject,
                dyad,
                behavior,
            } = &mut c.fdr_alpha;
            match family {
                Family::Subject => *subject = a,
                Family::Dyad => *dyad = a,
                Family::Behavior => *behavior = a,
                Family::Network => return Err(PipelineError::Config("--alpha has no effect here".into())),
            }
        }
        if let Some(s) = self.stage {
            let stage = match s {
                StageArg::RawR => Stage::RawR,
                StageArg::FisherZ => Stage::FisherZ,
                StageArg::FisherZStandardized => Stage::FisherZStandardized,
            };
            match family {
                Family::Subject => c.subject_stage = stage,
                Family::Dyad => c.dyad_stage = stage,
                _ => return Err(PipelineError::Config("--stage has no effect here".into())),
            }
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = self.out {
            c.output_dir = o;
        }
        c.resolve()
    }
}

fn with_pool<F: FnOnce() -> Result<()> + Send>(threads: Option<usize>, f: F) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn run(cli: Cli) -> Result<()> {
    let analysis = |common: Common, family: Family, f: fn(&AnalysisConfig) -> Result<()>| {
        let config = common.into_config(family)?;
        with_pool(config.threads, || f(&config))
    };
    match cli.command {
        Command::Network(c) => analysis(c, Family::Network, commands::network),
        Command::Isc(c) => analysis(c, Family::Network, commands::isc),
        Command::SubjectLevel(c) => analysis(c, Family::Subject, commands::subject_level),
        Command::DyadLevel(c) => analysis(c, Family::Dyad, commands::dyad_level),
        Command::Behav(c) => analysis(c, Family::Behavior, commands::behavior),
        Command::Validate(c) => analysis(c, Family::Network, |config| {
            let report = validate::validate(config)?;
            for check in &report.checks {
                println!(
                    "{} {}: {}",
                    if check.passed { "ok  " } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            Ok(())
        }),
        Command::Synth(s) => {
            let options = SynthOptions {
                subjects: s.subjects,
                regions: s.regions,
                planted: s.planted,
                runs: s.runs,
                timepoints_per_run: s.timepoints,
                alpha_min: s.alpha_min,
                alpha_max: s.alpha_max,
                null_alpha: s.null_alpha,
                communities: s.communities,
                generator: match s.generator {
                    GeneratorArg::SharedSignal => GeneratorKind::SharedSignal,
                    GeneratorArg::NearestNeighbor => GeneratorKind::nearest_neighbor(),
                },
                constant_alpha: s.constant_alpha,
                seed: s.seed,
                ..Default::default()
            };
            let synthetic = Synthetic::build(&options)?;
            synthetic.write(&s.out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
