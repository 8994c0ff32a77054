use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mrp_lab::catalog::{self, TwoStateReward};
use mrp_lab::experiments::{
    self, ContractionConfig, CyclicConfig, EstimatorKind, ExperimentResult, LayeredConfig, RunConfig, TimeConfig,
};
use mrp_lab::format::num;
use mrp_lab::model_based::{iml_estimate, lstd_value, ml_estimate};
use mrp_lab::mvu::{enumerate_consistent, mvu_estimate, EnumerationLimits, DEFAULT_MAX_MULTISETS};
use mrp_lab::sampled::{mc_every_visit, mc_first_visit, td_estimate, LearningRate, TdConfig, TraceKind, UpdateMode};
use mrp_lab::{Estimate, MrpError, MrpSpec, PathSampler, SuffStat};

#[derive(Parser)]
#[command(name = "mrp-lab", version, about = "Value estimation for Markov reward processes")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and report every violation.
    Validate { mrp: PathBuf },
    /// Print the exact value of every state.
    Value {
        mrp: PathBuf,
        #[arg(long)]
        gamma_override: Option<f64>,
    },
    /// Sample paths, one JSON object per line.
    Sample {
        mrp: PathBuf,
        #[command(flatten)]
        draw: Draw,
    },
    /// Sample paths and print their sufficient statistic as JSON.
    Stats {
        mrp: PathBuf,
        #[command(flatten)]
        draw: Draw,
    },
    /// Sample paths and print one estimator's per-state estimates.
    Estimate(EstimateArgs),
    /// Enumerate the path multisets consistent with a statistic and print the MVU estimate.
    Enumerate {
        stat: PathBuf,
        mrp: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long)]
        gamma_override: Option<f64>,
        /// Print ordered path vectors when there are at most this many.
        #[arg(long, default_value_t = 100)]
        print_vectors: u64,
    },
    /// Run a simulation study and write its CSV.
    Experiment(ExperimentArgs),
    /// Write a built-in model as JSON.
    Catalog {
        name: CatalogName,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = RewardArg::Cycle)]
        reward: RewardArg,
    },
}

#[derive(Args)]
struct Draw {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LimitArgs {
    /// Cap on enumerated multisets.
    #[arg(long, default_value_t = DEFAULT_MAX_MULTISETS)]
    limit_vectors: u64,
    /// Wall-clock cap on enumeration in seconds.
    #[arg(long)]
    limit_seconds: Option<f64>,
}

impl LimitArgs {
    fn limits(&self) -> EnumerationLimits {
        EnumerationLimits { max_multisets: self.limit_vectors, max_seconds: self.limit_seconds, parallel: true }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    McFirst,
    McEvery,
    Td,
    Ml,
    Lstd,
    Iml,
    Mvu,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceArg {
    Accumulating,
    Replacing,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RewardArg {
    Cycle,
    Exit,
}

impl From<RewardArg> for TwoStateReward {
    fn from(r: RewardArg) -> Self {
        match r {
            RewardArg::Cycle => TwoStateReward::Cycle,
            RewardArg::Exit => TwoStateReward::Exit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalogName {
    TwoState,
    TwoStateLoop,
    Diamond,
    ForkA,
    ForkB,
}

#[derive(Args)]
struct EstimateArgs {
    mrp: PathBuf,
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    #[command(flatten)]
    draw: Draw,
    #[arg(long, default_value_t = 0.0)]
    td_lambda: f64,
    #[arg(long, value_enum, default_value_t = TraceArg::Accumulating)]
    td_trace: TraceArg,
    #[arg(long)]
    td_modified: bool,
    /// Apply TD updates step by step instead of after each path.
    #[arg(long)]
    td_online: bool,
    /// Constant TD rate; the default is 1/k per state.
    #[arg(long)]
    td_rate: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    td_init: f64,
    #[arg(long)]
    gamma_override: Option<f64>,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentName {
    MseVsPaths,
    MseVsStartprob,
    MseVsTime,
    CyclicMvuMl,
    CyclicMlBias,
    Contraction,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// Output directory; the CSV goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-estimator column files (needs --out).
    #[arg(long)]
    gnuplot: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = RunConfig::DESK.blocks)]
    blocks: usize,
    #[arg(long, default_value_t = RunConfig::DESK.replicates_per_block)]
    replicates: usize,
    /// Path counts (comma separated).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Subgraph-start grid points.
    #[arg(long, value_delimiter = ',')]
    x: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// State-wise prior skews.
    #[arg(long, value_delimiter = ',')]
    c: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    #[arg(long, value_enum, default_value_t = RewardArg::Cycle)]
    reward: RewardArg,
    #[arg(long, default_value_t = 10)]
    layers: usize,
    #[arg(long, default_value_t = 20)]
    states_per_layer: usize,
    #[arg(long, default_value_t = 4)]
    start_layers: usize,
    #[arg(long, default_value_t = 0.2)]
    start_prob: f64,
    #[arg(long, default_value_t = 0.02)]
    high_reward_fraction: f64,
    /// Paths started at the target in the start-probability study.
    #[arg(long, default_value_t = 10)]
    target_starts: usize,
    #[arg(long, default_value_t = 1.0)]
    per_path_cost: f64,
    #[arg(long, default_value_t = 5)]
    timing_repetitions: usize,
    #[arg(long, default_value_t = 100)]
    size: usize,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 20)]
    matrices: usize,
}

fn exit_code(err: &MrpError) -> u8 {
    match err {
        MrpError::Validation(_) | MrpError::Parse(_) | MrpError::InvalidArgument(_) | MrpError::InvalidPath(_) => 2,
        MrpError::ResourceCap(_) | MrpError::PathLengthExceeded(_) => 3,
        MrpError::Infeasible(_) | MrpError::InvalidStatistic(_) | MrpError::SingularSystem => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut out = String::new();
    match pool.install(|| run(cli.command, &mut out)) {
        Ok(()) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(path: &Path, gamma_override: Option<f64>) -> mrp_lab::Result<MrpSpec> {
    let spec = MrpSpec::load(path)?;
    let spec = match gamma_override {
        Some(g) => spec.with_gamma(g),
        None => spec,
    };
    spec.check()?;
    Ok(spec)
}

fn print_estimate(out: &mut String, est: &Estimate) {
    out.push_str("state,value,defined\n");
    for (i, (v, d)) in est.values.iter().zip(&est.defined).enumerate() {
        out.push_str(&format!("{i},{},{}\n", num(*v), u8::from(*d)));
    }
}

fn path_line(path: &mrp_lab::PathSample) -> String {
    let states: Vec<String> = path.states.iter().map(|s| s.to_string()).collect();
    let rewards: Vec<String> = path.rewards.iter().map(|r| num(*r)).collect();
    format!("states={} rewards={}", states.join(","), rewards.join(","))
}

fn run(cmd: Command, out: &mut String) -> mrp_lab::Result<()> {
    match cmd {
        Command::Validate { mrp } => {
            let spec = MrpSpec::load(&mrp)?;
            let violations = spec.validate();
            if violations.is_empty() {
                out.push_str("ok\n");
            } else {
                return Err(MrpError::Validation(violations));
            }
        }
        Command::Value { mrp, gamma_override } => {
            let spec = load(&mrp, gamma_override)?;
            let v = spec.exact_value()?;
            out.push_str("state,value\n");
            for (i, x) in v.iter().enumerate() {
                out.push_str(&format!("{i},{}\n", num(*x)));
            }
        }
        Command::Sample { mrp, draw } => {
            let spec = load(&mrp, None)?;
            let paths = PathSampler::new(&spec).sample_many(draw.n, &mut ChaCha8Rng::seed_from_u64(draw.seed))?;
            for path in paths {
                out.push_str(&serde_json::to_string(&path)?);
                out.push('\n');
            }
        }
        Command::Stats { mrp, draw } => {
            let spec = load(&mrp, None)?;
            let paths = PathSampler::new(&spec).sample_many(draw.n, &mut ChaCha8Rng::seed_from_u64(draw.seed))?;
            out.push_str(&SuffStat::from_paths(&spec, &paths)?.to_json());
            out.push('\n');
        }
        Command::Estimate(args) => estimate(args, out)?,
        Command::Enumerate { stat, mrp, limits, gamma_override, print_vectors } => {
            let spec = load(&mrp, gamma_override)?;
            let stat = SuffStat::load(&stat)?;
            let limits = limits.limits();
            let family = enumerate_consistent(&stat, &spec, &limits)?;
            out.push_str(&format!("multisets {}\n", family.multisets.len()));
            out.push_str(&format!("ordered_vectors {}\n", family.total_ordered_count));
            for (k, m) in family.multisets.iter().enumerate() {
                out.push_str(&format!("multiset {k} arrangements {}\n", m.arrangements));
                for (path, count) in &m.paths {
                    out.push_str(&format!("  {count}x {}\n", path_line(path)));
                }
            }
            if family.total_ordered_count <= print_vectors.into() {
                for (k, v) in family.ordered_vectors().iter().enumerate() {
                    let parts: Vec<String> = v.iter().map(|p| format!("[{}]", path_line(p))).collect();
                    out.push_str(&format!("vector {k} {}\n", parts.join(" ")));
                }
            }
            let est = mvu_estimate(&stat, &spec, spec.gamma, &limits)?;
            print_estimate(out, &est);
        }
        Command::Experiment(args) => experiment(args, out)?,
        Command::Catalog { name, p, gamma, reward } => {
            let spec = match name {
                CatalogName::TwoState => catalog::two_state(p, gamma, reward.into()),
                CatalogName::TwoStateLoop => catalog::two_state_loop(p, gamma),
                CatalogName::Diamond => catalog::diamond(gamma),
                CatalogName::ForkA => catalog::fork_a([0.5, 0.5]),
                CatalogName::ForkB => catalog::fork_b(),
            };
            spec.check()?;
            out.push_str(&spec.to_json());
            out.push('\n');
        }
    }
    Ok(())
}

fn estimate(args: EstimateArgs, out: &mut String) -> mrp_lab::Result<()> {
    let spec = load(&args.mrp, args.gamma_override)?;
    let paths = PathSampler::new(&spec).sample_many(args.draw.n, &mut ChaCha8Rng::seed_from_u64(args.draw.seed))?;
    let n = spec.num_states;
    let g = spec.gamma;
    let est = match args.estimator {
        EstimatorArg::McFirst => mc_first_visit(n, &paths, g),
        EstimatorArg::McEvery => mc_every_visit(n, &paths, g),
        EstimatorArg::Td => {
            let cfg = TdConfig {
                lambda: args.td_lambda,
                trace: match args.td_trace {
                    TraceArg::Accumulating => TraceKind::Accumulating,
                    TraceArg::Replacing => TraceKind::Replacing,
                },
                schedule: args.td_rate.map_or(LearningRate::Harmonic, LearningRate::Constant),
                modified: args.td_modified,
                initial_value: args.td_init,
                mode: if args.td_online { UpdateMode::Online } else { UpdateMode::Offline },
            };
            td_estimate(n, &paths, &cfg, g)?
        }
        EstimatorArg::Ml => ml_estimate(&SuffStat::from_paths(&spec, &paths)?, g)?,
        EstimatorArg::Lstd => {
            let stat = SuffStat::from_paths(&spec, &paths)?;
            Estimate {
                values: lstd_value(&stat.ml_params()?, g),
                defined: stat.visit_counts.iter().map(|&k| k > 0).collect(),
            }
        }
        EstimatorArg::Iml => iml_estimate(n, &paths, g),
        EstimatorArg::Mvu => mvu_estimate(&SuffStat::from_paths(&spec, &paths)?, &spec, g, &args.limits.limits())?,
    };
    print_estimate(out, &est);
    Ok(())
}

fn or_default<T: Clone>(given: &[T], default: &[T]) -> Vec<T> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

fn experiment(args: ExperimentArgs, out: &mut String) -> mrp_lab::Result<()> {
    if args.gnuplot && args.out.is_none() {
        return Err(MrpError::InvalidArgument("--gnuplot needs --out".into()));
    }
    let run = RunConfig { blocks: args.blocks, replicates_per_block: args.replicates, seed: args.seed };
    if run.replicates() == 0 {
        return Err(MrpError::InvalidArgument("need at least one block and one replicate".into()));
    }
    let kinds = args
        .estimators
        .iter()
        .map(|s| {
            EstimatorKind::from_name(s)
                .ok_or_else(|| MrpError::InvalidArgument(format!("unknown estimator {s} (ml, iml, td, mc, mvu)")))
        })
        .collect::<mrp_lab::Result<Vec<_>>>()?;
    let kinds = or_default(&kinds, &EstimatorKind::STANDARD);
    let layered = LayeredConfig {
        num_layers: args.layers,
        max_states_per_layer: args.states_per_layer,
        start_layers: args.start_layers,
        start_prob_target: args.start_prob,
        high_reward_fraction: args.high_reward_fraction,
        ..LayeredConfig::default()
    };
    let n_grid = [10, 20, 50, 100, 200, 500];
    let (id, result): (&str, ExperimentResult) = match args.name {
        ExperimentName::MseVsPaths => {
            ("mse-vs-paths", experiments::exp_mse_vs_paths(&layered, &or_default(&args.n, &n_grid), &kinds, &run)?)
        }
        ExperimentName::MseVsStartprob => (
            "mse-vs-startprob",
            experiments::exp_mse_vs_startprob(
                &layered,
                &or_default(&args.x, &[0, 1, 2, 3, 4, 5, 6]),
                args.target_starts,
                &kinds,
                &run,
            )?,
        ),
        ExperimentName::MseVsTime => (
            "mse-vs-time",
            experiments::exp_mse_vs_time(
                &layered,
                &or_default(&args.n, &n_grid),
                &kinds,
                &run,
                &TimeConfig { per_path_cost: args.per_path_cost, repetitions: args.timing_repetitions },
            )?,
        ),
        ExperimentName::CyclicMvuMl => {
            let d = CyclicConfig::default();
            let cfg = CyclicConfig {
                p_grid: or_default(&args.p, &d.p_grid),
                gamma_grid: or_default(&args.gamma, &d.gamma_grid),
                n_grid: or_default(&args.n, &d.n_grid),
                reward: args.reward.into(),
            };
            ("cyclic-mvu-ml", experiments::exp_cyclic_mvu_ml(&cfg, &run)?)
        }
        ExperimentName::CyclicMlBias => {
            let p = *args.p.first().unwrap_or(&0.9);
            let gamma = *args.gamma.first().unwrap_or(&0.9);
            let n = or_default(&args.n, &[1, 2, 4, 8, 16, 32]);
            ("cyclic-ml-bias", experiments::exp_cyclic_ml_bias(p, gamma, &n, args.reward.into(), &run)?)
        }
        ExperimentName::Contraction => {
            let d = ContractionConfig::default();
            let cfg = ContractionConfig {
                size: args.size,
                gammas: or_default(&args.gamma, &d.gammas),
                cs: or_default(&args.c, &d.cs),
                iterations: args.iterations,
                matrices: args.matrices,
            };
            ("contraction", experiments::exp_contraction(&cfg, &run)?)
        }
    };
    let csv = result.to_csv();
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{id}.csv"));
            std::fs::write(&path, csv)?;
            out.push_str(&format!("wrote {}\n", path.display()));
            if args.gnuplot {
                for p in result.write_gnuplot(dir)? {
                    out.push_str(&format!("wrote {}\n", p.display()));
                }
            }
        }
        None => out.push_str(&csv),
    }
    Ok(())
}
