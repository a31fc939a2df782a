use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sis_ope::estimators::{
    estimate_incris, estimate_is, estimate_pdis, estimate_sis, EstimateReport,
};
use sis_ope::experiment::{run_experiment, ExperimentConfig};
use sis_ope::lift::{
    build_lift_domain, DomainBundle, LiftDomainSpec, DEFAULT_HORIZON_CAP, DEFAULT_NOISE,
};
use sis_ope::mdp::sample_batch;
use sis_ope::oracle::{
    enumerate_moments_with_budget, exact_estimator_stats, scan_noise, true_return_dp,
};
use sis_ope::search::{search_negligible_set, SearchConfig, SearchResult};
use sis_ope::{Error, StateSet, TrajectoryBatch};

#[derive(Parser)]
#[command(
    name = "sisope",
    version,
    about = "State-based importance sampling for tabular off-policy evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact expected return of the evaluation policy.
    Truth {
        #[command(flatten)]
        domain: DomainArgs,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Sample trajectories and write them as JSON lines.
    Sample {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        batch: BatchArgs,
        /// Policy that generates the data.
        #[arg(long, value_enum, default_value_t = PolicyChoice::Behaviour)]
        policy: PolicyChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one estimator on a trajectory log or a freshly sampled batch.
    Eval {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long, value_enum)]
        estimator: EstimatorChoice,
        /// Dropped states for SIS: `auto` (search), `lift`, `none`, or comma-separated indices.
        #[arg(long, default_value = "auto")]
        drop: String,
        #[command(flatten)]
        search: SearchArgs,
        /// Policy to evaluate; `behaviour` makes the evaluation and behaviour policies equal.
        #[arg(long, value_enum, default_value_t = PolicyChoice::Eval)]
        target: PolicyChoice,
        #[arg(long)]
        json: bool,
    },
    /// Search for a negligible dropped-state set and print the diagnostics CSV.
    Search {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        batch: BatchArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_enum, default_value_t = PolicyChoice::Eval)]
        target: PolicyChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid from a TOML file and write result CSVs.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Also write per-figure CSVs.
        #[arg(long)]
        plot_data: bool,
    },
    /// Exact moments by enumeration, or a scan of the noise level against target returns.
    Oracle {
        #[command(flatten)]
        domain: DomainArgs,
        /// Dropped set: `lift`, `none`, or comma-separated indices.
        #[arg(long, default_value = "lift")]
        drop: String,
        /// Trajectories per estimate when reporting exact MSE.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = sis_ope::oracle::DEFAULT_LEAF_BUDGET)]
        budget: u64,
        /// Print `delta,true_return` over a grid of noise levels instead.
        #[arg(long)]
        scan_noise: bool,
        #[arg(long, default_value_t = 0.001)]
        scan_step: f64,
    },
    /// Export the domain as JSON with explicit transition and reward tensors.
    Mdp {
        #[command(flatten)]
        domain: DomainArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainChoice {
    #[value(alias = "deterministic")]
    Det,
    #[value(alias = "stochastic")]
    Stoch,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PolicyChoice {
    Eval,
    Behaviour,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorChoice {
    Is,
    Pdis,
    Incris,
    Sis,
}

#[derive(Args)]
struct DomainArgs {
    #[arg(long, value_enum, default_value_t = DomainChoice::Det)]
    domain: DomainChoice,
    #[arg(long, default_value_t = 3)]
    bound: usize,
    /// Transition noise of the stochastic domain.
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    noise: f64,
    /// Evaluation-policy noise; defaults to the transition noise.
    #[arg(long)]
    policy_noise: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_HORIZON_CAP)]
    horizon: usize,
}

impl DomainArgs {
    fn spec(&self) -> LiftDomainSpec {
        LiftDomainSpec {
            bound: self.bound,
            noise: match self.domain {
                DomainChoice::Det => 0.0,
                DomainChoice::Stoch => self.noise,
            },
            policy_noise: self.policy_noise,
            horizon_cap: self.horizon,
        }
    }

    fn build(&self) -> Result<DomainBundle, Error> {
        build_lift_domain(self.spec())
    }
}

#[derive(Args)]
struct BatchArgs {
    /// Read trajectories from a JSON-lines log instead of sampling.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = sis_ope::search::DEFAULT_MAX_CARDINALITY)]
    max_cardinality: usize,
    /// Search on the first half of the batch, estimate on the second.
    #[arg(long)]
    split: bool,
}

fn file_error(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

fn load_batch(args: &BatchArgs, bundle: &DomainBundle) -> Result<TrajectoryBatch, Error> {
    match &args.input {
        Some(path) => {
            let batch = TrajectoryBatch::read_jsonl(BufReader::new(
                File::open(path).map_err(file_error(path))?,
            ))?;
            batch.check_against(&bundle.mdp)?;
            Ok(batch)
        }
        None => sample_batch(&bundle.mdp, &bundle.behaviour_policy, args.n, args.seed),
    }
}

fn parse_set(text: &str, bundle: &DomainBundle) -> Result<StateSet, Error> {
    match text {
        "lift" => Ok(bundle.lift_states.clone()),
        "none" | "" => Ok(StateSet::new()),
        list => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&i| i < bundle.mdp.num_states())
                    .ok_or_else(|| {
                        Error::InvalidSearchConfig(format!("bad state index {s:?} in --drop"))
                    })
            })
            .collect(),
    }
}

fn search_config(args: &SearchArgs, bundle: &DomainBundle) -> SearchConfig {
    SearchConfig {
        max_cardinality: args.max_cardinality,
        split_batch: args.split,
        ..SearchConfig::for_mdp(&bundle.mdp, args.epsilon)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(file_error(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_report(report: &EstimateReport, json: bool) -> Result<(), Error> {
    if json {
        println!("{}", report.to_json()?);
    } else {
        println!("{:?}", report.estimate);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Truth { domain, json } => {
            let bundle = domain.build()?;
            let truth = true_return_dp(&bundle.mdp, &bundle.eval_policy)?;
            if json {
                println!("{}", serde_json::to_string(&truth)?);
            } else {
                println!("{:?}", truth.true_return);
            }
        }
        Command::Sample {
            domain,
            batch,
            policy,
            out,
        } => {
            let bundle = domain.build()?;
            let pi = match policy {
                PolicyChoice::Eval => &bundle.eval_policy,
                PolicyChoice::Behaviour => &bundle.behaviour_policy,
            };
            let sampled = sample_batch(&bundle.mdp, pi, batch.n, batch.seed)?;
            sampled.write_jsonl(output(&out)?)?;
        }
        Command::Eval {
            domain,
            batch,
            estimator,
            drop,
            search,
            target,
            json,
        } => {
            let bundle = domain.build()?;
            let data = load_batch(&batch, &bundle)?;
            let pi_b = &bundle.behaviour_policy;
            let pi_e = if target == PolicyChoice::Behaviour {
                pi_b
            } else {
                &bundle.eval_policy
            };
            let report = match estimator {
                EstimatorChoice::Is => estimate_is(&data, pi_e, pi_b)?,
                EstimatorChoice::Pdis => estimate_pdis(&data, pi_e, pi_b)?,
                EstimatorChoice::Incris => estimate_incris(&data, pi_e, pi_b)?,
                EstimatorChoice::Sis if drop == "auto" => {
                    let result =
                        search_negligible_set(&data, pi_e, pi_b, &search_config(&search, &bundle))?;
                    eprintln!(
                        "dropped set: {}",
                        sis_ope::search::format_state_set(&result.best_set)
                    );
                    result.report
                }
                EstimatorChoice::Sis => {
                    estimate_sis(&data, pi_e, pi_b, &parse_set(&drop, &bundle)?)?
                }
            };
            print_report(&report, json)?;
        }
        Command::Search {
            domain,
            batch,
            search,
            target,
            out,
        } => {
            let bundle = domain.build()?;
            let data = load_batch(&batch, &bundle)?;
            let pi_b = &bundle.behaviour_policy;
            let pi_e = if target == PolicyChoice::Behaviour {
                pi_b
            } else {
                &bundle.eval_policy
            };
            let result: SearchResult =
                search_negligible_set(&data, pi_e, pi_b, &search_config(&search, &bundle))?;
            result.write_diagnostics_csv(output(&out)?)?;
            eprintln!(
                "best set {} mse_hat {} estimate {}",
                sis_ope::search::format_state_set(&result.best_set),
                result.best_mse_hat,
                result.estimate
            );
        }
        Command::Experiment {
            config,
            output_dir,
            plot_data,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let dir = output_dir.unwrap_or_else(|| config.output_dir.clone());
            let result = run_experiment(&config)?;
            for path in result.write_to(&dir, plot_data)? {
                eprintln!("wrote {}", path.display());
            }
            for row in result.failures() {
                eprintln!(
                    "failed: size {} n {} replicate {} {}: {}",
                    row.domain_size,
                    row.n,
                    row.replicate,
                    row.estimator.label(),
                    row.error.as_deref().unwrap_or("")
                );
            }
        }
        Command::Oracle {
            domain,
            drop,
            n,
            budget,
            scan_noise: scan,
            scan_step,
        } => {
            if scan {
                if !(scan_step > 0.0 && scan_step < 0.5) {
                    return Err(Error::InvalidDomain(format!(
                        "scan step must be in (0, 0.5), got {scan_step}"
                    )));
                }
                let grid: Vec<f64> = (0..)
                    .map(|i| i as f64 * scan_step)
                    .take_while(|&d| d < 0.5)
                    .collect();
                let spec = domain.spec();
                println!("delta,true_return");
                for point in scan_noise(spec.bound, spec.horizon_cap, spec.policy_noise, &grid)? {
                    println!("{},{}", point.noise, point.true_return);
                }
                return Ok(());
            }
            let bundle = domain.build()?;
            let dropped = parse_set(&drop, &bundle)?;
            let truth = true_return_dp(&bundle.mdp, &bundle.eval_policy)?;
            let moments = enumerate_moments_with_budget(
                &bundle.mdp,
                &bundle.behaviour_policy,
                &bundle.eval_policy,
                &dropped,
                bundle.mdp.horizon_cap(),
                budget,
            )?;
            let stats = exact_estimator_stats(&moments, n);
            let identity_gap = moments.e_abg - (moments.e_a * moments.e_bg + moments.cov_a_bg);
            let report = serde_json::json!({
                "truth": truth,
                "moments": moments,
                "sis_stats": stats,
                "n": n,
                "identity_gap": identity_gap,
                "is_bias": moments.e_abg - truth.true_return,
                "pdis_bias": moments.e_pdis - truth.true_return,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Mdp { domain } => {
            println!("{}", domain.build()?.mdp.to_json()?);
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::Toml(_) => 3,
        Error::Io(_) | Error::File { .. } => 4,
        Error::BudgetExceeded { .. } => 5,
        Error::MalformedLog { .. } | Error::Json(_) => 6,
        Error::InvalidMdp(_)
        | Error::InvalidPolicy(_)
        | Error::InvalidDomain(_)
        | Error::DegeneratePolicyRow { .. } => 7,
        Error::SupportViolation { .. }
        | Error::InsufficientData { .. }
        | Error::InvalidSearchConfig(_) => 8,
        Error::Csv(_) => 9,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
