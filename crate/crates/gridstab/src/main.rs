use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridstab::error::{exit, Error, Result};
use gridstab::formats::{
    load_case, num, read_json, spectrum_csv, table_csv, to_json, write_json, write_text,
};
use gridstab::parallel::Parallel;
use gridstab::pipeline::{
    run_pipeline, solve_base, ExperimentConfig, RunOutcome, DEFAULT_SEARCH_INTERVAL,
    DEFAULT_TOLERANCE,
};
use gridstab::report::{
    critical_table_text, default_grid, evaluate_plan, summary_csv, write_evaluation,
    DEFAULT_BIN_WIDTH,
};
use gridstab_core::analysis::TestChannels;
use gridstab_core::case::PowerSystemCase;
use gridstab_core::network::SteadyStateNetwork;
use gridstab_core::optimize::{
    anneal_distinct, anneal_uncertain, best_of_restarts, optimize_beta_equal, AnnealingSchedule,
    DampingPlan, NoisyObjectiveConfig, NoisyProblem,
};
use gridstab_core::powerflow::{solve_power_flow, PowerFlowOptions, PowerFlowSolution};
use gridstab_core::rng::SeededSampler;
use gridstab_core::stability::{assemble_jacobian, lyapunov_exponent, ZERO_MODE_TOLERANCE};
use gridstab_core::uncertainty::{default_uncertainty, UncertaintySpec};

/// Small-signal stability of power grids under parameter uncertainty.
#[derive(Parser)]
#[command(name = "gridstab", version)]
struct Cli {
    /// Root seed for every stochastic step; one is generated and printed when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file, or directory for commands that write several files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CaseArgs {
    /// MATPOWER `.m` file or case JSON.
    case: PathBuf,
    /// Dynamics sidecar (CSV or JSON) with H, D and x'd per generator.
    #[arg(long)]
    dynamics: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Read a case and print it as canonical JSON.
    Parse(CaseArgs),
    /// Solve the AC power flow.
    Powerflow {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = PowerFlowOptions::default().tolerance)]
        tol: f64,
        #[arg(long, default_value_t = PowerFlowOptions::default().max_iterations)]
        max_iter: usize,
    },
    /// Reduce a case to its effective generator network.
    Reduce(CaseArgs),
    /// Largest non-trivial exponent of a network under a damping plan.
    Lyapunov {
        /// Network JSON as written by `reduce`.
        network: PathBuf,
        /// Plan JSON as written by `optimize`.
        #[arg(long)]
        beta: PathBuf,
        /// Also print every eigenvalue.
        #[arg(long)]
        spectrum: bool,
    },
    /// Optimize a damping plan.
    Optimize {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_enum)]
        method: Method,
        /// Damping noise level for the uncertain method, 1/s.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Samples per objective evaluation.
        #[arg(long)]
        samples: Option<usize>,
        /// Annealing schedule JSON; defaults otherwise.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Objective settings JSON for the uncertain method.
        #[arg(long)]
        objective: Option<PathBuf>,
        /// Uncertainty spec JSON; defaults to the printed resolution of each value.
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
    /// Monte Carlo test of a plan.
    Evaluate {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = Channels::Full)]
        channels: Channels,
        #[arg(long, default_value_t = 10000)]
        draws: usize,
        #[arg(long)]
        uncertainty: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        bin_width: f64,
    },
    /// Run an experiment config and print the critical-exponent table.
    Report {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Run an experiment config end to end.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Equal,
    Distinct,
    Uncertain,
}

#[derive(Clone, Copy, ValueEnum)]
enum Channels {
    Full,
    Beta,
    Y,
}

impl From<Channels> for TestChannels {
    fn from(c: Channels) -> Self {
        match c {
            Channels::Full => TestChannels::Full,
            Channels::Beta => TestChannels::BetaOnly,
            Channels::Y => TestChannels::YOnly,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        use std::hash::{BuildHasher, Hasher};
        // RandomState is seeded from OS entropy.
        let mut h = std::collections::hash_map::RandomState::new().build_hasher();
        h.write_u128(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_nanos())
                .unwrap_or(0),
        );
        let s = h.finish();
        eprintln!("seed: {s}");
        s
    })
}

fn json_only(format: Format, command: &str) -> Result<()> {
    if format == Format::Csv {
        return Err(Error::Validation(format!("{command} has no csv output")));
    }
    Ok(())
}

fn read_case(args: &CaseArgs) -> Result<PowerSystemCase> {
    let (case, warnings) = load_case(&args.case, args.dynamics.as_deref())?;
    for w in warnings {
        eprintln!("warning: {}:{}: {}", args.case.display(), w.line, w.message);
    }
    Ok(case)
}

fn read_spec(case: &PowerSystemCase, path: Option<&Path>, sigma: f64) -> Result<UncertaintySpec> {
    let spec = match path {
        Some(p) => read_json::<UncertaintySpec>(p)?.with_beta_sigma(sigma),
        None => default_uncertainty(case, sigma),
    };
    spec.validate(case)?;
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<i32> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Parse(args) => {
            json_only(cli.format, "parse")?;
            emit(out, &to_json(&read_case(args)?))?;
        }
        Command::Powerflow {
            case,
            tol,
            max_iter,
        } => {
            let c = read_case(case)?;
            let options = PowerFlowOptions {
                tolerance: *tol,
                max_iterations: *max_iter,
            };
            let sol = solve_power_flow(&c, &options)?;
            let text = match cli.format {
                Format::Json => to_json(&sol),
                Format::Csv => bus_table_csv(&c, &sol),
            };
            emit(out, &text)?;
            eprint!("{}", bus_table_text(&c, &sol));
            if !sol.converged {
                return Err(gridstab_core::Error::PowerFlowDiverged {
                    iterations: sol.iterations,
                    max_mismatch: sol.max_mismatch,
                }
                .into());
            }
        }
        Command::Reduce(args) => {
            json_only(cli.format, "reduce")?;
            let (_, net) = solve_base(&read_case(args)?)?;
            emit(out, &to_json(&net))?;
        }
        Command::Lyapunov {
            network,
            beta,
            spectrum,
        } => {
            let net: SteadyStateNetwork = read_json(network)?;
            let plan: DampingPlan = read_json(beta)?;
            let jac = assemble_jacobian(&net, &plan.expand(net.n)?)?;
            let result = lyapunov_exponent(&jac, ZERO_MODE_TOLERANCE)?;
            match (cli.format, spectrum) {
                (Format::Json, true) => emit(out, &to_json(&result))?,
                (Format::Json, false) => emit(out, &format!("{}\n", num(result.lambda_l)))?,
                (Format::Csv, true) => emit(out, &spectrum_csv(&result.spectrum))?,
                (Format::Csv, false) => emit(
                    out,
                    &table_csv(&["lambda_l"], vec![vec![num(result.lambda_l)]]),
                )?,
            }
        }
        Command::Optimize {
            case,
            method,
            sigma,
            samples,
            schedule,
            objective,
            uncertainty,
            restarts,
        } => {
            json_only(cli.format, "optimize")?;
            if *restarts == 0 {
                return Err(Error::Validation("--restarts must be at least 1".into()));
            }
            let c = read_case(case)?;
            let (_, net) = solve_base(&c)?;
            let equal = optimize_beta_equal(&net, DEFAULT_SEARCH_INTERVAL, DEFAULT_TOLERANCE)?;
            let plan = match method {
                Method::Equal => equal,
                Method::Distinct | Method::Uncertain => {
                    let exec = Parallel::new(cli.jobs)?;
                    let sampler = SeededSampler::new(resolve_seed(cli.seed));
                    let schedule: AnnealingSchedule = match schedule {
                        Some(p) => read_json(p)?,
                        None => AnnealingSchedule::default(),
                    };
                    schedule.validate()?;
                    let start = equal.expand(net.n)?;
                    let outcome = if matches!(method, Method::Distinct) {
                        best_of_restarts(*restarts, &sampler, &exec, |s| {
                            anneal_distinct(&net, &start, &schedule, s)
                        })?
                    } else {
                        let mut config: NoisyObjectiveConfig = match objective {
                            Some(p) => read_json(p)?,
                            None => NoisyObjectiveConfig::default(),
                        };
                        if let Some(n) = samples {
                            config.samples = *n;
                        }
                        config.validate()?;
                        let spec = read_spec(&c, uncertainty.as_deref(), *sigma)?;
                        let problem = NoisyProblem::new(
                            &c,
                            &spec,
                            &config,
                            &sampler,
                            &PowerFlowOptions::default(),
                            &exec,
                        )?;
                        best_of_restarts(*restarts, &sampler, &exec, |s| {
                            anneal_uncertain(&problem, &start, &config, &schedule, s, &exec)
                        })?
                    };
                    outcome.plan
                }
            };
            emit(out, &to_json(&plan))?;
        }
        Command::Evaluate {
            case,
            plan,
            sigma,
            channels,
            draws,
            uncertainty,
            bin_width,
        } => {
            let dir = out.ok_or_else(|| Error::Validation("evaluate needs --out <dir>".into()))?;
            let c = read_case(case)?;
            let plan: DampingPlan = read_json(plan)?;
            let spec = read_spec(&c, uncertainty.as_deref(), *sigma)?;
            let exec = Parallel::new(cli.jobs)?;
            let sampler = SeededSampler::new(resolve_seed(cli.seed));
            let eval = evaluate_plan(
                &c,
                &plan,
                &spec,
                (*channels).into(),
                *draws,
                &sampler,
                &default_grid(),
                *bin_width,
                &exec,
            )?;
            write_evaluation(dir, &eval)?;
            let d = &eval.distribution;
            eprintln!(
                "{} of {} draws converged, median {}",
                d.samples.len(),
                d.requested,
                num(eval.median())
            );
            if eval.non_convergent_fraction() > 0.01 {
                return Ok(exit::PARTIAL);
            }
        }
        Command::Report { matrix } => {
            let outcome = run_config(cli, matrix)?;
            print!("{}", critical_table_text(&outcome.cells));
            return Ok(outcome.exit_code);
        }
        Command::Run { config } => {
            let outcome = run_config(cli, config)?;
            match cli.format {
                Format::Csv => print!("{}", summary_csv(&outcome.cells)),
                Format::Json => print!("{}", to_json(&outcome.manifest)),
            }
            return Ok(outcome.exit_code);
        }
    }
    Ok(exit::SUCCESS)
}

fn run_config(cli: &Cli, path: &Path) -> Result<RunOutcome> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output = o.clone();
    }
    let exec = Parallel::new(cli.jobs)?;
    let outcome = run_pipeline(&config, &exec)?;
    write_json(&outcome.out.join("config.json"), &config)?;
    eprintln!(
        "wrote {} (status {})",
        outcome.out.display(),
        outcome.manifest.status
    );
    Ok(outcome)
}

fn bus_rows(case: &PowerSystemCase, sol: &PowerFlowSolution) -> Vec<Vec<String>> {
    case.buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                b.id.to_string(),
                num(sol.voltage_magnitude[i]),
                num(sol.voltage_angle[i].to_degrees()),
            ]
        })
        .collect()
}

fn bus_table_csv(case: &PowerSystemCase, sol: &PowerFlowSolution) -> String {
    table_csv(&["bus", "vm_pu", "va_deg"], bus_rows(case, sol))
}

fn bus_table_text(case: &PowerSystemCase, sol: &PowerFlowSolution) -> String {
    let mut s = format!(
        "converged: {} after {} iterations, mismatch {:.3e}\n  bus     |V| pu   angle deg\n",
        sol.converged, sol.iterations, sol.max_mismatch
    );
    for (i, b) in case.buses.iter().enumerate() {
        s.push_str(&format!(
            "{:>5} {:>11.6} {:>11.4}\n",
            b.id,
            sol.voltage_magnitude[i],
            sol.voltage_angle[i].to_degrees()
        ));
    }
    s
}
