//! End-to-end experiment: load, optimize every configured method, test
//! every plan at every noise level, and write a manifest that pins inputs,
//! seeds and outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use gridstab_core::analysis::TestChannels;
use gridstab_core::case::PowerSystemCase;
use gridstab_core::exec::DrawMap;
use gridstab_core::network::{reduce_network, SteadyStateNetwork};
use gridstab_core::optimize::{
    anneal_distinct, anneal_uncertain, best_of_restarts, optimize_beta_equal, AnnealingSchedule,
    DampingPlan, NoisyObjectiveConfig, NoisyProblem,
};
use gridstab_core::powerflow::{solve_power_flow, PowerFlowOptions, PowerFlowSolution};
use gridstab_core::rng::SeededSampler;
use gridstab_core::uncertainty::{default_uncertainty, UncertaintySpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{exit, Error, Result};
use crate::formats::{load_case, num, read_json, to_json, write_json, write_text};
use crate::report::{
    comparison, critical_table_text, default_grid, evaluate_plan, quantile_matrix_csv, summary_csv,
    write_evaluation, Cell, DEFAULT_BIN_WIDTH,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEARCH_INTERVAL: (f64, f64) = (0.1, 30.0);
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

fn default_channels() -> Vec<TestChannels> {
    vec![TestChannels::Full]
}

fn default_interval() -> (f64, f64) {
    DEFAULT_SEARCH_INTERVAL
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn one() -> usize {
    1
}

fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}

fn default_max_non_convergent() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Equal {
        #[serde(default = "default_interval")]
        search_interval: (f64, f64),
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Distinct {
        #[serde(default = "one")]
        restarts: usize,
        #[serde(default)]
        schedule: AnnealingSchedule,
    },
    Uncertain {
        #[serde(default = "one")]
        restarts: usize,
        #[serde(default)]
        schedule: AnnealingSchedule,
        #[serde(default)]
        objective: NoisyObjectiveConfig,
    },
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Equal { .. } => "equal",
            MethodConfig::Distinct { .. } => "distinct",
            MethodConfig::Uncertain { .. } => "uncertain",
        }
    }

    fn code(&self) -> u64 {
        match self {
            MethodConfig::Equal { .. } => 1,
            MethodConfig::Distinct { .. } => 2,
            MethodConfig::Uncertain { .. } => 3,
        }
    }
}

/// Paths are relative to the config file; `output` is relative to the
/// working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub case: PathBuf,
    #[serde(default)]
    pub dynamics: Option<PathBuf>,
    /// Spec JSON; when absent every parameter gets its recorded resolution.
    #[serde(default)]
    pub uncertainty: Option<PathBuf>,
    pub methods: Vec<MethodConfig>,
    pub sigma_opt: Vec<f64>,
    pub sigma_test: Vec<f64>,
    #[serde(default = "default_channels")]
    pub test_channels: Vec<TestChannels>,
    pub draws: usize,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub quantile_grid: Option<Vec<f64>>,
    #[serde(default = "default_bin_width")]
    pub histogram_bin_width: f64,
    /// Above this fraction of failed draws in any cell the run is partial.
    #[serde(default = "default_max_non_convergent")]
    pub max_non_convergent_fraction: f64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut config: Self = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.case = base.join(&config.case);
        config.dynamics = config.dynamics.map(|d| base.join(d));
        config.uncertainty = config.uncertainty.map(|u| base.join(u));
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            ));
        }
        for p in [
            Some(&self.case),
            self.dynamics.as_ref(),
            self.uncertainty.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return bad(format!("referenced file {} does not exist", p.display()));
            }
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        if self.sigma_test.is_empty() || self.test_channels.is_empty() {
            return bad("sigma_test and test_channels must be non-empty".into());
        }
        let needs_opt = self
            .methods
            .iter()
            .any(|m| matches!(m, MethodConfig::Uncertain { .. }));
        if needs_opt && self.sigma_opt.is_empty() {
            return bad("the uncertain method needs at least one sigma_opt".into());
        }
        if self
            .sigma_opt
            .iter()
            .chain(&self.sigma_test)
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return bad("sigma values must be finite and non-negative".into());
        }
        if self.draws == 0 {
            return bad("draws must be at least 1".into());
        }
        if !(self.histogram_bin_width > 0.0) {
            return bad("histogram_bin_width must be positive".into());
        }
        for m in &self.methods {
            match m {
                MethodConfig::Equal { .. } => {}
                MethodConfig::Distinct { restarts, schedule } => {
                    schedule.validate()?;
                    if *restarts == 0 {
                        return bad("restarts must be at least 1".into());
                    }
                }
                MethodConfig::Uncertain {
                    restarts,
                    schedule,
                    objective,
                } => {
                    schedule.validate()?;
                    objective.validate()?;
                    if *restarts == 0 {
                        return bad("restarts must be at least 1".into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Base steady state of a case.
pub fn solve_base(case: &PowerSystemCase) -> Result<(PowerFlowSolution, SteadyStateNetwork)> {
    let sol = solve_power_flow(case, &PowerFlowOptions::default())?;
    if !sol.converged {
        return Err(gridstab_core::Error::PowerFlowDiverged {
            iterations: sol.iterations,
            max_mismatch: sol.max_mismatch,
        }
        .into());
    }
    let net = reduce_network(case, &sol)?;
    Ok((sol, net))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(
        &std::fs::read(path).map_err(|e| Error::io(path, e))?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seed: u64,
    pub draws: usize,
    pub config: ExperimentConfig,
    /// Input role to SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
    /// Failed draws per cell directory.
    pub non_convergent: BTreeMap<String, usize>,
    pub timing: Timing,
}

/// Records hashes of every artifact under `out`, sorted by relative path.
pub fn manifest(
    config: &ExperimentConfig,
    out: &Path,
    artifacts: &[PathBuf],
    status: &str,
    failure: Option<(&str, &Error)>,
    non_convergent: BTreeMap<String, usize>,
    timing: Timing,
) -> Result<Manifest> {
    let mut inputs = BTreeMap::new();
    inputs.insert("case".to_string(), file_hash(&config.case)?);
    if let Some(d) = &config.dynamics {
        inputs.insert("dynamics".to_string(), file_hash(d)?);
    }
    if let Some(u) = &config.uncertainty {
        inputs.insert("uncertainty".to_string(), file_hash(u)?);
    }
    let mut entries = Vec::with_capacity(artifacts.len());
    for p in artifacts {
        let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        entries.push(Artifact {
            path: p
                .strip_prefix(out)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/"),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: status.to_string(),
        failed_stage: failure.map(|(s, _)| s.to_string()),
        error: failure.map(|(_, e)| e.to_string()),
        seed: config.seed,
        draws: config.draws,
        config: config.clone(),
        inputs,
        artifacts: entries,
        non_convergent,
        timing,
    })
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub cells: Vec<Cell>,
    pub manifest: Manifest,
    pub exit_code: i32,
}

struct Plans {
    /// (method, sigma_opt, plan)
    entries: Vec<(String, Option<f64>, DampingPlan)>,
}

const TEST_LABEL: u64 = 1 << 48;

fn optimize_all<E: DrawMap>(
    config: &ExperimentConfig,
    case: &PowerSystemCase,
    net: &SteadyStateNetwork,
    base_spec: &UncertaintySpec,
    root: &SeededSampler,
    exec: &E,
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> std::result::Result<Plans, (String, Error)> {
    let n = net.n;
    let (lo, hi) = config
        .methods
        .iter()
        .find_map(|m| match m {
            MethodConfig::Equal {
                search_interval, ..
            } => Some(*search_interval),
            _ => None,
        })
        .unwrap_or(DEFAULT_SEARCH_INTERVAL);
    let start_plan = optimize_beta_equal(net, (lo, hi), DEFAULT_TOLERANCE)
        .map_err(|e| ("optimize:start".to_string(), e.into()))?;
    let start = start_plan
        .expand(n)
        .map_err(|e| ("optimize:start".to_string(), e.into()))?;
    let mut entries = Vec::new();
    for method in &config.methods {
        let name = method.name();
        let targets: Vec<Option<(usize, f64)>> = match method {
            MethodConfig::Uncertain { .. } => config
                .sigma_opt
                .iter()
                .copied()
                .enumerate()
                .map(Some)
                .collect(),
            _ => vec![None],
        };
        for target in targets {
            let stage = match target {
                Some((_, s)) => format!("optimize:{name}:{}", num(s)),
                None => format!("optimize:{name}"),
            };
            let label = method.code() << 32 | target.map_or(0, |(i, _)| i as u64 + 1);
            let sampler = root.fork(label);
            let plan = match method {
                MethodConfig::Equal {
                    search_interval,
                    tolerance,
                } => optimize_beta_equal(net, *search_interval, *tolerance).map_err(Error::from),
                MethodConfig::Distinct { restarts, schedule } => {
                    best_of_restarts(*restarts, &sampler, exec, |s| {
                        anneal_distinct(net, &start, schedule, s)
                    })
                    .map(|o| o.plan)
                    .map_err(Error::from)
                }
                MethodConfig::Uncertain {
                    restarts,
                    schedule,
                    objective,
                } => {
                    let sigma = target.map(|(_, s)| s).unwrap_or(0.0);
                    let spec = base_spec.clone().with_beta_sigma(sigma);
                    NoisyProblem::new(
                        case,
                        &spec,
                        objective,
                        &sampler,
                        &PowerFlowOptions::default(),
                        exec,
                    )
                    .and_then(|problem| {
                        best_of_restarts(*restarts, &sampler, exec, |s| {
                            anneal_uncertain(&problem, &start, objective, schedule, s, exec)
                        })
                    })
                    .map(|o| o.plan)
                    .map_err(Error::from)
                }
            }
            .map_err(|e| (stage.clone(), e))?;
            let sigma = target.map(|(_, s)| s);
            let file = match sigma {
                Some(s) => out
                    .join("plans")
                    .join(format!("{name}_opt-{}.json", num(s))),
                None => out.join("plans").join(format!("{name}.json")),
            };
            write_json(&file, &plan).map_err(|e| (stage.clone(), e))?;
            written.push(file);
            entries.push((name.to_string(), sigma, plan));
        }
    }
    Ok(Plans { entries })
}

/// Runs every stage. Failures abort with the stage name; whatever was
/// written so far stays on disk next to a manifest describing the failure.
pub fn run_pipeline<E: DrawMap>(config: &ExperimentConfig, exec: &E) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let out = config.output.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut non_convergent = BTreeMap::new();

    let result = run_stages(
        config,
        exec,
        &out,
        &mut written,
        &mut cells,
        &mut non_convergent,
    );
    let timing = Timing {
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    let partial = cells
        .iter()
        .any(|c| c.evaluation.non_convergent_fraction() > config.max_non_convergent_fraction);
    let (status, failure, code) = match &result {
        Ok(()) if partial => ("partial", None, exit::PARTIAL),
        Ok(()) => ("complete", None, exit::SUCCESS),
        Err((stage, e)) => ("failed", Some((stage.as_str(), e)), e.exit_code()),
    };
    let m = manifest(
        config,
        &out,
        &written,
        status,
        failure,
        non_convergent,
        timing,
    )?;
    write_json(&out.join("manifest.json"), &m)?;
    if let Err((stage, e)) = result {
        return Err(e.in_stage(&stage));
    }
    Ok(RunOutcome {
        out,
        cells,
        manifest: m,
        exit_code: code,
    })
}

fn run_stages<E: DrawMap>(
    config: &ExperimentConfig,
    exec: &E,
    out: &Path,
    written: &mut Vec<PathBuf>,
    cells: &mut Vec<Cell>,
    non_convergent: &mut BTreeMap<String, usize>,
) -> std::result::Result<(), (String, Error)> {
    let (case, warnings) =
        load_case(&config.case, config.dynamics.as_deref()).map_err(|e| ("load".to_string(), e))?;
    for w in &warnings {
        eprintln!(
            "warning: {}:{}: {}",
            config.case.display(),
            w.line,
            w.message
        );
    }
    let base_spec = match &config.uncertainty {
        Some(p) => read_json::<UncertaintySpec>(p).map_err(|e| ("load".to_string(), e))?,
        None => default_uncertainty(&case, 0.0),
    };
    base_spec
        .validate(&case)
        .map_err(|e| ("load".to_string(), e.into()))?;

    let (sol, net) = solve_base(&case).map_err(|e| ("base".to_string(), e))?;
    for (name, text) in [
        ("case.json", to_json(&case)),
        ("powerflow.json", to_json(&sol)),
        ("network.json", to_json(&net)),
    ] {
        let p = out.join("base").join(name);
        write_text(&p, &text).map_err(|e| ("base".to_string(), e))?;
        written.push(p);
    }

    let root = SeededSampler::new(config.seed);
    let plans = optimize_all(config, &case, &net, &base_spec, &root, exec, out, written)?;

    let grid = config.quantile_grid.clone().unwrap_or_else(default_grid);
    for (method, sigma_opt, plan) in &plans.entries {
        for (ti, &sigma_test) in config.sigma_test.iter().enumerate() {
            for (ci, &channels) in config.test_channels.iter().enumerate() {
                // all plans see the same draws at a given test level
                let sampler = root.fork(TEST_LABEL | (ti as u64) << 8 | ci as u64);
                let spec = base_spec.clone().with_beta_sigma(sigma_test);
                let label = format!("evaluate:{method}:{}:{}", num(sigma_test), channels.name());
                let evaluation = evaluate_plan(
                    &case,
                    plan,
                    &spec,
                    channels,
                    config.draws,
                    &sampler,
                    &grid,
                    config.histogram_bin_width,
                    exec,
                )
                .map_err(|e| (label.clone(), e))?;
                let cell = Cell {
                    method: method.clone(),
                    sigma_opt: *sigma_opt,
                    sigma_test,
                    channels,
                    seed: sampler.root_seed(),
                    evaluation,
                };
                let dir = out.join("cells").join(cell.dir_name());
                written.extend(
                    write_evaluation(&dir, &cell.evaluation).map_err(|e| (label.clone(), e))?,
                );
                non_convergent.insert(cell.dir_name(), cell.evaluation.distribution.non_convergent);
                cells.push(cell);
            }
        }
    }

    let report = comparison(cells).map_err(|e| ("report".to_string(), e))?;
    for (name, text) in [
        ("summary.csv", summary_csv(cells)),
        ("quantile_matrix.csv", quantile_matrix_csv(cells)),
        ("report.json", to_json(&report)),
        ("critical.txt", critical_table_text(cells)),
    ] {
        let p = out.join(name);
        write_text(&p, &text).map_err(|e| ("report".to_string(), e))?;
        written.push(p);
    }
    Ok(())
}
