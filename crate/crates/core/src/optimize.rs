//! Damping selection: the uniform optimum, simulated annealing on the
//! exact exponent, and simulated annealing on a sampled objective.
//!
//! Both annealers share one engine. The deterministic objective is the
//! noisy one with a single noiseless sample, so with zero noise and `N = 1`
//! the two produce the same trajectory under the same seed.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::case::PowerSystemCase;
use crate::error::{Error, Result};
use crate::exec::DrawMap;
use crate::network::SteadyStateNetwork;
use crate::powerflow::{solve_power_flow, PowerFlowOptions};
use crate::rng::{Channel, SeededSampler};
use crate::stability::{lyapunov, Interaction};
use crate::uncertainty::{
    gaussian_step, hypersphere_step, sample_beta_with, InstanceBank, UncertaintySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Uniform,
    PerGenerator,
    DistributionMeans,
}

/// How a plan was produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Exponent of the unperturbed network at the plan, 1/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_l: Option<f64>,
    /// Confirmed value of the sampled objective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_interval: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<AnnealingSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_config: Option<NoisyObjectiveConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingPlan {
    pub kind: PlanKind,
    /// One value for uniform plans, otherwise one per generator (1/s).
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl DampingPlan {
    pub fn uniform(beta: f64, method: &str) -> Self {
        Self {
            kind: PlanKind::Uniform,
            values: vec![beta],
            provenance: Provenance {
                method: method.into(),
                ..Provenance::default()
            },
        }
    }

    pub fn per_generator(values: Vec<f64>, kind: PlanKind, method: &str) -> Self {
        Self {
            kind,
            values,
            provenance: Provenance {
                method: method.into(),
                ..Provenance::default()
            },
        }
    }

    /// The damping vector for `n` generators.
    pub fn expand(&self, n: usize) -> Result<Vec<f64>> {
        match self.kind {
            PlanKind::Uniform if self.values.len() == 1 => Ok(vec![self.values[0]; n]),
            PlanKind::Uniform => Err(Error::InvalidParameter(alloc::format!(
                "uniform plan must hold one value, found {}",
                self.values.len()
            ))),
            _ if self.values.len() == n => Ok(self.values.clone()),
            _ => Err(Error::LengthMismatch {
                expected: n,
                found: self.values.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Hypersphere,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealingSchedule {
    /// `None` calibrates from trial moves around the start point.
    pub initial_temperature: Option<f64>,
    /// Target acceptance probability of the median uphill trial move.
    pub calibration_acceptance: f64,
    pub calibration_moves: usize,
    /// Geometric factor applied after every step.
    pub cooling: f64,
    pub steps: usize,
    pub move_kind: MoveKind,
    /// Sphere radius or Gaussian standard deviation, 1/s.
    pub step_size: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: None,
            calibration_acceptance: 0.8,
            calibration_moves: 50,
            cooling: 0.98,
            steps: 2000,
            move_kind: MoveKind::Hypersphere,
            step_size: 0.5,
            lower_bound: 0.1,
            upper_bound: 30.0,
        }
    }
}

impl AnnealingSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return bad("cooling factor must lie in (0, 1)");
        }
        if self.steps == 0 {
            return bad("schedule needs at least one step");
        }
        if !(self.step_size >= 0.0) {
            return bad("step size must be non-negative");
        }
        if self.move_kind == MoveKind::Hypersphere && !(self.step_size > 0.0) {
            return bad("hypersphere radius must be positive");
        }
        if !(self.lower_bound < self.upper_bound) {
            return bad("search box is empty");
        }
        if let Some(t) = self.initial_temperature {
            if !(t > 0.0) {
                return bad("initial temperature must be positive");
            }
        } else if !(self.calibration_acceptance > 0.0 && self.calibration_acceptance < 1.0)
            || self.calibration_moves == 0
        {
            return bad("temperature calibration needs moves and an acceptance target in (0, 1)");
        }
        Ok(())
    }
}

/// Which noise sources the sampled objective draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveChannels {
    pub beta: bool,
    /// Case parameters, drawn from a pre-solved instance bank.
    pub case: bool,
}

impl Default for ObjectiveChannels {
    fn default() -> Self {
        Self {
            beta: true,
            case: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisyObjectiveConfig {
    /// Samples per evaluation.
    pub samples: usize,
    pub penalty_scale: f64,
    pub penalty_growth: f64,
    pub channels: ObjectiveChannels,
    /// Instances solved up front when the case channel is on.
    pub bank_size: usize,
    /// Confirmation samples as a multiple of `samples`.
    pub confirmation_factor: usize,
    /// Best archived plans re-evaluated at the end.
    pub archive_size: usize,
}

impl Default for NoisyObjectiveConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            penalty_scale: 0.1,
            penalty_growth: 2.0,
            channels: ObjectiveChannels::default(),
            bank_size: 1000,
            confirmation_factor: 10,
            archive_size: 5,
        }
    }
}

impl NoisyObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter(
                "objective needs at least one sample".into(),
            ));
        }
        if !(self.penalty_scale >= 0.0) || !(self.penalty_growth > 0.0) {
            return Err(Error::InvalidParameter(
                "penalty scale must be >= 0 and growth > 0".into(),
            ));
        }
        if self.channels.case && self.bank_size == 0 {
            return Err(Error::InvalidParameter(
                "case channel needs a non-empty instance bank".into(),
            ));
        }
        if self.confirmation_factor == 0 || self.archive_size == 0 {
            return Err(Error::InvalidParameter(
                "confirmation factor and archive size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sample mean and spread of one evaluation, independent of temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    /// `sqrt(Σ (r_i − mean)²) / N`.
    pub scaled_deviation: f64,
    pub count: usize,
    pub failed: usize,
}

impl SampleStats {
    pub fn from_samples(samples: &[f64], failed: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::AllDrawsFailed { draws: failed });
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let ss: f64 = samples.iter().map(|r| (r - mean) * (r - mean)).sum();
        Ok(Self {
            mean,
            scaled_deviation: ss.sqrt() / n,
            count: samples.len(),
            failed,
        })
    }

    pub fn penalty(&self, penalty_scale: f64, penalty_growth: f64, temperature: f64) -> f64 {
        if self.scaled_deviation == 0.0 {
            return 0.0;
        }
        penalty_scale / penalty_growth.powf(temperature)
            * (2.0 * self.scaled_deviation / (self.count as f64).sqrt())
    }

    pub fn objective(&self, penalty_scale: f64, penalty_growth: f64, temperature: f64) -> f64 {
        self.mean + self.penalty(penalty_scale, penalty_growth, temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEvaluation {
    pub mean: f64,
    pub scaled_deviation: f64,
    pub penalty: f64,
    pub objective: f64,
    pub failed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl ObjectiveEvaluation {
    /// Scores a fixed sample set at temperature `t`.
    pub fn from_samples(
        samples: &[f64],
        penalty_scale: f64,
        penalty_growth: f64,
        t: f64,
    ) -> Result<Self> {
        let stats = SampleStats::from_samples(samples, 0)?;
        let mut eval = Self::from_stats(&stats, penalty_scale, penalty_growth, t);
        eval.samples = Some(samples.to_vec());
        Ok(eval)
    }

    pub fn from_stats(
        stats: &SampleStats,
        penalty_scale: f64,
        penalty_growth: f64,
        t: f64,
    ) -> Self {
        let penalty = stats.penalty(penalty_scale, penalty_growth, t);
        Self {
            mean: stats.mean,
            scaled_deviation: stats.scaled_deviation,
            penalty,
            objective: stats.mean + penalty,
            failed: stats.failed,
            samples: None,
        }
    }
}

/// What the sampled objective draws from: the base interaction matrix, the
/// damping noise level and optionally a bank of perturbed instances.
#[derive(Debug, Clone)]
pub struct NoisyProblem {
    pub base: Interaction,
    pub beta_sigma: f64,
    pub bank: Option<InstanceBank>,
}

impl NoisyProblem {
    /// Solves the base case and, if the case channel is on, the instance bank.
    pub fn new<E: DrawMap>(
        case: &PowerSystemCase,
        spec: &UncertaintySpec,
        config: &NoisyObjectiveConfig,
        sampler: &SeededSampler,
        options: &PowerFlowOptions,
        exec: &E,
    ) -> Result<Self> {
        config.validate()?;
        spec.validate(case)?;
        let sol = solve_power_flow(case, options)?;
        if !sol.converged {
            return Err(Error::PowerFlowDiverged {
                iterations: sol.iterations,
                max_mismatch: sol.max_mismatch,
            });
        }
        let net = crate::network::reduce_network(case, &sol)?;
        let bank = if config.channels.case {
            Some(InstanceBank::build(
                case,
                spec,
                sampler,
                config.bank_size,
                options,
                exec,
            )?)
        } else {
            None
        };
        Ok(Self {
            base: Interaction::from_network(&net),
            beta_sigma: if config.channels.beta {
                spec.beta_sigma
            } else {
                0.0
            },
            bank,
        })
    }

    /// A problem with no case noise around an already reduced network.
    pub fn from_network(net: &SteadyStateNetwork, beta_sigma: f64) -> Self {
        Self {
            base: Interaction::from_network(net),
            beta_sigma,
            bank: None,
        }
    }

    pub fn generators(&self) -> usize {
        self.base.n
    }

    /// Draws `count` exponents around `means` at evaluation address `id`.
    pub fn draw<E: DrawMap>(
        &self,
        means: &[f64],
        sampler: &SeededSampler,
        id: u64,
        count: usize,
        exec: &E,
    ) -> (Vec<f64>, usize) {
        let drawn = exec.map(count, |i| {
            let mut rng = sampler.stream2(Channel::Beta, id, i as u64);
            let beta = sample_beta_with(&mut rng, means, self.beta_sigma);
            let interaction = match &self.bank {
                Some(bank) => {
                    let pick = sampler
                        .stream2(Channel::Bank, id, i as u64)
                        .random_range(0..bank.len());
                    &bank.interactions[pick]
                }
                None => &self.base,
            };
            lyapunov(interaction, &beta).ok()
        });
        let failed = drawn.iter().filter(|d| d.is_none()).count();
        (drawn.into_iter().flatten().collect(), failed)
    }

    pub fn stats<E: DrawMap>(
        &self,
        means: &[f64],
        sampler: &SeededSampler,
        id: u64,
        count: usize,
        exec: &E,
    ) -> Result<SampleStats> {
        let (samples, failed) = self.draw(means, sampler, id, count, exec);
        SampleStats::from_samples(&samples, failed)
    }
}

/// One evaluation of the sampled objective for a plan at temperature `t`.
pub fn evaluate_noisy_objective<E: DrawMap>(
    problem: &NoisyProblem,
    plan: &DampingPlan,
    config: &NoisyObjectiveConfig,
    sampler: &SeededSampler,
    t: f64,
    exec: &E,
) -> Result<ObjectiveEvaluation> {
    config.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(
            "temperature must be positive".into(),
        ));
    }
    let means = plan.expand(problem.generators())?;
    let (samples, failed) = problem.draw(&means, sampler, 0, config.samples, exec);
    let stats = SampleStats::from_samples(&samples, failed)?;
    let mut eval =
        ObjectiveEvaluation::from_stats(&stats, config.penalty_scale, config.penalty_growth, t);
    eval.samples = Some(samples);
    Ok(eval)
}

/// Metropolis rule: downhill always, uphill with probability `exp(−Δ/T)`.
pub fn metropolis_accept<R: Rng>(delta: f64, t: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    if delta < 0.0 {
        return true;
    }
    if !(t > 0.0) {
        return delta <= 0.0;
    }
    u < (-delta / t).exp()
}

/// Golden-section search for the best uniform damping.
pub fn optimize_beta_equal(
    net: &SteadyStateNetwork,
    search_interval: (f64, f64),
    tolerance: f64,
) -> Result<DampingPlan> {
    let (lower, upper) = search_interval;
    if !(lower < upper) || !(tolerance > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "bad search interval [{lower}, {upper}] or tolerance {tolerance}"
        )));
    }
    let interaction = Interaction::from_network(net);
    let n = net.n;
    let f = |b: f64| lyapunov(&interaction, &vec![b; n]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lower, upper);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tolerance {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2)?;
        }
    }
    let best = 0.5 * (a + b);
    let value = f(best)?;
    let at_edge = best - lower <= tolerance || upper - best <= tolerance;
    if at_edge || value > f(lower)? || value > f(upper)? {
        return Err(Error::NoInteriorMinimum { lower, upper });
    }
    let mut plan = DampingPlan::uniform(best, "equal");
    plan.provenance.lambda_l = Some(value);
    plan.provenance.search_interval = Some(search_interval);
    plan.provenance.tolerance = Some(tolerance);
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealingStep {
    pub temperature: f64,
    /// Objective of the proposal, or `None` if it could not be evaluated.
    pub proposed: Option<f64>,
    pub accepted: bool,
    /// Objective of the chain state after the decision, at this temperature.
    pub current: f64,
    /// Best objective recorded so far.
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealingOutcome {
    pub plan: DampingPlan,
    pub initial_temperature: f64,
    pub steps: Vec<AnnealingStep>,
}

impl AnnealingOutcome {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.accepted).count() as f64 / self.steps.len() as f64
    }
}

const CALIBRATION_IDS: u64 = 1 << 40;
const CONFIRMATION_IDS: u64 = 1 << 41;

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    while x < lo || x > hi {
        x = if x < lo { 2.0 * lo - x } else { 2.0 * hi - x };
    }
    x
}

fn propose<R: Rng>(x: &[f64], schedule: &AnnealingSchedule, rng: &mut R) -> Result<Vec<f64>> {
    let size = schedule.step_size;
    let step = match schedule.move_kind {
        MoveKind::Hypersphere => hypersphere_step(x.len(), size, rng)?,
        MoveKind::Gaussian => gaussian_step(x.len(), size, rng),
    };
    Ok(x.iter()
        .zip(step)
        .map(|(v, e)| reflect(v + e, schedule.lower_bound, schedule.upper_bound))
        .collect())
}

struct Penalty {
    scale: f64,
    growth: f64,
}

struct Candidate {
    score: f64,
    x: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// The shared annealing loop. `eval(x, id, samples)` returns the sample
/// statistics of a point; the objective at temperature `T` is recomputed
/// from them, so the chain's state is rescored as the system cools.
fn anneal<F>(
    start: &[f64],
    schedule: &AnnealingSchedule,
    sampler: &SeededSampler,
    penalty: Penalty,
    samples: usize,
    confirm: (usize, usize),
    eval: F,
) -> Result<(Vec<f64>, f64, f64, Vec<AnnealingStep>)>
where
    F: Fn(&[f64], u64, usize) -> Result<SampleStats>,
{
    schedule.validate()?;
    let score = |s: &SampleStats, t: f64| s.objective(penalty.scale, penalty.growth, t);
    let mut current: Vec<f64> = start
        .iter()
        .map(|&b| reflect(b, schedule.lower_bound, schedule.upper_bound))
        .collect();
    let mut current_stats = eval(&current, 0, samples)?;

    let t0 = match schedule.initial_temperature {
        Some(t) => t,
        None => {
            let mut uphill = Vec::new();
            let mut all = Vec::new();
            for i in 0..schedule.calibration_moves as u64 {
                let mut rng = sampler.stream(Channel::Calibrate, i);
                let trial = propose(&current, schedule, &mut rng)?;
                if let Ok(s) = eval(&trial, CALIBRATION_IDS + i, samples) {
                    let d = s.mean - current_stats.mean;
                    if d > 0.0 {
                        uphill.push(d);
                    }
                    if d != 0.0 {
                        all.push(d.abs());
                    }
                }
            }
            let typical = if !uphill.is_empty() {
                median(uphill)
            } else if !all.is_empty() {
                median(all)
            } else {
                1.0
            };
            -typical / schedule.calibration_acceptance.ln()
        }
    };

    let keep = confirm.1;
    let mut archive: Vec<Candidate> = vec![Candidate {
        score: score(&current_stats, t0),
        x: current.clone(),
    }];
    let mut best = archive[0].score;
    let mut trace = Vec::with_capacity(schedule.steps);
    let mut t = t0;
    for k in 1..=schedule.steps as u64 {
        let mut move_rng = sampler.stream(Channel::Move, k);
        let proposal = propose(&current, schedule, &mut move_rng)?;
        let current_score = score(&current_stats, t);
        let mut step = AnnealingStep {
            temperature: t,
            proposed: None,
            accepted: false,
            current: current_score,
            best,
        };
        if let Ok(stats) = eval(&proposal, k, samples) {
            let proposed_score = score(&stats, t);
            step.proposed = Some(proposed_score);
            let mut accept_rng = sampler.stream(Channel::Accept, k);
            if metropolis_accept(proposed_score - current_score, t, &mut accept_rng) {
                step.accepted = true;
                step.current = proposed_score;
                if proposed_score < best {
                    best = proposed_score;
                }
                let pos = archive.partition_point(|c| c.score <= proposed_score);
                if pos < keep {
                    archive.insert(
                        pos,
                        Candidate {
                            score: proposed_score,
                            x: proposal.clone(),
                        },
                    );
                    archive.truncate(keep);
                }
                current = proposal;
                current_stats = stats;
            }
        }
        step.best = best;
        trace.push(step);
        t *= schedule.cooling;
    }

    let final_t = t;
    let mut chosen: Option<(f64, Vec<f64>)> = None;
    for (c, cand) in archive.into_iter().enumerate() {
        let stats = eval(&cand.x, CONFIRMATION_IDS + c as u64, samples * confirm.0)?;
        let confirmed = score(&stats, final_t);
        if chosen.as_ref().is_none_or(|(s, _)| confirmed < *s) {
            chosen = Some((confirmed, cand.x));
        }
    }
    let (confirmed, x) = chosen.expect("archive holds the start point");
    Ok((x, confirmed, t0, trace))
}

/// Simulated annealing on the exact exponent of one network.
pub fn anneal_distinct(
    net: &SteadyStateNetwork,
    start: &[f64],
    schedule: &AnnealingSchedule,
    sampler: &SeededSampler,
) -> Result<AnnealingOutcome> {
    let interaction = Interaction::from_network(net);
    if start.len() != net.n {
        return Err(Error::LengthMismatch {
            expected: net.n,
            found: start.len(),
        });
    }
    let defaults = NoisyObjectiveConfig::default();
    let (x, value, t0, steps) = anneal(
        start,
        schedule,
        sampler,
        Penalty {
            scale: defaults.penalty_scale,
            growth: defaults.penalty_growth,
        },
        1,
        (1, 1),
        |x, _, _| {
            let l = lyapunov(&interaction, x)?;
            SampleStats::from_samples(&[l], 0)
        },
    )?;
    let mut plan = DampingPlan::per_generator(x, PlanKind::PerGenerator, "distinct");
    plan.provenance.seed = Some(sampler.root_seed());
    plan.provenance.lambda_l = Some(value);
    plan.provenance.schedule = Some(schedule.clone());
    plan.provenance.initial_temperature = Some(t0);
    Ok(AnnealingOutcome {
        plan,
        initial_temperature: t0,
        steps,
    })
}

pub fn optimize_beta_distinct(
    net: &SteadyStateNetwork,
    start: &[f64],
    schedule: &AnnealingSchedule,
    sampler: &SeededSampler,
) -> Result<DampingPlan> {
    Ok(anneal_distinct(net, start, schedule, sampler)?.plan)
}

/// Simulated annealing on the sampled objective. The archive of best
/// plans is re-evaluated with `confirmation_factor × samples` draws and
/// the lowest confirmed objective wins.
pub fn anneal_uncertain<E: DrawMap>(
    problem: &NoisyProblem,
    start: &[f64],
    config: &NoisyObjectiveConfig,
    schedule: &AnnealingSchedule,
    sampler: &SeededSampler,
    exec: &E,
) -> Result<AnnealingOutcome> {
    config.validate()?;
    if start.len() != problem.generators() {
        return Err(Error::LengthMismatch {
            expected: problem.generators(),
            found: start.len(),
        });
    }
    let (x, value, t0, steps) = anneal(
        start,
        schedule,
        sampler,
        Penalty {
            scale: config.penalty_scale,
            growth: config.penalty_growth,
        },
        config.samples,
        (config.confirmation_factor, config.archive_size),
        |x, id, count| problem.stats(x, sampler, id, count, exec),
    )?;
    let lambda = lyapunov(&problem.base, &x)?;
    let mut plan = DampingPlan::per_generator(x, PlanKind::DistributionMeans, "uncertain");
    plan.provenance.seed = Some(sampler.root_seed());
    plan.provenance.lambda_l = Some(lambda);
    plan.provenance.objective = Some(value);
    plan.provenance.beta_sigma = Some(problem.beta_sigma);
    plan.provenance.schedule = Some(schedule.clone());
    plan.provenance.initial_temperature = Some(t0);
    plan.provenance.objective_config = Some(config.clone());
    Ok(AnnealingOutcome {
        plan,
        initial_temperature: t0,
        steps,
    })
}

pub fn optimize_beta_uncertain<E: DrawMap>(
    problem: &NoisyProblem,
    start: &[f64],
    config: &NoisyObjectiveConfig,
    schedule: &AnnealingSchedule,
    sampler: &SeededSampler,
    exec: &E,
) -> Result<DampingPlan> {
    Ok(anneal_uncertain(problem, start, config, schedule, sampler, exec)?.plan)
}

/// Runs `restarts` independent searches on forked samplers and keeps the
/// one with the lowest reported objective (exact exponent for the
/// deterministic search). Ties go to the lower restart index.
pub fn best_of_restarts<E, F>(
    restarts: usize,
    sampler: &SeededSampler,
    exec: &E,
    run: F,
) -> Result<AnnealingOutcome>
where
    E: DrawMap,
    F: Fn(&SeededSampler) -> Result<AnnealingOutcome> + Sync + Send,
{
    let outcomes = exec.map(restarts, |r| run(&sampler.fork(r as u64)));
    let mut best: Option<(f64, AnnealingOutcome)> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        let p = &outcome.plan.provenance;
        let score = p.objective.or(p.lambda_l).unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, outcome));
        }
    }
    best.map(|(_, o)| o)
        .ok_or_else(|| Error::InvalidParameter("at least one restart is required".into()))
}
