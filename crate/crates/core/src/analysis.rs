//! Monte Carlo testing of damping plans and the statistics drawn from the
//! resulting exponent distributions.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::case::PowerSystemCase;
use crate::error::{Error, Result};
use crate::exec::DrawMap;
use crate::network::reduce_network;
use crate::optimize::DampingPlan;
use crate::powerflow::{solve_power_flow, PowerFlowOptions};
use crate::rng::{Channel, SeededSampler};
use crate::stability::{lyapunov, Interaction};
use crate::uncertainty::{sample_beta, sample_instance, UncertaintySpec};

/// Noise sources enabled while testing a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestChannels {
    Full,
    BetaOnly,
    YOnly,
}

impl TestChannels {
    pub fn beta(self) -> bool {
        matches!(self, Self::Full | Self::BetaOnly)
    }

    pub fn case(self) -> bool {
        matches!(self, Self::Full | Self::YOnly)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::BetaOnly => "beta_only",
            Self::YOnly => "y_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestProvenance {
    pub plan_method: String,
    pub beta_sigma: f64,
    pub channels: TestChannels,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovDistribution {
    /// Converged draws in draw order, 1/s.
    pub samples: Vec<f64>,
    pub requested: usize,
    pub non_convergent: usize,
    pub provenance: TestProvenance,
}

impl LyapunovDistribution {
    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        sort(&mut s);
        s
    }
}

fn sort(v: &mut [f64]) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
}

/// Draws `draws` exponents of the plan with the enabled noise channels;
/// disabled channels stay at their means.
#[allow(clippy::too_many_arguments)]
pub fn test_plan<E: DrawMap>(
    case: &PowerSystemCase,
    plan: &DampingPlan,
    spec: &UncertaintySpec,
    channels: TestChannels,
    draws: usize,
    sampler: &SeededSampler,
    options: &PowerFlowOptions,
    exec: &E,
) -> Result<LyapunovDistribution> {
    if draws == 0 {
        return Err(Error::InvalidParameter(
            "at least one draw is required".into(),
        ));
    }
    spec.validate(case)?;
    let means = plan.expand(case.generators.len())?;
    let base = if channels.case() {
        None
    } else {
        let sol = solve_power_flow(case, options)?;
        if !sol.converged {
            return Err(Error::PowerFlowDiverged {
                iterations: sol.iterations,
                max_mismatch: sol.max_mismatch,
            });
        }
        Some(Interaction::from_network(&reduce_network(case, &sol)?))
    };
    let drawn = exec.map(draws, |j| {
        let j = j as u64;
        let beta = if channels.beta() {
            sample_beta(&means, spec.beta_sigma, sampler, j)
        } else {
            means.clone()
        };
        match &base {
            Some(interaction) => lyapunov(interaction, &beta).ok(),
            None => {
                let inst = sample_instance(case, spec, sampler, j, options).ok()?;
                let net = inst.network?;
                lyapunov(&Interaction::from_network(&net), &beta).ok()
            }
        }
    });
    let non_convergent = drawn.iter().filter(|d| d.is_none()).count();
    let samples: Vec<f64> = drawn.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::AllDrawsFailed { draws });
    }
    Ok(LyapunovDistribution {
        samples,
        requested: draws,
        non_convergent,
        provenance: TestProvenance {
            plan_method: plan.provenance.method.clone(),
            beta_sigma: if channels.beta() {
                spec.beta_sigma
            } else {
                0.0
            },
            channels,
            seed: sampler.root_seed(),
        },
    })
}

/// Percentile grid 0, 1, …, 100.
pub fn percent_grid() -> Vec<f64> {
    (0..=100).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    /// Percent.
    pub grid: Vec<f64>,
    /// 1/s
    pub values: Vec<f64>,
}

/// Linear interpolation between order statistics at rank `(N − 1)·p`.
pub fn quantile_sorted(sorted: &[f64], percent: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * percent / 100.0;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

fn check_percent(p: f64) -> Result<()> {
    if (0.0..=100.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(alloc::format!(
            "percent {p} outside [0, 100]"
        )))
    }
}

pub fn quantile_curve(dist: &LyapunovDistribution, grid: &[f64]) -> Result<QuantileCurve> {
    if dist.samples.is_empty() {
        return Err(Error::InsufficientSamples {
            required: 1,
            found: 0,
        });
    }
    for &p in grid {
        check_percent(p)?;
    }
    let sorted = dist.sorted();
    Ok(QuantileCurve {
        grid: grid.to_vec(),
        values: grid.iter().map(|&p| quantile_sorted(&sorted, p)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalLambda {
    pub percent: f64,
    pub lambda_c: f64,
}

pub const CRITICAL_PERCENTS: [f64; 5] = [95.0, 96.0, 97.0, 98.0, 99.0];
pub const MIN_CRITICAL_SAMPLES: usize = 100;

/// Worst reasonable case: the empirical `p`-quantile for each percent.
pub fn critical_lambda(
    dist: &LyapunovDistribution,
    percents: &[f64],
) -> Result<Vec<CriticalLambda>> {
    if dist.samples.len() < MIN_CRITICAL_SAMPLES {
        return Err(Error::InsufficientSamples {
            required: MIN_CRITICAL_SAMPLES,
            found: dist.samples.len(),
        });
    }
    for &p in percents {
        check_percent(p)?;
    }
    let sorted = dist.sorted();
    Ok(percents
        .iter()
        .map(|&p| CriticalLambda {
            percent: p,
            lambda_c: quantile_sorted(&sorted, p),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center: f64,
    pub count: usize,
}

/// Bins `[i·w, (i+1)·w)` from the lowest to the highest occupied bin,
/// empty bins included.
pub fn histogram(dist: &LyapunovDistribution, bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if dist.samples.is_empty() {
        return Ok(Vec::new());
    }
    let index = |x: f64| (x / bin_width).floor() as i64;
    let lo = dist.samples.iter().map(|&x| index(x)).min().unwrap_or(0);
    let hi = dist.samples.iter().map(|&x| index(x)).max().unwrap_or(0);
    let mut counts = alloc::vec![0usize; (hi - lo + 1) as usize];
    for &x in &dist.samples {
        counts[(index(x) - lo) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            center: ((lo + i as i64) as f64 + 0.5) * bin_width,
            count,
        })
        .collect())
}

/// Percentile bootstrap interval for a quantile of `samples`.
pub fn bootstrap_quantile_interval(
    samples: &[f64],
    percent: f64,
    resamples: usize,
    level: f64,
    sampler: &SeededSampler,
) -> Result<(f64, f64)> {
    if samples.is_empty() || resamples == 0 {
        return Err(Error::InsufficientSamples {
            required: 1,
            found: 0,
        });
    }
    check_percent(percent)?;
    let n = samples.len();
    let mut estimates: Vec<f64> = (0..resamples as u64)
        .map(|b| {
            let mut rng = sampler.stream(Channel::Bootstrap, b);
            let mut draw: Vec<f64> = (0..n).map(|_| samples[rng.random_range(0..n)]).collect();
            sort(&mut draw);
            quantile_sorted(&draw, percent)
        })
        .collect();
    sort(&mut estimates);
    let tail = (1.0 - level) / 2.0 * 100.0;
    Ok((
        quantile_sorted(&estimates, tail),
        quantile_sorted(&estimates, 100.0 - tail),
    ))
}

/// Identifies one cell of a comparison: the plan's method, the noise level
/// it was optimized for and the level it was tested at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub method: String,
    pub sigma_opt: f64,
    pub sigma_test: f64,
    pub channels: TestChannels,
    pub seed: u64,
    pub draws: usize,
    pub non_convergent: usize,
    pub curve: QuantileCurve,
    pub critical: Vec<CriticalLambda>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub grid: Vec<f64>,
    pub critical_percents: Vec<f64>,
    pub entries: Vec<ReportEntry>,
}

/// Collects entries into one report; all must share the quantile grid and
/// critical percents.
pub fn compare_report(entries: Vec<ReportEntry>) -> Result<ComparisonReport> {
    let grid = entries
        .first()
        .map(|e| e.curve.grid.clone())
        .unwrap_or_default();
    let percents: Vec<f64> = entries
        .first()
        .map(|e| e.critical.iter().map(|c| c.percent).collect())
        .unwrap_or_default();
    for e in &entries {
        let p: Vec<f64> = e.critical.iter().map(|c| c.percent).collect();
        if e.curve.grid != grid || p != percents || e.curve.values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
    }
    Ok(ComparisonReport {
        grid,
        critical_percents: percents,
        entries,
    })
}
