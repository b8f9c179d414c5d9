//! Uncertainty model: Gaussian noise on the measured case parameters and on
//! the damping vector, and the perturbed system instances it produces.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::case::PowerSystemCase;
use crate::error::{Error, Result};
use crate::exec::DrawMap;
use crate::network::{reduce_network, SteadyStateNetwork};
use crate::powerflow::{solve_power_flow, PowerFlowOptions};
use crate::rng::{Channel, SeededSampler};
use crate::stability::Interaction;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BusSigma {
    /// MW
    pub active_demand: f64,
    /// MVAr
    pub reactive_demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneratorSigma {
    /// MW
    pub active_generation: f64,
    /// MVAr
    pub reactive_generation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchSigma {
    /// p.u.
    pub resistance: f64,
    /// p.u.
    pub reactance: f64,
}

/// Standard deviations of every noisy quantity.
///
/// `buses`, `generators` and `branches` follow the order of the case they
/// were built for. `beta_sigma` is absolute (1/s) and shared by all
/// generators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub beta_sigma: f64,
    pub buses: Vec<BusSigma>,
    pub generators: Vec<GeneratorSigma>,
    pub branches: Vec<BranchSigma>,
}

impl UncertaintySpec {
    /// Every recorded resolution of the case as a standard deviation.
    pub fn from_resolutions(case: &PowerSystemCase, beta_sigma: f64) -> Self {
        Self {
            beta_sigma,
            buses: case
                .buses
                .iter()
                .map(|b| BusSigma {
                    active_demand: b.active_demand.resolution,
                    reactive_demand: b.reactive_demand.resolution,
                })
                .collect(),
            generators: case
                .generators
                .iter()
                .map(|g| GeneratorSigma {
                    active_generation: g.active_generation.resolution,
                    reactive_generation: g.reactive_generation.resolution,
                })
                .collect(),
            branches: case
                .branches
                .iter()
                .map(|br| BranchSigma {
                    resistance: br.resistance.resolution,
                    reactance: br.reactance.resolution,
                })
                .collect(),
        }
    }

    /// No noise on any channel.
    pub fn zero(case: &PowerSystemCase) -> Self {
        Self {
            beta_sigma: 0.0,
            buses: alloc::vec![BusSigma::default(); case.buses.len()],
            generators: alloc::vec![GeneratorSigma::default(); case.generators.len()],
            branches: alloc::vec![BranchSigma::default(); case.branches.len()],
        }
    }

    pub fn with_beta_sigma(mut self, beta_sigma: f64) -> Self {
        self.beta_sigma = beta_sigma;
        self
    }

    /// True when the case parameters carry no noise.
    pub fn case_is_exact(&self) -> bool {
        self.buses
            .iter()
            .all(|b| b.active_demand == 0.0 && b.reactive_demand == 0.0)
            && self
                .generators
                .iter()
                .all(|g| g.active_generation == 0.0 && g.reactive_generation == 0.0)
            && self
                .branches
                .iter()
                .all(|b| b.resistance == 0.0 && b.reactance == 0.0)
    }

    pub fn validate(&self, case: &PowerSystemCase) -> Result<()> {
        for (what, found, expected) in [
            ("bus", self.buses.len(), case.buses.len()),
            ("generator", self.generators.len(), case.generators.len()),
            ("branch", self.branches.len(), case.branches.len()),
        ] {
            if found != expected {
                return Err(Error::InvalidParameter(format!(
                    "uncertainty spec has {found} {what} entries, case has {expected}"
                )));
            }
        }
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        let all = core::iter::once(self.beta_sigma)
            .chain(
                self.buses
                    .iter()
                    .flat_map(|b| [b.active_demand, b.reactive_demand]),
            )
            .chain(
                self.generators
                    .iter()
                    .flat_map(|g| [g.active_generation, g.reactive_generation]),
            )
            .chain(
                self.branches
                    .iter()
                    .flat_map(|b| [b.resistance, b.reactance]),
            );
        for s in all {
            if !ok(s) {
                return Err(Error::InvalidParameter(format!(
                    "standard deviation {s} is negative or not finite"
                )));
            }
        }
        Ok(())
    }
}

/// Default spec: one unit in the last recorded digit of every parameter.
pub fn default_uncertainty(case: &PowerSystemCase, beta_sigma: f64) -> UncertaintySpec {
    UncertaintySpec::from_resolutions(case, beta_sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedInstance {
    pub index: u64,
    pub case: PowerSystemCase,
    /// `None` when the perturbed case could not be solved or reduced.
    pub network: Option<SteadyStateNetwork>,
    pub converged: bool,
}

#[inline]
fn normal<R: Rng>(rng: &mut R, mean: f64, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sigma * z
}

/// Draws the case parameters of instance `j` and recomputes its steady
/// state. A failed power flow or reduction flags the instance instead of
/// returning an error.
pub fn sample_instance(
    case: &PowerSystemCase,
    spec: &UncertaintySpec,
    sampler: &SeededSampler,
    j: u64,
    options: &PowerFlowOptions,
) -> Result<PerturbedInstance> {
    spec.validate(case)?;
    let mut rng = sampler.stream(Channel::Case, j);
    let mut inst = case.clone();
    for (bus, s) in inst.buses.iter_mut().zip(&spec.buses) {
        bus.active_demand.value = normal(&mut rng, bus.active_demand.value, s.active_demand);
        bus.reactive_demand.value = normal(&mut rng, bus.reactive_demand.value, s.reactive_demand);
    }
    for (gen, s) in inst.generators.iter_mut().zip(&spec.generators) {
        gen.active_generation.value =
            normal(&mut rng, gen.active_generation.value, s.active_generation);
        gen.reactive_generation.value = normal(
            &mut rng,
            gen.reactive_generation.value,
            s.reactive_generation,
        );
    }
    for (br, s) in inst.branches.iter_mut().zip(&spec.branches) {
        br.resistance.value = normal(&mut rng, br.resistance.value, s.resistance);
        br.reactance.value = normal(&mut rng, br.reactance.value, s.reactance);
    }
    let network = match solve_power_flow(&inst, options) {
        Ok(sol) if sol.converged => reduce_network(&inst, &sol).ok(),
        _ => None,
    };
    Ok(PerturbedInstance {
        index: j,
        case: inst,
        converged: network.is_some(),
        network,
    })
}

/// Damping vector of draw `j`: each entry from `Normal(mean_i, sigma)`.
/// Negative values are kept.
pub fn sample_beta(mean_beta: &[f64], sigma: f64, sampler: &SeededSampler, j: u64) -> Vec<f64> {
    let mut rng = sampler.stream(Channel::Beta, j);
    sample_beta_with(&mut rng, mean_beta, sigma)
}

pub fn sample_beta_with<R: Rng>(rng: &mut R, mean_beta: &[f64], sigma: f64) -> Vec<f64> {
    mean_beta.iter().map(|&m| normal(rng, m, sigma)).collect()
}

/// Uniform random point on the sphere of the given radius.
pub fn hypersphere_step<R: Rng>(n: usize, radius: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 || !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "hypersphere step needs n >= 1 and radius > 0, got n = {n}, radius = {radius}"
        )));
    }
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            return Ok(g.into_iter().map(|x| radius * x / norm).collect());
        }
    }
}

/// Independent `Normal(0, sigma_step)` components.
pub fn gaussian_step<R: Rng>(n: usize, sigma_step: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| normal(rng, 0.0, sigma_step)).collect()
}

/// Interaction matrices of pre-solved perturbed instances. Lets an
/// optimizer sample the case channel without re-solving the power flow at
/// every evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBank {
    pub interactions: Vec<Interaction>,
    pub failed: usize,
}

impl InstanceBank {
    pub fn build<E: DrawMap>(
        case: &PowerSystemCase,
        spec: &UncertaintySpec,
        sampler: &SeededSampler,
        size: usize,
        options: &PowerFlowOptions,
        exec: &E,
    ) -> Result<Self> {
        spec.validate(case)?;
        let bank_sampler = sampler.fork(Channel::Bank as u64);
        let drawn = exec.map(size, |j| {
            sample_instance(case, spec, &bank_sampler, j as u64, options)
                .ok()
                .and_then(|inst| inst.network)
                .map(|net| Interaction::from_network(&net))
        });
        let failed = drawn.iter().filter(|d| d.is_none()).count();
        let interactions: Vec<Interaction> = drawn.into_iter().flatten().collect();
        if interactions.is_empty() {
            return Err(Error::AllDrawsFailed { draws: size });
        }
        Ok(Self {
            interactions,
            failed,
        })
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }
}
