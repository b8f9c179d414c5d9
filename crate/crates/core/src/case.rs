//! Raw power-system description: buses, branches, generators and the
//! per-generator dynamic parameters that the effective network needs.
//!
//! Generator order is the index order used by every per-generator vector in
//! the crate (damping plans, effective network, Jacobian blocks).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A measured quantity together with the resolution it was recorded at.
///
/// The resolution is one unit in the last printed digit of the source text
/// (`160` -> 1, `0.020` -> 0.001, `0` -> 0). It is the default standard
/// deviation of the parameter when the system is sampled under uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub resolution: f64,
}

impl Measured {
    pub const fn new(value: f64, resolution: f64) -> Self {
        Self { value, resolution }
    }

    /// Parses a decimal token, keeping its printed precision.
    pub fn parse(token: &str) -> Option<Self> {
        let value: f64 = token.trim().parse().ok()?;
        Some(Self {
            value,
            resolution: last_digit_resolution(token, value),
        })
    }

    /// A value with no recorded precision.
    pub const fn exact(value: f64) -> Self {
        Self {
            value,
            resolution: 0.0,
        }
    }
}

/// One unit in the last significant printed digit of `token`.
///
/// Exact zeros carry no digit and get resolution zero. Integers count
/// trailing zeros as significant, so `630` has resolution 1.
pub fn last_digit_resolution(token: &str, value: f64) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return 0.0;
    }
    let t = token.trim().trim_start_matches(['+', '-']);
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().unwrap_or(0)),
        None => (t, 0),
    };
    let decimals = match mantissa.find('.') {
        Some(pos) => (mantissa.len() - pos - 1) as i32,
        None => 0,
    };
    pow10(exponent - decimals)
}

fn pow10(e: i32) -> f64 {
    // exact for the decimal strings we see; avoids powi drift on negatives
    if e >= 0 {
        let mut v = 1.0;
        for _ in 0..e {
            v *= 10.0;
        }
        v
    } else {
        let mut v = 1.0;
        for _ in 0..(-e) {
            v *= 10.0;
        }
        1.0 / v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    #[serde(rename = "pv")]
    PV,
    #[serde(rename = "pq")]
    PQ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    /// MW
    pub active_demand: Measured,
    /// MVAr
    pub reactive_demand: Measured,
    /// kV
    pub base_voltage: f64,
    /// Per-unit magnitude setpoint; present on PV and slack buses.
    pub voltage_setpoint: Option<f64>,
    /// Per-unit on the system base.
    pub shunt_conductance: f64,
    /// Per-unit on the system base.
    pub shunt_susceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    /// Per-unit series resistance.
    pub resistance: Measured,
    /// Per-unit series reactance.
    pub reactance: Measured,
    /// Per-unit total line charging susceptance.
    pub charging: f64,
    /// Off-nominal tap ratio, 1 when absent.
    pub tap_ratio: f64,
    /// Radians.
    pub phase_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    /// MW
    pub active_generation: Measured,
    /// MVAr
    pub reactive_generation: Measured,
    /// Inertia constant H in seconds on the system base.
    pub inertia: Option<f64>,
    /// Damping coefficient D.
    pub damping: Option<f64>,
    /// Per-unit transient reactance x'd.
    pub transient_reactance: Option<f64>,
}

impl Generator {
    /// Effective damping `D / (2H)`, once dynamics are known.
    pub fn beta(&self) -> Option<f64> {
        match (self.damping, self.inertia) {
            (Some(d), Some(h)) => Some(d / (2.0 * h)),
            _ => None,
        }
    }

    pub fn set_dynamics(
        &mut self,
        inertia: f64,
        damping: f64,
        transient_reactance: f64,
    ) -> Result<()> {
        if !(inertia > 0.0) || !inertia.is_finite() {
            return Err(Error::InvalidDynamics(format!(
                "inertia constant must be positive, got {inertia}"
            )));
        }
        if !damping.is_finite() || !transient_reactance.is_finite() {
            return Err(Error::InvalidDynamics(String::from(
                "damping and transient reactance must be finite",
            )));
        }
        self.inertia = Some(inertia);
        self.damping = Some(damping);
        self.transient_reactance = Some(transient_reactance);
        Ok(())
    }
}

/// One row of the dynamics sidecar; `generator` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRow {
    pub generator: usize,
    pub inertia: f64,
    pub damping: f64,
    pub transient_reactance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSystemCase {
    pub base_mva: f64,
    /// Hz
    pub nominal_frequency: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

impl PowerSystemCase {
    /// Checks every structural invariant. Dangling branch endpoints are
    /// reported before the slack-bus count so that a deleted bus shows up
    /// by name.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0) {
            return Err(Error::InvalidCase(format!(
                "base MVA must be positive, got {}",
                self.base_mva
            )));
        }
        if !(self.nominal_frequency > 0.0) {
            return Err(Error::InvalidCase(String::from(
                "nominal frequency must be positive",
            )));
        }
        let mut ids = BTreeMap::new();
        for (i, bus) in self.buses.iter().enumerate() {
            if ids.insert(bus.id, i).is_some() {
                return Err(Error::InvalidCase(format!("duplicate bus id {}", bus.id)));
            }
            if !bus.active_demand.value.is_finite() || !bus.reactive_demand.value.is_finite() {
                return Err(Error::InvalidCase(format!(
                    "bus {} has a non-finite demand",
                    bus.id
                )));
            }
            if let Some(v) = bus.voltage_setpoint {
                if !(v > 0.0) {
                    return Err(Error::InvalidCase(format!(
                        "bus {} voltage setpoint must be positive",
                        bus.id
                    )));
                }
            }
        }

        let dangling: Vec<(u32, u32)> = self
            .branches
            .iter()
            .filter(|b| !ids.contains_key(&b.from_bus) || !ids.contains_key(&b.to_bus))
            .map(|b| (b.from_bus, b.to_bus))
            .collect();
        if !dangling.is_empty() {
            return Err(Error::DanglingBranches(dangling));
        }
        for br in &self.branches {
            if br.from_bus == br.to_bus {
                return Err(Error::InvalidCase(format!(
                    "branch {}-{} is a self loop",
                    br.from_bus, br.to_bus
                )));
            }
            if br.resistance.value == 0.0 && br.reactance.value == 0.0 {
                return Err(Error::ZeroImpedance {
                    from: br.from_bus,
                    to: br.to_bus,
                });
            }
        }

        let mut gen_buses = BTreeMap::new();
        for (g, gen) in self.generators.iter().enumerate() {
            let Some(&bi) = ids.get(&gen.bus) else {
                return Err(Error::InvalidCase(format!(
                    "generator {} sits on missing bus {}",
                    g + 1,
                    gen.bus
                )));
            };
            if gen_buses.insert(gen.bus, g).is_some() {
                return Err(Error::InvalidCase(format!(
                    "bus {} carries more than one generator",
                    gen.bus
                )));
            }
            if self.buses[bi].kind == BusKind::PQ {
                return Err(Error::InvalidCase(format!(
                    "generator {} sits on PQ bus {}",
                    g + 1,
                    gen.bus
                )));
            }
            if let Some(h) = gen.inertia {
                if !(h > 0.0) {
                    return Err(Error::InvalidDynamics(format!(
                        "generator {} inertia must be positive",
                        g + 1
                    )));
                }
            }
        }

        let slack = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack != 1 {
            return Err(Error::InvalidCase(format!(
                "expected exactly one slack bus, found {slack}"
            )));
        }
        for bus in &self.buses {
            if bus.kind != BusKind::PQ && bus.voltage_setpoint.is_none() {
                return Err(Error::InvalidCase(format!(
                    "bus {} is a PV/slack bus without a voltage setpoint",
                    bus.id
                )));
            }
        }
        Ok(())
    }

    /// Map from bus id to position in `buses`.
    pub fn bus_positions(&self) -> BTreeMap<u32, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    /// Position of each generator's bus in `buses`, in generator order.
    pub fn generator_positions(&self) -> Result<Vec<usize>> {
        let pos = self.bus_positions();
        self.generators
            .iter()
            .map(|g| {
                pos.get(&g.bus)
                    .copied()
                    .ok_or_else(|| Error::InvalidCase(format!("generator bus {} missing", g.bus)))
            })
            .collect()
    }

    pub fn slack_position(&self) -> Result<usize> {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .ok_or_else(|| Error::InvalidCase(String::from("no slack bus")))
    }

    /// Effective damping of every generator, in generator order.
    pub fn betas(&self) -> Result<Vec<f64>> {
        self.generators
            .iter()
            .enumerate()
            .map(|(g, gen)| gen.beta().ok_or(Error::MissingDynamics { generator: g }))
            .collect()
    }
}

/// Attaches dynamic parameters. Every generator must receive exactly one row.
pub fn merge_dynamics(case: &PowerSystemCase, rows: &[DynamicsRow]) -> Result<PowerSystemCase> {
    let n = case.generators.len();
    let mut seen = alloc::vec![false; n];
    let mut out = case.clone();
    for row in rows {
        if row.generator == 0 || row.generator > n {
            return Err(Error::InvalidDynamics(format!(
                "generator index {} out of range 1..={n}",
                row.generator
            )));
        }
        let g = row.generator - 1;
        if seen[g] {
            return Err(Error::InvalidDynamics(format!(
                "duplicate row for generator {}",
                row.generator
            )));
        }
        seen[g] = true;
        out.generators[g]
            .set_dynamics(row.inertia, row.damping, row.transient_reactance)
            .map_err(|e| match e {
                Error::InvalidDynamics(msg) => {
                    Error::InvalidDynamics(format!("generator {}: {msg}", row.generator))
                }
                other => other,
            })?;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidDynamics(format!(
            "no row for generator {}",
            missing + 1
        )));
    }
    Ok(out)
}
