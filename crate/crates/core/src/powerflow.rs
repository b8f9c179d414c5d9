//! Bus admittance assembly and Newton-Raphson AC power flow in polar form.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::case::{BusKind, PowerSystemCase};
use crate::error::{Error, Result};

/// Dense complex bus admittance matrix, per-unit, in bus order.
pub type Admittance = DMatrix<Complex64>;

/// Standard pi-model stamping with off-nominal taps, phase shifters and bus shunts.
pub fn build_admittance(case: &PowerSystemCase) -> Result<Admittance> {
    let n = case.buses.len();
    let pos = case.bus_positions();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &case.branches {
        let z = Complex64::new(br.resistance.value, br.reactance.value);
        if z.norm_sqr() == 0.0 {
            return Err(Error::ZeroImpedance {
                from: br.from_bus,
                to: br.to_bus,
            });
        }
        let (Some(&f), Some(&t)) = (pos.get(&br.from_bus), pos.get(&br.to_bus)) else {
            return Err(Error::DanglingBranches(vec![(br.from_bus, br.to_bus)]));
        };
        let ys = z.inv();
        let ratio = if br.tap_ratio == 0.0 {
            1.0
        } else {
            br.tap_ratio
        };
        let tap = Complex64::from_polar(ratio, br.phase_shift);
        let ytt = ys + Complex64::new(0.0, br.charging / 2.0);
        let yff = ytt / (ratio * ratio);
        let yft = -ys / tap.conj();
        let ytf = -ys / tap;
        y[(f, f)] += yff;
        y[(t, t)] += ytt;
        y[(f, t)] += yft;
        y[(t, f)] += ytf;
    }
    for (i, bus) in case.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.shunt_conductance, bus.shunt_susceptance);
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    /// Per-unit power mismatch.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    /// Per-unit, bus order.
    pub voltage_magnitude: Vec<f64>,
    /// Radians, bus order; the slack angle is zero.
    pub voltage_angle: Vec<f64>,
    /// Active output of the slack generator(s), MW.
    pub slack_active_injection: f64,
    /// Solved generator outputs, MW, generator order.
    pub generator_active: Vec<f64>,
    /// Solved generator outputs, MVAr, generator order.
    pub generator_reactive: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Per-unit, infinity norm of the final mismatch vector.
    pub max_mismatch: f64,
    /// Mismatch norm before each Newton update and at exit.
    pub mismatch_history: Vec<f64>,
}

impl PowerFlowSolution {
    pub fn voltage(&self, bus: usize) -> Complex64 {
        Complex64::from_polar(self.voltage_magnitude[bus], self.voltage_angle[bus])
    }

    pub fn voltages(&self) -> Vec<Complex64> {
        (0..self.voltage_magnitude.len())
            .map(|i| self.voltage(i))
            .collect()
    }
}

fn injections(y: &Admittance, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = vm.len();
    let v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(vm[i], va[i]))
        .collect();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut current = Complex64::new(0.0, 0.0);
        for k in 0..n {
            current += y[(i, k)] * v[k];
        }
        let s = v[i] * current.conj();
        p[i] = s.re;
        q[i] = s.im;
    }
    (p, q)
}

/// Solves the AC power flow from a flat start.
///
/// Reaching `max_iterations` is not an error: the returned solution has
/// `converged == false` and carries the final mismatch for diagnostics. A
/// singular mismatch Jacobian is an error.
pub fn solve_power_flow(
    case: &PowerSystemCase,
    options: &PowerFlowOptions,
) -> Result<PowerFlowSolution> {
    let y = build_admittance(case)?;
    solve_with_admittance(case, &y, options)
}

pub fn solve_with_admittance(
    case: &PowerSystemCase,
    y: &Admittance,
    options: &PowerFlowOptions,
) -> Result<PowerFlowSolution> {
    let n = case.buses.len();
    let base = case.base_mva;
    let pos = case.bus_positions();

    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    for (i, bus) in case.buses.iter().enumerate() {
        p_spec[i] -= bus.active_demand.value / base;
        q_spec[i] -= bus.reactive_demand.value / base;
    }
    for gen in &case.generators {
        let i = pos[&gen.bus];
        p_spec[i] += gen.active_generation.value / base;
        q_spec[i] += gen.reactive_generation.value / base;
    }

    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    let mut pvpq = Vec::new();
    let mut pq = Vec::new();
    for (i, bus) in case.buses.iter().enumerate() {
        if let Some(v) = bus.voltage_setpoint {
            if bus.kind != BusKind::PQ {
                vm[i] = v;
            }
        }
        match bus.kind {
            BusKind::Slack => {}
            BusKind::PV => pvpq.push(i),
            BusKind::PQ => {
                pvpq.push(i);
                pq.push(i);
            }
        }
    }
    let n_ang = pvpq.len();
    let dim = n_ang + pq.len();

    // column index of each bus's angle / magnitude unknown
    let mut ang_col = vec![usize::MAX; n];
    let mut mag_col = vec![usize::MAX; n];
    for (c, &i) in pvpq.iter().enumerate() {
        ang_col[i] = c;
    }
    for (c, &i) in pq.iter().enumerate() {
        mag_col[i] = n_ang + c;
    }

    let mismatch = |vm: &[f64], va: &[f64]| -> (DVector<f64>, f64, Vec<f64>, Vec<f64>) {
        let (p, q) = injections(y, vm, va);
        let mut f = DVector::zeros(dim);
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = p_spec[i] - p[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            f[n_ang + r] = q_spec[i] - q[i];
        }
        let norm = f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        (f, norm, p, q)
    };

    let (mut f, mut norm, mut p, mut q) = mismatch(&vm, &va);
    let mut history = vec![norm];
    let mut iterations = 0;
    let mut converged = norm <= options.tolerance;

    while !converged && iterations < options.max_iterations {
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for (r, &i) in pvpq.iter().enumerate() {
            fill_row(
                y, &vm, &va, &p, &q, i, &ang_col, &mag_col, &mut jac, r, true,
            );
        }
        for (r, &i) in pq.iter().enumerate() {
            fill_row(
                y,
                &vm,
                &va,
                &p,
                &q,
                i,
                &ang_col,
                &mag_col,
                &mut jac,
                n_ang + r,
                false,
            );
        }
        let dx = jac
            .lu()
            .solve(&f)
            .ok_or(Error::Singular("power-flow Jacobian"))?;
        if dx.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("power-flow Jacobian"));
        }
        for (c, &i) in pvpq.iter().enumerate() {
            va[i] += dx[c];
        }
        for (c, &i) in pq.iter().enumerate() {
            vm[i] += dx[n_ang + c];
        }
        iterations += 1;
        (f, norm, p, q) = mismatch(&vm, &va);
        history.push(norm);
        converged = norm <= options.tolerance;
    }

    let mut generator_active = Vec::with_capacity(case.generators.len());
    let mut generator_reactive = Vec::with_capacity(case.generators.len());
    let mut slack_active_injection = 0.0;
    for gen in &case.generators {
        let i = pos[&gen.bus];
        let bus = &case.buses[i];
        let pg = match bus.kind {
            BusKind::Slack => p[i] * base + bus.active_demand.value,
            _ => gen.active_generation.value,
        };
        let qg = match bus.kind {
            BusKind::PQ => gen.reactive_generation.value,
            _ => q[i] * base + bus.reactive_demand.value,
        };
        if bus.kind == BusKind::Slack {
            slack_active_injection += pg;
        }
        generator_active.push(pg);
        generator_reactive.push(qg);
    }

    Ok(PowerFlowSolution {
        voltage_magnitude: vm,
        voltage_angle: va,
        slack_active_injection,
        generator_active,
        generator_reactive,
        converged,
        iterations,
        max_mismatch: norm,
        mismatch_history: history,
    })
}

#[allow(clippy::too_many_arguments)]
fn fill_row(
    y: &Admittance,
    vm: &[f64],
    va: &[f64],
    p: &[f64],
    q: &[f64],
    i: usize,
    ang_col: &[usize],
    mag_col: &[usize],
    jac: &mut DMatrix<f64>,
    row: usize,
    active: bool,
) {
    let n = vm.len();
    for k in 0..n {
        let yik = y[(i, k)];
        if k != i && yik.re == 0.0 && yik.im == 0.0 {
            continue;
        }
        let (g, b) = (yik.re, yik.im);
        if k == i {
            let (d_ang, d_mag) = if active {
                (-q[i] - b * vm[i] * vm[i], p[i] / vm[i] + g * vm[i])
            } else {
                (p[i] - g * vm[i] * vm[i], q[i] / vm[i] - b * vm[i])
            };
            if ang_col[i] != usize::MAX {
                jac[(row, ang_col[i])] = d_ang;
            }
            if mag_col[i] != usize::MAX {
                jac[(row, mag_col[i])] = d_mag;
            }
        } else {
            let t = va[i] - va[k];
            let (s, c) = t.sin_cos();
            let (d_ang, d_mag) = if active {
                (vm[i] * vm[k] * (g * s - b * c), vm[i] * (g * c + b * s))
            } else {
                (-vm[i] * vm[k] * (g * c + b * s), vm[i] * (g * s - b * c))
            };
            if ang_col[k] != usize::MAX {
                jac[(row, ang_col[k])] = d_ang;
            }
            if mag_col[k] != usize::MAX {
                jac[(row, mag_col[k])] = d_mag;
            }
        }
    }
}

/// Net complex power injected at every bus for the given voltages, per-unit.
pub fn bus_injections(y: &Admittance, solution: &PowerFlowSolution) -> Vec<Complex64> {
    let (p, q) = injections(y, &solution.voltage_magnitude, &solution.voltage_angle);
    p.into_iter()
        .zip(q)
        .map(|(p, q)| Complex64::new(p, q))
        .collect()
}
