//! Reduction of a solved network to the all-generator effective network.
//!
//! Loads become constant admittances at their solved voltages, every
//! generator gets an internal node behind its transient reactance, and all
//! physical buses are eliminated by a Schur complement. The result is the
//! second-order phase model
//!
//! ```text
//! d²δᵢ/dt² + βᵢ dδᵢ/dt = αᵢ − Σₖ cᵢₖ sin(δᵢ − δₖ − γᵢₖ)
//! ```
//!
//! with `cᵢₖ = ω_R/(2Hᵢ) EᵢEₖ|Yᵢₖ|`, `γᵢₖ = arg Yᵢₖ − π/2` and
//! `αᵢ = ω_R/(2Hᵢ)(P_m,ᵢ − Eᵢ² Re Yᵢᵢ)` on the reduced admittance.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::case::PowerSystemCase;
use crate::error::{Error, Result};
use crate::powerflow::{build_admittance, PowerFlowSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateNetwork {
    pub n: usize,
    /// Normalized net drive power, 1/s².
    pub alpha: Vec<f64>,
    /// Coupling strengths, 1/s², zero diagonal. Row-major.
    pub coupling: Vec<Vec<f64>>,
    /// Phase shifts, radians. Row-major.
    pub phase_shift: Vec<Vec<f64>>,
    /// Synchronous-state internal angles, radians.
    pub delta_star: Vec<f64>,
    /// Effective damping `D/(2H)` from the case dynamics, 1/s.
    pub beta: Vec<f64>,
    /// Internal EMF magnitudes, per-unit.
    pub internal_emf: Vec<f64>,
}

impl SteadyStateNetwork {
    /// Builds a network from explicit parameters; used for synthetic nets.
    pub fn from_parts(
        alpha: Vec<f64>,
        coupling: Vec<Vec<f64>>,
        phase_shift: Vec<Vec<f64>>,
        delta_star: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let n = alpha.len();
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if !square(&coupling) || !square(&phase_shift) {
            return Err(Error::InvalidParameter(format!(
                "coupling and phase-shift matrices must be {n}x{n}"
            )));
        }
        for (len, what) in [(delta_star.len(), "delta_star"), (beta.len(), "beta")] {
            if len != n {
                return Err(Error::InvalidParameter(format!(
                    "{what} has {len} entries, expected {n}"
                )));
            }
        }
        for (i, row) in coupling.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "coupling diagonal entry {i} is nonzero"
                )));
            }
            if row.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "coupling row {i} has negative or non-finite entries"
                )));
            }
        }
        Ok(Self {
            n,
            alpha,
            coupling,
            phase_shift,
            delta_star,
            beta,
            internal_emf: vec![1.0; n],
        })
    }
}

/// Reduces a converged power-flow state to the generator effective network.
pub fn reduce_network(
    case: &PowerSystemCase,
    solution: &PowerFlowSolution,
) -> Result<SteadyStateNetwork> {
    if !solution.converged {
        return Err(Error::InvalidParameter(format!(
            "power flow not converged (mismatch {:e})",
            solution.max_mismatch
        )));
    }
    let nb = case.buses.len();
    let ng = case.generators.len();
    let base = case.base_mva;
    let omega = 2.0 * PI * case.nominal_frequency;
    let gen_pos = case.generator_positions()?;
    let volts = solution.voltages();

    let mut inertia = Vec::with_capacity(ng);
    let mut reactance = Vec::with_capacity(ng);
    for (g, gen) in case.generators.iter().enumerate() {
        let h = gen.inertia.ok_or(Error::MissingDynamics { generator: g })?;
        let x = gen
            .transient_reactance
            .ok_or(Error::MissingDynamics { generator: g })?;
        if x == 0.0 {
            return Err(Error::InvalidDynamics(format!(
                "generator {} has zero transient reactance",
                g + 1
            )));
        }
        inertia.push(h);
        reactance.push(x);
    }
    let beta = case.betas()?;

    // physical buses with constant-impedance loads and generator branches
    let mut ybb = build_admittance(case)?;
    for (i, bus) in case.buses.iter().enumerate() {
        let s = Complex64::new(bus.active_demand.value, bus.reactive_demand.value) / base;
        ybb[(i, i)] += s.conj() / volts[i].norm_sqr();
    }
    let mut emf = Vec::with_capacity(ng);
    let mut ybg = DMatrix::from_element(nb, ng, Complex64::new(0.0, 0.0));
    let mut ygg = Vec::with_capacity(ng);
    for g in 0..ng {
        let b = gen_pos[g];
        let y = Complex64::new(0.0, reactance[g]).inv();
        ybb[(b, b)] += y;
        ybg[(b, g)] = -y;
        ygg.push(y);
        let s = Complex64::new(solution.generator_active[g], solution.generator_reactive[g]) / base;
        let current = (s / volts[b]).conj();
        emf.push(volts[b] + Complex64::new(0.0, reactance[g]) * current);
    }

    let eliminated = ybb
        .lu()
        .solve(&ybg)
        .ok_or(Error::Singular("Kron reduction"))?;
    if eliminated
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Singular("Kron reduction"));
    }
    // Y_red = Y_gg - Y_gb Y_bb^-1 Y_bg with Y_gb = Y_bg^T
    let mut reduced = DMatrix::from_element(ng, ng, Complex64::new(0.0, 0.0));
    for i in 0..ng {
        for k in 0..ng {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..nb {
                acc += ybg[(b, i)] * eliminated[(b, k)];
            }
            reduced[(i, k)] = -acc;
        }
        reduced[(i, i)] += ygg[i];
    }

    let mags: Vec<f64> = emf.iter().map(|e| e.norm()).collect();
    let delta_star: Vec<f64> = emf.iter().map(|e| e.arg()).collect();
    let mut coupling = vec![vec![0.0; ng]; ng];
    let mut phase_shift = vec![vec![0.0; ng]; ng];
    let mut alpha = vec![0.0; ng];
    for i in 0..ng {
        let scale = omega / (2.0 * inertia[i]);
        for k in 0..ng {
            if k == i {
                continue;
            }
            let y = reduced[(i, k)];
            if y.re == 0.0 && y.im == 0.0 {
                continue;
            }
            coupling[i][k] = scale * mags[i] * mags[k] * y.norm();
            phase_shift[i][k] = y.arg() - FRAC_PI_2;
        }
        let mechanical = solution.generator_active[i] / base;
        alpha[i] = scale * (mechanical - mags[i] * mags[i] * reduced[(i, i)].re);
    }

    Ok(SteadyStateNetwork {
        n: ng,
        alpha,
        coupling,
        phase_shift,
        delta_star,
        beta,
        internal_emf: mags,
    })
}

/// `αᵢ − Σₖ cᵢₖ sin(δ*ᵢ − δ*ₖ − γᵢₖ)` per generator, 1/s².
pub fn steady_state_residual(net: &SteadyStateNetwork) -> Vec<f64> {
    (0..net.n)
        .map(|i| {
            let flow: f64 = (0..net.n)
                .filter(|&k| k != i)
                .map(|k| {
                    net.coupling[i][k]
                        * (net.delta_star[i] - net.delta_star[k] - net.phase_shift[i][k]).sin()
                })
                .sum();
            net.alpha[i] - flow
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::fixtures::*;
    use crate::case::{BusKind, Measured};
    use crate::powerflow::{solve_power_flow, PowerFlowOptions};

    fn reduce(case: &PowerSystemCase) -> SteadyStateNetwork {
        let sol = solve_power_flow(case, &PowerFlowOptions::default()).unwrap();
        reduce_network(case, &sol).unwrap()
    }

    #[test]
    fn symmetric_lossless_pair() {
        let net = reduce(&two_machine(0.0));
        assert_eq!(net.n, 2);
        assert!(net.phase_shift[0][1].abs() < 1e-12);
        assert!(net.phase_shift[1][0].abs() < 1e-12);
        // a resistive load makes the reduced network lossy but still reciprocal
        let lossy = reduce(&two_machine(100.0));
        assert!(lossy.phase_shift[0][1] < -1e-6);
        assert!((lossy.phase_shift[0][1] - lossy.phase_shift[1][0]).abs() < 1e-12);
        assert!((net.delta_star[0] - net.delta_star[1]).abs() < 1e-9);
        assert!((net.coupling[0][1] - net.coupling[1][0]).abs() < 1e-9);
        assert!(steady_state_residual(&net).iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn single_generator_has_no_interactions() {
        let case = PowerSystemCase {
            base_mva: 100.0,
            nominal_frequency: 60.0,
            buses: alloc::vec![
                bus(1, BusKind::Slack, 0.0, 0.0, Some(1.0)),
                bus(2, BusKind::PQ, 80.0, 20.0, None),
            ],
            branches: alloc::vec![line(1, 2, 0.01, 0.1)],
            generators: alloc::vec![gen(1, 0.0, 4.0, 2.0, 0.2)],
        };
        let net = reduce(&case);
        assert_eq!(net.coupling, alloc::vec![alloc::vec![0.0]]);
        assert!(net.alpha[0].abs() < 1e-6, "{}", net.alpha[0]);
        assert_eq!(net.beta, alloc::vec![0.25]);
    }

    #[test]
    fn doubling_inertia_halves_rows() {
        let mut case = two_machine(120.0);
        case.branches[0].resistance = Measured::exact(0.01);
        case.buses[1].reactive_demand = Measured::exact(10.0);
        for g in &mut case.generators {
            g.damping = Some(3.0);
        }
        let a = reduce(&case);
        for g in &mut case.generators {
            g.inertia = g.inertia.map(|h| 2.0 * h);
        }
        let b = reduce(&case);
        for i in 0..2 {
            assert!((b.alpha[i] - a.alpha[i] / 2.0).abs() < 1e-9);
            assert!((b.beta[i] - a.beta[i] / 2.0).abs() < 1e-15);
            for k in 0..2 {
                assert!((b.coupling[i][k] - a.coupling[i][k] / 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_transient_reactance_fails() {
        let mut case = two_machine(100.0);
        case.generators[1].transient_reactance = Some(0.0);
        let sol = solve_power_flow(&case, &PowerFlowOptions::default()).unwrap();
        assert!(matches!(
            reduce_network(&case, &sol),
            Err(Error::InvalidDynamics(_))
        ));
    }

    #[test]
    fn perturbed_angle_breaks_balance() {
        let mut case = two_machine(100.0);
        case.branches[1].resistance = Measured::exact(0.01);
        let mut net = reduce(&case);
        net.delta_star[0] += 0.1;
        let r = steady_state_residual(&net);
        assert!(r[0].abs() > 1e-3 && r[1].abs() > 1e-3);
    }

    #[test]
    fn two_generator_closed_form() {
        // alpha = (1, -1) * c * sin(span), hand-evaluated sine expression
        let c = 3.0;
        let span: f64 = 0.3;
        let net = SteadyStateNetwork::from_parts(
            alloc::vec![c * span.sin(), -c * span.sin()],
            alloc::vec![alloc::vec![0.0, c], alloc::vec![c, 0.0]],
            alloc::vec![alloc::vec![0.0; 2]; 2],
            alloc::vec![span, 0.0],
            alloc::vec![1.0, 1.0],
        )
        .unwrap();
        let r = steady_state_residual(&net);
        assert!(r[0].abs() < 1e-15 && r[1].abs() < 1e-15);

        let shifted = SteadyStateNetwork {
            phase_shift: alloc::vec![alloc::vec![0.0, 0.1], alloc::vec![-0.1, 0.0]],
            ..net
        };
        let r = steady_state_residual(&shifted);
        assert!((r[0] - (c * 0.3_f64.sin() - c * 0.2_f64.sin())).abs() < 1e-14);
        assert!((r[1] - (-c * 0.3_f64.sin() + c * 0.2_f64.sin())).abs() < 1e-14);
    }
}
