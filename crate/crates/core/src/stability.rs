//! Linearization of the swing model around its synchronous state and the
//! Lyapunov exponent of the resulting Jacobian.
//!
//! `J = [[0, I], [-P, -B]]` where `P` collects the cosine couplings with
//! zero row sums and `B = diag(β)`. Rotating every phase by the same angle
//! leaves the model unchanged, so `J` always has an eigenvalue at zero with
//! eigenvector `(1,…,1,0,…,0)`. The Lyapunov exponent is the largest real
//! part over the remaining `2n − 1` eigenvalues.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, Square};
use crate::error::{Error, Result};
use crate::network::SteadyStateNetwork;

/// Default zero-mode tolerance, relative to the Frobenius norm of `J`.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-8;

/// Francis sweeps allowed per eigenvalue.
const SCHUR_SWEEPS_PER_EIGENVALUE: usize = 60;

/// The interaction matrix `P` of a network. Depends only on the steady
/// state, so it is built once and reused while damping varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub n: usize,
    /// Row-major `n × n`.
    pub p: Vec<f64>,
}

impl Interaction {
    pub fn from_network(net: &SteadyStateNetwork) -> Self {
        let n = net.n;
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let v = -net.coupling[i][k]
                    * (net.delta_star[i] - net.delta_star[k] - net.phase_shift[i][k]).cos();
                p[i * n + k] = v;
                diag -= v;
            }
            p[i * n + i] = diag;
        }
        Self { n, p }
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.p[i * self.n + k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityJacobian {
    pub n: usize,
    pub interaction: Interaction,
    /// Diagonal of `B`.
    pub damping: Vec<f64>,
}

impl StabilityJacobian {
    pub fn new(interaction: Interaction, damping: &[f64]) -> Result<Self> {
        if damping.len() != interaction.n {
            return Err(Error::LengthMismatch {
                expected: interaction.n,
                found: damping.len(),
            });
        }
        Ok(Self {
            n: interaction.n,
            interaction,
            damping: damping.to_vec(),
        })
    }

    /// The full `2n × 2n` block matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        block_matrix(&self.interaction, &self.damping)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.interaction, &self.damping)
    }
}

fn block_matrix(interaction: &Interaction, damping: &[f64]) -> DMatrix<f64> {
    let n = interaction.n;
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        for k in 0..n {
            j[(n + i, k)] = -interaction.get(i, k);
        }
        j[(n + i, n + i)] = -damping[i];
    }
    j
}

fn frobenius_norm(interaction: &Interaction, damping: &[f64]) -> f64 {
    let p: f64 = interaction.p.iter().map(|x| x * x).sum();
    let b: f64 = damping.iter().map(|x| x * x).sum();
    (p + b + interaction.n as f64).sqrt()
}

/// Builds `J` for a network and a damping vector.
pub fn assemble_jacobian(net: &SteadyStateNetwork, beta: &[f64]) -> Result<StabilityJacobian> {
    StabilityJacobian::new(Interaction::from_network(net), beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// 1/s
    pub lambda_l: f64,
    pub spectrum: Vec<Complex64>,
    pub zero_mode_magnitude: f64,
}

/// Eigenvalues of `J` from a real Schur decomposition.
pub fn jacobian_spectrum(jac: &StabilityJacobian) -> Result<Vec<Complex64>> {
    spectrum_of(jac.matrix())
}

fn spectrum_of(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let max_sweeps = SCHUR_SWEEPS_PER_EIGENVALUE * m.nrows().max(1);
    // Francis iterations without exceptional shifts can stall on some
    // structured inputs; the transpose has the same spectrum and a different
    // iteration path.
    let schur = match Schur::try_new(m.clone(), f64::EPSILON, max_sweeps) {
        Some(s) => s,
        None => {
            Schur::try_new(m.transpose(), f64::EPSILON, max_sweeps).ok_or(Error::EigenFailure)?
        }
    };
    let ev = schur.complex_eigenvalues();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenFailure);
    }
    Ok(ev.iter().copied().collect())
}

/// Excludes the single zero mode and returns the largest remaining real part.
pub fn lyapunov_exponent(
    jac: &StabilityJacobian,
    zero_mode_tolerance: f64,
) -> Result<LyapunovResult> {
    let spectrum = jacobian_spectrum(jac)?;
    let threshold = zero_mode_tolerance * jac.frobenius_norm();
    let (lambda_l, zero_mode_magnitude) = exclude_zero_mode(&spectrum, threshold)?;
    Ok(LyapunovResult {
        lambda_l,
        spectrum,
        zero_mode_magnitude,
    })
}

/// `λ_L` alone with the default tolerance, for hot loops.
pub fn lyapunov(interaction: &Interaction, beta: &[f64]) -> Result<f64> {
    if beta.len() != interaction.n {
        return Err(Error::LengthMismatch {
            expected: interaction.n,
            found: beta.len(),
        });
    }
    let spectrum = spectrum_of(block_matrix(interaction, beta))?;
    let threshold = ZERO_MODE_TOLERANCE * frobenius_norm(interaction, beta);
    Ok(exclude_zero_mode(&spectrum, threshold)?.0)
}

pub(crate) fn exclude_zero_mode(spectrum: &[Complex64], threshold: f64) -> Result<(f64, f64)> {
    let zeros: Vec<usize> = spectrum
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() <= threshold)
        .map(|(i, _)| i)
        .collect();
    if zeros.len() != 1 {
        return Err(Error::ZeroMode { found: zeros.len() });
    }
    let skip = zeros[0];
    let lambda = spectrum
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lambda, spectrum[skip].norm()))
}

/// Roots of `det(λ²I + λB + P) = 0` through the second companion
/// linearization `[[−B, −P], [I, 0]]` acting on `(λv, v)`, solved with the
/// crate's own QR iteration. Shares no code with [`jacobian_spectrum`].
pub fn qep_spectrum(net: &SteadyStateNetwork, beta: &[f64]) -> Result<Vec<Complex64>> {
    let n = net.n;
    if beta.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: beta.len(),
        });
    }
    let mut stiffness = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let c = net.coupling[i][k]
                    * (net.delta_star[i] - net.delta_star[k] - net.phase_shift[i][k]).cos();
                stiffness[i][k] = -c;
                stiffness[i][i] += c;
            }
        }
    }
    let mut l = Square::zeros(2 * n);
    for i in 0..n {
        l.set(i, i, -beta[i]);
        for k in 0..n {
            l.set(i, n + k, -stiffness[i][k]);
        }
        l.set(n + i, i, 1.0);
    }
    eigen::eigenvalues(&l)
}
