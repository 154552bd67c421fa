//! Memoryless binary-input output-symmetric channels.
//!
//! BPSK on the AWGN channel maps bit 0 to +1 and bit 1 to -1.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Smallest noise level used for the "capacity 1" AWGN channel.
pub const SIGMA_FLOOR: f64 = 1e-3;
const SIGMA_CEIL: f64 = 100.0;
const QUADRATURE_NODES: usize = 161;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("erasure probability {0} is outside [0, 1]")]
    ErasureProbability(f64),
    #[error("noise standard deviation {0} must be positive and finite")]
    Sigma(f64),
    #[error("target capacity {0} is outside (0, 1]")]
    CapacityRange(f64),
    #[error("target capacity {target} is not bracketed by [{low}, {high}]")]
    NotBracketed { target: f64, low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Bec { erasure: f64 },
    BiAwgn { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Erased,
    Bit(u8),
    Real(f64),
}

/// `Q(0|y)` and `Q(1|y)` under a uniform input prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub q0: f64,
    pub q1: f64,
}

impl Posterior {
    pub const UNIFORM: Posterior = Posterior { q0: 0.5, q1: 0.5 };

    #[inline]
    pub fn of_bit(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.q0
        } else {
            self.q1
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelModel::Bec { erasure } => write!(f, "bec(p={erasure})"),
            ChannelModel::BiAwgn { sigma } => write!(f, "biawgn(sigma={sigma})"),
        }
    }
}

impl ChannelModel {
    pub fn bec(erasure: f64) -> Result<Self, ChannelError> {
        if !(0.0..=1.0).contains(&erasure) {
            return Err(ChannelError::ErasureProbability(erasure));
        }
        Ok(ChannelModel::Bec { erasure })
    }

    pub fn biawgn(sigma: f64) -> Result<Self, ChannelError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ChannelError::Sigma(sigma));
        }
        Ok(ChannelModel::BiAwgn { sigma })
    }

    /// The noiseless channel: a BEC that never erases.
    pub fn noiseless() -> Self {
        ChannelModel::Bec { erasure: 0.0 }
    }

    /// BI-AWGN channel whose capacity is `capacity`.
    pub fn biawgn_with_capacity(capacity: f64) -> Result<Self, ChannelError> {
        Self::biawgn(solve_sigma_for_capacity(capacity)?)
    }

    pub fn transmit<R: Rng + ?Sized>(&self, bit: u8, rng: &mut R) -> Observation {
        match *self {
            ChannelModel::Bec { erasure } => {
                if erasure > 0.0 && rng.random::<f64>() < erasure {
                    Observation::Erased
                } else {
                    Observation::Bit(bit)
                }
            }
            ChannelModel::BiAwgn { sigma } => {
                let x = if bit == 0 { 1.0 } else { -1.0 };
                let z: f64 = rng.sample(StandardNormal);
                Observation::Real(x + sigma * z)
            }
        }
    }

    pub fn posterior(&self, obs: Observation) -> Posterior {
        match (*self, obs) {
            (_, Observation::Erased) => Posterior::UNIFORM,
            (_, Observation::Bit(0)) => Posterior { q0: 1.0, q1: 0.0 },
            (_, Observation::Bit(_)) => Posterior { q0: 0.0, q1: 1.0 },
            (ChannelModel::BiAwgn { sigma }, Observation::Real(y)) => {
                let llr = 2.0 * y / (sigma * sigma);
                // q0 = 1 / (1 + e^{-llr}), evaluated without overflow.
                let e = (-llr.abs()).exp();
                let (big, small) = (1.0 / (1.0 + e), e / (1.0 + e));
                if llr >= 0.0 {
                    Posterior { q0: big, q1: small }
                } else {
                    Posterior { q0: small, q1: big }
                }
            }
            (ChannelModel::Bec { .. }, Observation::Real(y)) => {
                // Hard decision for a real value fed to an erasure channel.
                if y >= 0.0 {
                    Posterior { q0: 1.0, q1: 0.0 }
                } else {
                    Posterior { q0: 0.0, q1: 1.0 }
                }
            }
        }
    }

    pub fn capacity(&self) -> f64 {
        match *self {
            ChannelModel::Bec { erasure } => 1.0 - erasure,
            ChannelModel::BiAwgn { sigma } => biawgn_capacity(sigma),
        }
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Capacity of BPSK over AWGN with noise standard deviation `sigma`:
/// `1 - E[log2(1 + exp(-2Y/σ²))]`, `Y ~ N(1, σ²)`, by Gauss–Hermite quadrature.
pub fn biawgn_capacity(sigma: f64) -> f64 {
    let (nodes, weights) = hermite_rule();
    let s2 = sigma * sigma;
    let mut acc = 0.0;
    for (&t, &w) in nodes.iter().zip(weights) {
        let y = 1.0 + std::f64::consts::SQRT_2 * sigma * t;
        acc += w * softplus(-2.0 * y / s2);
    }
    let loss = acc / PI.sqrt() / LN_2;
    (1.0 - loss).clamp(0.0, 1.0)
}

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(QUADRATURE_NODES))
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for weight `e^{-x²}`.
///
/// Newton iteration on the orthonormal Hermite recurrence, seeded with the
/// usual asymptotic guesses for the largest roots.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PI_M4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PI_M4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Noise level at which the BI-AWGN capacity equals `target`.
///
/// `target = 1` maps to [`SIGMA_FLOOR`]. Otherwise bisection on `ln σ` over
/// `[SIGMA_FLOOR, 100]` until the capacity is within `1e-9` of the target.
pub fn solve_sigma_for_capacity(target: f64) -> Result<f64, ChannelError> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(ChannelError::CapacityRange(target));
    }
    if target == 1.0 {
        return Ok(SIGMA_FLOOR);
    }
    let (mut lo, mut hi) = (SIGMA_FLOOR.ln(), SIGMA_CEIL.ln());
    let (c_lo, c_hi) = (biawgn_capacity(SIGMA_FLOOR), biawgn_capacity(SIGMA_CEIL));
    if !(c_hi <= target && target <= c_lo) {
        return Err(ChannelError::NotBracketed { target, low: c_hi, high: c_lo });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = biawgn_capacity(mid.exp());
        if (c - target).abs() < 1e-9 {
            return Ok(mid.exp());
        }
        if c > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
