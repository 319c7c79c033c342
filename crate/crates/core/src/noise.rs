//! Gradient-noise laws, seeded streams and moment bounds.
//!
//! Each draw consumes exactly one 64-bit word from a ChaCha8 stream, so a
//! `(seed, position)` pair always maps to the same value. Per-trial streams
//! are seeded with [`substream_seed`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `base`:
/// `mix64(base ^ mix64(index + 0x9E3779B97F4A7C15))`.
pub fn substream_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ mix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// A deterministic stream of noise draws owned by one trial.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn for_trial(base: u64, index: u64) -> Self {
        Self::new(substream_seed(base, index))
    }

    /// Uniform on [0, 1) from the top 53 bits of one word.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform on [-1, 1).
    #[inline]
    pub fn symmetric_unit(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }

    /// Standard normal by inverse CDF on a midpoint-shifted 53-bit uniform.
    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_M53;
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }

    /// Uniform on [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

/// Gradient-noise law `ε(w, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// `ε ~ U[-r, r]`.
    Uniform { r: f64 },
    /// `ε ~ N(0, s²)`.
    Gaussian { s: f64 },
    Zero,
    /// `ε(w) = (1 + β sin w) ξ`, `ξ ~ U[-r, r]`.
    StateScaled { r: f64, beta: f64 },
}

/// Bounds on `E[ε²]` and `E|∂ε/∂w|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub sigma1_sq: f64,
    pub sigma2: f64,
    /// Exact `E[ε²]` (for state-scaled noise, at a state with `sin w = 0`).
    pub exact_variance: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Uniform { r } => r.is_finite() && r > 0.0,
            NoiseModel::Gaussian { s } => s.is_finite() && s > 0.0,
            NoiseModel::Zero => true,
            NoiseModel::StateScaled { r, beta } => {
                r.is_finite() && r > 0.0 && (0.0..1.0).contains(&beta)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid noise model {self:?}")))
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NoiseModel::Uniform { .. } => "uniform",
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::Zero => "zero",
            NoiseModel::StateScaled { .. } => "state_scaled",
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        matches!(self, NoiseModel::StateScaled { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NoiseModel::Zero)
    }

    /// The state-free factor `ξ(z)` of one draw (zero for `Zero`, which
    /// consumes nothing).
    #[inline]
    pub fn draw_base(&self, stream: &mut NoiseStream) -> f64 {
        match *self {
            NoiseModel::Uniform { r } | NoiseModel::StateScaled { r, .. } => r * stream.symmetric_unit(),
            NoiseModel::Gaussian { s } => s * stream.std_normal(),
            NoiseModel::Zero => 0.0,
        }
    }

    /// Multiplier applied to the base draw at state `w`.
    #[inline]
    pub fn state_factor(&self, w: f64) -> f64 {
        match *self {
            NoiseModel::StateScaled { beta, .. } => 1.0 + beta * w.sin(),
            _ => 1.0,
        }
    }

    /// `∂/∂w` of [`Self::state_factor`].
    #[inline]
    pub fn state_factor_derivative(&self, w: f64) -> f64 {
        match *self {
            NoiseModel::StateScaled { beta, .. } => beta * w.cos(),
            _ => 0.0,
        }
    }

    /// One draw `ε(w, z)`.
    #[inline]
    pub fn sample(&self, w: f64, stream: &mut NoiseStream) -> f64 {
        match self {
            NoiseModel::StateScaled { .. } => self.state_factor(w) * self.draw_base(stream),
            _ => self.draw_base(stream),
        }
    }

    pub fn moment_bounds(&self) -> MomentBounds {
        match *self {
            NoiseModel::Uniform { r } => MomentBounds { sigma1_sq: r * r, sigma2: 0.0, exact_variance: r * r / 3.0 },
            NoiseModel::Gaussian { s } => MomentBounds { sigma1_sq: s * s, sigma2: 0.0, exact_variance: s * s },
            NoiseModel::Zero => MomentBounds { sigma1_sq: 0.0, sigma2: 0.0, exact_variance: 0.0 },
            NoiseModel::StateScaled { r, beta } => MomentBounds {
                sigma1_sq: (1.0 + beta) * (1.0 + beta) * r * r,
                sigma2: beta * r,
                exact_variance: r * r / 3.0,
            },
        }
    }

    /// Exact `E[ε(w)²]`.
    pub fn variance_at(&self, w: f64) -> f64 {
        let a = self.state_factor(w);
        a * a * self.moment_bounds().exact_variance
    }
}
