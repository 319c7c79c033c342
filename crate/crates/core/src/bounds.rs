//! Explicit evaluation of the SGD and averaged-SGD error bounds from
//! certified constants, and the closed-form rates of the two bump examples.

use serde::Serialize;

use crate::certify::{CertifiedConstants, Example};
use crate::dynamics::InitLaw;
use crate::error::{Error, Result};
use crate::objectives::{MollifierConstants, ObjectiveSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgdTerms {
    /// `E(v₀ - v*)² / (c η (T+1))`
    pub init_term: f64,
    /// `8/(3c(T+1)) (1 + 2ησ₂²/c) E f(w₀)`
    pub f0_term: f64,
    /// `2ησ₁²/c`
    pub linear_eta_term: f64,
    /// `(8η²σ₁²L/3c)(1 + 2ησ₂²/c)`
    pub quad_eta_term: f64,
}

impl SgdTerms {
    pub fn total(&self) -> f64 {
        self.init_term + self.f0_term + self.linear_eta_term + self.quad_eta_term
    }

    /// The part that survives `T → ∞`.
    pub fn asymptotic(&self) -> f64 {
        self.linear_eta_term + self.quad_eta_term
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvgTerms {
    /// `4σ₁σ₂η^{3/2}L^{1/2}/(√3 μ)`
    pub eta32_term: f64,
    /// `M₁/μ`
    pub m1_term: f64,
    /// `2ησ₁²M₂/(cμ)`
    pub m2_linear: f64,
    /// `(8η²σ₁²LM₂/(3cμ))(1 + 2ησ₂²/c)`
    pub m2_quad: f64,
}

impl AvgTerms {
    pub fn total(&self) -> f64 {
        self.eta32_term + self.m1_term + self.m2_linear + self.m2_quad
    }
}

/// Both bounds with their inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub sgd_terms: SgdTerms,
    pub sgd_total: f64,
    pub avg_terms: AvgTerms,
    pub avg_total_asymptotic: f64,
    /// The averaged bound also carries an `O(T^{-1/2})` term whose constant
    /// is not available; it is never added to `avg_total_asymptotic`.
    pub avg_transient: &'static str,
    pub constants: CertifiedConstants,
    pub eta: f64,
    pub steps: usize,
    pub d0_sq: f64,
    pub f0: f64,
}

pub const AVG_TRANSIENT_LABEL: &str = "O(T^-1/2), not computed";

fn require_c(c: &CertifiedConstants) -> Result<()> {
    if !(c.c > 0.0) {
        return Err(Error::CertificateFailed(format!("c = {} is not positive", c.c)));
    }
    Ok(())
}

/// Mean-square bound on the implicit iterates `(1/(T+1)) Σ E(v_t - v*)²`.
pub fn sgd_bound(k: &CertifiedConstants, eta: f64, steps: usize, d0_sq: f64, f0: f64) -> Result<SgdTerms> {
    require_c(k)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be > 0, got {eta}")));
    }
    let limit = 0.5 / k.lipschitz;
    if eta > limit {
        return Err(Error::RegimeViolation { eta, limit });
    }
    let c = k.c;
    let t1 = steps as f64 + 1.0;
    let amp = 1.0 + 2.0 * eta * k.sigma2 * k.sigma2 / c;
    Ok(SgdTerms {
        init_term: d0_sq / (c * eta * t1),
        f0_term: 8.0 / (3.0 * c * t1) * amp * f0,
        linear_eta_term: 2.0 * eta * k.sigma1_sq / c,
        quad_eta_term: 8.0 * eta * eta * k.sigma1_sq * k.lipschitz / (3.0 * c) * amp,
    })
}

/// Asymptotic bound on `|E v̄_T - v*|`.
pub fn avg_bound(k: &CertifiedConstants, eta: f64) -> Result<AvgTerms> {
    require_c(k)?;
    if !(k.mu > 0.0) {
        return Err(Error::CertificateFailed(format!("mu = {} is not positive", k.mu)));
    }
    let (c, mu) = (k.c, k.mu);
    let amp = 1.0 + 2.0 * eta * k.sigma2 * k.sigma2 / c;
    Ok(AvgTerms {
        eta32_term: 4.0 * k.sigma1_sq.sqrt() * k.sigma2 * eta.powf(1.5) * k.lipschitz.sqrt() / (3f64.sqrt() * mu),
        m1_term: k.m1 / mu,
        m2_linear: 2.0 * eta * k.sigma1_sq * k.m2 / (c * mu),
        m2_quad: 8.0 * eta * eta * k.sigma1_sq * k.lipschitz * k.m2 / (3.0 * c * mu) * amp,
    })
}

pub fn bound_report(k: &CertifiedConstants, eta: f64, steps: usize, d0_sq: f64, f0: f64) -> Result<BoundReport> {
    let sgd_terms = sgd_bound(k, eta, steps, d0_sq, f0)?;
    let avg_terms = avg_bound(k, eta)?;
    Ok(BoundReport {
        sgd_total: sgd_terms.total(),
        sgd_terms,
        avg_total_asymptotic: avg_terms.total(),
        avg_terms,
        avg_transient: AVG_TRANSIENT_LABEL,
        constants: k.clone(),
        eta,
        steps,
        d0_sq,
        f0,
    })
}

/// Exact `(E(v₀ - v*)², E f(w₀))` with `v₀ = w₀ - η f'(w₀)` under `law`.
pub fn initial_moments(spec: &ObjectiveSpec, eta: f64, law: &InitLaw, vstar: f64) -> Result<(f64, f64)> {
    let breaks: Vec<f64> = spec.bump_support().map(|(a, b)| vec![a, b]).unwrap_or_default();
    let d0_sq = law.expectation(
        |w| {
            let d = w - eta * spec.grad(w) - vstar;
            d * d
        },
        &breaks,
    )?;
    let f0 = law.expectation(|w| spec.eval(w).value, &breaks)?;
    Ok((d0_sq, f0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub eta: f64,
    pub sgd_rate: f64,
    pub avg_rate: f64,
}

/// Closed-form rates. The asymmetric valley uses its best step size
/// `2C₁δ/r` (and ignores `eta`); the symmetric bump needs `eta`.
pub fn example_rate_table(
    example: Example,
    delta: f64,
    r: f64,
    eta: Option<f64>,
    k: MollifierConstants,
) -> Result<RateRow> {
    let (c1, c2) = (k.c1, k.c2);
    match example {
        Example::Valley => Ok(RateRow {
            eta: 2.0 * c1 * delta / r,
            sgd_rate: (12.0 * c1 * delta * r + 32.0 * c1 * c1 * delta * (delta + c2)).sqrt(),
            avg_rate: 32.0 / 9.0 * (3.0 * c1 * delta * r + 8.0 * c1 * c1 * delta * (delta + c2)),
        }),
        Example::Bump => {
            let eta = eta.ok_or_else(|| Error::InvalidArgument("symmetric example needs a step size".into()))?;
            Ok(RateRow {
                eta,
                sgd_rate: 2.0 * (eta * r * r + 4.0 / 3.0 * eta * eta * r * r * (1.0 + c2)).sqrt(),
                avg_rate: c1 * delta * delta / (eta * r),
            })
        }
    }
}
