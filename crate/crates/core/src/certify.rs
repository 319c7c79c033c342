//! Grid certification of the constants the convergence bounds consume
//! (`c`, `μ`, `M₁`, `M₂`) and the parameter inequalities under which the
//! two bump examples have closed-form constants.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::objectives::{MollifierConstants, ObjectiveSpec};
use crate::smoothing::SmoothedView;

/// Points closer than this to `v*` are left out of ratio estimates.
pub const EXCLUSION_BAND: f64 = 1e-6;
/// Smallest grid accepted by the certifiers.
pub const MIN_GRID: usize = 10_000;
/// Half-width of the default certification window around `v*`.
pub const DEFAULT_HALF_WIDTH: f64 = 3.0;

/// Which of the two bump examples' inequality systems to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Example {
    /// Asymmetric valley: `½(w-1)² - δ b(w/δ)`.
    Valley,
    /// Symmetric bump: `½w² + δ² b(w/δ)`.
    Bump,
}

impl Example {
    pub fn name(&self) -> &'static str {
        match self {
            Example::Valley => "valley",
            Example::Bump => "bump",
        }
    }

    /// The example matching an objective, if any.
    pub fn for_objective(spec: &ObjectiveSpec) -> Option<Example> {
        match spec {
            ObjectiveSpec::AsymQuadBump { .. } => Some(Example::Valley),
            ObjectiveSpec::SymBump { .. } => Some(Example::Bump),
            _ => None,
        }
    }
}

/// The two operating points of the `M` envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MEnvelope {
    /// `M₂` with `M₁ = 0`.
    pub m2_given_m1_zero: f64,
    /// `M₁ = sup|R|` with `M₂ = 0`.
    pub m1_given_m2_zero: f64,
    /// Whether `|R| <= M₁ + 1e-9` held inside the exclusion band for the
    /// `M₁ = 0` row.
    pub band_ok: bool,
}

/// Which envelope row feeds the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeRow {
    M1Zero,
    M2Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifiedConstants {
    pub lipschitz: f64,
    pub sigma1_sq: f64,
    pub sigma2: f64,
    pub c: f64,
    pub mu: f64,
    pub m1: f64,
    pub m2: f64,
    pub vstar: f64,
    pub window: (f64, f64),
    pub grid_n: usize,
    pub envelope: MEnvelope,
    pub row: EnvelopeRow,
}

impl CertifiedConstants {
    /// `c > 0` and `μ > 0`.
    pub fn is_valid(&self) -> bool {
        self.c > 0.0 && self.mu > 0.0
    }

    /// Copy with `c` scaled; used as a falsification control.
    pub fn with_c_scaled(&self, factor: f64) -> Self {
        Self { c: self.c * factor, ..self.clone() }
    }
}

fn check_grid(grid_n: usize, window: (f64, f64)) -> Result<()> {
    if grid_n < MIN_GRID {
        return Err(Error::InvalidArgument(format!("certification grid needs >= {MIN_GRID} points, got {grid_n}")));
    }
    if !(window.0 < window.1) {
        return Err(Error::InvalidArgument(format!("empty window [{}, {}]", window.0, window.1)));
    }
    Ok(())
}

fn grads_on(view: &SmoothedView, grid: &[f64]) -> Result<Vec<f64>> {
    grid.par_iter().map(|&v| view.smoothed_grad(v)).collect()
}

/// `inf F'(v)(v - v*)/(v - v*)²` over the grid, outside the exclusion band.
pub fn certify_c(view: &SmoothedView, vstar: f64, window: (f64, f64), grid_n: usize) -> Result<f64> {
    check_grid(grid_n, window)?;
    let grid = linspace(window.0, window.1, grid_n);
    let grads = grads_on(view, &grid)?;
    Ok(grid
        .iter()
        .zip(&grads)
        .filter(|(v, _)| (*v - vstar).abs() >= EXCLUSION_BAND)
        .map(|(v, g)| g / (v - vstar))
        .fold(f64::INFINITY, f64::min))
}

/// `F''(v*)`.
pub fn certify_mu(view: &SmoothedView, vstar: f64) -> Result<f64> {
    Ok(view.smoothed_eval(vstar)?.hess)
}

/// Both rows of the envelope of `R(v) = F'(v) - F''(v*)(v - v*)`, or, with
/// `m1_fixed`, the `M₂` that goes with it (reported in `m2_given_m1_zero`).
pub fn fit_m_envelope(
    view: &SmoothedView,
    vstar: f64,
    window: (f64, f64),
    grid_n: usize,
    m1_fixed: Option<f64>,
) -> Result<MEnvelope> {
    check_grid(grid_n, window)?;
    let mu = certify_mu(view, vstar)?;
    let grid = linspace(window.0, window.1, grid_n);
    let grads = grads_on(view, &grid)?;
    let m1 = m1_fixed.unwrap_or(0.0);
    let mut sup_r: f64 = 0.0;
    let mut m2: f64 = 0.0;
    let mut band_ok = true;
    for (&v, &g) in grid.iter().zip(&grads) {
        let d = v - vstar;
        let r = (g - mu * d).abs();
        sup_r = sup_r.max(r);
        if d.abs() < EXCLUSION_BAND {
            band_ok &= r <= m1 + 1e-9;
        } else {
            m2 = m2.max((r - m1).max(0.0) / (d * d));
        }
    }
    Ok(MEnvelope { m2_given_m1_zero: m2, m1_given_m2_zero: if m1_fixed.is_some() { m1 } else { sup_r }, band_ok })
}

/// `[v* - 3, v* + 3]` clipped to `configured`.
pub fn default_window(vstar: f64, configured: (f64, f64)) -> (f64, f64) {
    (
        (vstar - DEFAULT_HALF_WIDTH).max(configured.0),
        (vstar + DEFAULT_HALF_WIDTH).min(configured.1),
    )
}

/// Full certificate: minimize `F` on `search`, then certify on the default
/// window around `v*`. Failed certificates (`c <= 0` or `μ <= 0`) are
/// returned, not raised; see [`CertifiedConstants::is_valid`].
pub fn certify(view: &SmoothedView, search: (f64, f64), grid_n: usize, row: EnvelopeRow) -> Result<CertifiedConstants> {
    let vstar = view.minimize(search.0, search.1)?.vstar;
    certify_at(view, vstar, default_window(vstar, search), grid_n, row)
}

/// Certificate around a known `v*` on an explicit window.
pub fn certify_at(
    view: &SmoothedView,
    vstar: f64,
    window: (f64, f64),
    grid_n: usize,
    row: EnvelopeRow,
) -> Result<CertifiedConstants> {
    let lipschitz = match view.lipschitz() {
        Some(l) => l,
        None => view.objective().lipschitz_bound(Some(window))?,
    };
    let c = certify_c(view, vstar, window, grid_n)?;
    let mu = certify_mu(view, vstar)?;
    let envelope = fit_m_envelope(view, vstar, window, grid_n, None)?;
    let (m1, m2) = match row {
        EnvelopeRow::M1Zero => (0.0, envelope.m2_given_m1_zero),
        EnvelopeRow::M2Zero => (envelope.m1_given_m2_zero, 0.0),
    };
    let moments = view.noise().moment_bounds();
    Ok(CertifiedConstants {
        lipschitz,
        sigma1_sq: moments.sigma1_sq,
        sigma2: moments.sigma2,
        c,
        mu,
        m1,
        m2,
        vstar,
        window,
        grid_n,
        envelope,
        row,
    })
}

/// One inequality of a regime system: `slack = rhs - lhs`, satisfied when
/// `slack >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slack {
    pub name: &'static str,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub ok: bool,
    pub slacks: Vec<Slack>,
}

impl RegimeCheck {
    pub fn failing(&self) -> Vec<&'static str> {
        self.slacks.iter().filter(|s| s.slack < 0.0).map(|s| s.name).collect()
    }
}

pub fn regime_check(example: Example, delta: f64, r: f64, eta: f64, k: MollifierConstants) -> RegimeCheck {
    let (c1, c2) = (k.c1, k.c2);
    let slacks = match example {
        Example::Valley => vec![
            Slack { name: "delta_small", slack: 1.0 / (4.0 * (1.0 + 2.0 * c1)) - delta },
            Slack { name: "r_large", slack: r - 4.0 * c1 * (delta + c2) },
            Slack { name: "eta_lower", slack: eta - 2.0 * c1 * delta / r },
            Slack {
                name: "eta_upper",
                slack: (0.25 / r - delta / r).min(delta / (2.0 * (delta + c2))) - eta,
            },
        ],
        Example::Bump => vec![
            Slack { name: "bump_dominated", slack: 0.5 * eta * r * (eta * r - delta) - c1 * delta * delta },
            Slack { name: "curvature_dominated", slack: 0.5 * eta * r - c2 * delta },
            Slack { name: "eta_upper", slack: 1.0 / (2.0 * (1.0 + c2)) - eta },
        ],
    };
    RegimeCheck { ok: slacks.iter().all(|s| s.slack >= 0.0), slacks }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Regime {
    Valid { r: f64, eta: f64 },
    Infeasible { reason: String },
}

impl Regime {
    pub fn valid(&self) -> Option<(f64, f64)> {
        match *self {
            Regime::Valid { r, eta } => Some((r, eta)),
            Regime::Infeasible { .. } => None,
        }
    }
}

/// Constructs `(r, η)` satisfying [`regime_check`], or says why none was found.
pub fn find_valid_regime(example: Example, delta: f64, k: MollifierConstants) -> Regime {
    if !(delta > 0.0 && delta.is_finite()) {
        return Regime::Infeasible { reason: format!("delta must be > 0, got {delta}") };
    }
    let (c1, c2) = (k.c1, k.c2);
    let (r, eta) = match example {
        Example::Valley => {
            if delta > 1.0 / (4.0 * (1.0 + 2.0 * c1)) {
                return Regime::Infeasible { reason: "delta exceeds 1/(4(1+2C1))".into() };
            }
            let r = 4.0 * c1 * (delta + c2) * 1.01;
            let lo = 2.0 * c1 * delta / r;
            let hi = (0.25 / r - delta / r).min(delta / (2.0 * (delta + c2)));
            if !(lo <= hi) {
                return Regime::Infeasible { reason: format!("empty step-size interval [{lo}, {hi}]") };
            }
            (r, 0.5 * (lo + hi))
        }
        Example::Bump => {
            let eta = 0.99 / (2.0 * (1.0 + c2));
            // ηr must clear both x(x - δ)/2 >= C1 δ² and x >= 2 C2 δ
            let x1 = 0.5 * (delta + (delta * delta + 8.0 * c1 * delta * delta).sqrt());
            let x2 = 2.0 * c2 * delta;
            (x1.max(x2) * 1.01 / eta, eta)
        }
    };
    let check = regime_check(example, delta, r, eta, k);
    if check.ok {
        Regime::Valid { r, eta }
    } else {
        Regime::Infeasible { reason: format!("constructed point fails {:?}", check.failing()) }
    }
}
