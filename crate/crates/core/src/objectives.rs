//! Closed-form one-dimensional test objectives.
//!
//! Every member is a low-degree polynomial optionally plus a scaled
//! mollifier bump `b(x) = exp(1 - 1/(1 - x^2))` supported on `|x| < 1`.
//! Values, first and second derivatives are exact closed forms.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_section_max, linspace};

/// Exponent arguments below this underflow to zero in `exp`.
const EXP_UNDERFLOW: f64 = -745.0;

/// A catalog objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveSpec {
    /// `½ (w - center)²`.
    Quadratic { center: f64 },
    /// `½ (w - 1)² - δ b(w/δ)`: a sharp local minimum near the origin and a
    /// flat global one at 1.
    AsymQuadBump { delta: f64 },
    /// `½ w² + δ² b(w/δ)`: a local maximum at the origin flanked by two
    /// minima at `±αδ`.
    SymBump { delta: f64 },
    /// `Σ c_k w^k`, coefficients in ascending order.
    Polynomial { coefficients: Vec<f64> },
}

/// `(value, first derivative, second derivative)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: f64,
    pub hess: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet { value: 0.0, grad: 0.0, hess: 0.0 };

    fn add(self, o: Jet) -> Jet {
        Jet { value: self.value + o.value, grad: self.grad + o.grad, hess: self.hess + o.hess }
    }
}

/// The standard mollifier `b(x) = exp(1 - 1/(1 - x²))` on `|x| < 1`, zero
/// elsewhere, with its first two derivatives.
pub fn bump(x: f64) -> Jet {
    if !(x.abs() < 1.0) {
        return Jet::ZERO;
    }
    let q = 1.0 - x * x;
    let arg = 1.0 - 1.0 / q;
    if arg < EXP_UNDERFLOW {
        return Jet::ZERO;
    }
    let b = arg.exp();
    let q2 = q * q;
    let s = 2.0 * x / q2;
    let grad = -b * s;
    let hess = b * (s * s - 2.0 / q2 - 8.0 * x * x / (q2 * q));
    Jet { value: b, grad, hess }
}

impl ObjectiveSpec {
    pub fn quadratic(center: f64) -> Self {
        ObjectiveSpec::Quadratic { center }
    }

    pub fn asym_quad_bump(delta: f64) -> Result<Self> {
        let s = ObjectiveSpec::AsymQuadBump { delta };
        s.validate()?;
        Ok(s)
    }

    pub fn sym_bump(delta: f64) -> Result<Self> {
        let s = ObjectiveSpec::SymBump { delta };
        s.validate()?;
        Ok(s)
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        let s = ObjectiveSpec::Polynomial { coefficients };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObjectiveSpec::Quadratic { center } if !center.is_finite() => {
                Err(Error::InvalidArgument("quadratic center must be finite".into()))
            }
            ObjectiveSpec::AsymQuadBump { delta } | ObjectiveSpec::SymBump { delta }
                if !(delta.is_finite() && *delta > 0.0) =>
            {
                Err(Error::InvalidArgument(format!("bump width delta must be > 0, got {delta}")))
            }
            ObjectiveSpec::Polynomial { coefficients }
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) =>
            {
                Err(Error::InvalidArgument("polynomial needs finite coefficients".into()))
            }
            _ => Ok(()),
        }
    }

    /// Short identifier used in CSV rows.
    pub fn kind_name(&self) -> &'static str {
        match self {
            ObjectiveSpec::Quadratic { .. } => "quadratic",
            ObjectiveSpec::AsymQuadBump { .. } => "asym_quad_bump",
            ObjectiveSpec::SymBump { .. } => "sym_bump",
            ObjectiveSpec::Polynomial { .. } => "polynomial",
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            ObjectiveSpec::AsymQuadBump { delta } | ObjectiveSpec::SymBump { delta } => Some(*delta),
            _ => None,
        }
    }

    /// Closed-form `f(w), f'(w), f''(w)`.
    #[inline]
    pub fn eval(&self, w: f64) -> Jet {
        self.polynomial_part(w).add(self.bump_part(w))
    }

    /// `f'(w)` alone; the hot path of the iterations.
    #[inline]
    pub fn grad(&self, w: f64) -> f64 {
        match self {
            ObjectiveSpec::Quadratic { center } => w - center,
            ObjectiveSpec::AsymQuadBump { delta } => {
                let x = w / delta;
                if x.abs() < 1.0 {
                    (w - 1.0) - bump(x).grad
                } else {
                    w - 1.0
                }
            }
            ObjectiveSpec::SymBump { delta } => {
                let x = w / delta;
                if x.abs() < 1.0 {
                    w + delta * bump(x).grad
                } else {
                    w
                }
            }
            ObjectiveSpec::Polynomial { .. } => self.polynomial_part(w).grad,
        }
    }

    /// The polynomial (bump-free) part of the objective.
    pub fn polynomial_part(&self, w: f64) -> Jet {
        match self {
            ObjectiveSpec::Quadratic { center } => {
                let d = w - center;
                Jet { value: 0.5 * d * d, grad: d, hess: 1.0 }
            }
            ObjectiveSpec::AsymQuadBump { .. } => {
                let d = w - 1.0;
                Jet { value: 0.5 * d * d, grad: d, hess: 1.0 }
            }
            ObjectiveSpec::SymBump { .. } => Jet { value: 0.5 * w * w, grad: w, hess: 1.0 },
            ObjectiveSpec::Polynomial { coefficients } => horner_jet(coefficients, w),
        }
    }

    /// The scaled mollifier part `g_δ(w)`; zero for bump-free kinds and for
    /// `|w| >= δ`.
    pub fn bump_part(&self, w: f64) -> Jet {
        match self {
            ObjectiveSpec::AsymQuadBump { delta } => {
                let b = bump(w / delta);
                Jet { value: -delta * b.value, grad: -b.grad, hess: -b.hess / delta }
            }
            ObjectiveSpec::SymBump { delta } => {
                let b = bump(w / delta);
                Jet { value: delta * delta * b.value, grad: delta * b.grad, hess: b.hess }
            }
            _ => Jet::ZERO,
        }
    }

    /// Support `[-δ, δ]` of the bump part, if any.
    pub fn bump_support(&self) -> Option<(f64, f64)> {
        self.delta().map(|d| (-d, d))
    }

    /// Degree of the polynomial part.
    pub fn polynomial_degree(&self) -> usize {
        match self {
            ObjectiveSpec::Polynomial { coefficients } => coefficients.len().saturating_sub(1),
            _ => 2,
        }
    }

    /// Bound `L` on `|f''|`. Polynomials need a finite window.
    pub fn lipschitz_bound(&self, window: Option<(f64, f64)>) -> Result<f64> {
        match self {
            ObjectiveSpec::Quadratic { .. } => Ok(1.0),
            ObjectiveSpec::AsymQuadBump { delta } => {
                Ok(1.0 + mollifier_constants(MollifierVariant::Valley).c2 / delta)
            }
            ObjectiveSpec::SymBump { .. } => {
                Ok(1.0 + mollifier_constants(MollifierVariant::Bump).c2)
            }
            ObjectiveSpec::Polynomial { .. } => {
                let (lo, hi) = window.ok_or_else(|| {
                    Error::InvalidArgument("polynomial Lipschitz bound needs a window".into())
                })?;
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
                }
                Ok(grid_sup(|w| self.eval(w).hess.abs(), lo, hi, 100_001))
            }
        }
    }

    /// Local minima of `f` in `[lo, hi]`: roots of `f'` with `f'' > 0`,
    /// bracketed on a 10⁴-point grid and bisected to 1e-10.
    pub fn local_minima(&self, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
        }
        let grid = linspace(lo, hi, 10_000);
        let gvals: Vec<f64> = grid.iter().map(|&w| self.grad(w)).collect();
        let mut roots = Vec::new();
        for i in 0..grid.len() {
            if gvals[i] == 0.0 {
                roots.push(grid[i]);
            } else if i + 1 < grid.len() && gvals[i] * gvals[i + 1] < 0.0 {
                if let Some(r) = bisect(|w| self.grad(w), grid[i], grid[i + 1], 1e-10) {
                    roots.push(r);
                }
            }
        }
        Ok(roots
            .into_iter()
            .filter(|&r| self.eval(r).hess > 0.0)
            .map(|r| (r, self.eval(r).value))
            .collect())
    }
}

fn horner_jet(c: &[f64], w: f64) -> Jet {
    let mut v = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for &a in c.iter().rev() {
        d2 = d2 * w + 2.0 * d1;
        d1 = d1 * w + v;
        v = v * w + a;
    }
    Jet { value: v, grad: d1, hess: d2 }
}

/// Maximum of `h` over a uniform grid, refined by golden section around the
/// best grid point.
pub(crate) fn grid_sup<H: Fn(f64) -> f64>(h: H, lo: f64, hi: f64, n: usize) -> f64 {
    let grid = linspace(lo, hi, n);
    let (best_i, best) = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, h(x)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let a = grid[best_i.saturating_sub(1)];
    let b = grid[(best_i + 1).min(n - 1)];
    let (_, refined) = golden_section_max(&h, a, b, 1e-9);
    refined.max(best)
}

/// Which max(1, ·) convention the constants follow: the asymmetric valley
/// or the symmetric bump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MollifierVariant {
    /// `C1 = max(1, max|g1'|)`, `C2 = max|g1''|`.
    Valley,
    /// `C1 = max|g1'|`, `C2 = max(1, max|g1''|)`.
    Bump,
}

impl MollifierVariant {
    pub fn name(&self) -> &'static str {
        match self {
            MollifierVariant::Valley => "valley",
            MollifierVariant::Bump => "bump",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierConstants {
    pub c1: f64,
    pub c2: f64,
    pub variant: MollifierVariant,
}

/// `(max|b'|, max|b''|)` over [-1, 1]; the sign of the bump does not matter.
fn raw_bump_maxima() -> (f64, f64) {
    static RAW: OnceLock<(f64, f64)> = OnceLock::new();
    *RAW.get_or_init(|| {
        let d1 = grid_sup(|x| bump(x).grad.abs(), -1.0, 1.0, 200_001);
        let d2 = grid_sup(|x| bump(x).hess.abs(), -1.0, 1.0, 200_001);
        (d1, d2)
    })
}

/// Mollifier derivative bounds under the given convention (cached).
pub fn mollifier_constants(variant: MollifierVariant) -> MollifierConstants {
    let (m1, m2) = raw_bump_maxima();
    match variant {
        MollifierVariant::Valley => MollifierConstants { c1: m1.max(1.0), c2: m2, variant },
        MollifierVariant::Bump => MollifierConstants { c1: m1, c2: m2.max(1.0), variant },
    }
}

/// The `α > 0` with `f'(αδ) = 0` for the symmetric bump objective; it does
/// not depend on `δ`.
pub fn sym_bump_alpha() -> f64 {
    static ALPHA: OnceLock<f64> = OnceLock::new();
    *ALPHA.get_or_init(|| {
        let h = |a: f64| {
            let q = 1.0 - a * a;
            1.0 - 2.0 / (q * q) * (1.0 - 1.0 / q).exp()
        };
        bisect(h, 1e-6, 1.0 - 1e-9, 1e-15).expect("alpha bracket")
    })
}
