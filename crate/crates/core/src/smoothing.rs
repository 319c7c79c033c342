//! The noise-smoothed objective `F(v) = E[f(v - η ε'(v))]`, its minimizer,
//! the change of variables `φ(w) = w - η f'(w)`, the curvature-penalty
//! expansion and the gap between `F'` and the biased gradient estimate.
//!
//! Expectations are taken over the base draw `ξ` by Gauss–Legendre panels
//! split wherever `v - η a ξ` crosses the bump support `±δ`, so every panel
//! integrand is smooth. The rule order doubles from 32 until successive
//! estimates agree to 1e-12 (relative to max(1, |I|)). Gaussian noise on a
//! bump-free objective uses Gauss–Hermite instead.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numeric::{bisect, linspace, newton, CompensatedSum};
use crate::objectives::{grid_sup, Jet, ObjectiveSpec};
use crate::noise::{NoiseModel, NoiseStream};
use crate::quadrature::{
    gauss_hermite, gauss_legendre, CONVERGENCE_TOL, DEFAULT_ORDER_CAP, HERMITE_MAX_ORDER, START_ORDER,
};

/// Half-width, in standard deviations, of the truncated Gaussian domain used
/// when the objective has a bump.
const GAUSSIAN_TRUNCATION: f64 = 40.0;
/// Newton tolerance and iteration cap for `φ⁻¹`.
const PHI_TOL: f64 = 1e-12;
const PHI_MAX_ITER: usize = 100;
/// Relative step of the central difference used for `F''` under
/// state-dependent noise.
const FD_STEP: f64 = 1e-5;

/// Result of a global minimization of `F` over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub vstar: f64,
    pub value: f64,
    /// Every local minimum of `F` found in the window, ascending in `v`.
    pub local_minima: Vec<(f64, f64)>,
    pub window: (f64, f64),
}

impl Minimizer {
    pub fn has_multiple_minima(&self) -> bool {
        self.local_minima.len() > 1
    }
}

/// Quadrature-backed evaluator of the smoothed objective.
#[derive(Debug)]
pub struct SmoothedView {
    objective: ObjectiveSpec,
    noise: NoiseModel,
    eta: f64,
    order_cap: usize,
    lipschitz: Option<f64>,
    lipschitz_window: Option<(f64, f64)>,
    minimizer: OnceLock<Minimizer>,
}

impl Clone for SmoothedView {
    fn clone(&self) -> Self {
        let minimizer = OnceLock::new();
        if let Some(m) = self.minimizer.get() {
            let _ = minimizer.set(m.clone());
        }
        Self {
            objective: self.objective.clone(),
            noise: self.noise,
            eta: self.eta,
            order_cap: self.order_cap,
            lipschitz: self.lipschitz,
            lipschitz_window: self.lipschitz_window,
            minimizer,
        }
    }
}

/// Law of the base draw `ξ` as seen by the quadrature.
#[derive(Debug, Clone, Copy)]
enum BaseLaw {
    Point,
    Uniform { radius: f64 },
    Gaussian { s: f64 },
}

impl SmoothedView {
    pub fn new(objective: ObjectiveSpec, noise: NoiseModel, eta: f64) -> Result<Self> {
        objective.validate()?;
        noise.validate()?;
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument(format!("step size must be > 0, got {eta}")));
        }
        let lipschitz = objective.lipschitz_bound(None).ok();
        Ok(Self {
            objective,
            noise,
            eta,
            order_cap: DEFAULT_ORDER_CAP,
            lipschitz,
            lipschitz_window: None,
            minimizer: OnceLock::new(),
        })
    }

    /// Caps the quadrature doubling at `cap` nodes per panel.
    pub fn with_order_cap(mut self, cap: usize) -> Self {
        self.order_cap = cap.max(1);
        self
    }

    /// Window over which the Hessian bound of a polynomial objective is taken.
    pub fn with_lipschitz_window(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.lipschitz = Some(self.objective.lipschitz_bound(Some((lo, hi)))?);
        self.lipschitz_window = Some((lo, hi));
        Ok(self)
    }

    pub fn objective(&self) -> &ObjectiveSpec {
        &self.objective
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn order_cap(&self) -> usize {
        self.order_cap
    }

    /// `L`, if known (polynomials need [`Self::with_lipschitz_window`]).
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn lipschitz_or_err(&self) -> Result<f64> {
        self.lipschitz.ok_or_else(|| {
            Error::InvalidArgument("Hessian bound unknown; supply a Lipschitz window".into())
        })
    }

    /// Whether `η <= 1/(2L)`.
    pub fn in_phi_regime(&self) -> Result<bool> {
        Ok(self.eta <= 0.5 / self.lipschitz_or_err()?)
    }

    fn check_phi_regime(&self) -> Result<()> {
        let l = self.lipschitz_or_err()?;
        let limit = 0.5 / l;
        if self.eta > limit {
            return Err(Error::RegimeViolation { eta: self.eta, limit });
        }
        Ok(())
    }

    fn base_law(&self) -> BaseLaw {
        match self.noise {
            NoiseModel::Zero => BaseLaw::Point,
            NoiseModel::Uniform { r } | NoiseModel::StateScaled { r, .. } => BaseLaw::Uniform { radius: r },
            NoiseModel::Gaussian { s } => BaseLaw::Gaussian { s },
        }
    }

    /// `E_ξ[h(f(u), ξ)]` with `u = v - η·scale·ξ`, for `K` integrands at once.
    fn expect<const K: usize, H>(&self, v: f64, scale: f64, h: H) -> Result<[f64; K]>
    where
        H: Fn(Jet, f64) -> [f64; K],
    {
        let spread = self.eta * scale;
        let law = self.base_law();
        let panels: Vec<(f64, f64)> = match law {
            BaseLaw::Point => return Ok(h(self.objective.eval(v), 0.0)),
            BaseLaw::Gaussian { s } if self.objective.bump_support().is_none() => {
                return self.hermite_expect(v, spread, s, &h);
            }
            BaseLaw::Uniform { radius } => self.panels(v, spread, -radius, radius),
            BaseLaw::Gaussian { s } => {
                let half = GAUSSIAN_TRUNCATION * s;
                self.panels(v, spread, -half, half)
            }
        };
        let density = move |xi: f64| match law {
            BaseLaw::Uniform { radius } => 0.5 / radius,
            BaseLaw::Gaussian { s } => {
                let z = xi / s;
                (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
            BaseLaw::Point => unreachable!(),
        };
        let estimate = |n: usize| -> [f64; K] {
            let rule = gauss_legendre(n);
            let mut acc = [CompensatedSum::new(); K];
            for &(a, b) in &panels {
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let xi = mid + half * x;
                    let weight = wt * half * density(xi);
                    let vals = h(self.objective.eval(v - spread * xi), xi);
                    for k in 0..K {
                        acc[k].add(weight * vals[k]);
                    }
                }
            }
            acc.map(|s| s.value())
        };
        doubling_array(estimate, START_ORDER, self.order_cap)
    }

    fn hermite_expect<const K: usize, H>(&self, v: f64, spread: f64, s: f64, h: &H) -> Result<[f64; K]>
    where
        H: Fn(Jet, f64) -> [f64; K],
    {
        let estimate = |n: usize| -> [f64; K] {
            let rule = gauss_hermite(n);
            let mut acc = [0.0; K];
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                let xi = s * z;
                let vals = h(self.objective.eval(v - spread * xi), xi);
                for k in 0..K {
                    acc[k] += w * vals[k];
                }
            }
            acc
        };
        doubling_array(estimate, START_ORDER, self.order_cap.min(HERMITE_MAX_ORDER))
    }

    /// Panels of `[lo, hi]` split where `v - spread·ξ = ±δ`.
    fn panels(&self, v: f64, spread: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![lo, hi];
        if let Some((a, b)) = self.objective.bump_support() {
            for edge in [a, b] {
                let xi = (v - edge) / spread;
                if xi > lo && xi < hi {
                    cuts.push(xi);
                }
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cuts"));
        cuts.dedup();
        cuts.windows(2).map(|p| (p[0], p[1])).collect()
    }

    /// State factor `a(v) = ε'(v)/ξ` and its derivative in `v`, through `φ⁻¹`.
    fn state_factor_at(&self, v: f64) -> Result<(f64, f64)> {
        if !self.noise.is_state_dependent() {
            return Ok((1.0, 0.0));
        }
        let w = self.invert_phi(v)?;
        let dphi = 1.0 - self.eta * self.objective.eval(w).hess;
        if !(dphi > 0.0) {
            return Err(Error::RegimeViolation { eta: self.eta, limit: 0.5 / self.lipschitz.unwrap_or(f64::INFINITY) });
        }
        Ok((self.noise.state_factor(w), self.noise.state_factor_derivative(w) / dphi))
    }

    /// `F(v)`, `F'(v)`, `F''(v)`.
    pub fn smoothed_eval(&self, v: f64) -> Result<Jet> {
        if !self.noise.is_state_dependent() {
            let [f, g, h] = self.expect(v, 1.0, |j, _| [j.value, j.grad, j.hess])?;
            return Ok(Jet { value: f, grad: g, hess: h });
        }
        let value = self.smoothed_value(v)?;
        let grad = self.smoothed_grad(v)?;
        let step = FD_STEP * v.abs().max(1.0);
        let hess = (self.smoothed_grad(v + step)? - self.smoothed_grad(v - step)?) / (2.0 * step);
        Ok(Jet { value, grad, hess })
    }

    pub fn smoothed_value(&self, v: f64) -> Result<f64> {
        let (a, _) = self.state_factor_at(v)?;
        Ok(self.expect(v, a, |j, _| [j.value])?[0])
    }

    /// `F'(v)`, including the derivative through `ε'(v)` for state-dependent noise.
    pub fn smoothed_grad(&self, v: f64) -> Result<f64> {
        let (a, da) = self.state_factor_at(v)?;
        let eta = self.eta;
        Ok(self.expect(v, a, |j, xi| [j.grad * (1.0 - eta * da * xi)])?[0])
    }

    /// Global minimizer of `F` on `[lo, hi]`: sign changes of `F'` on a
    /// 10⁴-point grid, bisection to 1e-10, Newton polish to 1e-12; lowest `F`
    /// wins, ties go to the smaller `v`. The first result is cached.
    pub fn minimize(&self, lo: f64, hi: f64) -> Result<Minimizer> {
        if let Some(m) = self.minimizer.get() {
            if m.window == (lo, hi) {
                return Ok(m.clone());
            }
        }
        let m = self.compute_minimizer(lo, hi)?;
        let _ = self.minimizer.set(m.clone());
        Ok(m)
    }

    /// The cached minimizer, if [`Self::minimize`] ran.
    pub fn cached_minimizer(&self) -> Option<&Minimizer> {
        self.minimizer.get()
    }

    pub fn vstar(&self) -> Option<f64> {
        self.minimizer.get().map(|m| m.vstar)
    }

    fn compute_minimizer(&self, lo: f64, hi: f64) -> Result<Minimizer> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
        }
        let grid = linspace(lo, hi, 10_000);
        let grads = grid.iter().map(|&v| self.smoothed_grad(v)).collect::<Result<Vec<_>>>()?;
        let grad_or_nan = |v: f64| self.smoothed_grad(v).unwrap_or(f64::NAN);
        let mut candidates = Vec::new();
        for i in 0..grid.len() {
            let g = grads[i];
            if g == 0.0 {
                let left_neg = i == 0 || grads[i - 1] < 0.0;
                let right_pos = i + 1 == grid.len() || grads[i + 1] > 0.0;
                if left_neg && right_pos && (i > 0 || i + 1 < grid.len()) {
                    candidates.push(grid[i]);
                }
            } else if i + 1 < grid.len() && g < 0.0 && grads[i + 1] > 0.0 {
                let (a, b) = (grid[i], grid[i + 1]);
                let root = bisect(grad_or_nan, a, b, 1e-10).unwrap_or(0.5 * (a + b));
                candidates.push(self.polish(root, a, b));
            }
        }
        if candidates.is_empty() {
            return Err(Error::NoStationaryPoint { lo, hi });
        }
        let mut local_minima = candidates
            .into_iter()
            .map(|v| Ok((v, self.smoothed_value(v)?)))
            .collect::<Result<Vec<_>>>()?;
        local_minima.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite minima"));
        let (vstar, value) = local_minima
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        Ok(Minimizer { vstar, value, local_minima, window: (lo, hi) })
    }

    fn polish(&self, root: f64, a: f64, b: f64) -> f64 {
        let out = newton(
            |v| self.smoothed_grad(v).unwrap_or(f64::NAN),
            |v| self.smoothed_eval(v).map(|j| j.hess).unwrap_or(f64::NAN),
            root,
            1e-12,
            100,
        );
        if out.converged && out.root >= a && out.root <= b {
            out.root
        } else {
            root
        }
    }

    /// `(f(v) + η²/2 f''(v) E[ε²], |F(v) - that|)` for state-independent noise.
    pub fn taylor_penalty_residual(&self, v: f64) -> Result<(f64, f64)> {
        if self.noise.is_state_dependent() {
            return Err(Error::InvalidArgument("curvature expansion needs state-independent noise".into()));
        }
        let j = self.objective.eval(v);
        let var = self.noise.moment_bounds().exact_variance;
        let approx = j.value + 0.5 * self.eta * self.eta * j.hess * var;
        let f = self.smoothed_value(v)?;
        Ok((approx, (f - approx).abs()))
    }

    /// `φ(w) = w - η f'(w)`; requires `η <= 1/(2L)`.
    pub fn phi_forward(&self, w: f64) -> Result<f64> {
        self.check_phi_regime()?;
        Ok(w - self.eta * self.objective.grad(w))
    }

    /// Unique `w` with `φ(w) = v`; requires `η <= 1/(2L)`.
    pub fn phi_inverse(&self, v: f64) -> Result<f64> {
        self.check_phi_regime()?;
        self.invert_phi(v)
    }

    /// `φ'(w) = 1 - η f''(w)`.
    pub fn phi_derivative(&self, w: f64) -> f64 {
        1.0 - self.eta * self.objective.eval(w).hess
    }

    /// Infimum of `φ'` over the reals (over the Lipschitz window for
    /// polynomials). Positive means `φ` is a strictly increasing bijection.
    pub fn phi_derivative_floor(&self) -> Result<f64> {
        let outside = match &self.objective {
            ObjectiveSpec::Polynomial { .. } => {
                let (lo, hi) = self.lipschitz_window.ok_or_else(|| {
                    Error::InvalidArgument("polynomial phi floor needs a Lipschitz window".into())
                })?;
                return Ok(1.0 - self.eta * grid_sup(|w| self.objective.eval(w).hess, lo, hi, 100_001));
            }
            _ => 1.0 - self.eta,
        };
        match self.objective.bump_support() {
            Some((a, b)) => {
                let sup = grid_sup(|w| self.objective.eval(w).hess, a, b, 100_001);
                Ok(outside.min(1.0 - self.eta * sup))
            }
            None => Ok(outside),
        }
    }

    /// Newton inversion of `φ` seeded at `v`, with a bracketing fallback.
    /// Used directly (without the `1/(2L)` gate) when `φ` is merely monotone.
    pub(crate) fn invert_phi(&self, v: f64) -> Result<f64> {
        let eta = self.eta;
        let phi = |w: f64| w - eta * self.objective.grad(w) - v;
        let out = newton(phi, |w| 1.0 - eta * self.objective.eval(w).hess, v, PHI_TOL, PHI_MAX_ITER);
        if out.converged && phi(out.root).abs() <= 1e-9 * v.abs().max(1.0) {
            return Ok(out.root);
        }
        // expand a bracket around v and bisect
        let mut width = eta * (1.0 + v.abs());
        for _ in 0..60 {
            let (a, b) = (v - width, v + width);
            if phi(a) < 0.0 && phi(b) > 0.0 {
                if let Some(root) = bisect(phi, a, b, 1e-14) {
                    return Ok(root);
                }
            }
            width *= 2.0;
        }
        Err(Error::NewtonNonConvergence { target: v, iterations: PHI_MAX_ITER })
    }

    /// `(|F'(v) - E[f'(v - η ε'(v))]|, 2 η σ₂ sqrt(E[f'(v - η ε'(v))²]))`,
    /// where the inner expectation holds `ε'(v)` fixed.
    pub fn bias_gap(&self, v: f64) -> Result<(f64, f64)> {
        let (a, da) = self.state_factor_at(v)?;
        let eta = self.eta;
        let [true_grad, held, held_sq] =
            self.expect(v, a, |j, xi| [j.grad * (1.0 - eta * da * xi), j.grad, j.grad * j.grad])?;
        let sigma2 = self.noise.moment_bounds().sigma2;
        Ok(((true_grad - held).abs(), 2.0 * eta * sigma2 * held_sq.max(0.0).sqrt()))
    }

    /// Monte-Carlo estimate of `F(v)` as `(mean, stderr)`; cross-check path only.
    pub fn monte_carlo_value(&self, v: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
        let (a, _) = self.state_factor_at(v)?;
        let mut stream = NoiseStream::new(seed);
        let mut s1 = CompensatedSum::new();
        let mut s2 = CompensatedSum::new();
        for _ in 0..samples {
            let eps = a * self.noise.draw_base(&mut stream);
            let f = self.objective.eval(v - self.eta * eps).value;
            s1.add(f);
            s2.add(f * f);
        }
        let n = samples as f64;
        let mean = s1.value() / n;
        let var = (s2.value() / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        Ok((mean, (var / n).sqrt()))
    }
}

fn doubling_array<const K: usize, E>(mut estimate: E, start: usize, cap: usize) -> Result<[f64; K]>
where
    E: FnMut(usize) -> [f64; K],
{
    let mut order = start.min(cap);
    let mut prev = estimate(order);
    loop {
        if order >= cap {
            return Err(Error::QuadratureNonConvergence { cap, previous: prev[0], last: prev[0] });
        }
        order = (order * 2).min(cap);
        let next = estimate(order);
        let converged = next
            .iter()
            .zip(&prev)
            .all(|(n, p)| (n - p).abs() < CONVERGENCE_TOL * n.abs().max(1.0));
        if converged {
            return Ok(next);
        }
        if order >= cap {
            let k = next
                .iter()
                .zip(&prev)
                .position(|(n, p)| (n - p).abs() >= CONVERGENCE_TOL * n.abs().max(1.0))
                .unwrap_or(0);
            return Err(Error::QuadratureNonConvergence { cap, previous: prev[k], last: next[k] });
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::loglog_slope;

    fn uniform(r: f64) -> NoiseModel {
        NoiseModel::Uniform { r }
    }

    #[test]
    fn quadratic_closed_form() {
        let view = SmoothedView::new(ObjectiveSpec::Quadratic { center: 0.0 }, uniform(1.0), 0.3).unwrap();
        let j = view.smoothed_eval(0.0).unwrap();
        assert!((j.value - 0.015).abs() < 1e-15);
        assert!(j.grad.abs() < 1e-15);
        assert!((j.hess - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_noise_reduces_to_f() {
        for spec in [ObjectiveSpec::AsymQuadBump { delta: 0.3 }, ObjectiveSpec::SymBump { delta: 0.2 }] {
            let view = SmoothedView::new(spec.clone(), NoiseModel::Zero, 0.3).unwrap();
            for v in linspace(-1.0, 2.0, 301) {
                let j = view.smoothed_eval(v).unwrap();
                assert!((j.value - spec.eval(v).value).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn asym_bump_far_from_support() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, uniform(1.0), 0.3).unwrap();
        let j = view.smoothed_eval(1.0).unwrap();
        assert!((j.value - 0.015).abs() < 1e-14, "{}", j.value);
    }

    #[test]
    fn gaussian_quadratic_uses_hermite() {
        let view = SmoothedView::new(ObjectiveSpec::Quadratic { center: 0.5 }, NoiseModel::Gaussian { s: 2.0 }, 0.1).unwrap();
        let j = view.smoothed_eval(1.5).unwrap();
        assert!((j.value - (0.5 + 0.5 * 0.04)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_bump_matches_monte_carlo() {
        let view = SmoothedView::new(ObjectiveSpec::SymBump { delta: 0.2 }, NoiseModel::Gaussian { s: 1.0 }, 0.2).unwrap();
        let f = view.smoothed_value(0.05).unwrap();
        let (mc, se) = view.monte_carlo_value(0.05, 1_000_000, 17).unwrap();
        assert!((f - mc).abs() < 4.0 * se, "{f} vs {mc} ± {se}");
    }

    #[test]
    fn uniform_bump_matches_monte_carlo() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, uniform(1.0), 0.3).unwrap();
        for v in [-0.2, 0.1, 0.35] {
            let f = view.smoothed_value(v).unwrap();
            let (mc, se) = view.monte_carlo_value(v, 1_000_000, 3).unwrap();
            assert!((f - mc).abs() < 4.0 * se, "v={v}: {f} vs {mc} ± {se}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences_of_value() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, uniform(1.0), 0.3).unwrap();
        let mut s = NoiseStream::new(99);
        for _ in 0..100 {
            let v = s.uniform_in(-1.0, 2.0);
            let h = 1e-5;
            let fd = (view.smoothed_value(v + h).unwrap() - view.smoothed_value(v - h).unwrap()) / (2.0 * h);
            let g = view.smoothed_grad(v).unwrap();
            assert!((fd - g).abs() <= 1e-8 * g.abs().max(1.0), "v={v}: {g} vs {fd}");
        }
    }

    #[test]
    fn quadratic_minimizer_is_eta_independent() {
        for eta in [0.1, 0.3, 0.5] {
            let view = SmoothedView::new(ObjectiveSpec::Quadratic { center: 0.7 }, uniform(1.0), eta).unwrap();
            let m = view.minimize(-2.0, 3.0).unwrap();
            assert!((m.vstar - 0.7).abs() <= 1e-9);
        }
        let view = SmoothedView::new(ObjectiveSpec::Quadratic { center: 1.0 }, NoiseModel::Zero, 0.3).unwrap();
        assert!((view.minimize(-2.0, 3.0).unwrap().vstar - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimizer_is_cached_per_window() {
        let view = SmoothedView::new(ObjectiveSpec::Quadratic { center: 1.0 }, uniform(1.0), 0.2).unwrap();
        assert!(view.vstar().is_none());
        view.minimize(-2.0, 3.0).unwrap();
        assert_eq!(view.vstar(), Some(view.cached_minimizer().unwrap().vstar));
        assert!(view.minimize(2.0, 3.0).is_err());
    }

    #[test]
    fn sharp_minimum_detected_at_small_eta() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.1 }, uniform(1.0), 0.01).unwrap();
        let m = view.minimize(-1.0, 2.0).unwrap();
        assert!(m.has_multiple_minima());
        assert!((m.vstar - 1.0).abs() < 1e-8);
    }

    #[test]
    fn smoothing_limit_shrinks_with_eta() {
        let spec = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
        let grid = linspace(-1.0, 2.0, 301);
        let sup = |eta: f64| {
            let view = SmoothedView::new(spec.clone(), uniform(1.0), eta).unwrap();
            grid.iter().map(|&v| (view.smoothed_value(v).unwrap() - spec.eval(v).value).abs()).fold(0.0, f64::max)
        };
        let mut prev = sup(0.2);
        for eta in [0.1, 0.05, 0.025, 0.0125] {
            let cur = sup(eta);
            assert!(cur < prev, "eta {eta}: {cur} vs {prev}");
            prev = cur;
        }
        // second-order regime: about η² r² sup|f''| / 6
        assert!(prev < 0.01, "{prev}");
    }

    #[test]
    fn support_algebra_for_asym_bump() {
        let (delta, r, eta) = (0.1, 1.0, 0.3);
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta }, uniform(r), eta).unwrap();
        let inside = |v: f64| {
            ((v + eta * r).abs() <= delta) || ((v - eta * r).abs() <= delta)
        };
        for v in linspace(-1.0, 2.0, 601) {
            let dev = (view.smoothed_grad(v).unwrap() - (v - 1.0)).abs();
            if !inside(v) {
                assert!(dev <= 1e-10, "v={v} dev={dev}");
            }
        }
    }

    #[test]
    fn taylor_residual_cases() {
        let q = SmoothedView::new(ObjectiveSpec::Quadratic { center: 0.2 }, uniform(1.0), 0.4).unwrap();
        assert!(q.taylor_penalty_residual(0.9).unwrap().1 <= 1e-12);
        let z = SmoothedView::new(ObjectiveSpec::SymBump { delta: 0.2 }, NoiseModel::Zero, 0.4).unwrap();
        assert_eq!(z.taylor_penalty_residual(0.1).unwrap().1, 0.0);

        let quartic = ObjectiveSpec::Polynomial { coefficients: vec![0.0, 0.0, 0.0, 0.0, 1.0] };
        let etas = [0.4, 0.2, 0.1, 0.05];
        let res: Vec<f64> = etas
            .iter()
            .map(|&eta| SmoothedView::new(quartic.clone(), uniform(1.0), eta).unwrap().taylor_penalty_residual(0.5).unwrap().1)
            .collect();
        // oracle: E[(v - ηε)^4] - v^4 - 6 v² η² E[ε²] = η⁴ E[ε⁴] = η⁴/5
        for (eta, r) in etas.iter().zip(&res) {
            assert!((r - eta.powi(4) / 5.0).abs() < 1e-14, "{eta}: {r}");
        }
        assert!(loglog_slope(&etas, &res).unwrap().slope >= 2.9);
    }

    #[test]
    fn phi_examples() {
        let view = SmoothedView::new(ObjectiveSpec::Quadratic { center: 1.0 }, uniform(1.0), 0.3).unwrap();
        // L = 1 so 0.3 <= 0.5
        assert!((view.phi_forward(2.0).unwrap() - 1.7).abs() < 1e-15);
        assert_eq!(view.phi_forward(1.0).unwrap(), 1.0);
        let v0 = SmoothedView::new(ObjectiveSpec::Quadratic { center: 0.0 }, uniform(1.0), 0.3).unwrap();
        for w in [-2.0, 0.5, 3.0] {
            let v = v0.phi_forward(w).unwrap();
            assert!((v - 0.7 * w).abs() < 1e-15);
            assert!((v0.phi_inverse(v).unwrap() - v / 0.7).abs() < 1e-12);
        }
        let f = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
        let view = SmoothedView::new(f.clone(), uniform(1.0), 0.005).unwrap();
        let expected = 0.1 - 0.005 * f.eval(0.1).grad;
        assert_eq!(view.phi_forward(0.1).unwrap(), expected);
    }

    #[test]
    fn phi_regime_is_enforced() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, uniform(1.0), 0.05).unwrap();
        assert!(matches!(view.phi_forward(0.0), Err(Error::RegimeViolation { .. })));
        assert!(matches!(view.phi_inverse(0.0), Err(Error::RegimeViolation { .. })));
    }

    #[test]
    fn phi_roundtrip_and_floor_at_regime_edge() {
        let f = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
        let l = f.lipschitz_bound(None).unwrap();
        let view = SmoothedView::new(f, uniform(1.0), 0.5 / l).unwrap();
        let mut s = NoiseStream::new(5);
        for _ in 0..1000 {
            let w = s.uniform_in(-5.0, 5.0);
            let back = view.phi_inverse(view.phi_forward(w).unwrap()).unwrap();
            assert!((back - w).abs() <= 1e-10);
        }
        let floor = linspace(-2.0, 2.0, 100_001).into_iter().map(|w| view.phi_derivative(w)).fold(f64::INFINITY, f64::min);
        assert!(floor >= 0.5 - 1e-9, "{floor}");
        assert!(view.phi_derivative_floor().unwrap() >= 0.5 - 1e-9);
    }

    #[test]
    fn bias_gap_vanishes_for_state_independent_noise() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, uniform(1.0), 0.05).unwrap();
        for v in linspace(-1.0, 2.0, 31) {
            let (gap, bound) = view.bias_gap(v).unwrap();
            assert!(gap <= 1e-10);
            assert_eq!(bound, 0.0);
        }
        let zero = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, NoiseModel::Zero, 0.05).unwrap();
        assert_eq!(zero.bias_gap(0.1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn state_scaled_gradient_is_derivative_of_value() {
        let view = SmoothedView::new(
            ObjectiveSpec::AsymQuadBump { delta: 0.3 },
            NoiseModel::StateScaled { r: 1.0, beta: 0.5 },
            0.05,
        )
        .unwrap();
        for v in [-0.7, -0.05, 0.12, 0.9, 1.6] {
            let h = 1e-5;
            let fd = (view.smoothed_value(v + h).unwrap() - view.smoothed_value(v - h).unwrap()) / (2.0 * h);
            let g = view.smoothed_grad(v).unwrap();
            assert!((fd - g).abs() < 1e-7 * g.abs().max(1.0), "v={v}: {g} vs {fd}");
            let (gap, bound) = view.bias_gap(v).unwrap();
            assert!(gap <= bound, "v={v}: gap {gap} bound {bound}");
        }
    }

    #[test]
    fn order_cap_too_small_fails_to_converge() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, uniform(1.0), 0.3)
            .unwrap()
            .with_order_cap(2);
        assert!(matches!(view.smoothed_eval(0.1), Err(Error::QuadratureNonConvergence { cap: 2, .. })));
    }

    #[test]
    fn smoothed_objective_is_nonnegative() {
        let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, uniform(1.0), 0.3).unwrap();
        for v in linspace(-2.0, 3.0, 201) {
            assert!(view.smoothed_value(v).unwrap() >= 0.0);
        }
    }
}
