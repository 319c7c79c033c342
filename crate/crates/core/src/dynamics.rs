//! SGD `w_{t+1} = w_t - η(f'(w_t) + ε_{t+1}(w_t))`, the implicit iterates
//! `v_t = w_t - η f'(w_t)`, and tail averages of both.
//!
//! Each step is computed as `v_t = w_t - η f'(w_t)` followed by
//! `w_{t+1} = v_t - η ε`, so the identity linking the two sequences holds
//! bit-for-bit rather than up to rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseStream};
use crate::numeric::{CompensatedSum, MeanStderr};
use crate::objectives::ObjectiveSpec;
use crate::quadrature::{doubling, legendre_integrate, DEFAULT_ORDER_CAP};
use crate::smoothing::SmoothedView;

/// Iterates with `|w| > DIVERGENCE_LIMIT` abort the trial.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Distribution of the starting point `w₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitLaw {
    Fixed(f64),
    UniformInterval { lo: f64, hi: f64 },
}

impl InitLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitLaw::Fixed(w) if w.is_finite() => Ok(()),
            InitLaw::UniformInterval { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            other => Err(Error::InvalidArgument(format!("invalid initialization {other:?}"))),
        }
    }

    /// Draws `w₀`; a fixed start consumes nothing from the stream.
    pub fn draw(&self, stream: &mut NoiseStream) -> f64 {
        match *self {
            InitLaw::Fixed(w) => w,
            InitLaw::UniformInterval { lo, hi } => stream.uniform_in(lo, hi),
        }
    }

    /// Exact `E[h(w₀)]`, splitting the interval at `breaks`.
    pub fn expectation<H: Fn(f64) -> f64>(&self, h: H, breaks: &[f64]) -> Result<f64> {
        match *self {
            InitLaw::Fixed(w) => Ok(h(w)),
            InitLaw::UniformInterval { lo, hi } => {
                let mut cuts = vec![lo, hi];
                cuts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
                cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
                let total = doubling(
                    |n| cuts.windows(2).map(|p| legendre_integrate(&h, p[0], p[1], n)).sum::<f64>(),
                    DEFAULT_ORDER_CAP,
                )?;
                Ok(total / (hi - lo))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub eta: f64,
    pub steps: usize,
    pub w0: InitLaw,
    pub seed: u64,
    pub tail_fraction: f64,
    pub record_stride: usize,
}

impl RunConfig {
    pub fn new(eta: f64, steps: usize, w0: InitLaw, seed: u64) -> Self {
        Self { eta, steps, w0, seed, tail_fraction: 0.5, record_stride: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidArgument(format!("step size must be > 0, got {}", self.eta)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("step count must be >= 1".into()));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("tail fraction must be in (0, 1], got {}", self.tail_fraction)));
        }
        self.w0.validate()
    }

    /// First index `t0` of the tail: the tail average is over `w_{t0+1}..w_T`.
    pub fn tail_start(&self) -> usize {
        let len = ((self.tail_fraction * self.steps as f64).ceil() as usize).clamp(1, self.steps);
        self.steps - len
    }

    pub fn tail_len(&self) -> usize {
        self.steps - self.tail_start()
    }
}

/// Summary of one SGD run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub w0: f64,
    pub final_w: f64,
    /// Mean of `w_{t0+1}..w_T`.
    pub tail_avg_w: f64,
    /// Mean of `v_{t0}..v_{T-1}`.
    pub tail_avg_v: f64,
    /// Mean of the noise draws `ε_{t0+1}..ε_T`, so that
    /// `tail_avg_v - tail_avg_w = η · tail_noise_mean` up to rounding.
    pub tail_noise_mean: f64,
    /// `Σ_{t=0}^{T} (v_t - v*)²`, when `v*` was supplied.
    pub sum_sq_dist_v: Option<f64>,
    /// `Σ_{t=0}^{T-1} f'(w_{t+1})²`.
    pub sum_sq_pert_grad: f64,
    /// `w_t` at `t = 0, s, 2s, ...` (empty when the stride is 0).
    pub decimated_w: Vec<f64>,
    pub steps: usize,
}

/// Runs one trial from its own substream `(cfg.seed, trial)`.
pub fn run_trial(
    spec: &ObjectiveSpec,
    noise: &NoiseModel,
    cfg: &RunConfig,
    vstar: Option<f64>,
    trial: u64,
) -> Result<Trajectory> {
    let mut stream = NoiseStream::for_trial(cfg.seed, trial);
    run_with_stream(spec, noise, cfg, vstar, &mut stream)
}

/// Runs SGD with a stream seeded directly from `cfg.seed`.
pub fn run_sgd(spec: &ObjectiveSpec, noise: &NoiseModel, cfg: &RunConfig, vstar: Option<f64>) -> Result<Trajectory> {
    let mut stream = NoiseStream::new(cfg.seed);
    run_with_stream(spec, noise, cfg, vstar, &mut stream)
}

fn run_with_stream(
    spec: &ObjectiveSpec,
    noise: &NoiseModel,
    cfg: &RunConfig,
    vstar: Option<f64>,
    stream: &mut NoiseStream,
) -> Result<Trajectory> {
    cfg.validate()?;
    let eta = cfg.eta;
    let t0 = cfg.tail_start();
    let w0 = cfg.w0.draw(stream);
    let mut w = w0;
    let mut g = spec.grad(w);
    let mut tail_w = CompensatedSum::new();
    let mut tail_v = CompensatedSum::new();
    let mut tail_eps = CompensatedSum::new();
    let mut dist = CompensatedSum::new();
    let mut pert = CompensatedSum::new();
    let mut decimated = Vec::new();
    let stride = cfg.record_stride;
    if stride > 0 {
        decimated.reserve(cfg.steps / stride + 1);
    }
    for t in 0..cfg.steps {
        if stride > 0 && t % stride == 0 {
            decimated.push(w);
        }
        let v = w - eta * g;
        let eps = noise.sample(w, stream);
        let next = v - eta * eps;
        if !next.is_finite() || next.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { step: t + 1 });
        }
        if let Some(vs) = vstar {
            dist.add((v - vs) * (v - vs));
        }
        if t >= t0 {
            tail_v.add(v);
            tail_w.add(next);
            tail_eps.add(eps);
        }
        w = next;
        g = spec.grad(w);
        pert.add(g * g);
    }
    if stride > 0 && cfg.steps % stride == 0 {
        decimated.push(w);
    }
    if let Some(vs) = vstar {
        let v_last = w - eta * g;
        dist.add((v_last - vs) * (v_last - vs));
    }
    Ok(Trajectory {
        w0,
        final_w: w,
        tail_avg_w: tail_w.mean(),
        tail_avg_v: tail_v.mean(),
        tail_noise_mean: tail_eps.mean(),
        sum_sq_dist_v: vstar.map(|_| dist.value()),
        sum_sq_pert_grad: pert.value(),
        decimated_w: decimated,
        steps: cfg.steps,
    })
}

/// Mean of `seq[t0+1..]` with compensated summation (`seq[t]` is `w_t`).
pub fn tail_average(seq: &[f64], t0: usize) -> f64 {
    assert!(t0 + 1 < seq.len(), "tail start must precede the last index");
    seq[t0 + 1..].iter().copied().collect::<CompensatedSum>().mean()
}

/// Outcome of running the explicit and implicit recursions side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImplicitCheck {
    pub max_defect: f64,
    /// Whether `η <= 1/(2L)`; the check itself only needs `φ` increasing.
    pub in_regime: bool,
}

/// Runs SGD and, on an identical noise stream, the recursion
/// `v_{t+1} = v_t - η(f'(v_t - η ε'_{t+1}) + ε'_{t+1})` with
/// `ε'(v) = ε(φ⁻¹(v))`; returns `max_t |v_t - v_t'|`.
pub fn implicit_identity_check(spec: &ObjectiveSpec, noise: &NoiseModel, cfg: &RunConfig) -> Result<ImplicitCheck> {
    cfg.validate()?;
    let view = SmoothedView::new(spec.clone(), *noise, cfg.eta)?;
    let floor = view.phi_derivative_floor()?;
    if !(floor > 0.0) {
        return Err(Error::RegimeViolation { eta: cfg.eta, limit: 0.5 / view.lipschitz().unwrap_or(f64::INFINITY) });
    }
    let in_regime = view.in_phi_regime()?;
    let eta = cfg.eta;
    let mut explicit = NoiseStream::new(cfg.seed);
    let mut implicit = NoiseStream::new(cfg.seed);
    let mut w = cfg.w0.draw(&mut explicit);
    let w0 = cfg.w0.draw(&mut implicit);
    let mut v_imp = w0 - eta * spec.grad(w0);
    let mut max_defect: f64 = 0.0;
    for t in 0..cfg.steps {
        let v = w - eta * spec.grad(w);
        max_defect = max_defect.max((v - v_imp).abs());
        let eps = noise.sample(w, &mut explicit);
        w = v - eta * eps;
        if !w.is_finite() || w.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { step: t + 1 });
        }
        let eps_imp = if noise.is_state_dependent() {
            noise.sample(view.invert_phi(v_imp)?, &mut implicit)
        } else {
            noise.sample(0.0, &mut implicit)
        };
        let u = v_imp - eta * eps_imp;
        v_imp = u - eta * spec.grad(u);
    }
    let v = w - eta * spec.grad(w);
    max_defect = max_defect.max((v - v_imp).abs());
    Ok(ImplicitCheck { max_defect, in_regime })
}

/// Ensemble check of `E Σ_{t=0}^{T} f'(w_{t+1})² <= (4/(3η)) E f(w₀) + (2/3) η σ₁² L (T+2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityCheck {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub trials: usize,
    pub in_regime: bool,
}

impl StationarityCheck {
    pub fn passed(&self) -> bool {
        self.lhs <= self.rhs + 3.0 * self.lhs_stderr
    }
}

pub fn stationarity_sum_check(
    spec: &ObjectiveSpec,
    noise: &NoiseModel,
    cfg: &RunConfig,
    trials: usize,
    lipschitz: f64,
) -> Result<StationarityCheck> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    // T + 1 steps give the T + 1 terms t = 0..T
    let long = RunConfig { steps: cfg.steps + 1, record_stride: 0, ..*cfg };
    let sums: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(spec, noise, &long, None, i).map(|t| t.sum_sq_pert_grad))
        .collect::<Result<_>>()?;
    let stats = MeanStderr::of(&sums);
    let breaks: Vec<f64> = spec.bump_support().map(|(a, b)| vec![a, b]).unwrap_or_default();
    let f0 = cfg.w0.expectation(|w| spec.eval(w).value, &breaks)?;
    let sigma1_sq = noise.moment_bounds().sigma1_sq;
    let rhs = 4.0 / (3.0 * cfg.eta) * f0 + 2.0 / 3.0 * cfg.eta * sigma1_sq * lipschitz * (cfg.steps as f64 + 2.0);
    Ok(StationarityCheck {
        lhs: stats.mean,
        lhs_stderr: stats.stderr,
        rhs,
        trials,
        in_regime: cfg.eta <= 0.5 / lipschitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> ObjectiveSpec {
        ObjectiveSpec::Quadratic { center: 1.0 }
    }

    #[test]
    fn gradient_descent_contracts() {
        let mut cfg = RunConfig::new(0.5, 2, InitLaw::Fixed(0.0), 1);
        cfg.record_stride = 1;
        let t = run_sgd(&quad(), &NoiseModel::Zero, &cfg, None).unwrap();
        assert_eq!(t.decimated_w, vec![0.0, 0.5, 0.75]);
        let cfg = RunConfig::new(0.5, 60, InitLaw::Fixed(0.0), 1);
        let t = run_sgd(&quad(), &NoiseModel::Zero, &cfg, None).unwrap();
        assert!((t.final_w - 1.0).abs() <= 2f64.powi(-60) + f64::EPSILON);
    }

    #[test]
    fn identical_seeds_identical_runs() {
        let spec = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
        let noise = NoiseModel::Uniform { r: 1.0 };
        let cfg = RunConfig::new(0.3, 100_000, InitLaw::UniformInterval { lo: -1.0, hi: 2.0 }, 42);
        let a = run_sgd(&spec, &noise, &cfg, Some(1.0)).unwrap();
        let b = run_sgd(&spec, &noise, &cfg, Some(1.0)).unwrap();
        assert_eq!(a.final_w.to_bits(), b.final_w.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn per_step_identity_is_exact() {
        let spec = ObjectiveSpec::SymBump { delta: 0.2 };
        let noise = NoiseModel::Uniform { r: 1.0 };
        let eta = 0.2;
        let mut cfg = RunConfig::new(eta, 1000, InitLaw::Fixed(0.3), 9);
        cfg.record_stride = 1;
        let traj = run_sgd(&spec, &noise, &cfg, None).unwrap();
        let mut s = NoiseStream::new(9);
        for t in 0..1000 {
            let w = traj.decimated_w[t];
            let v = w - eta * spec.grad(w);
            let eps = noise.sample(w, &mut s);
            assert_eq!((v - eta * eps).to_bits(), traj.decimated_w[t + 1].to_bits());
        }
    }

    #[test]
    fn decimation_matches_full_record() {
        let spec = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
        let noise = NoiseModel::Gaussian { s: 0.5 };
        let mut full = RunConfig::new(0.1, 1000, InitLaw::Fixed(0.5), 3);
        full.record_stride = 1;
        let mut coarse = full;
        coarse.record_stride = 7;
        let a = run_sgd(&spec, &noise, &full, None).unwrap();
        let b = run_sgd(&spec, &noise, &coarse, None).unwrap();
        for (k, w) in b.decimated_w.iter().enumerate() {
            assert_eq!(w.to_bits(), a.decimated_w[7 * k].to_bits());
        }
        assert_eq!(a.final_w.to_bits(), b.final_w.to_bits());
    }

    #[test]
    fn tail_gap_is_eta_times_mean_noise() {
        let spec = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
        let noise = NoiseModel::Uniform { r: 1.0 };
        let cfg = RunConfig::new(0.3, 64, InitLaw::Fixed(0.5), 11);
        let t = run_sgd(&spec, &noise, &cfg, None).unwrap();
        let gap = t.tail_avg_v - t.tail_avg_w;
        assert!((gap - cfg.eta * t.tail_noise_mean).abs() < 1e-14, "{gap}");
    }

    #[test]
    fn tail_average_examples() {
        assert_eq!(tail_average(&[3.0; 10], 4), 3.0);
        let alt: Vec<f64> = (0..101).map(|i| (i % 2) as f64).collect();
        assert_eq!(tail_average(&alt, 0), 0.5);
        let cfg = RunConfig { tail_fraction: 1e-9, ..RunConfig::new(0.5, 20, InitLaw::Fixed(0.0), 0) };
        assert_eq!(cfg.tail_len(), 1);
        let t = run_sgd(&quad(), &NoiseModel::Zero, &cfg, None).unwrap();
        assert_eq!(t.tail_avg_w, t.final_w);
    }

    #[test]
    fn divergence_is_flagged() {
        let cfg = RunConfig::new(3.0, 1000, InitLaw::Fixed(2.0), 0);
        assert!(matches!(run_sgd(&quad(), &NoiseModel::Zero, &cfg, None), Err(Error::Diverged { .. })));
    }

    #[test]
    fn implicit_view_zero_noise_and_quadratic() {
        let cfg = RunConfig::new(0.3, 1000, InitLaw::Fixed(-1.0), 5);
        let zero = implicit_identity_check(&ObjectiveSpec::AsymQuadBump { delta: 0.3 }, &NoiseModel::Zero, &RunConfig { eta: 0.005, ..cfg }).unwrap();
        assert!(zero.max_defect <= 1e-12);
        let q = implicit_identity_check(&quad(), &NoiseModel::Uniform { r: 1.0 }, &cfg).unwrap();
        assert!(q.max_defect <= 1e-10);
    }

    #[test]
    fn implicit_view_state_scaled() {
        let cfg = RunConfig::new(0.05, 10_000, InitLaw::Fixed(0.5), 8);
        let spec = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
        let chk = implicit_identity_check(&spec, &NoiseModel::StateScaled { r: 1.0, beta: 0.5 }, &cfg).unwrap();
        assert!(!chk.in_regime);
        assert!(chk.max_defect <= 1e-9, "{}", chk.max_defect);
    }

    #[test]
    fn stationarity_zero_noise() {
        let at_opt = RunConfig::new(0.25, 100, InitLaw::Fixed(1.0), 0);
        let s = stationarity_sum_check(&quad(), &NoiseModel::Zero, &at_opt, 3, 1.0).unwrap();
        assert_eq!(s.lhs, 0.0);
        assert!(s.passed());
        let from_zero = RunConfig::new(0.25, 100, InitLaw::Fixed(0.0), 0);
        let s = stationarity_sum_check(&quad(), &NoiseModel::Zero, &from_zero, 1, 1.0).unwrap();
        // f'(w_{t+1})² = (0.75)^{2(t+1)}, summed over t = 0..100
        let q: f64 = 0.5625;
        let oracle = q * (1.0 - q.powi(101)) / (1.0 - q);
        assert!((s.lhs - oracle).abs() < 1e-14);
        assert!((s.rhs - 4.0 / 0.75 * 0.5).abs() < 1e-14);
        assert!(s.passed());
    }

    #[test]
    fn init_expectation_matches_closed_form() {
        let law = InitLaw::UniformInterval { lo: -1.0, hi: 2.0 };
        // E[½(w-1)²] for w ~ U(-1, 2) = ½ (8 + 1)/9 = 0.5
        let e = law.expectation(|w| 0.5 * (w - 1.0) * (w - 1.0), &[]).unwrap();
        assert!((e - 0.5).abs() < 1e-14);
        assert_eq!(InitLaw::Fixed(2.0).expectation(|w| w * w, &[]).unwrap(), 4.0);
    }
}
