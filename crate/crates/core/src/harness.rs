//! Seeded Monte-Carlo ensembles, step-size sweeps with slope fits, and
//! empirical-versus-bound verdicts.
//!
//! Trials run concurrently, each on its own substream; every reduction
//! happens afterwards in trial-index order, so results do not depend on
//! scheduling or worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bound_report, example_rate_table, initial_moments, BoundReport};
use crate::certify::{certify, certify_c, certify_mu, find_valid_regime, regime_check, CertifiedConstants, EnvelopeRow, Example};
use crate::config::{ExperimentConfig, EMBED_PREFIX};
use crate::dynamics::{run_trial, InitLaw, RunConfig};
use crate::error::{Error, Result};
use crate::noise::{substream_seed, NoiseModel};
use crate::numeric::{linspace, loglog_slope, LineFit, MeanStderr};
use crate::objectives::{mollifier_constants, MollifierVariant, ObjectiveSpec};
use crate::output::{csv_bytes, fmt_f64};
use crate::smoothing::SmoothedView;

pub const HISTOGRAM_BINS: usize = 101;

/// Runs `f` on a pool of `workers` threads (0 = rayon's global pool).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Uniform bins over `window`; out-of-window values land in the end bins.
    pub fn build(values: &[f64], window: (f64, f64), bins: usize) -> Self {
        let edges = linspace(window.0, window.1, bins + 1);
        let mut counts = vec![0u64; bins];
        let width = (window.1 - window.0) / bins as f64;
        for &x in values {
            let i = ((x - window.0) / width).floor();
            let i = if i.is_nan() { 0 } else { (i.max(0.0) as usize).min(bins - 1) };
            counts[i] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial_id: u64,
    pub seed: u64,
    pub final_w: f64,
    pub tail_avg_w: f64,
    pub tail_avg_v: f64,
    /// `(1/(T+1)) Σ (v_t - v*)²`
    pub time_avg_sq_dist: f64,
    pub diverged_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub vstar: f64,
    pub eta: f64,
    pub steps: usize,
    pub trials: Vec<TrialOutcome>,
    pub diverged: usize,
    /// `|final_w - v*|`
    pub abs_final: MeanStderr,
    /// `|tail_avg_w - v*|`
    pub abs_tail: MeanStderr,
    /// Signed `tail_avg_w`.
    pub tail_w: MeanStderr,
    /// Signed `tail_avg_v - v*`.
    pub tail_v_dev: MeanStderr,
    pub time_avg_mse: MeanStderr,
    pub hist_final: Histogram,
    pub hist_tail: Histogram,
    pub trapped_fraction: Option<f64>,
    pub warnings: Vec<String>,
}

impl EnsembleReport {
    fn completed(&self) -> impl Iterator<Item = &TrialOutcome> {
        self.trials.iter().filter(|t| t.diverged_at.is_none())
    }

    pub fn finals(&self) -> Vec<f64> {
        self.completed().map(|t| t.final_w).collect()
    }

    pub fn tail_avgs(&self) -> Vec<f64> {
        self.completed().map(|t| t.tail_avg_w).collect()
    }

    /// Mean `|final_w|` (distance from the origin rather than from `v*`).
    pub fn mean_abs_final_origin(&self) -> MeanStderr {
        MeanStderr::of(&self.completed().map(|t| t.final_w.abs()).collect::<Vec<_>>())
    }
}

pub fn make_view(cfg: &ExperimentConfig) -> Result<SmoothedView> {
    Ok(SmoothedView::new(cfg.objective.clone(), cfg.noise, cfg.run.eta)?.with_order_cap(cfg.order_cap))
}

/// Runs `cfg.trials` independent trials and summarizes them against `v*`
/// (taken from the view, or computed on `cfg.window`).
pub fn run_ensemble(cfg: &ExperimentConfig, view: &SmoothedView, workers: usize) -> Result<EnsembleReport> {
    let vstar = match view.vstar() {
        Some(v) => v,
        None => view.minimize(cfg.window.0, cfg.window.1)?.vstar,
    };
    let run = cfg.run;
    let steps = run.steps;
    let outcomes: Vec<TrialOutcome> = with_workers(workers, || {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|i| {
                let seed = substream_seed(run.seed, i);
                match run_trial(&cfg.objective, &cfg.noise, &run, Some(vstar), i) {
                    Ok(t) => Ok(TrialOutcome {
                        trial_id: i,
                        seed,
                        final_w: t.final_w,
                        tail_avg_w: t.tail_avg_w,
                        tail_avg_v: t.tail_avg_v,
                        time_avg_sq_dist: t.sum_sq_dist_v.unwrap_or(f64::NAN) / (steps as f64 + 1.0),
                        diverged_at: None,
                    }),
                    Err(Error::Diverged { step }) => Ok(TrialOutcome {
                        trial_id: i,
                        seed,
                        final_w: f64::NAN,
                        tail_avg_w: f64::NAN,
                        tail_avg_v: f64::NAN,
                        time_avg_sq_dist: f64::NAN,
                        diverged_at: Some(step),
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()
    })??;
    summarize(cfg, vstar, outcomes)
}

fn summarize(cfg: &ExperimentConfig, vstar: f64, trials: Vec<TrialOutcome>) -> Result<EnsembleReport> {
    let ok: Vec<&TrialOutcome> = trials.iter().filter(|t| t.diverged_at.is_none()).collect();
    let diverged = trials.len() - ok.len();
    if ok.is_empty() {
        return Err(Error::AllTrialsDiverged { trials: trials.len() });
    }
    let mut warnings = Vec::new();
    if diverged > 0 {
        warnings.push(format!("{diverged} of {} trials diverged and were excluded", trials.len()));
    }
    let col = |f: &dyn Fn(&TrialOutcome) -> f64| ok.iter().map(|t| f(t)).collect::<Vec<f64>>();
    let finals = col(&|t| t.final_w);
    let tails = col(&|t| t.tail_avg_w);
    let trapped_fraction = cfg.trap.map(|(lo, hi)| {
        finals.iter().filter(|w| **w > lo && **w < hi).count() as f64 / finals.len() as f64
    });
    Ok(EnsembleReport {
        vstar,
        eta: cfg.run.eta,
        steps: cfg.run.steps,
        diverged,
        abs_final: MeanStderr::of(&col(&|t| (t.final_w - vstar).abs())),
        abs_tail: MeanStderr::of(&col(&|t| (t.tail_avg_w - vstar).abs())),
        tail_w: MeanStderr::of(&tails),
        tail_v_dev: MeanStderr::of(&col(&|t| t.tail_avg_v - vstar)),
        time_avg_mse: MeanStderr::of(&col(&|t| t.time_avg_sq_dist)),
        hist_final: Histogram::build(&finals, cfg.window, HISTOGRAM_BINS),
        hist_tail: Histogram::build(&tails, cfg.window, HISTOGRAM_BINS),
        trapped_fraction,
        warnings,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdicts {
    /// Time-averaged squared distance of the implicit iterates.
    pub a_lhs: f64,
    pub a_rhs: f64,
    pub a: bool,
    /// `|mean(tail_avg_v) - v*|`
    pub b_lhs: f64,
    pub b_rhs: f64,
    pub b: bool,
    pub t_margin: f64,
}

/// Verdict A: `time-avg MSE <= sgd_total + 3 se`. Verdict B:
/// `|mean(v̄) - v*| <= avg_total + 3 se + t_margin`.
pub fn compare_to_bound(report: &EnsembleReport, bound: &BoundReport, t_margin: f64) -> Verdicts {
    let a_lhs = report.time_avg_mse.mean;
    let a_rhs = bound.sgd_total + 3.0 * report.time_avg_mse.stderr;
    let b_lhs = report.tail_v_dev.mean.abs();
    let b_rhs = bound.avg_total_asymptotic + 3.0 * report.tail_v_dev.stderr + t_margin;
    Verdicts { a_lhs, a_rhs, a: a_lhs <= a_rhs, b_lhs, b_rhs, b: b_lhs <= b_rhs, t_margin }
}

/// `|mean(v̄)(T) - mean(v̄)(2T)|`.
pub fn t_doubling_margin(short: &EnsembleReport, long: &EnsembleReport) -> f64 {
    (short.tail_v_dev.mean - long.tail_v_dev.mean).abs()
}

/// Envelope row used for the bounds: the symmetric bump works with
/// `M₂ = 0`, everything else with `M₁ = 0`.
pub fn envelope_row(spec: &ObjectiveSpec) -> EnvelopeRow {
    match spec {
        ObjectiveSpec::SymBump { .. } => EnvelopeRow::M2Zero,
        _ => EnvelopeRow::M1Zero,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEvaluation {
    pub constants: CertifiedConstants,
    pub bound: BoundReport,
    pub verdicts: Verdicts,
    pub doubled: EnsembleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BoundStatus {
    Evaluated(Box<BoundEvaluation>),
    NotApplicable(String),
}

impl BoundStatus {
    pub fn evaluation(&self) -> Option<&BoundEvaluation> {
        match self {
            BoundStatus::Evaluated(e) => Some(e),
            BoundStatus::NotApplicable(_) => None,
        }
    }
}

/// Certifies the problem and, when the bounds apply (`c, μ > 0` and
/// `η <= 1/(2L)`), reruns the ensemble at `2T` and judges both verdicts.
pub fn evaluate_bounds(
    cfg: &ExperimentConfig,
    view: &SmoothedView,
    report: &EnsembleReport,
    workers: usize,
) -> Result<BoundStatus> {
    let k = certify(view, cfg.window, cfg.certify_grid, envelope_row(&cfg.objective))?;
    if !k.is_valid() {
        return Ok(BoundStatus::NotApplicable(format!("certificate failed: c = {}, mu = {}", k.c, k.mu)));
    }
    if cfg.run.eta > 0.5 / k.lipschitz {
        return Ok(BoundStatus::NotApplicable(format!(
            "eta = {} exceeds 1/(2L) = {}",
            cfg.run.eta,
            0.5 / k.lipschitz
        )));
    }
    let (d0_sq, f0) = initial_moments(&cfg.objective, cfg.run.eta, &cfg.run.w0, k.vstar)?;
    let bound = bound_report(&k, cfg.run.eta, cfg.run.steps, d0_sq, f0)?;
    let long_cfg = ExperimentConfig { run: RunConfig { steps: 2 * cfg.run.steps, ..cfg.run }, ..cfg.clone() };
    let doubled = run_ensemble(&long_cfg, view, workers)?;
    let verdicts = compare_to_bound(report, &bound, t_doubling_margin(report, &doubled));
    Ok(BoundStatus::Evaluated(Box::new(BoundEvaluation { constants: k, bound, verdicts, doubled })))
}

/// One `run`: the ensemble plus (where applicable) the bound verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub report: EnsembleReport,
    pub bounds: BoundStatus,
}

impl RunOutcome {
    /// False when a verdict was evaluated and failed.
    pub fn verdicts_pass(&self) -> bool {
        self.bounds.evaluation().map_or(true, |e| e.verdicts.a && e.verdicts.b)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutcome> {
    let view = make_view(cfg)?;
    view.minimize(cfg.window.0, cfg.window.1)?;
    let report = run_ensemble(cfg, &view, workers)?;
    let bounds = evaluate_bounds(cfg, &view, &report, workers)?;
    Ok(RunOutcome { config: cfg.clone(), report, bounds })
}

pub const TRIALS_HEADER: &[&str] = &["trial_id", "seed", "final_w", "tail_avg_w", "tail_avg_v", "diverged"];
pub const SUMMARY_HEADER: &[&str] = &[
    "preset",
    "N",
    "T",
    "eta",
    "vstar",
    "mean_abs_final",
    "se_final",
    "mean_abs_tailavg",
    "se_tailavg",
    "time_avg_mse",
    "sgd_bound",
    "avg_bound",
    "verdict_a",
    "verdict_b",
    "trapped_fraction",
];
pub const LANDSCAPE_HEADER: &[&str] = &["v", "f", "F", "Fgrad"];
pub const SWEEP_HEADER: &[&str] = &["eta", "mean_abs_tailavg", "se", "sqrt_time_avg_mse", "se2"];

pub fn trials_csv(report: &EnsembleReport) -> Result<Vec<u8>> {
    csv_bytes(
        "",
        TRIALS_HEADER,
        report.trials.iter().map(|t| {
            vec![
                t.trial_id.to_string(),
                t.seed.to_string(),
                fmt_f64(t.final_w),
                fmt_f64(t.tail_avg_w),
                fmt_f64(t.tail_avg_v),
                t.diverged_at.is_some().to_string(),
            ]
        }),
    )
}

fn verdict_str(v: Option<bool>) -> String {
    match v {
        Some(true) => "pass".into(),
        Some(false) => "fail".into(),
        None => "na".into(),
    }
}

/// `summary.csv`, with the resolved config embedded as `#@ key = value` lines.
pub fn summary_csv(outcome: &RunOutcome) -> Result<Vec<u8>> {
    let r = &outcome.report;
    let cfg = &outcome.config;
    let ev = outcome.bounds.evaluation();
    let row = vec![
        cfg.problem_id(),
        cfg.trials.to_string(),
        cfg.run.steps.to_string(),
        fmt_f64(cfg.run.eta),
        fmt_f64(r.vstar),
        fmt_f64(r.abs_final.mean),
        fmt_f64(r.abs_final.stderr),
        fmt_f64(r.abs_tail.mean),
        fmt_f64(r.abs_tail.stderr),
        fmt_f64(r.time_avg_mse.mean),
        fmt_f64(ev.map_or(f64::NAN, |e| e.bound.sgd_total)),
        fmt_f64(ev.map_or(f64::NAN, |e| e.bound.avg_total_asymptotic)),
        verdict_str(ev.map(|e| e.verdicts.a)),
        verdict_str(ev.map(|e| e.verdicts.b)),
        fmt_f64(r.trapped_fraction.unwrap_or(f64::NAN)),
    ];
    csv_bytes(&cfg.render(EMBED_PREFIX), SUMMARY_HEADER, [row])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandscapeRow {
    pub v: f64,
    pub f: f64,
    pub smoothed: f64,
    pub smoothed_grad: f64,
}

pub fn landscape(view: &SmoothedView, window: (f64, f64), points: usize) -> Result<Vec<LandscapeRow>> {
    linspace(window.0, window.1, points.max(2))
        .into_par_iter()
        .map(|v| {
            let j = view.smoothed_eval(v)?;
            Ok(LandscapeRow { v, f: view.objective().eval(v).value, smoothed: j.value, smoothed_grad: j.grad })
        })
        .collect()
}

pub fn landscape_csv(rows: &[LandscapeRow]) -> Result<Vec<u8>> {
    csv_bytes(
        "",
        LANDSCAPE_HEADER,
        rows.iter().map(|r| vec![fmt_f64(r.v), fmt_f64(r.f), fmt_f64(r.smoothed), fmt_f64(r.smoothed_grad)]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    /// Set for the δ-family sweep.
    pub delta: Option<f64>,
    pub r: f64,
    pub steps: usize,
    pub vstar: f64,
    pub mean_abs_tail: f64,
    pub se: f64,
    pub sqrt_time_avg_mse: f64,
    pub se2: f64,
    pub mean_abs_final: f64,
    pub se_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub dropped: Vec<(f64, String)>,
    /// Slope of `log mean|v̄ - v*|` against `log η`.
    pub avg_fit: LineFit,
    /// Slope of `log sqrt(time-avg MSE)` against `log η`.
    pub sgd_fit: LineFit,
}

pub fn sweep_csv(report: &SweepReport) -> Result<Vec<u8>> {
    csv_bytes(
        "",
        SWEEP_HEADER,
        report.rows.iter().map(|r| {
            vec![fmt_f64(r.eta), fmt_f64(r.mean_abs_tail), fmt_f64(r.se), fmt_f64(r.sqrt_time_avg_mse), fmt_f64(r.se2)]
        }),
    )
}

/// Both log-log fits; fewer than three rows is an error.
pub fn fit_sweep(rows: &[SweepRow]) -> Result<(LineFit, LineFit)> {
    if rows.len() < 3 {
        return Err(Error::TooFewSweepPoints { surviving: rows.len() });
    }
    let etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let avg: Vec<f64> = rows.iter().map(|r| r.mean_abs_tail).collect();
    let sgd: Vec<f64> = rows.iter().map(|r| r.sqrt_time_avg_mse).collect();
    let fail = || Error::InvalidArgument("sweep values must be positive for a log-log fit".into());
    Ok((loglog_slope(&etas, &avg).ok_or_else(fail)?, loglog_slope(&etas, &sgd).ok_or_else(fail)?))
}

fn horizon_steps(base: &ExperimentConfig, eta: f64) -> usize {
    match base.sweep_horizon {
        Some(h) => (h / eta).ceil() as usize,
        None => base.run.steps,
    }
}

fn sweep_point(cfg: &ExperimentConfig, delta: Option<f64>, r: f64, workers: usize) -> Result<std::result::Result<SweepRow, String>> {
    let view = make_view(cfg)?;
    let vstar = match view.minimize(cfg.window.0, cfg.window.1) {
        Ok(m) => m.vstar,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let c = certify_c(&view, vstar, crate::certify::default_window(vstar, cfg.window), cfg.certify_grid)?;
    let mu = certify_mu(&view, vstar)?;
    if !(c > 0.0 && mu > 0.0) {
        return Ok(Err(format!("certificate failed: c = {c}, mu = {mu}")));
    }
    let report = match run_ensemble(cfg, &view, workers) {
        Ok(r) => r,
        Err(e @ Error::AllTrialsDiverged { .. }) => return Ok(Err(e.to_string())),
        Err(e) => return Err(e),
    };
    let mse = report.time_avg_mse;
    let root = mse.mean.sqrt();
    Ok(Ok(SweepRow {
        eta: cfg.run.eta,
        delta,
        r,
        steps: cfg.run.steps,
        vstar,
        mean_abs_tail: report.abs_tail.mean,
        se: report.abs_tail.stderr,
        sqrt_time_avg_mse: root,
        // delta method
        se2: if root > 0.0 { mse.stderr / (2.0 * root) } else { 0.0 },
        mean_abs_final: report.abs_final.mean,
        se_final: report.abs_final.stderr,
    }))
}

/// Runs `base` at each step size. Points whose certificate fails or whose
/// trials all diverge are dropped with a note.
pub fn eta_sweep(base: &ExperimentConfig, etas: &[f64], workers: usize) -> Result<SweepReport> {
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for &eta in etas {
        let cfg = ExperimentConfig {
            run: RunConfig { eta, steps: horizon_steps(base, eta), ..base.run },
            ..base.clone()
        };
        let r = match base.noise {
            NoiseModel::Uniform { r } | NoiseModel::StateScaled { r, .. } => r,
            NoiseModel::Gaussian { s } => s,
            NoiseModel::Zero => 0.0,
        };
        match sweep_point(&cfg, None, r, workers)? {
            Ok(row) => rows.push(row),
            Err(why) => dropped.push((eta, why)),
        }
    }
    let (avg_fit, sgd_fit) = fit_sweep(&rows)?;
    Ok(SweepReport { rows, dropped, avg_fit, sgd_fit })
}

/// The asymmetric-valley family: for each `δ`, `r` from the constructed
/// valid regime and `η = 2C₁δ/r`; points failing the regime check are dropped.
pub fn delta_family_sweep(base: &ExperimentConfig, deltas: &[f64], workers: usize) -> Result<SweepReport> {
    let k = mollifier_constants(MollifierVariant::Valley);
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for &delta in deltas {
        let Some((r, _)) = find_valid_regime(Example::Valley, delta, k).valid() else {
            dropped.push((delta, "no valid regime".into()));
            continue;
        };
        let eta = example_rate_table(Example::Valley, delta, r, None, k)?.eta;
        let check = regime_check(Example::Valley, delta, r, eta, k);
        if !check.ok {
            dropped.push((eta, format!("regime check fails {:?}", check.failing())));
            continue;
        }
        let cfg = ExperimentConfig {
            objective: ObjectiveSpec::AsymQuadBump { delta },
            noise: NoiseModel::Uniform { r },
            run: RunConfig { eta, steps: horizon_steps(base, eta), ..base.run },
            ..base.clone()
        };
        match sweep_point(&cfg, Some(delta), r, workers)? {
            Ok(row) => rows.push(row),
            Err(why) => dropped.push((eta, why)),
        }
    }
    let (avg_fit, sgd_fit) = fit_sweep(&rows)?;
    Ok(SweepReport { rows, dropped, avg_fit, sgd_fit })
}

/// Runs whichever sweep the config describes.
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<SweepReport> {
    if !cfg.sweep_deltas.is_empty() {
        delta_family_sweep(cfg, &cfg.sweep_deltas, workers)
    } else if !cfg.sweep_etas.is_empty() {
        eta_sweep(cfg, &cfg.sweep_etas, workers)
    } else {
        Err(Error::Config("sweep needs sweep.etas or sweep.deltas".into()))
    }
}

/// Catalog of named experiments: `(name, description)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("figC-sep-small", "asymmetric valley, delta=0.1, r=1, eta=0.1, N=500"),
    ("figC-sep-large", "asymmetric valley, delta=0.3, r=1, eta=0.3, N=500"),
    ("figD-small", "symmetric bump, delta=0.2, r=1, eta=0.01, N=500"),
    ("figD-large", "symmetric bump, delta=0.2, r=1, eta=0.2, T=2e5, N=500"),
    ("fig2-sweep", "asymmetric valley, delta=0.3, r=1, eta in {0.1,0.3,0.5,0.7,0.9}"),
    ("smooth-curves", "asymmetric valley, delta=0.3, r=1, eta=0.3 landscape"),
    ("figC-valid", "asymmetric valley, delta=1e-3 in the constructed valid regime"),
    ("figC-rate-family", "asymmetric valley family delta in {3e-3,1e-3,3e-4,1e-4} at eta=2*C1*delta/r"),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

fn base(name: &str, objective: ObjectiveSpec, r: f64, eta: f64, steps: usize, trials: usize) -> ExperimentConfig {
    let window = match objective {
        ObjectiveSpec::SymBump { .. } => (-1.5, 1.5),
        _ => (-1.0, 2.0),
    };
    let w0 = InitLaw::UniformInterval { lo: window.0, hi: window.1 };
    ExperimentConfig {
        preset: Some(name.to_string()),
        objective,
        noise: NoiseModel::Uniform { r },
        run: RunConfig { eta, steps, w0, seed: 0, tail_fraction: 0.5, record_stride: 0 },
        trials,
        window,
        order_cap: crate::quadrature::DEFAULT_ORDER_CAP,
        trap: None,
        sweep_etas: Vec::new(),
        sweep_deltas: Vec::new(),
        sweep_horizon: None,
        certify_grid: 10_000,
        landscape_points: 1001,
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let asym = |d: f64| ObjectiveSpec::AsymQuadBump { delta: d };
    let sym = |d: f64| ObjectiveSpec::SymBump { delta: d };
    let cfg = match name {
        "figC-sep-small" => ExperimentConfig { trap: Some((-0.1, 0.1)), ..base(name, asym(0.1), 1.0, 0.1, 100_000, 500) },
        "figC-sep-large" => ExperimentConfig { trap: Some((-0.3, 0.3)), ..base(name, asym(0.3), 1.0, 0.3, 100_000, 500) },
        "figD-small" => base(name, sym(0.2), 1.0, 0.01, 100_000, 500),
        "figD-large" => base(name, sym(0.2), 1.0, 0.2, 200_000, 500),
        "fig2-sweep" => ExperimentConfig {
            sweep_etas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            trap: Some((-0.3, 0.3)),
            ..base(name, asym(0.3), 1.0, 0.1, 20_000, 500)
        },
        "smooth-curves" => base(name, asym(0.3), 1.0, 0.3, 100_000, 100),
        "figC-valid" => {
            let k = mollifier_constants(MollifierVariant::Valley);
            let (r, eta) = find_valid_regime(Example::Valley, 1e-3, k)
                .valid()
                .expect("delta = 1e-3 has a valid regime");
            base(name, asym(1e-3), r, eta, 2_000_000, 100)
        }
        "figC-rate-family" => {
            let k = mollifier_constants(MollifierVariant::Valley);
            let deltas = vec![3e-3, 1e-3, 3e-4, 1e-4];
            let (r, _) = find_valid_regime(Example::Valley, deltas[0], k)
                .valid()
                .expect("family has a valid regime");
            let eta = 2.0 * k.c1 * deltas[0] / r;
            let mut cfg = base(name, asym(deltas[0]), r, eta, 1, 32);
            cfg.run.w0 = InitLaw::Fixed(1.0);
            cfg.sweep_deltas = deltas;
            cfg.sweep_horizon = Some(50.0);
            cfg.run.steps = (50.0 / eta).ceil() as usize;
            cfg
        }
        _ => {
            return Err(Error::UnknownPreset { name: name.to_string(), available: preset_names().join(", ") });
        }
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn small(objective: ObjectiveSpec, noise: NoiseModel, eta: f64, steps: usize, trials: usize) -> ExperimentConfig {
        ExperimentConfig { noise, ..base("t", objective, 1.0, eta, steps, trials) }
    }

    #[test]
    fn zero_noise_ensemble_is_degenerate() {
        let mut cfg = small(ObjectiveSpec::Quadratic { center: 1.0 }, NoiseModel::Zero, 0.3, 200, 25);
        cfg.run.w0 = InitLaw::Fixed(-0.5);
        let view = make_view(&cfg).unwrap();
        let rep = run_ensemble(&cfg, &view, 2).unwrap();
        assert!(rep.finals().windows(2).all(|p| p[0] == p[1]));
        assert_eq!(rep.abs_final.stderr, 0.0);
        assert_eq!(rep.hist_final.total(), 25);
    }

    #[test]
    fn ensemble_independent_of_workers() {
        let cfg = small(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, NoiseModel::Uniform { r: 1.0 }, 0.3, 2000, 40);
        let view = make_view(&cfg).unwrap();
        let a = run_ensemble(&cfg, &view, 1).unwrap();
        let b = run_ensemble(&cfg, &view, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(trials_csv(&a).unwrap(), trials_csv(&b).unwrap());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::build(&[-10.0, 0.0, 0.5, 1.0, 10.0], (0.0, 1.0), 101);
        assert_eq!(h.total(), 5);
        assert_eq!(h.edges.len(), 102);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[100], 2);
    }

    #[test]
    fn divergent_trials_are_excluded_and_reported() {
        let cfg = small(ObjectiveSpec::Quadratic { center: 0.0 }, NoiseModel::Uniform { r: 1.0 }, 2.5, 500, 8);
        let view = SmoothedView::new(cfg.objective.clone(), cfg.noise, 0.1).unwrap();
        view.minimize(-1.0, 2.0).unwrap();
        assert!(matches!(run_ensemble(&cfg, &view, 1), Err(Error::AllTrialsDiverged { trials: 8 })));
    }

    #[test]
    fn verdicts_on_noiseless_quadratic() {
        let mut cfg = small(ObjectiveSpec::Quadratic { center: 1.0 }, NoiseModel::Zero, 0.25, 400, 4);
        cfg.window = (-2.0, 4.0);
        let out = run_experiment(&cfg, 1).unwrap();
        let ev = out.bounds.evaluation().expect("bounds apply");
        assert!(ev.verdicts.a && ev.verdicts.b);
        assert!(ev.verdicts.a_lhs <= ev.bound.sgd_total);
        assert!(out.verdicts_pass());
    }

    #[test]
    fn slope_fit_on_synthetic_rows() {
        let mk = |eta: f64, y: f64| SweepRow {
            eta,
            delta: None,
            r: 1.0,
            steps: 1,
            vstar: 0.0,
            mean_abs_tail: y,
            se: 0.0,
            sqrt_time_avg_mse: eta.sqrt(),
            se2: 0.0,
            mean_abs_final: 0.0,
            se_final: 0.0,
        };
        let rows: Vec<SweepRow> = [0.01, 0.03, 0.1, 0.3].iter().map(|&e| mk(e, e)).collect();
        let (avg, sgd) = fit_sweep(&rows).unwrap();
        assert!((avg.slope - 1.0).abs() < 1e-12);
        assert!((sgd.slope - 0.5).abs() < 1e-12);
        assert!(matches!(fit_sweep(&rows[..2]), Err(Error::TooFewSweepPoints { surviving: 2 })));
    }

    #[test]
    fn presets_resolve_and_round_trip() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            let back = ExperimentConfig::from_raw(&RawConfig::parse(&cfg.render("")).unwrap()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        let err = preset("nope").unwrap_err().to_string();
        assert!(err.contains("figD-large"));
    }

    #[test]
    fn summary_embeds_config() {
        let mut cfg = small(ObjectiveSpec::Quadratic { center: 1.0 }, NoiseModel::Uniform { r: 0.5 }, 0.2, 300, 3);
        cfg.window = (-2.0, 4.0);
        let out = run_experiment(&cfg, 1).unwrap();
        let text = String::from_utf8(summary_csv(&out).unwrap()).unwrap();
        let back = ExperimentConfig::from_raw(&RawConfig::parse(&text).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let rerun = run_experiment(&back, 3).unwrap();
        assert_eq!(summary_csv(&rerun).unwrap(), text.as_bytes());
    }
}
