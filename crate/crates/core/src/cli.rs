//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 failed verdict under
//! `--strict`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bounds::{initial_moments, avg_bound, sgd_bound, AVG_TRANSIENT_LABEL};
use crate::certify::{certify, regime_check, CertifiedConstants, Example, RegimeCheck};
use crate::config::{ExperimentConfig, RawConfig};
use crate::error::{Error, Result};
use crate::harness::{self, envelope_row, make_view, RunOutcome, SweepReport};
use crate::noise::NoiseModel;
use crate::objectives::{mollifier_constants, MollifierVariant};
use crate::output::{csv_bytes, fmt_f64, write_atomic};
use crate::selftest::run_selftest;

pub const SEED_ENV: &str = "SMOOTHSGD_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "smoothsgd", version, about = "SGD, averaged SGD and the smoothed-objective view on 1-D test problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte-Carlo ensemble; writes trials.csv and summary.csv.
    Run(Common),
    /// Step-size sweep with log-log slope fits; writes sweep.csv.
    Sweep(Common),
    /// Certify c, mu, M1, M2 and the regime inequalities.
    Certify(Common),
    /// Evaluate the SGD and averaged-SGD bounds; writes bounds.csv.
    Bounds(Common),
    /// List or show the experiment presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Dump v, f, F, F' on a grid; writes landscape.csv.
    Landscape(Common),
    /// Run the fast invariant suite.
    Selftest {
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
        /// Test hook: cap the quadrature order at 2.
        #[arg(long)]
        break_quadrature: bool,
    },
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Exit with status 2 when a verdict fails.
    #[arg(long)]
    strict: bool,
    /// Override one key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Resolves preset, file and overrides, then the seed: `--seed`, else an
/// explicit `seed` key from the file or overrides, else `SMOOTHSGD_SEED`,
/// else the preset's default.
fn resolve(common: &Common) -> Result<ExperimentConfig> {
    if common.preset.is_none() && common.config.is_none() {
        return Err(Error::Config("need --config or --preset".into()));
    }
    let mut raw = match &common.preset {
        Some(name) => harness::preset(name)?.to_raw(),
        None => RawConfig::new(),
    };
    let mut user = match &common.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::new(),
    };
    for a in &common.overrides {
        user.set_assignment(a)?;
    }
    let user_seed = user.get("seed").is_some();
    raw.merge(&user);
    if let Some(seed) = common.seed {
        raw.set("seed", &seed.to_string())?;
    } else if !user_seed {
        if let Ok(s) = std::env::var(SEED_ENV) {
            let seed: u64 = s.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV} is not a u64: '{s}'")))?;
            raw.set("seed", &seed.to_string())?;
        }
    }
    ExperimentConfig::from_raw(&raw)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run(c) => cmd_run(&c),
        Command::Sweep(c) => cmd_sweep(&c),
        Command::Certify(c) => cmd_certify(&c),
        Command::Bounds(c) => cmd_bounds(&c),
        Command::Landscape(c) => cmd_landscape(&c),
        Command::Preset { action: PresetAction::List } => {
            for (name, desc) in harness::PRESETS {
                println!("{name:<18} {desc}");
            }
            Ok(EXIT_OK)
        }
        Command::Preset { action: PresetAction::Show { name } } => {
            print!("{}", harness::preset(&name)?.render(""));
            Ok(EXIT_OK)
        }
        Command::Selftest { json, break_quadrature } => cmd_selftest(json, break_quadrature),
    }
}

fn out_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn cmd_run(c: &Common) -> Result<i32> {
    let cfg = resolve(c)?;
    let outcome = harness::run_experiment(&cfg, c.workers)?;
    write_atomic(&out_file(&c.out, "trials.csv"), &harness::trials_csv(&outcome.report)?)?;
    write_atomic(&out_file(&c.out, "summary.csv"), &harness::summary_csv(&outcome)?)?;
    print_run_status(&outcome);
    Ok(if c.strict && !outcome.verdicts_pass() { EXIT_VERDICT } else { EXIT_OK })
}

fn print_run_status(o: &RunOutcome) {
    let r = &o.report;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    let verdicts = match &o.bounds {
        harness::BoundStatus::Evaluated(e) => format!(
            "A={} B={}",
            if e.verdicts.a { "pass" } else { "fail" },
            if e.verdicts.b { "pass" } else { "fail" }
        ),
        harness::BoundStatus::NotApplicable(why) => format!("bounds n/a ({why})"),
    };
    println!(
        "{}: N={} T={} eta={} v*={:.6} |final-v*|={:.4e}±{:.1e} |tail-v*|={:.4e}±{:.1e} {}",
        o.config.problem_id(),
        o.config.trials,
        o.config.run.steps,
        o.config.run.eta,
        r.vstar,
        r.abs_final.mean,
        r.abs_final.stderr,
        r.abs_tail.mean,
        r.abs_tail.stderr,
        verdicts
    );
}

/// Slope windows for the valid-regime family sweep.
pub const FAMILY_AVG_SLOPE: (f64, f64) = (0.8, 1.5);
pub const FAMILY_SGD_SLOPE: (f64, f64) = (0.35, 0.75);

fn cmd_sweep(c: &Common) -> Result<i32> {
    let cfg = resolve(c)?;
    let rep = harness::run_sweep(&cfg, c.workers)?;
    write_atomic(&out_file(&c.out, "sweep.csv"), &harness::sweep_csv(&rep)?)?;
    for (eta, why) in &rep.dropped {
        eprintln!("note: dropped eta={eta}: {why}");
    }
    print_sweep(&cfg, &rep);
    let family_ok = cfg.sweep_deltas.is_empty()
        || (in_range(rep.avg_fit.slope, FAMILY_AVG_SLOPE) && in_range(rep.sgd_fit.slope, FAMILY_SGD_SLOPE));
    Ok(if c.strict && !family_ok { EXIT_VERDICT } else { EXIT_OK })
}

fn in_range(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

fn print_sweep(cfg: &ExperimentConfig, rep: &SweepReport) {
    println!(
        "{}: {} points, averaged slope {:.3}±{:.3}, SGD slope {:.3}±{:.3}",
        cfg.problem_id(),
        rep.rows.len(),
        rep.avg_fit.slope,
        rep.avg_fit.slope_se,
        rep.sgd_fit.slope,
        rep.sgd_fit.slope_se
    );
}

/// Regime flag for the certificate: the example's inequality system for the
/// bump objectives, `η <= 1/(2L)` otherwise.
fn regime_for(cfg: &ExperimentConfig, k: &CertifiedConstants) -> (bool, Option<RegimeCheck>) {
    let r = noise_scale(&cfg.noise);
    match (Example::for_objective(&cfg.objective), cfg.objective.delta()) {
        (Some(ex), Some(delta)) => {
            let variant = match ex {
                Example::Valley => MollifierVariant::Valley,
                Example::Bump => MollifierVariant::Bump,
            };
            let chk = regime_check(ex, delta, r, cfg.run.eta, mollifier_constants(variant));
            (chk.ok, Some(chk))
        }
        _ => (cfg.run.eta <= 0.5 / k.lipschitz, None),
    }
}

fn noise_scale(n: &NoiseModel) -> f64 {
    match *n {
        NoiseModel::Uniform { r } | NoiseModel::StateScaled { r, .. } => r,
        NoiseModel::Gaussian { s } => s,
        NoiseModel::Zero => 0.0,
    }
}

pub const CERTIFICATE_HEADER: &[&str] =
    &["problem", "delta", "r", "eta", "L", "sigma1_sq", "sigma2", "c", "mu", "M1", "M2", "vstar", "regime_ok"];

fn cmd_certify(c: &Common) -> Result<i32> {
    let cfg = resolve(c)?;
    let view = make_view(&cfg)?;
    let k = certify(&view, cfg.window, cfg.certify_grid, envelope_row(&cfg.objective))?;
    let (regime_ok, check) = regime_for(&cfg, &k);
    let delta = cfg.objective.delta().unwrap_or(f64::NAN);
    let r = noise_scale(&cfg.noise);
    let mut block = String::new();
    let mut kv = |key: &str, v: String| block.push_str(&format!("{key} = {v}\n"));
    kv("problem", cfg.problem_id());
    kv("objective", cfg.objective.kind_name().into());
    kv("delta", fmt_f64(delta));
    kv("noise", cfg.noise.kind_name().into());
    kv("r", fmt_f64(r));
    kv("eta", fmt_f64(cfg.run.eta));
    kv("L", fmt_f64(k.lipschitz));
    kv("sigma1_sq", fmt_f64(k.sigma1_sq));
    kv("sigma2", fmt_f64(k.sigma2));
    kv("vstar", fmt_f64(k.vstar));
    kv("c", fmt_f64(k.c));
    kv("mu", fmt_f64(k.mu));
    kv("M1", fmt_f64(k.m1));
    kv("M2", fmt_f64(k.m2));
    kv("envelope.M2_when_M1_zero", fmt_f64(k.envelope.m2_given_m1_zero));
    kv("envelope.M1_when_M2_zero", fmt_f64(k.envelope.m1_given_m2_zero));
    kv("envelope.band_ok", k.envelope.band_ok.to_string());
    kv("window.lo", fmt_f64(k.window.0));
    kv("window.hi", fmt_f64(k.window.1));
    kv("grid_n", k.grid_n.to_string());
    kv("certificate_ok", k.is_valid().to_string());
    kv("regime_ok", regime_ok.to_string());
    if let Some(chk) = &check {
        for s in &chk.slacks {
            kv(&format!("regime.{}", s.name), fmt_f64(s.slack));
        }
    }
    print!("{block}");
    write_atomic(&out_file(&c.out, "certificate.txt"), block.as_bytes())?;
    let row = vec![
        cfg.problem_id(),
        fmt_f64(delta),
        fmt_f64(r),
        fmt_f64(cfg.run.eta),
        fmt_f64(k.lipschitz),
        fmt_f64(k.sigma1_sq),
        fmt_f64(k.sigma2),
        fmt_f64(k.c),
        fmt_f64(k.mu),
        fmt_f64(k.m1),
        fmt_f64(k.m2),
        fmt_f64(k.vstar),
        regime_ok.to_string(),
    ];
    write_atomic(&out_file(&c.out, "certificate.csv"), &csv_bytes("", CERTIFICATE_HEADER, [row])?)?;
    Ok(EXIT_OK)
}

pub const BOUNDS_HEADER: &[&str] = &[
    "problem",
    "eta",
    "T",
    "L",
    "sigma1_sq",
    "sigma2",
    "c",
    "mu",
    "M1",
    "M2",
    "d0_sq",
    "f0",
    "init_term",
    "f0_term",
    "linear_eta_term",
    "quad_eta_term",
    "sgd_total",
    "eta32_term",
    "M1_term",
    "M2_linear",
    "M2_quad",
    "avg_total_asymptotic",
    "avg_transient",
    "note",
];

fn cmd_bounds(c: &Common) -> Result<i32> {
    let cfg = resolve(c)?;
    let etas = if cfg.sweep_etas.is_empty() { vec![cfg.run.eta] } else { cfg.sweep_etas.clone() };
    let mut rows = Vec::new();
    for eta in etas {
        let mut run_cfg = cfg.clone();
        run_cfg.run.eta = eta;
        let view = make_view(&run_cfg)?;
        let k = certify(&view, cfg.window, cfg.certify_grid, envelope_row(&cfg.objective))?;
        let (d0, f0) = initial_moments(&cfg.objective, eta, &cfg.run.w0, k.vstar)?;
        let nan = f64::NAN;
        let mut notes = Vec::new();
        let sgd = match sgd_bound(&k, eta, cfg.run.steps, d0, f0) {
            Ok(t) => [t.init_term, t.f0_term, t.linear_eta_term, t.quad_eta_term, t.total()],
            Err(e) => {
                notes.push(format!("sgd: {e}"));
                [nan; 5]
            }
        };
        let avg = match avg_bound(&k, eta) {
            Ok(t) => [t.eta32_term, t.m1_term, t.m2_linear, t.m2_quad, t.total()],
            Err(e) => {
                notes.push(format!("avg: {e}"));
                [nan; 5]
            }
        };
        let mut cells = [nan; 10];
        cells[..5].copy_from_slice(&sgd);
        cells[5..].copy_from_slice(&avg);
        let note = notes.join("; ");
        let mut row = vec![cfg.problem_id(), fmt_f64(eta), cfg.run.steps.to_string()];
        row.extend([k.lipschitz, k.sigma1_sq, k.sigma2, k.c, k.mu, k.m1, k.m2, d0, f0].map(fmt_f64));
        row.extend(cells.map(fmt_f64));
        row.push(AVG_TRANSIENT_LABEL.to_string());
        row.push(note.clone());
        if !note.is_empty() {
            eprintln!("note: eta={eta}: {note}");
        }
        println!("{}: eta={eta} sgd_total={} avg_total={}", cfg.problem_id(), fmt_f64(cells[4]), fmt_f64(cells[9]));
        rows.push(row);
    }
    write_atomic(&out_file(&c.out, "bounds.csv"), &csv_bytes("", BOUNDS_HEADER, rows)?)?;
    Ok(EXIT_OK)
}

fn cmd_landscape(c: &Common) -> Result<i32> {
    let cfg = resolve(c)?;
    let view = make_view(&cfg)?;
    let rows = harness::landscape(&view, cfg.window, cfg.landscape_points)?;
    write_atomic(&out_file(&c.out, "landscape.csv"), &harness::landscape_csv(&rows)?)?;
    println!("{}: {} landscape points", cfg.problem_id(), rows.len());
    Ok(EXIT_OK)
}

fn cmd_selftest(json: bool, break_quadrature: bool) -> Result<i32> {
    let results = run_selftest(break_quadrature);
    let ok = results.iter().all(|r| r.passed);
    if json {
        let text = serde_json::to_string_pretty(&results).map_err(|e| Error::Io(e.to_string()))?;
        println!("{text}");
    } else {
        for r in &results {
            println!("{} {:<38} {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail);
        }
    }
    if !ok {
        let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        eprintln!("selftest failed: {}", failed.join(", "));
    }
    Ok(if ok { EXIT_OK } else { EXIT_ERROR })
}
