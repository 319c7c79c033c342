//! Flat `key = value` experiment configuration with dotted keys.
//!
//! Layers (preset, file, `--set` overrides) are merged as raw string maps and
//! resolved once; unknown keys are errors. A resolved config prints back to
//! the same format, which is how `summary.csv` embeds it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{InitLaw, RunConfig};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::objectives::ObjectiveSpec;
use crate::quadrature::DEFAULT_ORDER_CAP;

/// Prefix marking config lines embedded in CSV outputs.
pub const EMBED_PREFIX: &str = "#@ ";

pub const KNOWN_KEYS: &[&str] = &[
    "preset",
    "seed",
    "objective.kind",
    "objective.delta",
    "objective.center",
    "objective.coefficients",
    "noise.kind",
    "noise.r",
    "noise.s",
    "noise.beta",
    "eta",
    "run.eta",
    "run.T",
    "run.w0.kind",
    "run.w0.lo",
    "run.w0.hi",
    "run.w0.value",
    "run.tail_fraction",
    "run.record_stride",
    "run.trials",
    "quad.order_cap",
    "window.lo",
    "window.hi",
    "trap.lo",
    "trap.hi",
    "sweep.etas",
    "sweep.deltas",
    "sweep.horizon",
    "certify.grid_n",
    "landscape.points",
];

/// Raw layered key/value map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines. `#` starts a comment line; if any line
    /// carries the embed prefix, only those lines are read, so a
    /// `summary.csv` is itself a valid config file.
    pub fn parse(text: &str) -> Result<Self> {
        let embedded = text.lines().any(|l| l.starts_with(EMBED_PREFIX));
        let mut raw = RawConfig::new();
        for (no, line) in text.lines().enumerate() {
            let body = if embedded {
                match line.strip_prefix(EMBED_PREFIX) {
                    Some(b) => b,
                    None => continue,
                }
            } else {
                line
            };
            let body = body.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            raw.set_assignment(body).map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` assignment.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key = value, got '{assignment}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Later layers win.
    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("{key}: not a number: '{s}'"))))
            .transpose()
    }

    fn req_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        self.get(key).map(|s| parse_uint(key, s)).transpose()
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(s) if s.trim().is_empty() => Ok(Vec::new()),
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: bad list entry '{x}'"))))
                .collect(),
        }
    }
}

/// Accepts plain integers and integral floats such as `2e5`.
fn parse_uint(key: &str, s: &str) -> Result<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(Error::Config(format!("{key}: not a non-negative integer: '{s}'"))),
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub objective: ObjectiveSpec,
    pub noise: NoiseModel,
    pub run: RunConfig,
    pub trials: usize,
    pub window: (f64, f64),
    pub order_cap: usize,
    pub trap: Option<(f64, f64)>,
    pub sweep_etas: Vec<f64>,
    pub sweep_deltas: Vec<f64>,
    /// When set, each sweep point runs `ceil(horizon / η)` steps.
    pub sweep_horizon: Option<f64>,
    pub certify_grid: usize,
    pub landscape_points: usize,
}

fn default_window(spec: &ObjectiveSpec) -> (f64, f64) {
    match spec {
        ObjectiveSpec::AsymQuadBump { .. } => (-1.0, 2.0),
        ObjectiveSpec::SymBump { .. } => (-1.5, 1.5),
        ObjectiveSpec::Quadratic { center } => (center - 3.0, center + 3.0),
        ObjectiveSpec::Polynomial { .. } => (-2.0, 2.0),
    }
}

fn default_init(spec: &ObjectiveSpec) -> InitLaw {
    match spec {
        ObjectiveSpec::SymBump { .. } => InitLaw::UniformInterval { lo: -1.5, hi: 1.5 },
        _ => InitLaw::UniformInterval { lo: -1.0, hi: 2.0 },
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let objective = match raw.get("objective.kind") {
            None => return Err(Error::Config("missing required key 'objective.kind'".into())),
            Some("quadratic") => ObjectiveSpec::Quadratic { center: raw.f64("objective.center")?.unwrap_or(0.0) },
            Some("asym_quad_bump") => ObjectiveSpec::AsymQuadBump { delta: raw.req_f64("objective.delta")? },
            Some("sym_bump") => ObjectiveSpec::SymBump { delta: raw.req_f64("objective.delta")? },
            Some("polynomial") => {
                let coefficients = raw.list("objective.coefficients")?;
                if coefficients.is_empty() {
                    return Err(Error::Config("polynomial needs objective.coefficients".into()));
                }
                ObjectiveSpec::Polynomial { coefficients }
            }
            Some(other) => return Err(Error::Config(format!("unknown objective.kind '{other}'"))),
        };
        objective.validate().map_err(|e| Error::Config(e.to_string()))?;

        let noise = match raw.get("noise.kind").unwrap_or("uniform") {
            "uniform" => NoiseModel::Uniform { r: raw.f64("noise.r")?.unwrap_or(1.0) },
            "gaussian" => NoiseModel::Gaussian { s: raw.f64("noise.s")?.unwrap_or(1.0) },
            "zero" => NoiseModel::Zero,
            "state_scaled" => NoiseModel::StateScaled {
                r: raw.f64("noise.r")?.unwrap_or(1.0),
                beta: raw.f64("noise.beta")?.unwrap_or(0.5),
            },
            other => return Err(Error::Config(format!("unknown noise.kind '{other}'"))),
        };
        noise.validate().map_err(|e| Error::Config(e.to_string()))?;

        let eta = match (raw.f64("eta")?, raw.f64("run.eta")?) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("eta = {a} and run.eta = {b} disagree")));
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("missing required key 'run.eta'".into())),
        };

        let w0 = match raw.get("run.w0.kind") {
            None => default_init(&objective),
            Some("fixed") => InitLaw::Fixed(raw.req_f64("run.w0.value")?),
            Some("uniform") => InitLaw::UniformInterval { lo: raw.req_f64("run.w0.lo")?, hi: raw.req_f64("run.w0.hi")? },
            Some(other) => return Err(Error::Config(format!("unknown run.w0.kind '{other}'"))),
        };

        let run = RunConfig {
            eta,
            steps: raw.uint("run.T")?.unwrap_or(10_000) as usize,
            w0,
            seed: raw.uint("seed")?.unwrap_or(0),
            tail_fraction: raw.f64("run.tail_fraction")?.unwrap_or(0.5),
            record_stride: raw.uint("run.record_stride")?.unwrap_or(0) as usize,
        };
        run.validate().map_err(|e| Error::Config(e.to_string()))?;

        let dw = default_window(&objective);
        let window = (raw.f64("window.lo")?.unwrap_or(dw.0), raw.f64("window.hi")?.unwrap_or(dw.1));
        if !(window.0 < window.1) {
            return Err(Error::Config(format!("empty window [{}, {}]", window.0, window.1)));
        }
        let trap = match (raw.f64("trap.lo")?, raw.f64("trap.hi")?) {
            (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(Error::Config("trap.lo and trap.hi must both be set with lo < hi".into())),
        };
        let trials = raw.uint("run.trials")?.unwrap_or(100) as usize;
        if trials == 0 {
            return Err(Error::Config("run.trials must be >= 1".into()));
        }
        let sweep_horizon = raw.f64("sweep.horizon")?;
        if let Some(h) = sweep_horizon {
            if !(h > 0.0) {
                return Err(Error::Config("sweep.horizon must be > 0".into()));
            }
        }
        Ok(ExperimentConfig {
            preset: raw.get("preset").map(str::to_string),
            objective,
            noise,
            run,
            trials,
            window,
            order_cap: raw.uint("quad.order_cap")?.unwrap_or(DEFAULT_ORDER_CAP as u64) as usize,
            trap,
            sweep_etas: raw.list("sweep.etas")?,
            sweep_deltas: raw.list("sweep.deltas")?,
            sweep_horizon,
            certify_grid: raw.uint("certify.grid_n")?.unwrap_or(10_000) as usize,
            landscape_points: raw.uint("landscape.points")?.unwrap_or(1001) as usize,
        })
    }

    /// Canonical key/value pairs; `from_raw(to_raw())` reproduces `self`.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out: Vec<(&'static str, String)> = Vec::new();
        if let Some(p) = &self.preset {
            out.push(("preset", p.clone()));
        }
        out.push(("seed", self.run.seed.to_string()));
        match &self.objective {
            ObjectiveSpec::Quadratic { center } => {
                out.push(("objective.kind", "quadratic".into()));
                out.push(("objective.center", center.to_string()));
            }
            ObjectiveSpec::AsymQuadBump { delta } => {
                out.push(("objective.kind", "asym_quad_bump".into()));
                out.push(("objective.delta", delta.to_string()));
            }
            ObjectiveSpec::SymBump { delta } => {
                out.push(("objective.kind", "sym_bump".into()));
                out.push(("objective.delta", delta.to_string()));
            }
            ObjectiveSpec::Polynomial { coefficients } => {
                out.push(("objective.kind", "polynomial".into()));
                out.push(("objective.coefficients", join(coefficients)));
            }
        }
        match self.noise {
            NoiseModel::Uniform { r } => {
                out.push(("noise.kind", "uniform".into()));
                out.push(("noise.r", r.to_string()));
            }
            NoiseModel::Gaussian { s } => {
                out.push(("noise.kind", "gaussian".into()));
                out.push(("noise.s", s.to_string()));
            }
            NoiseModel::Zero => out.push(("noise.kind", "zero".into())),
            NoiseModel::StateScaled { r, beta } => {
                out.push(("noise.kind", "state_scaled".into()));
                out.push(("noise.r", r.to_string()));
                out.push(("noise.beta", beta.to_string()));
            }
        }
        out.push(("run.eta", self.run.eta.to_string()));
        out.push(("run.T", self.run.steps.to_string()));
        match self.run.w0 {
            InitLaw::Fixed(w) => {
                out.push(("run.w0.kind", "fixed".into()));
                out.push(("run.w0.value", w.to_string()));
            }
            InitLaw::UniformInterval { lo, hi } => {
                out.push(("run.w0.kind", "uniform".into()));
                out.push(("run.w0.lo", lo.to_string()));
                out.push(("run.w0.hi", hi.to_string()));
            }
        }
        out.push(("run.tail_fraction", self.run.tail_fraction.to_string()));
        out.push(("run.record_stride", self.run.record_stride.to_string()));
        out.push(("run.trials", self.trials.to_string()));
        out.push(("quad.order_cap", self.order_cap.to_string()));
        out.push(("window.lo", self.window.0.to_string()));
        out.push(("window.hi", self.window.1.to_string()));
        if let Some((lo, hi)) = self.trap {
            out.push(("trap.lo", lo.to_string()));
            out.push(("trap.hi", hi.to_string()));
        }
        if !self.sweep_etas.is_empty() {
            out.push(("sweep.etas", join(&self.sweep_etas)));
        }
        if !self.sweep_deltas.is_empty() {
            out.push(("sweep.deltas", join(&self.sweep_deltas)));
        }
        if let Some(h) = self.sweep_horizon {
            out.push(("sweep.horizon", h.to_string()));
        }
        out.push(("certify.grid_n", self.certify_grid.to_string()));
        out.push(("landscape.points", self.landscape_points.to_string()));
        out
    }

    pub fn to_raw(&self) -> RawConfig {
        let mut raw = RawConfig::new();
        for (k, v) in self.to_pairs() {
            raw.entries.insert(k.to_string(), v);
        }
        raw
    }

    /// `key = value` lines, each prefixed with `prefix`.
    pub fn render(&self, prefix: &str) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{prefix}{k} = {v}\n")).collect()
    }

    /// Display name: the preset, or the objective kind.
    pub fn problem_id(&self) -> String {
        self.preset.clone().unwrap_or_else(|| self.objective.kind_name().to_string())
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
