//! Fast invariant suite behind `smoothsgd selftest`.

use serde::Serialize;

use crate::dynamics::{implicit_identity_check, run_sgd, InitLaw, RunConfig};
use crate::error::Result;
use crate::noise::NoiseModel;
use crate::numeric::linspace;
use crate::objectives::{mollifier_constants, MollifierVariant, ObjectiveSpec};
use crate::quadrature::DEFAULT_ORDER_CAP;
use crate::smoothing::SmoothedView;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs every check. With `break_quadrature` the smoothing views are built
/// with an order cap of 2, which must make the quadrature checks fail.
pub fn run_selftest(break_quadrature: bool) -> Vec<CheckResult> {
    let cap = if break_quadrature { 2 } else { DEFAULT_ORDER_CAP };
    let checks: Vec<(&'static str, Box<dyn Fn() -> Result<(bool, String)>>)> = vec![
        ("objective_finite_differences", Box::new(objective_fd)),
        ("mollifier_constants", Box::new(constants)),
        ("quadrature_closed_form", Box::new(move || quadrature_closed_form(cap))),
        ("smoothed_gradient_finite_differences", Box::new(move || smoothed_fd(cap))),
        ("phi_roundtrip", Box::new(phi_roundtrip)),
        ("zero_noise_reduction", Box::new(move || zero_noise(cap))),
        ("implicit_identity", Box::new(implicit)),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
        })
        .collect()
}

fn verdict(worst: f64, tol: f64) -> (bool, String) {
    (worst <= tol, format!("worst deviation {worst:.3e} (tolerance {tol:.0e})"))
}

fn objective_fd() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for spec in [ObjectiveSpec::AsymQuadBump { delta: 0.3 }, ObjectiveSpec::SymBump { delta: 0.2 }] {
        for w in linspace(-0.5, 0.5, 201) {
            let h = 1e-6;
            let j = spec.eval(w);
            let g = (spec.eval(w + h).value - spec.eval(w - h).value) / (2.0 * h);
            let hs = (spec.eval(w + h).grad - spec.eval(w - h).grad) / (2.0 * h);
            worst = worst.max((g - j.grad).abs()).max((hs - j.hess).abs() / j.hess.abs().max(1.0));
        }
    }
    Ok(verdict(worst, 1e-5))
}

fn constants() -> Result<(bool, String)> {
    let k = mollifier_constants(MollifierVariant::Valley);
    let worst = (k.c1 - 2.170_357_085_7).abs().max((k.c2 - 21.065_882_118_9).abs());
    Ok(verdict(worst, 1e-6))
}

fn quadrature_closed_form(cap: usize) -> Result<(bool, String)> {
    let (eta, r) = (0.3, 1.0);
    let view = SmoothedView::new(ObjectiveSpec::Quadratic { center: 1.0 }, NoiseModel::Uniform { r }, eta)?
        .with_order_cap(cap);
    let mut worst: f64 = 0.0;
    for v in linspace(-2.0, 3.0, 51) {
        let exact = 0.5 * (v - 1.0) * (v - 1.0) + eta * eta * r * r / 6.0;
        worst = worst.max((view.smoothed_value(v)? - exact).abs());
    }
    let bump = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, NoiseModel::Uniform { r }, eta)?
        .with_order_cap(cap);
    // far from the bump the closed form still holds
    worst = worst.max((bump.smoothed_value(1.0)? - eta * eta / 6.0).abs());
    Ok(verdict(worst, 1e-13))
}

fn smoothed_fd(cap: usize) -> Result<(bool, String)> {
    let view = SmoothedView::new(ObjectiveSpec::AsymQuadBump { delta: 0.3 }, NoiseModel::Uniform { r: 1.0 }, 0.3)?
        .with_order_cap(cap);
    let mut worst: f64 = 0.0;
    for v in linspace(-0.9, 1.9, 29) {
        let h = 1e-5;
        let fd = (view.smoothed_value(v + h)? - view.smoothed_value(v - h)?) / (2.0 * h);
        worst = worst.max((fd - view.smoothed_grad(v)?).abs());
    }
    Ok(verdict(worst, 1e-7))
}

fn phi_roundtrip() -> Result<(bool, String)> {
    let spec = ObjectiveSpec::AsymQuadBump { delta: 0.3 };
    let eta = 0.5 / spec.lipschitz_bound(None)?;
    let view = SmoothedView::new(spec, NoiseModel::Uniform { r: 1.0 }, eta)?;
    let mut worst: f64 = 0.0;
    for w in linspace(-3.0, 3.0, 601) {
        worst = worst.max((view.phi_inverse(view.phi_forward(w)?)? - w).abs());
    }
    Ok(verdict(worst, 1e-10))
}

fn zero_noise(cap: usize) -> Result<(bool, String)> {
    let spec = ObjectiveSpec::SymBump { delta: 0.2 };
    let view = SmoothedView::new(spec.clone(), NoiseModel::Zero, 0.2)?.with_order_cap(cap);
    let mut worst: f64 = 0.0;
    for v in linspace(-1.0, 1.0, 1000) {
        worst = worst.max((view.smoothed_value(v)? - spec.eval(v).value).abs());
    }
    let cfg = RunConfig::new(0.5, 60, InitLaw::Fixed(0.0), 0);
    let t = run_sgd(&ObjectiveSpec::Quadratic { center: 1.0 }, &NoiseModel::Zero, &cfg, None)?;
    worst = worst.max(((t.final_w - 1.0).abs() - 2f64.powi(-60)).max(0.0));
    Ok(verdict(worst, 1e-12))
}

fn implicit() -> Result<(bool, String)> {
    let cfg = RunConfig::new(0.05, 1000, InitLaw::Fixed(0.5), 1);
    let chk = implicit_identity_check(
        &ObjectiveSpec::AsymQuadBump { delta: 0.3 },
        &NoiseModel::StateScaled { r: 1.0, beta: 0.5 },
        &cfg,
    )?;
    Ok(verdict(chk.max_defect, 1e-9))
}
