//! Gauss–Legendre and Gauss–Hermite rules with a process-wide cache.
//!
//! Legendre rules are computed by Newton iteration on the three-term
//! recurrence with the usual Chebyshev-like starting guesses; they are
//! accurate to a few ulps up to several thousand nodes. Hermite rules are
//! returned in probabilists' form (expectations under N(0, 1)) and are capped
//! at [`HERMITE_MAX_ORDER`] nodes because the unscaled recurrence overflows
//! beyond it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Starting order of every doubling sequence.
pub const START_ORDER: usize = 32;
/// Default cap of the doubling sequence.
pub const DEFAULT_ORDER_CAP: usize = 4096;
/// Largest Gauss–Hermite rule handed out.
pub const HERMITE_MAX_ORDER: usize = 128;
/// Successive estimates closer than this (relative to max(1, |I|)) stop the doubling.
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type Cache = Mutex<HashMap<usize, Arc<Rule>>>;

fn legendre_cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn hermite_cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre rule on [-1, 1] with `n` nodes.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    assert!(n >= 1, "quadrature order must be positive");
    let mut cache = legendre_cache().lock().expect("quadrature cache poisoned");
    cache.entry(n).or_insert_with(|| Arc::new(compute_legendre(n))).clone()
}

/// Gauss–Hermite rule for E[h(Z)], Z ~ N(0, 1), with `n` nodes.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    assert!((1..=HERMITE_MAX_ORDER).contains(&n), "Hermite order out of range");
    let mut cache = hermite_cache().lock().expect("quadrature cache poisoned");
    cache.entry(n).or_insert_with(|| Arc::new(compute_hermite(n))).clone()
}

fn compute_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_hermite(n: usize) -> Rule {
    // Physicists' rule for weight exp(-x^2) via orthonormal recurrence,
    // then rescaled to the standard normal.
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let sqrt_pi = PI.sqrt();
    let nodes = x.iter().rev().map(|v| v * 2f64.sqrt()).collect();
    let weights = w.iter().rev().map(|v| v / sqrt_pi).collect();
    Rule { nodes, weights }
}

/// Integrates `h` over `[a, b]` with an `n`-point Gauss–Legendre rule.
pub fn legendre_integrate<H: Fn(f64) -> f64>(h: &H, a: f64, b: f64, n: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let rule = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * h(mid + half * x);
    }
    acc * half
}

/// E[h(Z)] for Z ~ N(0, 1) with an `n`-point Gauss–Hermite rule.
pub fn hermite_expectation<H: Fn(f64) -> f64>(h: &H, n: usize) -> f64 {
    let rule = gauss_hermite(n);
    rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * h(*z)).sum()
}

/// Runs `estimate(order)` for orders 32, 64, ... up to `cap` and returns the
/// first estimate whose change from the previous one is below
/// [`CONVERGENCE_TOL`]`* max(1, |I|)`.
pub fn doubling<E: FnMut(usize) -> f64>(mut estimate: E, cap: usize) -> Result<f64> {
    let cap = cap.max(1);
    let mut order = START_ORDER.min(cap);
    let mut prev = estimate(order);
    loop {
        if order >= cap {
            return Err(Error::QuadratureNonConvergence { cap, previous: prev, last: prev });
        }
        order = (order * 2).min(cap);
        let next = estimate(order);
        if (next - prev).abs() < CONVERGENCE_TOL * next.abs().max(1.0) {
            return Ok(next);
        }
        if order >= cap {
            return Err(Error::QuadratureNonConvergence { cap, previous: prev, last: next });
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 32, 33] {
            let rule = gauss_legendre(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} weight sum {s}");
        }
        let v = legendre_integrate(&|x: f64| x.powi(6), -1.0, 1.0, 4);
        assert!((v - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_large_order_is_accurate() {
        let v = legendre_integrate(&|x: f64| x.cos(), 0.0, 1.0, 4096);
        assert!((v - 1f64.sin()).abs() < 1e-13);
        let rule = gauss_legendre(4096);
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn hermite_moments_of_standard_normal() {
        for n in [32usize, 64, 128] {
            let m2 = hermite_expectation(&|z: f64| z * z, n);
            let m4 = hermite_expectation(&|z: f64| z.powi(4), n);
            let m0 = hermite_expectation(&|_| 1.0, n);
            assert!((m0 - 1.0).abs() < 1e-13, "n={n} m0={m0}");
            assert!((m2 - 1.0).abs() < 1e-12, "n={n} m2={m2}");
            assert!((m4 - 3.0).abs() < 1e-11, "n={n} m4={m4}");
        }
    }

    #[test]
    fn doubling_reports_both_estimates_at_cap() {
        let err = doubling(|n| 1.0 / n as f64, 2).unwrap_err();
        match err {
            Error::QuadratureNonConvergence { cap, .. } => assert_eq!(cap, 2),
            other => panic!("unexpected {other:?}"),
        }
        let ok = doubling(|_| 3.0, 4096).unwrap();
        assert_eq!(ok, 3.0);
    }
}
