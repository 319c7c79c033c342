//! Small scalar numerics shared by the rest of the crate: compensated
//! summation, bracketing and Newton root finders, golden-section search and
//! least-squares line fits.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
    count: u64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.count += 1;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Mean of the added values; `NaN` when empty.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.value() / self.count as f64
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `n` uniformly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Sample mean and standard error (sample std / sqrt(n)).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStderr {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        if n == 1 {
            return Self { mean, stderr: 0.0, n };
        }
        let ss: CompensatedSum = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = ss.value() / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }
}

/// Bisection on a bracket with `f(a)` and `f(b)` of opposite sign (or zero).
/// Stops when the bracket is narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    // 200 halvings exhaust any f64 bracket
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Some(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Outcome of a Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub root: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Plain Newton iteration on `f` with derivative `df`. Convergence is declared
/// when the step falls below `tol` (absolute).
pub fn newton<F, D>(f: F, df: D, x0: f64, tol: f64, max_iter: usize) -> NewtonOutcome
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0;
    for i in 0..max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return NewtonOutcome { root: x, iterations: i, converged: true };
        }
        let d = df(x);
        if d == 0.0 || !d.is_finite() || !fx.is_finite() {
            return NewtonOutcome { root: x, iterations: i, converged: false };
        }
        let step = fx / d;
        x -= step;
        if step.abs() <= tol {
            return NewtonOutcome { root: x, iterations: i + 1, converged: true };
        }
    }
    NewtonOutcome { root: x, iterations: max_iter, converged: false }
}

/// Golden-section search for the maximum of a unimodal `h` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max<H: Fn(f64) -> f64>(h: H, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut hc = h(c);
    let mut hd = h(d);
    while (b - a).abs() > tol {
        if hc > hd {
            b = d;
            d = c;
            hd = hc;
            c = b - inv_phi * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + inv_phi * (b - a);
            hd = h(d);
        }
    }
    let x = 0.5 * (a + b);
    let hx = h(x);
    [(x, hx), (c, hc), (d, hd)]
        .into_iter()
        .fold((x, hx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero for two points or exact fits).
    pub slope_se: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let e = y - intercept - slope * x;
                e * e
            })
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit { slope, intercept, slope_se })
}

/// Log-log slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.iter().chain(ys).any(|v| *v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn newton_converges_quadratically() {
        let out = newton(|x| x * x - 2.0, |x| 2.0 * x, 1.0, 1e-14, 50);
        assert!(out.converged);
        assert!(out.iterations < 10);
        assert!((out.root - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, h) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 1.0, 1e-10);
        // the maximum is flat to second order, so x is only good to ~sqrt(eps)
        assert!((x - 0.3).abs() < 1e-7);
        assert!((h - 2.0).abs() < 1e-15);
    }

    #[test]
    fn line_fit_exact() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!(fit.slope_se < 1e-12);
    }

    #[test]
    fn mean_stderr_matches_hand_computation() {
        let m = MeanStderr::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        // sample var = 5/3
        assert!((m.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn linspace_endpoints_exact() {
        let g = linspace(-2.0, 2.0, 10_000);
        assert_eq!(g.len(), 10_000);
        assert_eq!(g[0], -2.0);
        assert_eq!(g[9_999], 2.0);
    }
}
