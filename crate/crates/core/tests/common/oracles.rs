//! Independent reference computations used by the test suites.
//!
//! Nothing in here calls into the library; every routine recomputes its
//! target from first principles.

#![allow(dead_code, clippy::needless_range_loop)]

/// `E|W_1|` for a standard Brownian motion, equal to the mean local time at
/// zero of reflected Brownian motion started at zero over unit time.
pub fn folded_normal_mean() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

fn junction_objective(alpha: &[f64], p: &[f64], w: &[f64]) -> f64 {
    alpha.iter().zip(p).zip(w).map(|((a, pi), wi)| a * pi + 0.5 * wi * a * a).sum()
}

fn grid_layout(n: usize, floor: f64, step: f64) -> (usize, f64) {
    let free = 1.0 - n as f64 * floor;
    let units = (free / step).round().max(0.0) as usize;
    let h = if units == 0 { 0.0 } else { free / units as f64 };
    (units, h)
}

/// Exact minimum of `sum alpha_i p_i + 1/2 sum w_i alpha_i^2` over the grid
/// `alpha_i = floor + n_i h`, `sum n_i h = 1 - I floor`, `h ~ step`.
///
/// The objective is separable and convex in each coordinate, so allocating
/// grid units one at a time to the cheapest marginal increment reaches the
/// grid optimum. Zero weights give the linear objective.
pub fn greedy_grid_minimum(p: &[f64], w: &[f64], floor: f64, step: f64) -> (f64, Vec<f64>) {
    let n = p.len();
    let (units, h) = grid_layout(n, floor, step);
    let mut counts = vec![0usize; n];
    let coord = |c: usize| floor + c as f64 * h;
    let cost = |i: usize, a: f64| a * p[i] + 0.5 * w[i] * a * a;
    for _ in 0..units {
        let mut best = usize::MAX;
        let mut best_gain = f64::INFINITY;
        for i in 0..n {
            let a = coord(counts[i]);
            let next = coord(counts[i] + 1);
            if next > 1.0 + 1e-12 {
                continue;
            }
            let gain = cost(i, next) - cost(i, a);
            if gain < best_gain {
                best_gain = gain;
                best = i;
            }
        }
        counts[best] += 1;
    }
    let alpha: Vec<f64> = counts.iter().map(|&c| coord(c)).collect();
    (junction_objective(&alpha, p, w), alpha)
}

/// Plain exhaustive enumeration of the same grid, for small `I` and coarse steps.
pub fn brute_force_grid_minimum(p: &[f64], w: &[f64], floor: f64, step: f64) -> f64 {
    let n = p.len();
    let (units, h) = grid_layout(n, floor, step);
    let mut best = f64::INFINITY;
    let mut counts = vec![0usize; n];
    fn recurse(
        i: usize,
        left: usize,
        counts: &mut Vec<usize>,
        eval: &dyn Fn(&[usize]) -> f64,
        best: &mut f64,
    ) {
        if i + 1 == counts.len() {
            counts[i] = left;
            *best = best.min(eval(counts));
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            recurse(i + 1, left - c, counts, eval, best);
        }
    }
    let eval = |c: &[usize]| {
        let alpha: Vec<f64> = c.iter().map(|&k| floor + k as f64 * h).collect();
        if alpha.iter().any(|&a| a > 1.0 + 1e-12) {
            f64::INFINITY
        } else {
            junction_objective(&alpha, p, w)
        }
    };
    recurse(0, units, &mut counts, &eval, &mut best);
    best
}

/// `min_k { k s p + theta k^2 + gamma s + lambda k + rho }` over `steps` points of `[-kappa, kappa]`.
pub fn sin_quadratic_grid_min(
    (theta, gamma, lambda, rho, kappa): (f64, f64, f64, f64, f64),
    x: f64,
    p: f64,
    steps: usize,
) -> (f64, f64) {
    let s = x.sin();
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..steps {
        let k = -kappa + 2.0 * kappa * j as f64 / (steps - 1) as f64;
        let v = k * s * p + theta * k * k + gamma * s + lambda * k + rho;
        if v < best.0 {
            best = (v, k);
        }
    }
    best
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// `P(|Z| <= a)` for a standard normal `Z`.
pub fn normal_two_sided(a: f64) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    2.0 * simpson(phi, 0.0, a, 400)
}

/// `E[(1 / 2 eps) int_0^T 1{|W_s| <= eps} ds]` for Brownian motion from zero:
/// the exact mean of the band local-time estimator on reflected Brownian motion.
/// Substituting `s = T v^2` removes the endpoint singularity.
pub fn reflected_band_mean(eps: f64, horizon: f64) -> f64 {
    let integrand = |v: f64| {
        if v == 0.0 {
            0.0
        } else {
            2.0 * v * horizon * normal_two_sided(eps / (v * horizon.sqrt()))
        }
    };
    simpson(integrand, 0.0, 1.0, 2000) / (2.0 * eps)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[cfg(test)]
mod self_check {
    use super::*;

    #[test]
    fn greedy_agrees_with_brute_force() {
        let cases: &[(&[f64], &[f64], f64)] = &[
            (&[0.3, -1.2, 0.8], &[1.0, 2.5, 0.4], 0.1),
            (&[2.0, 2.0], &[1.0, 4.0], 0.05),
            (&[-3.0, 1.0, 0.0], &[0.0, 0.0, 0.0], 0.2),
            (&[1.0, -0.5, 0.2, 0.7], &[3.0, 0.3, 1.0, 2.0], 0.1),
        ];
        for &(p, w, floor) in cases {
            let (g, alpha) = greedy_grid_minimum(p, w, floor, 0.01);
            let b = brute_force_grid_minimum(p, w, floor, 0.01);
            assert!((g - b).abs() < 1e-12, "{g} vs {b}");
            assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn band_mean_tends_to_the_local_time_mean() {
        assert!((normal_two_sided(1.959963984540054) - 0.95).abs() < 1e-9);
        // E l(1) = sqrt(2 / pi), approached from below at rate eps / 2
        let l = folded_normal_mean();
        for eps in [1e-2, 1e-3] {
            let gap = l - reflected_band_mean(eps, 1.0);
            assert!((gap / eps - 0.5).abs() < 0.02, "eps {eps}: gap {gap}");
        }
    }
}
