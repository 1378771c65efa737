//! Junction Hamiltonian `H0(p) = min_{alpha in A0} { sum alpha_i p_i + h0(alpha) }`
//! over the floored simplex `A0 = { alpha in [a, 1]^I : sum alpha = 1 }`.
//!
//! Linear mode (`h0 = 0`) puts all free mass on the smallest gradient. Quadratic
//! mode (`h0 = 1/2 sum w_i alpha_i^2`) is solved through its clipped KKT system:
//! `alpha_i(mu) = clip((mu - p_i) / w_i, a, 1)` with `mu` bisected so the weights
//! sum to one.

use std::ops::Deref;

use crate::error::{Error, Result};

/// A point of `A0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Checks membership in `A0` (sum within `1e-12`, floor within round-off).
    pub fn new(alpha: Vec<f64>, floor: f64) -> Result<Self> {
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProblem(format!("weights sum to {sum}, not 1")));
        }
        if let Some(a) = alpha.iter().find(|&&a| a < floor - 1e-15 || a > 1.0 + 1e-15) {
            return Err(Error::InvalidProblem(format!("weight {a} outside [{floor}, 1]")));
        }
        Ok(Self(alpha))
    }

    /// The vertex of `A0` that puts the free mass on `edge`.
    pub fn vertex(edges: usize, floor: f64, edge: usize) -> Self {
        let mut alpha = vec![floor; edges];
        alpha[edge] = 1.0 - (edges - 1) as f64 * floor;
        Self(alpha)
    }

    pub fn uniform(edges: usize) -> Self {
        Self(vec![1.0 / edges as f64; edges])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for SimplexWeights {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionEval {
    pub value: f64,
    pub argmin: SimplexWeights,
}

fn check_floor(edges: usize, floor: f64) -> Result<()> {
    if edges == 0 {
        return Err(Error::InvalidProblem("no gradients given".into()));
    }
    if !(floor >= 0.0) || edges as f64 * floor > 1.0 {
        return Err(Error::EmptyControlSet { edges, floor });
    }
    Ok(())
}

/// Linear mode. Ties go to the lowest edge index.
pub fn solve_linear(p: &[f64], floor: f64) -> Result<JunctionEval> {
    check_floor(p.len(), floor)?;
    let best = p
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v < p[best] { i } else { best });
    let alpha = SimplexWeights::vertex(p.len(), floor, best);
    let value = dot(&alpha, p);
    Ok(JunctionEval { value, argmin: alpha })
}

/// Quadratic-mode solution together with the multiplier of `sum alpha = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSolution {
    pub eval: JunctionEval,
    pub multiplier: f64,
}

const SUM_TOL: f64 = 1e-12;

fn clipped_weights(mu: f64, p: &[f64], weights: &[f64], floor: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for ((a, &pi), &wi) in out.iter_mut().zip(p).zip(weights) {
        *a = ((mu - pi) / wi).clamp(floor, 1.0);
        sum += *a;
    }
    sum
}

/// Quadratic mode with weights `w_i = sigma_i(0)^2`.
pub fn solve_quadratic_kkt(p: &[f64], weights: &[f64], floor: f64) -> Result<QuadraticSolution> {
    let n = p.len();
    check_floor(n, floor)?;
    if weights.len() != n {
        return Err(Error::InvalidProblem(format!("{} gradients but {} weights", n, weights.len())));
    }
    if let Some(w) = weights.iter().find(|&&w| !(w > 0.0)) {
        return Err(Error::InvalidProblem(format!("quadratic weight {w} must be positive")));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "junction gradients".into() });
    }

    let fold = |init: f64, f: fn(f64, f64) -> f64, xs: &[f64]| xs.iter().copied().fold(init, f);
    let (p_min, p_max) = (fold(f64::INFINITY, f64::min, p), fold(f64::NEG_INFINITY, f64::max, p));
    let (w_min, w_max) = (fold(f64::INFINITY, f64::min, weights), fold(f64::NEG_INFINITY, f64::max, weights));

    let mut alpha = vec![0.0; n];
    let mut lo = p_min + floor * w_min;
    let mut hi = p_max + w_max;
    // The bracket is valid by construction; widening only guards round-off.
    let mut width = (hi - lo).abs().max(1.0);
    while clipped_weights(lo, p, weights, floor, &mut alpha) > 1.0 {
        lo -= width;
        width *= 2.0;
    }
    while clipped_weights(hi, p, weights, floor, &mut alpha) < 1.0 {
        hi += width;
        width *= 2.0;
    }

    let mut mu = 0.5 * (lo + hi);
    for _ in 0..200 {
        mu = 0.5 * (lo + hi);
        let sum = clipped_weights(mu, p, weights, floor, &mut alpha);
        if (sum - 1.0).abs() <= SUM_TOL * 0.1 || mu == lo || mu == hi {
            break;
        }
        if sum < 1.0 {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    let sum = clipped_weights(mu, p, weights, floor, &mut alpha);

    // Put the bisection residual on the coordinate with the most room.
    let defect = 1.0 - sum;
    if defect != 0.0 {
        let slot = (0..n)
            .max_by(|&i, &j| {
                let room = |k: usize| (alpha[k] - floor).min(1.0 - alpha[k]);
                room(i).total_cmp(&room(j))
            })
            .expect("nonempty");
        alpha[slot] = (alpha[slot] + defect).clamp(floor, 1.0);
    }

    let value = dot(&alpha, p) + 0.5 * alpha.iter().zip(weights).map(|(a, w)| w * a * a).sum::<f64>();
    Ok(QuadraticSolution { eval: JunctionEval { value, argmin: SimplexWeights(alpha) }, multiplier: mu })
}

pub fn solve_quadratic(p: &[f64], weights: &[f64], floor: f64) -> Result<JunctionEval> {
    solve_quadratic_kkt(p, weights, floor).map(|s| s.eval)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The junction Hamiltonian of a problem instance.
#[derive(Debug, Clone, PartialEq)]
pub enum JunctionHamiltonian {
    Linear { floor: f64 },
    Quadratic { floor: f64, weights: Vec<f64> },
}

impl JunctionHamiltonian {
    pub fn floor(&self) -> f64 {
        match self {
            JunctionHamiltonian::Linear { floor } | JunctionHamiltonian::Quadratic { floor, .. } => *floor,
        }
    }

    pub fn solve(&self, p: &[f64]) -> Result<JunctionEval> {
        match self {
            JunctionHamiltonian::Linear { floor } => solve_linear(p, *floor),
            JunctionHamiltonian::Quadratic { floor, weights } => solve_quadratic(p, weights, *floor),
        }
    }

    /// `h0(alpha)`.
    pub fn cost(&self, alpha: &[f64]) -> f64 {
        match self {
            JunctionHamiltonian::Linear { .. } => 0.0,
            JunctionHamiltonian::Quadratic { weights, .. } => {
                0.5 * alpha.iter().zip(weights).map(|(a, w)| w * a * a).sum::<f64>()
            }
        }
    }
}

/// `H0(p) <= H0(q)` for componentwise `p <= q`.
pub fn h0_monotonicity_probe(p: &[f64], q: &[f64], hamiltonian: &JunctionHamiltonian) -> Result<bool> {
    debug_assert!(p.iter().zip(q).all(|(a, b)| a <= b), "probe requires p <= q");
    Ok(hamiltonian.solve(p)?.value <= hamiltonian.solve(q)?.value)
}
